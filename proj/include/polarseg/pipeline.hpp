#pragma once

// End-to-end wiring: the per-image segmentation chain (polar transform ->
// network -> inverse transform -> threshold -> largest component -> ellipse
// fit -> CDR/RDAR) and the command drivers behind the CLI subcommands. The
// drivers write deterministic files; wall-clock timings go to the console
// only.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polarseg/config.hpp"
#include "polarseg/evaluation.hpp"
#include "polarseg/pipeline_records.hpp"
#include "polarseg/postprocess.hpp"

namespace polarseg {

// Brightness heuristic standing in for an external disc detector: centroid of
// the top-2% brightest pixels after a 5x5 box blur. Not the localization
// method the clinical pipeline was built around; supply real centers when
// available.
std::pair<double, double> estimate_disc_center(const Image& img);

struct SegmentationResult {
    SegmentationRecord record;
    Mask disc_mask;  // rasterized fitted ellipse
    Mask cup_mask;
    Mask disc_raw;   // post threshold + largest component, pre-ellipse
    Mask cup_raw;
};

SegmentationResult segment_image(const MNet& net, const Image& image, const RunConfig& rc,
                                 double center_u, double center_v);

struct ManifestRow {
    std::string image;      // resolved path
    std::string disc_mask;
    std::string cup_mask;
    double center_u = 0.0;
    double center_v = 0.0;
    double cdr = 0.0;
    int label = 0;
    std::string stem;
};

std::vector<ManifestRow> read_manifest(const std::string& path);

struct SynthArgs {
    std::string out_dir;
    RunConfig rc;
};
int cmd_synth(const SynthArgs& args);

struct PolarArgs {
    std::string image_path;
    std::string out_dir;
    RunConfig rc;
    std::optional<std::pair<double, double>> center;
};
int cmd_polar(const PolarArgs& args);

struct TrainArgs {
    std::string manifest_path;
    std::string out_dir;
    RunConfig rc;
};
int cmd_train(const TrainArgs& args);

struct SegmentArgs {
    std::string image_path;     // single image mode
    std::string manifest_path;  // batch mode (mutually exclusive with image_path)
    std::string weights_prefix;
    std::string out_dir;
    RunConfig rc;
    std::optional<std::pair<double, double>> center;
};
int cmd_segment(const SegmentArgs& args);

struct EvalArgs {
    std::string pred_dir;
    std::string manifest_path;
    std::string out_csv;
    bool use_raw_masks = false;  // region metrics from pre-ellipse masks
};
int cmd_eval(const EvalArgs& args);

struct ScreenArgs {
    std::string eval_csv;
    std::string manifest_path;
    std::string out_csv;
    std::string score = "cdr";  // or "rdar" (negated: less rim, higher risk)
};
int cmd_screen(const ScreenArgs& args);

}  // namespace polarseg

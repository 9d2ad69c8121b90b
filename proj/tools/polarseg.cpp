// polarseg: joint optic disc/cup segmentation pipeline.
// Subcommands: synth, polar, train, segment, eval, screen.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polarseg/pipeline.hpp"

namespace {

using polarseg::RunConfig;

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;  // -D key=value overrides
    std::optional<unsigned> seed;
    std::optional<int> size;
    std::optional<double> radius;
    std::optional<int> bins;
    std::optional<double> threshold;
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--config", o.config_file, "key=value config file");
    app->add_option("-D,--set", o.sets, "config override, key=value (repeatable)");
    app->add_option("--seed", o.seed, "synthesis and training seed");
    app->add_option("--size", o.size, "model input / synthetic image size");
    app->add_option("--radius", o.radius, "polar transformation radius (pixels)");
    app->add_option("--bins", o.bins, "polar angular and radial bin count");
    app->add_option("--threshold", o.threshold, "probability threshold for masks");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig rc = polarseg::default_run_config();
    if (!o.config_file.empty()) rc = polarseg::load_config_file(o.config_file, rc);
    for (const std::string& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        polarseg::set_config_key(rc, kv.substr(0, eq), kv.substr(eq + 1));
    }
    // flag overrides beat the config file
    if (o.seed) {
        rc.train.seed = *o.seed;
        rc.synth.seed = *o.seed;
    }
    if (o.size) {
        rc.model.input_size = *o.size;
        rc.synth.size = *o.size;
    }
    if (o.radius) rc.polar_radius = *o.radius;
    if (o.bins) {
        rc.polar_angular_bins = *o.bins;
        rc.polar_radial_bins = *o.bins;
    }
    if (o.threshold) rc.threshold = static_cast<float>(*o.threshold);
    return rc;
}

std::optional<std::pair<double, double>> parse_center(const std::vector<double>& center) {
    if (center.empty()) return std::nullopt;
    if (center.size() != 2)
        throw std::invalid_argument("--center expects two values: u v");
    return std::make_pair(center[0], center[1]);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint optic disc/cup segmentation with polar transformation"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string out_dir = "out";
    std::string image_path, manifest_path, weights, pred_dir, eval_csv, out_csv, score = "cdr";
    std::vector<double> center;
    int count = -1;
    bool raw_masks = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    add_common(synth, common);
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--count", count, "number of samples");

    auto* polar = app.add_subcommand("polar", "polar-transform one image");
    add_common(polar, common);
    polar->add_option("--image", image_path, "input PNG")->required();
    polar->add_option("--out", out_dir, "output directory");
    polar->add_option("--center", center, "disc center as: u v")->expected(2);

    auto* train = app.add_subcommand("train", "train the network on a manifest");
    add_common(train, common);
    train->add_option("--data", manifest_path, "manifest.csv from synth")->required();
    train->add_option("--out", out_dir, "output directory");

    auto* segment = app.add_subcommand("segment", "segment an image or a manifest");
    add_common(segment, common);
    segment->add_option("--image", image_path, "input PNG");
    segment->add_option("--manifest", manifest_path, "manifest.csv (batch mode)");
    segment->add_option("--weights", weights, "checkpoint prefix or .weights.bin path")
        ->required();
    segment->add_option("--out", out_dir, "output directory");
    segment->add_option("--center", center, "disc center as: u v")->expected(2);

    auto* eval = app.add_subcommand("eval", "compare predictions against ground truth");
    eval->add_option("--pred", pred_dir, "directory written by segment")->required();
    eval->add_option("--truth", manifest_path, "ground-truth manifest.csv")->required();
    eval->add_option("--out", eval_csv, "output CSV path")->required();
    eval->add_flag("--raw-masks", raw_masks, "score pre-ellipse masks instead of fits");

    auto* screen = app.add_subcommand("screen", "ROC/AUC screening from an eval CSV");
    screen->add_option("--eval", eval_csv, "eval CSV")->required();
    screen->add_option("--truth", manifest_path, "manifest.csv with labels")->required();
    screen->add_option("--out", out_csv, "ROC points CSV path")->required();
    screen->add_option("--score", score, "screening measure: cdr or rdar");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            polarseg::SynthArgs a;
            a.out_dir = out_dir;
            a.rc = resolve_config(common);
            if (count >= 0) a.rc.synth_count = count;
            return polarseg::cmd_synth(a);
        }
        if (polar->parsed()) {
            polarseg::PolarArgs a;
            a.image_path = image_path;
            a.out_dir = out_dir;
            a.rc = resolve_config(common);
            a.center = parse_center(center);
            return polarseg::cmd_polar(a);
        }
        if (train->parsed()) {
            polarseg::TrainArgs a;
            a.manifest_path = manifest_path;
            a.out_dir = out_dir;
            a.rc = resolve_config(common);
            return polarseg::cmd_train(a);
        }
        if (segment->parsed()) {
            polarseg::SegmentArgs a;
            a.image_path = image_path;
            a.manifest_path = manifest_path;
            std::string w = weights;
            if (w.size() > 12 && w.substr(w.size() - 12) == ".weights.bin")
                w = w.substr(0, w.size() - 12);
            a.weights_prefix = w;
            a.out_dir = out_dir;
            a.rc = resolve_config(common);
            a.center = parse_center(center);
            return polarseg::cmd_segment(a);
        }
        if (eval->parsed()) {
            polarseg::EvalArgs a;
            a.pred_dir = pred_dir;
            a.manifest_path = manifest_path;
            a.out_csv = eval_csv;
            a.use_raw_masks = raw_masks;
            return polarseg::cmd_eval(a);
        }
        if (screen->parsed()) {
            polarseg::ScreenArgs a;
            a.eval_csv = eval_csv;
            a.manifest_path = manifest_path;
            a.out_csv = out_csv;
            a.score = score;
            return polarseg::cmd_screen(a);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

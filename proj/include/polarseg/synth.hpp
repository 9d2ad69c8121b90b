#pragma once

// Deterministic generator of fundus-like images with exact disc/cup ellipse
// ground truth: bright disc, brighter cup, low-frequency background texture,
// dark vessel-like strokes and Gaussian noise. CDR follows in closed form
// from the generating ellipses.

#include <cstdint>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/postprocess.hpp"

namespace polarseg {

struct SynthSpec {
    int size = 128;
    double disc_a_min = 22.0;     // disc semi-major range, pixels
    double disc_a_max = 32.0;
    double axis_ratio_min = 0.75; // semi-minor / semi-major lower bound
    double cdr_min = 0.3;         // cup-to-disc vertical ratio range
    double cdr_max = 0.9;
    double center_jitter = 5.0;   // disc center offset from the image center
    double cup_offset_max = 1.5;  // cup center offset from the disc center
    double bg_level = 0.35;
    double disc_level = 0.7;
    double cup_level = 0.9;
    double noise_sigma = 0.03;
    int vessel_min = 2;
    int vessel_max = 5;
    std::uint64_t seed = 1;
};

struct SynthSample {
    Image image;  // 3 channels
    Mask disc;
    Mask cup;
    double center_u = 0.0;  // disc ellipse center
    double center_v = 0.0;
    double cdr = 0.0;       // vertical_diameter(cup) / vertical_diameter(disc)
    EllipseParams disc_ellipse;
    EllipseParams cup_ellipse;
};

// n reproducible samples; every cup is strictly inside its disc. Throws when
// the requested ranges cannot produce a valid geometry.
std::vector<SynthSample> generate(const SynthSpec& spec, int n);

struct ScreeningSet {
    std::vector<SynthSample> samples;
    std::vector<int> labels;  // 1 when cdr > cutoff
    double positive_fraction = 0.0;
};

// margin > 0 keeps every drawn CDR at least that far from the cutoff.
ScreeningSet labeled_screening_set(const SynthSpec& spec, int n, double cdr_cutoff,
                                   double margin = 0.0);

}  // namespace polarseg

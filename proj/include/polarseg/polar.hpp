#pragma once

// Pixel-wise mapping between the Cartesian fundus ROI and its polar
// representation around the disc center, plus the inverse recovery used after
// segmentation. Row i of a polar image is radius r_i = i * R / radial_bins,
// column j is angle theta_j = 2*pi*j / angular_bins measured from +u
// counter-clockwise (u = column offset, v = row offset from the center).

#include <string>

#include "polarseg/image.hpp"

namespace polarseg {

struct PolarConfig {
    double center_u = 0.0;  // column of the expansion center, pixels
    double center_v = 0.0;  // row of the expansion center, pixels
    double radius = 400.0;
    int angular_bins = 400;
    int radial_bins = 400;

    // center must lie inside the source bounds, radius positive, bins >= 4
    void validate(int src_height, int src_width) const;
};

// Intensity images resample bilinearly; samples outside the source read 0.
Image to_polar(const Image& src, const PolarConfig& cfg);
// Mask variant uses nearest-neighbor so output stays binary.
Mask to_polar_mask(const Mask& src, const PolarConfig& cfg);

// Cartesian pixels within the transformation radius sample the polar image
// bilinearly (circular in the angular axis); pixels beyond the radius are 0.
Image to_cartesian(const Image& polar, const PolarConfig& cfg, int out_height, int out_width);
Mask to_cartesian_mask(const Mask& polar, const PolarConfig& cfg, int out_height, int out_width);

// Foreground fraction of a binary mask.
double region_proportion(const Mask& mask);

// to_polar with the center shifted by (du, dv) and the radius scaled by s;
// equivalent to augmenting the source image itself.
Image augment_polar(const Image& src, const PolarConfig& cfg, double du, double dv, double s);

// Sidecar text format recording the exact transform parameters, needed to
// invert a polar image written to disk.
void write_polar_sidecar(const std::string& path, const PolarConfig& cfg, int src_height,
                         int src_width);
PolarConfig read_polar_sidecar(const std::string& path, int* src_height = nullptr,
                               int* src_width = nullptr);

}  // namespace polarseg

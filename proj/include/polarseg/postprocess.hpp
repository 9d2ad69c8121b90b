#pragma once

// From fused probability maps to clinical geometry: thresholding, largest
// connected component, direct least-squares ellipse fitting and the vertical
// diameters that CDR and RDAR derive from.

#include <utility>
#include <vector>

#include "polarseg/image.hpp"

namespace polarseg {

// mask = (prob >= tau); ties count as foreground.
Mask binarize(const Image& prob, int channel, float tau = 0.5f);

// Keeps the single largest 8-connected component (first in scan order on
// ties). Empty input stays empty.
Mask largest_connected_component(const Mask& mask);

// Foreground pixels with at least one background 4-neighbor; pixels on the
// image border count as boundary.
std::vector<std::pair<double, double>> boundary_pixels(const Mask& mask);  // (x, y)

struct EllipseParams {
    double cx = 0.0;
    double cy = 0.0;
    double a = 0.0;   // semi-major
    double b = 0.0;   // semi-minor, a >= b > 0
    double phi = 0.0; // major-axis angle from +x, in [0, pi)
};

// Ellipse-constrained direct least-squares conic fit to a point set.
// Throws on degenerate input (fewer than 6 points, collinear points, or a
// conic that is not an ellipse).
EllipseParams fit_ellipse_points(const std::vector<std::pair<double, double>>& pts);

// Convenience: fit to the boundary pixels of a mask component.
EllipseParams fit_ellipse(const Mask& component);

// Full extent along the image vertical axis: 2*sqrt(a^2 sin^2(phi) + b^2 cos^2(phi)).
double vertical_diameter(const EllipseParams& e);

// CDR = vertical cup diameter / vertical disc diameter.
double compute_cdr(const EllipseParams& disc, const EllipseParams& cup);

// RDAR = |disc \ cup| / |disc| on binary masks.
double compute_rdar(const Mask& disc, const Mask& cup);

Mask rasterize_ellipse(const EllipseParams& e, int height, int width);

}  // namespace polarseg

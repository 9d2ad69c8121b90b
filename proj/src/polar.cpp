#include "polarseg/polar.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

namespace polarseg {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

float bilinear(const float* plane, int h, int w, double x, double y) {
    // zero outside [0, w-1] x [0, h-1]
    if (x < -1.0 || y < -1.0 || x > static_cast<double>(w) || y > static_cast<double>(h))
        return 0.0f;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto tap = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
        return plane[static_cast<std::size_t>(yy) * w + xx];
    };
    const double top = tap(y0, x0) * (1.0 - fx) + tap(y0, x0 + 1) * fx;
    const double bot = tap(y0 + 1, x0) * (1.0 - fx) + tap(y0 + 1, x0 + 1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

std::uint8_t nearest_mask(const Mask& m, double x, double y) {
    const int xi = static_cast<int>(std::lround(x));
    const int yi = static_cast<int>(std::lround(y));
    if (xi < 0 || yi < 0 || xi >= m.width || yi >= m.height) return 0;
    return m.at(yi, xi);
}

}  // namespace

void PolarConfig::validate(int src_height, int src_width) const {
    require(radius > 0.0, "polar: radius must be positive");
    require(angular_bins >= 4, "polar: need at least 4 angular bins");
    require(radial_bins >= 1, "polar: need at least 1 radial bin");
    require(center_u >= 0.0 && center_u <= src_width - 1 && center_v >= 0.0 &&
                center_v <= src_height - 1,
            "polar: center (" + std::to_string(center_u) + "," + std::to_string(center_v) +
                ") lies outside the " + std::to_string(src_width) + "x" +
                std::to_string(src_height) + " image");
}

Image to_polar(const Image& src, const PolarConfig& cfg) {
    cfg.validate(src.height, src.width);
    Image out(src.channels, cfg.radial_bins, cfg.angular_bins);
    std::vector<double> cos_t(cfg.angular_bins), sin_t(cfg.angular_bins);
    for (int j = 0; j < cfg.angular_bins; ++j) {
        const double theta = kTau * j / cfg.angular_bins;
        cos_t[j] = std::cos(theta);
        sin_t[j] = std::sin(theta);
    }
    for (int c = 0; c < src.channels; ++c) {
        const float* plane = src.plane(c);
        for (int i = 0; i < cfg.radial_bins; ++i) {
            const double r = cfg.radius * i / cfg.radial_bins;
            float* row = out.plane(c) + static_cast<std::size_t>(i) * cfg.angular_bins;
            for (int j = 0; j < cfg.angular_bins; ++j)
                row[j] = bilinear(plane, src.height, src.width, cfg.center_u + r * cos_t[j],
                                  cfg.center_v + r * sin_t[j]);
        }
    }
    return out;
}

Mask to_polar_mask(const Mask& src, const PolarConfig& cfg) {
    cfg.validate(src.height, src.width);
    Mask out(cfg.radial_bins, cfg.angular_bins);
    for (int i = 0; i < cfg.radial_bins; ++i) {
        const double r = cfg.radius * i / cfg.radial_bins;
        for (int j = 0; j < cfg.angular_bins; ++j) {
            const double theta = kTau * j / cfg.angular_bins;
            out.at(i, j) =
                nearest_mask(src, cfg.center_u + r * std::cos(theta),
                             cfg.center_v + r * std::sin(theta));
        }
    }
    return out;
}

namespace {

// Fractional polar coordinates of a Cartesian pixel; returns false beyond R.
bool polar_coords(const PolarConfig& cfg, int y, int x, double& ri, double& aj) {
    const double u = x - cfg.center_u;
    const double v = y - cfg.center_v;
    const double r = std::sqrt(u * u + v * v);
    if (r >= cfg.radius) return false;
    double theta = std::atan2(v, u);
    if (theta < 0.0) theta += kTau;
    ri = r * cfg.radial_bins / cfg.radius;
    aj = theta * cfg.angular_bins / kTau;
    return true;
}

}  // namespace

Image to_cartesian(const Image& polar, const PolarConfig& cfg, int out_height, int out_width) {
    require(polar.height == cfg.radial_bins && polar.width == cfg.angular_bins,
            "to_cartesian: polar image " + std::to_string(polar.width) + "x" +
                std::to_string(polar.height) + " does not match config bins");
    Image out(polar.channels, out_height, out_width);
    const int rb = cfg.radial_bins, ab = cfg.angular_bins;
    for (int c = 0; c < polar.channels; ++c) {
        const float* plane = polar.plane(c);
        for (int y = 0; y < out_height; ++y)
            for (int x = 0; x < out_width; ++x) {
                double ri, aj;
                if (!polar_coords(cfg, y, x, ri, aj)) continue;
                // radial clamp, angular wrap-around
                const int i0 = std::min(static_cast<int>(ri), rb - 1);
                const int i1 = std::min(i0 + 1, rb - 1);
                const double fi = std::min(ri - i0, 1.0);
                const int j0 = static_cast<int>(aj) % ab;
                const int j1 = (j0 + 1) % ab;
                const double fj = aj - std::floor(aj);
                const double top = plane[static_cast<std::size_t>(i0) * ab + j0] * (1.0 - fj) +
                                   plane[static_cast<std::size_t>(i0) * ab + j1] * fj;
                const double bot = plane[static_cast<std::size_t>(i1) * ab + j0] * (1.0 - fj) +
                                   plane[static_cast<std::size_t>(i1) * ab + j1] * fj;
                out.at(c, y, x) = static_cast<float>(top * (1.0 - fi) + bot * fi);
            }
    }
    return out;
}

Mask to_cartesian_mask(const Mask& polar, const PolarConfig& cfg, int out_height,
                       int out_width) {
    require(polar.height == cfg.radial_bins && polar.width == cfg.angular_bins,
            "to_cartesian_mask: polar mask does not match config bins");
    Mask out(out_height, out_width);
    for (int y = 0; y < out_height; ++y)
        for (int x = 0; x < out_width; ++x) {
            double ri, aj;
            if (!polar_coords(cfg, y, x, ri, aj)) continue;
            const int i = std::min(static_cast<int>(std::lround(ri)), cfg.radial_bins - 1);
            const int j = static_cast<int>(std::lround(aj)) % cfg.angular_bins;
            out.at(y, x) = polar.at(i, j);
        }
    return out;
}

double region_proportion(const Mask& mask) {
    require(!mask.pix.empty(), "region_proportion: empty mask");
    return static_cast<double>(mask.count()) / static_cast<double>(mask.pix.size());
}

Image augment_polar(const Image& src, const PolarConfig& cfg, double du, double dv, double s) {
    require(s > 0.0, "augment_polar: radius scale must be positive");
    PolarConfig shifted = cfg;
    shifted.center_u += du;
    shifted.center_v += dv;
    shifted.radius *= s;
    return to_polar(src, shifted);
}

void write_polar_sidecar(const std::string& path, const PolarConfig& cfg, int src_height,
                         int src_width) {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    out.precision(17);
    out << "center_u=" << cfg.center_u << "\n";
    out << "center_v=" << cfg.center_v << "\n";
    out << "radius=" << cfg.radius << "\n";
    out << "angular_bins=" << cfg.angular_bins << "\n";
    out << "radial_bins=" << cfg.radial_bins << "\n";
    out << "source_height=" << src_height << "\n";
    out << "source_width=" << src_width << "\n";
}

PolarConfig read_polar_sidecar(const std::string& path, int* src_height, int* src_width) {
    std::ifstream in(path);
    require(in.good(), "cannot read " + path);
    PolarConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "center_u") cfg.center_u = std::stod(value);
        else if (key == "center_v") cfg.center_v = std::stod(value);
        else if (key == "radius") cfg.radius = std::stod(value);
        else if (key == "angular_bins") cfg.angular_bins = std::stoi(value);
        else if (key == "radial_bins") cfg.radial_bins = std::stoi(value);
        else if (key == "source_height" && src_height) *src_height = std::stoi(value);
        else if (key == "source_width" && src_width) *src_width = std::stoi(value);
        else if (key != "source_height" && key != "source_width")
            throw std::invalid_argument(path + ": unknown key '" + key + "'");
    }
    return cfg;
}

}  // namespace polarseg

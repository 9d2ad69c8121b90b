#include "polarseg/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polarseg {

Mask binarize(const Image& prob, int channel, float tau) {
    require(channel >= 0 && channel < prob.channels, "binarize: channel out of range");
    Mask out(prob.height, prob.width);
    const float* p = prob.plane(channel);
    for (std::size_t i = 0; i < out.pix.size(); ++i) out.pix[i] = p[i] >= tau ? 1 : 0;
    return out;
}

Mask largest_connected_component(const Mask& mask) {
    const int h = mask.height, w = mask.width;
    Mask out(h, w);
    std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
    std::vector<std::size_t> sizes;
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int idx = y * w + x;
            if (!mask.pix[idx] || label[idx] >= 0) continue;
            const int comp = static_cast<int>(sizes.size());
            std::size_t count = 0;
            stack.push_back(idx);
            label[idx] = comp;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++count;
                const int cy = cur / w, cx = cur % w;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                        const int nidx = ny * w + nx;
                        if (mask.pix[nidx] && label[nidx] < 0) {
                            label[nidx] = comp;
                            stack.push_back(nidx);
                        }
                    }
            }
            sizes.push_back(count);
        }
    }
    if (sizes.empty()) return out;
    const int best = static_cast<int>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t i = 0; i < label.size(); ++i) out.pix[i] = label[i] == best ? 1 : 0;
    return out;
}

std::vector<std::pair<double, double>> boundary_pixels(const Mask& mask) {
    std::vector<std::pair<double, double>> pts;
    const int h = mask.height, w = mask.width;
    auto bg = [&](int y, int x) {
        return y < 0 || x < 0 || y >= h || x >= w || mask.at(y, x) == 0;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            if (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1))
                pts.emplace_back(static_cast<double>(x), static_cast<double>(y));
        }
    return pts;
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            c[i][j] = s;
        }
    return c;
}

Vec3 mat_vec(const Mat3& a, const Vec3& v) {
    Vec3 r{};
    for (int i = 0; i < 3; ++i)
        r[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    return r;
}

double det3(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 inverse3(const Mat3& m, double det) {
    Mat3 inv;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

// Real roots of x^3 + p2 x^2 + p1 x + p0.
std::vector<double> cubic_real_roots(double p2, double p1, double p0) {
    // depressed form t^3 + pt + q with x = t - p2/3
    const double shift = p2 / 3.0;
    const double p = p1 - p2 * p2 / 3.0;
    const double q = 2.0 * p2 * p2 * p2 / 27.0 - p2 * p1 / 3.0 + p0;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    std::vector<double> roots;
    if (disc > 1e-14 * std::max(1.0, q * q)) {
        const double s = std::sqrt(disc);
        const double u = std::cbrt(-q / 2.0 + s);
        const double v = std::cbrt(-q / 2.0 - s);
        roots.push_back(u + v - shift);
    } else if (std::abs(p) < 1e-300) {
        roots.push_back(std::cbrt(-q) - shift);
    } else {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double acos_v = std::acos(arg);
        for (int k = 0; k < 3; ++k)
            roots.push_back(m * std::cos((acos_v - 2.0 * std::numbers::pi * k) / 3.0) - shift);
    }
    // Newton polish against the original cubic
    for (double& r : roots) {
        for (int it = 0; it < 3; ++it) {
            const double f = ((r + p2) * r + p1) * r + p0;
            const double df = (3.0 * r + 2.0 * p2) * r + p1;
            if (std::abs(df) < 1e-300) break;
            r -= f / df;
        }
    }
    return roots;
}

// Best-effort null-space vector of (m - lambda I) via row cross products.
Vec3 eigenvector_for(const Mat3& m, double lambda) {
    Mat3 a = m;
    for (int i = 0; i < 3; ++i) a[i][i] -= lambda;
    auto cross = [](const Vec3& u, const Vec3& v) {
        return Vec3{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0]};
    };
    const Vec3 r0{a[0][0], a[0][1], a[0][2]};
    const Vec3 r1{a[1][0], a[1][1], a[1][2]};
    const Vec3 r2{a[2][0], a[2][1], a[2][2]};
    const std::array<Vec3, 3> cand{cross(r0, r1), cross(r0, r2), cross(r1, r2)};
    Vec3 best{0, 0, 0};
    double best_norm = -1.0;
    for (const Vec3& c : cand) {
        const double n = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        if (n > best_norm) {
            best_norm = n;
            best = c;
        }
    }
    const double n = std::sqrt(best_norm);
    if (n <= 0.0) throw std::runtime_error("fit_ellipse: defective eigensystem");
    return Vec3{best[0] / n, best[1] / n, best[2] / n};
}

EllipseParams conic_to_geometric(double A, double B, double C, double D, double E, double F) {
    const double den = B * B - 4.0 * A * C;
    if (!(den < 0.0)) throw std::runtime_error("fit_ellipse: conic is not an ellipse");
    const double cx = (2.0 * C * D - B * E) / den;
    const double cy = (2.0 * A * E - B * D) / den;
    const double f0 = A * cx * cx + B * cx * cy + C * cy * cy + D * cx + E * cy + F;
    // principal axes of [[A, B/2], [B/2, C]]
    const double half = 0.5 * std::sqrt((A - C) * (A - C) + B * B);
    const double mean = 0.5 * (A + C);
    const double lam_min = mean - half;
    const double lam_max = mean + half;
    const double sa = -f0 / lam_min;  // squared semi-major
    const double sb = -f0 / lam_max;
    if (!(sa > 0.0) || !(sb > 0.0))
        throw std::runtime_error("fit_ellipse: degenerate ellipse parameters");
    EllipseParams e;
    e.cx = cx;
    e.cy = cy;
    e.a = std::sqrt(sa);
    e.b = std::sqrt(sb);
    // eigenvector of lam_min gives the major axis direction
    double vx, vy;
    if (std::abs(B) > 1e-12 * (std::abs(A) + std::abs(C))) {
        vx = B / 2.0;
        vy = lam_min - A;
        if (vx * vx + vy * vy < 1e-30) {
            vx = lam_min - C;
            vy = B / 2.0;
        }
    } else {
        vx = A <= C ? 1.0 : 0.0;
        vy = A <= C ? 0.0 : 1.0;
    }
    e.phi = std::atan2(vy, vx);
    if (e.phi < 0.0) e.phi += std::numbers::pi;
    if (e.phi >= std::numbers::pi) e.phi -= std::numbers::pi;
    return e;
}

}  // namespace

EllipseParams fit_ellipse_points(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 6)
        throw std::runtime_error("fit_ellipse: need at least 6 boundary points, got " +
                                 std::to_string(pts.size()));
    // mean-center for conditioning
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());

    Mat3 s1{}, s2{}, s3{};
    for (const auto& [px, py] : pts) {
        const double x = px - mx, y = py - my;
        const Vec3 d1{x * x, x * y, y * y};
        const Vec3 d2{x, y, 1.0};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                s1[i][j] += d1[i] * d1[j];
                s2[i][j] += d1[i] * d2[j];
                s3[i][j] += d2[i] * d2[j];
            }
    }
    const double d3 = det3(s3);
    if (std::abs(d3) < 1e-9)
        throw std::runtime_error("fit_ellipse: collinear or degenerate boundary points");
    const Mat3 s3inv = inverse3(s3, d3);
    // T = -S3^-1 S2^T
    Mat3 s2t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s2t[i][j] = s2[j][i];
    Mat3 t = mat_mul(s3inv, s2t);
    for (auto& row : t)
        for (double& v : row) v = -v;
    const Mat3 m0 = [&] {
        Mat3 r = mat_mul(s2, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[i][j] += s1[i][j];
        return r;
    }();
    // premultiply by C1^-1 for the constrained eigenproblem
    Mat3 m;
    for (int j = 0; j < 3; ++j) {
        m[0][j] = m0[2][j] / 2.0;
        m[1][j] = -m0[1][j];
        m[2][j] = m0[0][j] / 2.0;
    }
    const double tr = m[0][0] + m[1][1] + m[2][2];
    const double minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] -
                          m[0][2] * m[2][0] + m[1][1] * m[2][2] - m[1][2] * m[2][1];
    const double det = det3(m);
    // char poly: lambda^3 - tr lambda^2 + minors lambda - det
    const auto roots = cubic_real_roots(-tr, minors, -det);

    Vec3 best{};
    double best_score = 0.0;
    for (double lam : roots) {
        Vec3 v;
        try {
            v = eigenvector_for(m, lam);
        } catch (const std::runtime_error&) {
            continue;
        }
        const double score = 4.0 * v[0] * v[2] - v[1] * v[1];
        if (score > best_score) {
            best_score = score;
            best = v;
        }
    }
    if (best_score <= 0.0)
        throw std::runtime_error("fit_ellipse: no ellipse solution for these points");
    const Vec3 a2 = mat_vec(t, best);
    EllipseParams e =
        conic_to_geometric(best[0], best[1], best[2], a2[0], a2[1], a2[2]);
    e.cx += mx;
    e.cy += my;
    return e;
}

EllipseParams fit_ellipse(const Mask& component) {
    return fit_ellipse_points(boundary_pixels(component));
}

double vertical_diameter(const EllipseParams& e) {
    const double s = std::sin(e.phi), c = std::cos(e.phi);
    return 2.0 * std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
}

double compute_cdr(const EllipseParams& disc, const EllipseParams& cup) {
    const double vdd = vertical_diameter(disc);
    require(vdd > 0.0, "compute_cdr: disc vertical diameter is zero");
    return vertical_diameter(cup) / vdd;
}

double compute_rdar(const Mask& disc, const Mask& cup) {
    require(disc.height == cup.height && disc.width == cup.width,
            "compute_rdar: mask dimensions differ");
    std::size_t disc_area = 0, rim_area = 0;
    for (std::size_t i = 0; i < disc.pix.size(); ++i) {
        if (disc.pix[i]) {
            ++disc_area;
            if (!cup.pix[i]) ++rim_area;
        }
    }
    require(disc_area > 0, "compute_rdar: empty disc mask");
    return static_cast<double>(rim_area) / static_cast<double>(disc_area);
}

Mask rasterize_ellipse(const EllipseParams& e, int height, int width) {
    Mask out(height, width);
    const double c = std::cos(e.phi), s = std::sin(e.phi);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x - e.cx, dy = y - e.cy;
            const double xr = (dx * c + dy * s) / e.a;
            const double yr = (-dx * s + dy * c) / e.b;
            out.at(y, x) = xr * xr + yr * yr <= 1.0 ? 1 : 0;
        }
    return out;
}

}  // namespace polarseg

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "polarseg/postprocess.hpp"

using namespace polarseg;

namespace {

// Independent flood-fill enumeration (8-connectivity, recursive frontier).
std::vector<std::size_t> oracle_component_sizes(const Mask& m, std::vector<int>& labels) {
    labels.assign(m.pix.size(), -1);
    std::vector<std::size_t> sizes;
    for (int y0 = 0; y0 < m.height; ++y0)
        for (int x0 = 0; x0 < m.width; ++x0) {
            if (!m.at(y0, x0) || labels[y0 * m.width + x0] >= 0) continue;
            const int id = static_cast<int>(sizes.size());
            std::size_t count = 0;
            std::vector<std::pair<int, int>> frontier{{y0, x0}};
            labels[y0 * m.width + x0] = id;
            while (!frontier.empty()) {
                auto [y, x] = frontier.back();
                frontier.pop_back();
                ++count;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || nx < 0 || ny >= m.height || nx >= m.width) continue;
                        if (!m.at(ny, nx) || labels[ny * m.width + nx] >= 0) continue;
                        labels[ny * m.width + nx] = id;
                        frontier.emplace_back(ny, nx);
                    }
            }
            sizes.push_back(count);
        }
    return sizes;
}

Mask disk_mask(int size, double cx, double cy, double r) {
    Mask m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            m.at(y, x) = std::hypot(x - cx, y - cy) <= r ? 1 : 0;
    return m;
}

EllipseParams make_ellipse(double cx, double cy, double a, double b, double phi) {
    EllipseParams e;
    e.cx = cx;
    e.cy = cy;
    e.a = a;
    e.b = b;
    e.phi = phi;
    return e;
}

double angle_diff_mod_pi(double x, double y) {
    double d = std::fmod(std::abs(x - y), std::numbers::pi);
    return std::min(d, std::numbers::pi - d);
}

}  // namespace

TEST_CASE("binarize threshold conventions") {
    Image half(1, 4, 4, 0.5f);
    CHECK(binarize(half, 0).count() == 16);  // ties are foreground
    Image low(1, 4, 4, 0.49f);
    CHECK(binarize(low, 0).count() == 0);
    CHECK(binarize(low, 0, 0.0f).count() == 16);
}

TEST_CASE("largest component keeps the bigger of two blobs") {
    Mask m(24, 24);
    for (int y = 2; y < 12; ++y)
        for (int x = 2; x < 7; ++x) m.at(y, x) = 1;  // 50 px
    for (int y = 16; y < 21; ++y)
        for (int x = 16; x < 18; ++x) m.at(y, x) = 1;  // 10 px
    const Mask out = largest_connected_component(m);
    CHECK(out.count() == 50);
    CHECK(out.at(3, 3) == 1);
    CHECK(out.at(17, 16) == 0);
}

TEST_CASE("single blob passes through unchanged; empty stays empty") {
    Mask m = disk_mask(32, 16, 16, 8);
    const Mask out = largest_connected_component(m);
    CHECK(out.pix == m.pix);
    Mask empty(16, 16);
    CHECK(largest_connected_component(empty).count() == 0);
}

TEST_CASE("largest component agrees with a flood-fill oracle on random masks") {
    std::mt19937 rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        Mask m(40, 40);
        std::bernoulli_distribution coin(0.35);
        for (auto& v : m.pix) v = coin(rng) ? 1 : 0;
        std::vector<int> labels;
        const auto sizes = oracle_component_sizes(m, labels);
        const Mask out = largest_connected_component(m);
        if (sizes.empty()) {
            CHECK(out.count() == 0);
            continue;
        }
        const std::size_t best = *std::max_element(sizes.begin(), sizes.end());
        CHECK(out.count() == best);
        // the survivor is one oracle component
        int survivor = -1;
        bool consistent = true;
        for (std::size_t i = 0; i < m.pix.size(); ++i) {
            if (!out.pix[i]) continue;
            if (survivor < 0) survivor = labels[i];
            if (labels[i] != survivor) consistent = false;
        }
        CHECK(consistent);
    }
}

TEST_CASE("largest component is idempotent") {
    std::mt19937 rng(6);
    Mask m(30, 30);
    std::bernoulli_distribution coin(0.4);
    for (auto& v : m.pix) v = coin(rng) ? 1 : 0;
    const Mask once = largest_connected_component(m);
    const Mask twice = largest_connected_component(once);
    CHECK(once.pix == twice.pix);
}

TEST_CASE("ellipse fit recovers an axis-aligned rasterization within a pixel") {
    const EllipseParams truth = make_ellipse(60, 55, 40, 25, 0.0);
    const Mask m = rasterize_ellipse(truth, 120, 120);
    const EllipseParams fit = fit_ellipse(m);
    CHECK(std::abs(fit.a - truth.a) < 1.0);
    CHECK(std::abs(fit.b - truth.b) < 1.0);
    CHECK(std::abs(fit.cx - truth.cx) < 1.0);
    CHECK(std::abs(fit.cy - truth.cy) < 1.0);
    CHECK(angle_diff_mod_pi(fit.phi, 0.0) < 0.05);
}

TEST_CASE("ellipse fit recovers a circle") {
    const Mask m = disk_mask(100, 50, 50, 30);
    const EllipseParams fit = fit_ellipse(m);
    CHECK(std::abs(fit.a - 30) < 1.0);
    CHECK(std::abs(fit.b - 30) < 1.0);
    CHECK(std::abs(fit.cx - 50) < 1.0);
    CHECK(std::abs(fit.cy - 50) < 1.0);
    CHECK(fit.phi >= 0.0);
    CHECK(fit.phi < std::numbers::pi);
}

TEST_CASE("rotating the mask rotates the recovered angle (mod pi)") {
    for (double phi : {0.3, 0.9, 1.6, 2.4}) {
        const EllipseParams truth = make_ellipse(64, 64, 34, 18, phi);
        const Mask m = rasterize_ellipse(truth, 128, 128);
        const EllipseParams fit = fit_ellipse(m);
        CHECK(angle_diff_mod_pi(fit.phi, phi) < 0.05);
        CHECK(std::abs(fit.a - truth.a) < 1.0);
        CHECK(std::abs(fit.b - truth.b) < 1.0);
    }
}

TEST_CASE("ellipse fit is translation equivariant") {
    const EllipseParams truth = make_ellipse(40, 42, 22, 14, 0.7);
    const Mask m1 = rasterize_ellipse(truth, 100, 100);
    EllipseParams shifted = truth;
    shifted.cx += 13;
    shifted.cy += 9;
    const Mask m2 = rasterize_ellipse(shifted, 100, 100);
    const EllipseParams f1 = fit_ellipse(m1);
    const EllipseParams f2 = fit_ellipse(m2);
    CHECK(std::abs((f2.cx - f1.cx) - 13.0) < 0.5);
    CHECK(std::abs((f2.cy - f1.cy) - 9.0) < 0.5);
}

TEST_CASE("degenerate boundaries are rejected with a diagnostic") {
    Mask line(20, 20);
    for (int x = 3; x < 17; ++x) line.at(10, x) = 1;
    CHECK_THROWS_AS(fit_ellipse(line), std::runtime_error);

    Mask tiny(10, 10);
    tiny.at(5, 5) = 1;
    CHECK_THROWS_WITH_AS(fit_ellipse(tiny), doctest::Contains("6"), std::runtime_error);
}

TEST_CASE("vertical diameter closed form") {
    // vertical major axis: phi = pi/2 puts the semi-major along y
    CHECK(vertical_diameter(make_ellipse(0, 0, 40, 10, std::numbers::pi / 2)) ==
          doctest::Approx(80.0));
    for (double phi : {0.0, 0.4, 1.1, 2.9})
        CHECK(vertical_diameter(make_ellipse(5, 5, 30, 30, phi)) == doctest::Approx(60.0));
}

TEST_CASE("vertical diameter matches a boundary sampling oracle") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ax(10.0, 50.0), ang(0.0, std::numbers::pi);
    for (int rep = 0; rep < 25; ++rep) {
        double a = ax(rng), b = ax(rng);
        if (b > a) std::swap(a, b);
        const EllipseParams e = make_ellipse(0, 0, a, b, ang(rng));
        double max_y = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double t = 2.0 * std::numbers::pi * i / 10000.0;
            const double y = e.a * std::cos(t) * std::sin(e.phi) +
                             e.b * std::sin(t) * std::cos(e.phi);
            max_y = std::max(max_y, std::abs(y));
        }
        CHECK(std::abs(vertical_diameter(e) - 2.0 * max_y) < 0.1);
    }
}

TEST_CASE("CDR ratios") {
    const EllipseParams disc = make_ellipse(50, 50, 30, 24, 0.2);
    CHECK(compute_cdr(disc, disc) == doctest::Approx(1.0));
    EllipseParams cup = disc;
    cup.a *= 0.5;
    cup.b *= 0.5;
    CHECK(compute_cdr(disc, cup) == doctest::Approx(0.5));
    EllipseParams flat = make_ellipse(0, 0, 0.0, 0.0, 0.0);
    CHECK_THROWS_AS(compute_cdr(flat, cup), std::invalid_argument);
}

TEST_CASE("RDAR from masks") {
    Mask disc(40, 40), cup(40, 40);
    for (int i = 0; i < 100; ++i) disc.pix[i] = 1;
    for (int i = 200; i < 240; ++i) cup.pix[i] = 1;  // disjoint
    CHECK(compute_rdar(disc, cup) == doctest::Approx(1.0));
    CHECK(compute_rdar(disc, disc) == doctest::Approx(0.0));
    Mask cup2(40, 40);
    for (int i = 0; i < 40; ++i) cup2.pix[i] = 1;  // 40 inside the 100
    CHECK(compute_rdar(disc, cup2) == doctest::Approx(0.6));
    Mask empty(40, 40);
    CHECK_THROWS_AS(compute_rdar(empty, cup), std::invalid_argument);
}

TEST_CASE("growing the cup probability never lowers the CDR") {
    const int size = 96;
    Image disc_prob(1, size, size, 0.0f);
    const Mask disc = disk_mask(size, 48, 48, 30);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (disc.at(y, x)) disc_prob.at(0, y, x) = 0.9f;
    double prev_cdr = 0.0;
    for (double r : {8.0, 12.0, 16.0, 20.0, 24.0}) {
        Image cup_prob(1, size, size, 0.0f);
        const Mask cup = disk_mask(size, 48, 48, r);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (cup.at(y, x)) cup_prob.at(0, y, x) = 0.9f;
        const Mask disc_bin = largest_connected_component(binarize(disc_prob, 0));
        const Mask cup_bin = largest_connected_component(binarize(cup_prob, 0));
        const double cdr = compute_cdr(fit_ellipse(disc_bin), fit_ellipse(cup_bin));
        CHECK(cdr >= prev_cdr);
        prev_cdr = cdr;
    }
}

TEST_CASE("boundary pixels sit on the component border") {
    const Mask m = disk_mask(50, 25, 25, 12);
    const auto pts = boundary_pixels(m);
    CHECK(pts.size() >= 6);
    for (const auto& [x, y] : pts) {
        const double d = std::hypot(x - 25.0, y - 25.0);
        CHECK(d > 10.5);
        CHECK(d <= 12.0 + 1e-9);
    }
}

#include "polarseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace polarseg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// normalized squared radius w.r.t. an ellipse (1 on the boundary)
double ellipse_q(const EllipseParams& e, double x, double y) {
    const double c = std::cos(e.phi), s = std::sin(e.phi);
    const double dx = x - e.cx, dy = y - e.cy;
    const double xr = (dx * c + dy * s) / e.a;
    const double yr = (-dx * s + dy * c) / e.b;
    return xr * xr + yr * yr;
}

bool cup_inside_disc(const EllipseParams& disc, const EllipseParams& cup, double margin_q) {
    for (int i = 0; i < 64; ++i) {
        const double t = 2.0 * std::numbers::pi * i / 64.0;
        const double c = std::cos(cup.phi), s = std::sin(cup.phi);
        const double px = cup.cx + cup.a * std::cos(t) * c - cup.b * std::sin(t) * s;
        const double py = cup.cy + cup.a * std::cos(t) * s + cup.b * std::sin(t) * c;
        if (ellipse_q(disc, px, py) > margin_q) return false;
    }
    return true;
}

void stamp_disk(Image& geom, double cx, double cy, double radius, float value) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(geom.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(geom.height - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius) geom.at(0, y, x) = value;
        }
}

}  // namespace

std::vector<SynthSample> generate(const SynthSpec& spec, int n) {
    require(n >= 0, "synth: negative sample count");
    require(spec.size >= 32, "synth: image size too small");
    require(spec.cdr_min > 0.0 && spec.cdr_max < 1.0 && spec.cdr_min <= spec.cdr_max,
            "synth: infeasible CDR range, cup cannot fit strictly inside the disc");
    require(spec.disc_a_min > 4.0 && spec.disc_a_min <= spec.disc_a_max,
            "synth: infeasible disc axis range");
    require(spec.axis_ratio_min > 0.0 && spec.axis_ratio_min <= 1.0,
            "synth: axis ratio must be in (0,1]");
    require(spec.disc_a_max + spec.center_jitter < spec.size / 2.0,
            "synth: disc does not fit in the image with the requested jitter");

    std::vector<SynthSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(splitmix64(spec.seed ^ (0xa5a5a5a5ull + 77771ull * i)));
        SynthSample sample;

        EllipseParams disc;
        disc.a = uniform(rng, spec.disc_a_min, spec.disc_a_max);
        disc.b = disc.a * uniform(rng, spec.axis_ratio_min, 1.0);
        disc.phi = uniform(rng, 0.0, std::numbers::pi);
        disc.cx = spec.size / 2.0 + uniform(rng, -spec.center_jitter, spec.center_jitter);
        disc.cy = spec.size / 2.0 + uniform(rng, -spec.center_jitter, spec.center_jitter);

        const double cdr = uniform(rng, spec.cdr_min, spec.cdr_max);
        EllipseParams cup;
        cup.a = disc.a * cdr;
        cup.b = disc.b * cdr;
        cup.phi = disc.phi;
        // offset the cup while keeping it strictly inside; concentric always works
        const double margin_q = 0.96 * 0.96;
        double off = std::min(spec.cup_offset_max, 0.5 * (1.0 - cdr) * disc.b);
        for (int attempt = 0; attempt < 8; ++attempt) {
            const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const double d = uniform(rng, 0.0, off);
            cup.cx = disc.cx + d * std::cos(ang);
            cup.cy = disc.cy + d * std::sin(ang);
            if (cup_inside_disc(disc, cup, margin_q)) break;
            cup.cx = disc.cx;
            cup.cy = disc.cy;
            off *= 0.5;
        }
        require(cup_inside_disc(disc, cup, 1.0),
                "synth: generated cup is not inside the disc");

        sample.disc_ellipse = disc;
        sample.cup_ellipse = cup;
        sample.center_u = disc.cx;
        sample.center_v = disc.cy;
        sample.cdr = vertical_diameter(cup) / vertical_diameter(disc);
        sample.disc = rasterize_ellipse(disc, spec.size, spec.size);
        sample.cup = rasterize_ellipse(cup, spec.size, spec.size);

        // geometry layer -> soft edges -> texture, vessels, noise
        Image geom(1, spec.size, spec.size, static_cast<float>(spec.bg_level));
        for (int y = 0; y < spec.size; ++y)
            for (int x = 0; x < spec.size; ++x) {
                if (sample.cup.at(y, x))
                    geom.at(0, y, x) = static_cast<float>(spec.cup_level);
                else if (sample.disc.at(y, x))
                    geom.at(0, y, x) = static_cast<float>(spec.disc_level);
            }
        geom = gaussian_blur(geom, 1.2);

        // two low-frequency cosine waves as background texture
        const double fx1 = uniform(rng, 0.5, 2.0), fy1 = uniform(rng, 0.5, 2.0);
        const double ph1 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double fx2 = uniform(rng, 1.0, 3.0), fy2 = uniform(rng, 1.0, 3.0);
        const double ph2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int y = 0; y < spec.size; ++y)
            for (int x = 0; x < spec.size; ++x) {
                const double u = static_cast<double>(x) / spec.size;
                const double v = static_cast<double>(y) / spec.size;
                const double tex =
                    0.02 * std::cos(2.0 * std::numbers::pi * (fx1 * u + fy1 * v) + ph1) +
                    0.015 * std::cos(2.0 * std::numbers::pi * (fx2 * u - fy2 * v) + ph2);
                geom.at(0, y, x) += static_cast<float>(tex);
            }

        // vessel-like dark quadratic strokes crossing the frame
        const int vessels =
            spec.vessel_min +
            static_cast<int>(rng() % static_cast<std::uint64_t>(
                                         std::max(1, spec.vessel_max - spec.vessel_min + 1)));
        for (int vtx = 0; vtx < vessels; ++vtx) {
            auto border_point = [&](double t, int side) {
                switch (side) {
                    case 0: return std::pair<double, double>(t * spec.size, 0.0);
                    case 1: return std::pair<double, double>(t * spec.size, spec.size - 1.0);
                    case 2: return std::pair<double, double>(0.0, t * spec.size);
                    default: return std::pair<double, double>(spec.size - 1.0, t * spec.size);
                }
            };
            const int side_a = static_cast<int>(rng() % 4);
            const int side_b = (side_a + 1 + static_cast<int>(rng() % 3)) % 4;
            const auto [ax, ay] = border_point(uniform(rng, 0.1, 0.9), side_a);
            const auto [bx, by] = border_point(uniform(rng, 0.1, 0.9), side_b);
            const double mx = spec.size / 2.0 + uniform(rng, -0.3, 0.3) * spec.size;
            const double my = spec.size / 2.0 + uniform(rng, -0.3, 0.3) * spec.size;
            const double thickness = uniform(rng, 0.7, 1.6);
            const float dark = static_cast<float>(spec.bg_level * uniform(rng, 0.35, 0.6));
            const int steps = 3 * spec.size;
            for (int st = 0; st <= steps; ++st) {
                const double t = static_cast<double>(st) / steps;
                const double omt = 1.0 - t;
                const double px = omt * omt * ax + 2.0 * omt * t * mx + t * t * bx;
                const double py = omt * omt * ay + 2.0 * omt * t * my + t * t * by;
                stamp_disk(geom, px, py, thickness, dark);
            }
        }

        // channel mix + per-channel noise
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        sample.image = Image(3, spec.size, spec.size);
        const double gain[3] = {1.2, 1.0, 0.65};
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < spec.size; ++y)
                for (int x = 0; x < spec.size; ++x) {
                    const double v = gain[c] * geom.at(0, y, x) + noise(rng);
                    sample.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
        out.push_back(std::move(sample));
    }
    return out;
}

ScreeningSet labeled_screening_set(const SynthSpec& spec, int n, double cdr_cutoff,
                                   double margin) {
    require(cdr_cutoff > 0.0 && cdr_cutoff < 1.0, "screening: cutoff must be in (0,1)");
    ScreeningSet set;
    if (margin <= 0.0) {
        set.samples = generate(spec, n);
    } else {
        // stratified draw: force each sample's CDR range to one side of the cutoff
        require(spec.cdr_min <= cdr_cutoff - margin || spec.cdr_max >= cdr_cutoff + margin,
                "screening: margin leaves no feasible CDR values");
        set.samples.reserve(n);
        for (int i = 0; i < n; ++i) {
            std::mt19937_64 coin(splitmix64(spec.seed ^ (0x5eedull + 133ull * i)));
            SynthSpec side = spec;
            side.seed = spec.seed ^ (0xc0ffeeull + 7919ull * i);
            const bool lo_ok = spec.cdr_min <= cdr_cutoff - margin;
            const bool hi_ok = spec.cdr_max >= cdr_cutoff + margin;
            const bool take_hi = hi_ok && (!lo_ok || (coin() & 1));
            if (take_hi) {
                side.cdr_min = std::max(spec.cdr_min, cdr_cutoff + margin);
                side.cdr_max = std::max(side.cdr_min, spec.cdr_max);
            } else {
                side.cdr_max = std::min(spec.cdr_max, cdr_cutoff - margin);
                side.cdr_min = std::min(spec.cdr_min, side.cdr_max);
            }
            set.samples.push_back(std::move(generate(side, 1)[0]));
        }
    }
    int positives = 0;
    set.labels.reserve(set.samples.size());
    for (const SynthSample& s : set.samples) {
        const int label = s.cdr > cdr_cutoff ? 1 : 0;
        positives += label;
        set.labels.push_back(label);
    }
    set.positive_fraction =
        set.samples.empty() ? 0.0 : static_cast<double>(positives) / set.samples.size();
    return set;
}

}  // namespace polarseg

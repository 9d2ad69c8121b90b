#include "polarseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polarseg {

double overlap_error(const Mask& segmented, const Mask& truth) {
    require(segmented.height == truth.height && segmented.width == truth.width,
            "overlap_error: mask dimensions differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.pix.size(); ++i) {
        const bool s = segmented.pix[i] != 0, g = truth.pix[i] != 0;
        inter += (s && g);
        uni += (s || g);
    }
    require(uni > 0, "overlap_error: both masks are empty");
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double balanced_accuracy(const Mask& segmented, const Mask& truth) {
    require(segmented.height == truth.height && segmented.width == truth.width,
            "balanced_accuracy: mask dimensions differ");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.pix.size(); ++i) {
        const bool s = segmented.pix[i] != 0, g = truth.pix[i] != 0;
        if (g)
            s ? ++tp : ++fn;
        else
            s ? ++fp : ++tn;
    }
    require(tp + fn > 0 && tn + fp > 0,
            "balanced_accuracy: ground truth must contain both classes");
    const double sen = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double spe = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return 0.5 * (sen + spe);
}

Mask rim_mask(const Mask& disc, const Mask& cup) {
    require(disc.height == cup.height && disc.width == cup.width,
            "rim_mask: mask dimensions differ");
    Mask out(disc.height, disc.width);
    for (std::size_t i = 0; i < out.pix.size(); ++i)
        out.pix[i] = (disc.pix[i] && !cup.pix[i]) ? 1 : 0;
    return out;
}

double cdr_error(double cdr_s, double cdr_g) { return std::abs(cdr_s - cdr_g); }

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "roc_auc: scores/labels length mismatch");
    long pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg)++;
    require(pos > 0 && neg > 0, "roc_auc: labels must contain both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    long tp = 0, fp = 0;
    long prev_tp = 0, prev_fp = 0;
    // twice the unnormalized trapezoid area, an exact integer
    long long area2 = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // all samples tied at this score move together
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        area2 += static_cast<long long>(fp - prev_fp) * (tp + prev_tp);
        curve.points.emplace_back(static_cast<double>(fp) / neg,
                                  static_cast<double>(tp) / pos);
        prev_tp = tp;
        prev_fp = fp;
    }
    curve.auc = static_cast<double>(area2) / 2.0 /
                (static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

namespace {

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

PearsonResult pearson_corr(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "pearson_corr: length mismatch");
    const std::size_t n = x.size();
    require(n >= 3, "pearson_corr: need at least 3 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    require(sxx > 0.0 && syy > 0.0, "pearson_corr: zero variance input");
    PearsonResult res;
    res.r = sxy / std::sqrt(sxx * syy);
    res.r = std::clamp(res.r, -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    const double one_minus_r2 = (1.0 - res.r) * (1.0 + res.r);
    if (one_minus_r2 <= 0.0) {
        res.p_value = 0.0;
        return res;
    }
    const double t = res.r * std::sqrt(df / one_minus_r2);
    res.p_value = betai(df / 2.0, 0.5, df / (df + t * t));
    return res;
}

}  // namespace polarseg

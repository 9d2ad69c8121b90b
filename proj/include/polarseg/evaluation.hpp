#pragma once

// Segmentation and screening metrics: overlap error, balanced accuracy,
// rim extraction, absolute CDR error, ROC/AUC and Pearson correlation.

#include <span>
#include <utility>
#include <vector>

#include "polarseg/image.hpp"

namespace polarseg {

// E = 1 - |S & G| / |S | G|. Rejects when both masks are empty.
double overlap_error(const Mask& segmented, const Mask& truth);

// A = (Sen + Spe) / 2. Truth must contain both classes.
double balanced_accuracy(const Mask& segmented, const Mask& truth);

// disc minus cup.
Mask rim_mask(const Mask& disc, const Mask& cup);

double cdr_error(double cdr_s, double cdr_g);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (FPR, TPR), both non-decreasing
    double auc = 0.0;
};

// Threshold sweep over the unique score values, ties collapsed so the
// trapezoidal area equals the Mann-Whitney statistic with half-credit ties.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;  // two-sided, via the t transform
};

PearsonResult pearson_corr(std::span<const double> x, std::span<const double> y);

struct EvalRecord {
    double e_disc = 0.0, a_disc = 0.0;
    double e_cup = 0.0, a_cup = 0.0;
    double e_rim = 0.0, a_rim = 0.0;
    double delta_e = 0.0;
    double cdr_s = 0.0, cdr_g = 0.0;
};

}  // namespace polarseg

#include <doctest.h>

#include <cmath>
#include <random>

#include "polarseg/evaluation.hpp"
#include "polarseg/polar.hpp"
#include "polarseg/synth.hpp"

using namespace polarseg;

TEST_CASE("every generated cup lies inside its disc, pixel for pixel") {
    SynthSpec spec;
    spec.seed = 21;
    for (const SynthSample& s : generate(spec, 30)) {
        REQUIRE(s.disc.count() > 0);
        REQUIRE(s.cup.count() > 0);
        for (std::size_t i = 0; i < s.disc.pix.size(); ++i)
            if (s.cup.pix[i]) CHECK(s.disc.pix[i] == 1);
    }
}

TEST_CASE("generation is bitwise reproducible from the seed") {
    SynthSpec spec;
    spec.seed = 99;
    const auto a = generate(spec, 8);
    const auto b = generate(spec, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.pix == b[i].image.pix);
        CHECK(a[i].disc.pix == b[i].disc.pix);
        CHECK(a[i].cup.pix == b[i].cup.pix);
        CHECK(a[i].cdr == b[i].cdr);
    }
    SynthSpec other = spec;
    other.seed = 100;
    const auto c = generate(other, 8);
    CHECK(a[0].image.pix != c[0].image.pix);
}

TEST_CASE("stored CDR is the vertical diameter ratio of the generating ellipses") {
    SynthSpec spec;
    spec.seed = 5;
    for (const SynthSample& s : generate(spec, 20)) {
        CHECK(s.cdr ==
              vertical_diameter(s.cup_ellipse) / vertical_diameter(s.disc_ellipse));
        CHECK(s.cdr > 0.0);
        CHECK(s.cdr < 1.0);
    }
}

TEST_CASE("sample values stay inside the displayable range") {
    SynthSpec spec;
    spec.seed = 31;
    for (const SynthSample& s : generate(spec, 5))
        for (float v : s.image.pix) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
}

TEST_CASE("infeasible ranges are rejected") {
    SynthSpec bad;
    bad.cdr_max = 1.0;  // cup touches the disc
    CHECK_THROWS_WITH_AS(generate(bad, 1), doctest::Contains("infeasible"),
                         std::invalid_argument);
    SynthSpec toobig;
    toobig.disc_a_max = 80.0;
    CHECK_THROWS_AS(generate(toobig, 1), std::invalid_argument);
}

TEST_CASE("default geometry keeps the cup near 4% of the frame") {
    SynthSpec spec;
    spec.seed = 8;
    double mean = 0.0;
    const auto samples = generate(spec, 40);
    for (const SynthSample& s : samples) mean += region_proportion(s.cup);
    mean /= static_cast<double>(samples.size());
    CHECK(mean > 0.025);
    CHECK(mean < 0.06);
}

TEST_CASE("screening labels follow the cutoff, including the degenerate ends") {
    SynthSpec spec;
    spec.seed = 13;
    const auto all_pos = labeled_screening_set(spec, 10, 1e-9);
    for (int l : all_pos.labels) CHECK(l == 1);
    CHECK(all_pos.positive_fraction == 1.0);
    const auto all_neg = labeled_screening_set(spec, 10, 1.0 - 1e-9);
    for (int l : all_neg.labels) CHECK(l == 0);
    CHECK(all_neg.positive_fraction == 0.0);
}

TEST_CASE("margin sampling keeps CDR away from the cutoff on both sides") {
    SynthSpec spec;
    spec.seed = 14;
    const double cutoff = 0.6, margin = 0.15;
    const auto set = labeled_screening_set(spec, 40, cutoff, margin);
    int pos = 0;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        CHECK(std::abs(set.samples[i].cdr - cutoff) >= margin - 1e-9);
        CHECK(set.labels[i] == (set.samples[i].cdr > cutoff ? 1 : 0));
        pos += set.labels[i];
    }
    CHECK(pos > 0);
    CHECK(pos < static_cast<int>(set.samples.size()));
}

TEST_CASE("a CDR estimator within 0.05 screens a margin-0.15 set above 0.95 AUC") {
    SynthSpec spec;
    spec.seed = 15;
    const double cutoff = 0.6;
    const auto set = labeled_screening_set(spec, 60, cutoff, 0.15);
    std::vector<double> scores;
    std::vector<int> labels;
    std::mt19937_64 rng(1717);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        scores.push_back(set.samples[i].cdr + noise(rng));
        labels.push_back(set.labels[i]);
    }
    CHECK(roc_auc(scores, labels).auc > 0.95);
}

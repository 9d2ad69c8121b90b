#include "polarseg/objective.hpp"

#include <string>

#include "polarseg/check.hpp"

namespace polarseg {

namespace {

void check_pair(const Tensor& p, const Tensor& g, std::span<const float> w) {
    require(p.shape == g.shape, "dice loss: prediction shape " + to_string(p.shape) +
                                    " does not match truth shape " + to_string(g.shape));
    require(static_cast<int>(w.size()) == p.shape.c,
            "dice loss: " + std::to_string(w.size()) + " class weights for " +
                std::to_string(p.shape.c) + " channels");
}

// Pixels of one class across the whole batch: stride between class blocks is
// h*w, classes are interleaved per batch item, so gather class-major copies.
void gather_class_major(const Tensor& t, std::vector<float>& out) {
    const std::size_t plane = static_cast<std::size_t>(t.shape.h) * t.shape.w;
    out.resize(t.size());
    std::size_t pos = 0;
    for (int c = 0; c < t.shape.c; ++c)
        for (int n = 0; n < t.shape.n; ++n) {
            const float* src = t.plane(n, c);
            std::copy(src, src + plane, out.begin() + pos);
            pos += plane;
        }
}

void scatter_class_major(const std::vector<float>& flat, Tensor& t) {
    const std::size_t plane = static_cast<std::size_t>(t.shape.h) * t.shape.w;
    std::size_t pos = 0;
    for (int c = 0; c < t.shape.c; ++c)
        for (int n = 0; n < t.shape.n; ++n) {
            std::copy(flat.begin() + pos, flat.begin() + pos + plane, t.plane(n, c));
            pos += plane;
        }
}

}  // namespace

float dice_multilabel_loss(const Tensor& p, const Tensor& g, std::span<const float> w) {
    check_pair(p, g, w);
    const std::size_t N = static_cast<std::size_t>(p.shape.n) * p.shape.h * p.shape.w;
    std::vector<float> pf, gf;
    gather_class_major(p, pf);
    gather_class_major(g, gf);
    return detail::dice_loss_flat(pf.data(), gf.data(), p.shape.c, N, w.data());
}

Tensor dice_multilabel_grad(const Tensor& p, const Tensor& g, std::span<const float> w) {
    check_pair(p, g, w);
    const std::size_t N = static_cast<std::size_t>(p.shape.n) * p.shape.h * p.shape.w;
    std::vector<float> pf, gf, of(p.size());
    gather_class_major(p, pf);
    gather_class_major(g, gf);
    detail::dice_grad_flat(pf.data(), gf.data(), p.shape.c, N, w.data(), of.data());
    Tensor out(p.shape);
    scatter_class_major(of, out);
    return out;
}

LossReport side_output_objective(const std::vector<Tensor>& side_maps, const Tensor* fused,
                                 const Tensor& g, std::span<const float> alpha,
                                 std::span<const float> w, std::vector<Tensor>* side_grads) {
    require(!side_maps.empty(), "side_output_objective: no side-output maps");
    require(alpha.size() == side_maps.size(),
            "side_output_objective: " + std::to_string(alpha.size()) + " fusion weights for " +
                std::to_string(side_maps.size()) + " maps");
    LossReport report;
    report.per_side.reserve(side_maps.size());
    if (side_grads) {
        side_grads->clear();
        side_grads->reserve(side_maps.size());
    }
    for (std::size_t m = 0; m < side_maps.size(); ++m) {
        const float lm = dice_multilabel_loss(side_maps[m], g, w);
        report.per_side.push_back(lm);
        report.total += alpha[m] * lm;
        if (side_grads) {
            Tensor gm = dice_multilabel_grad(side_maps[m], g, w);
            for (float& v : gm.data) v *= alpha[m];
            side_grads->push_back(std::move(gm));
        }
    }
    if (fused) {
        const float one = 1.0f;
        for (int k = 0; k < fused->shape.c; ++k) {
            // Single-class view: loss over channel k alone with weight 1.
            const std::size_t plane =
                static_cast<std::size_t>(fused->shape.h) * fused->shape.w;
            const std::size_t N = static_cast<std::size_t>(fused->shape.n) * plane;
            std::vector<float> pf(N), gf(N);
            std::size_t pos = 0;
            for (int n = 0; n < fused->shape.n; ++n) {
                std::copy(fused->plane(n, k), fused->plane(n, k) + plane, pf.begin() + pos);
                std::copy(g.plane(n, k), g.plane(n, k) + plane, gf.begin() + pos);
                pos += plane;
            }
            report.per_class.push_back(detail::dice_loss_flat(pf.data(), gf.data(), 1, N, &one));
        }
    }
    return report;
}

}  // namespace polarseg

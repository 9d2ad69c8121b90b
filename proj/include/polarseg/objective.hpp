#pragma once

// Multi-label Dice loss over K independent binary classes, its analytic
// gradient, and the weighted side-output objective that fuses the per-head
// losses. Gradients flow only through predictions, never ground truth.

#include <span>
#include <vector>

#include "polarseg/tensor.hpp"

namespace polarseg {

// Smoothing added to numerator and (doubled) to denominator of every class
// term, so a class empty in both prediction and truth contributes zero loss.
inline constexpr double kDiceEps = 1e-6;

namespace detail {

// Core over flat class-major buffers: p, g are K blocks of N values each.
// Per class: term_k = 2 w_k (sum(p*g) + eps) / (sum(p^2) + sum(g^2) + 2 eps),
// loss = 1 - sum_k term_k.
template <typename T>
T dice_loss_flat(const T* p, const T* g, int K, std::size_t N, const T* w) {
    const T eps = static_cast<T>(kDiceEps);
    T loss = T(1);
    for (int k = 0; k < K; ++k) {
        const T* pk = p + static_cast<std::size_t>(k) * N;
        const T* gk = g + static_cast<std::size_t>(k) * N;
        T num = T(0), dp = T(0), dg = T(0);
        for (std::size_t i = 0; i < N; ++i) {
            num += pk[i] * gk[i];
            dp += pk[i] * pk[i];
            dg += gk[i] * gk[i];
        }
        loss -= T(2) * w[k] * (num + eps) / (dp + dg + T(2) * eps);
    }
    return loss;
}

// d(loss)/d(p), same layout as p.
template <typename T>
void dice_grad_flat(const T* p, const T* g, int K, std::size_t N, const T* w, T* out) {
    const T eps = static_cast<T>(kDiceEps);
    for (int k = 0; k < K; ++k) {
        const T* pk = p + static_cast<std::size_t>(k) * N;
        const T* gk = g + static_cast<std::size_t>(k) * N;
        T* ok = out + static_cast<std::size_t>(k) * N;
        T num = T(0), dp = T(0), dg = T(0);
        for (std::size_t i = 0; i < N; ++i) {
            num += pk[i] * gk[i];
            dp += pk[i] * pk[i];
            dg += gk[i] * gk[i];
        }
        const T den = dp + dg + T(2) * eps;
        const T a = T(2) * w[k] / den;
        const T b = T(4) * w[k] * (num + eps) / (den * den);
        for (std::size_t i = 0; i < N; ++i) ok[i] = b * pk[i] - a * gk[i];
    }
}

}  // namespace detail

// p: probabilities in [0,1], g: binary truth, both (n, K, h, w) with matching
// shapes; w: K class weights summing to 1. Pixels are pooled across the batch.
float dice_multilabel_loss(const Tensor& p, const Tensor& g, std::span<const float> w);
Tensor dice_multilabel_grad(const Tensor& p, const Tensor& g, std::span<const float> w);

struct LossReport {
    float total = 0.0f;
    std::vector<float> per_side;   // one Dice loss per side-output map
    std::vector<float> per_class;  // unweighted single-class losses of the fused map
};

// total = sum_m alpha[m] * dice(side_maps[m], g). When side_grads is non-null
// it receives d(total)/d(side_maps[m]) for every head. fused may be null; when
// given, per_class reports its unweighted per-class Dice losses.
LossReport side_output_objective(const std::vector<Tensor>& side_maps, const Tensor* fused,
                                 const Tensor& g, std::span<const float> alpha,
                                 std::span<const float> w,
                                 std::vector<Tensor>* side_grads = nullptr);

}  // namespace polarseg

#pragma once

// Forward and backward rules for every operation the network is built from:
// conv, transposed conv, average pooling, relu, sigmoid, channel concat and
// mean fusion. Backward functions accumulate (+=) into caller-owned buffers so
// fan-out in a graph sums naturally. All kernels are deterministic: each
// output element is reduced in a fixed order.

#include <algorithm>
#include <cstring>
#include <span>
#include <vector>

#include "polarseg/check.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class Padding { Same, Valid };

namespace detail {

// C[M,N] (+)= A[M,K] * B[K,N], all row-major.
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<std::size_t>(i) * N;
        if (!accumulate) std::fill(c, c + N, T(0));
        const T* a = A + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            if (av == T(0)) continue;
            const T* b = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[M,P] (+)= A[M,N] * B[P,N]^T  (rows of A dotted with rows of B).
template <typename T>
void gemm_nt(int M, int P, int N, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * N;
        T* c = C + static_cast<std::size_t>(i) * P;
        for (int p = 0; p < P; ++p) {
            const T* b = B + static_cast<std::size_t>(p) * N;
            T acc = T(0);
            for (int j = 0; j < N; ++j) acc += a[j] * b[j];
            c[p] = accumulate ? c[p] + acc : acc;
        }
    }
}

// C[P,N] (+)= A[M,P]^T * B[M,N].
template <typename T>
void gemm_tn(int M, int P, int N, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) std::fill(C, C + static_cast<std::size_t>(P) * N, T(0));
    for (int m = 0; m < M; ++m) {
        const T* a = A + static_cast<std::size_t>(m) * P;
        const T* b = B + static_cast<std::size_t>(m) * N;
        for (int p = 0; p < P; ++p) {
            const T av = a[p];
            if (av == T(0)) continue;
            T* c = C + static_cast<std::size_t>(p) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

struct ConvDims {
    int oh = 0, ow = 0;  // output spatial size
    int ph = 0, pw = 0;  // leading pad (trailing pad may be one larger)
};

inline ConvDims conv_dims(int h, int w, int kh, int kw, int stride, Padding pad) {
    ConvDims d;
    if (pad == Padding::Same) {
        d.oh = (h + stride - 1) / stride;
        d.ow = (w + stride - 1) / stride;
        const int th = std::max(0, (d.oh - 1) * stride + kh - h);
        const int tw = std::max(0, (d.ow - 1) * stride + kw - w);
        d.ph = th / 2;
        d.pw = tw / 2;
    } else {
        require(h >= kh && w >= kw,
                "conv2d: input " + std::to_string(h) + "x" + std::to_string(w) +
                    " smaller than kernel " + std::to_string(kh) + "x" + std::to_string(kw));
        d.oh = (h - kh) / stride + 1;
        d.ow = (w - kw) / stride + 1;
    }
    return d;
}

// Unrolls one (C,h,w) image into a (C*kh*kw) x (oh*ow) matrix. Out-of-bounds
// taps read as zero.
template <typename T>
void im2col(const T* im, int C, int h, int w, int kh, int kw, int stride, int ph, int pw,
            int oh, int ow, T* col) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * cols;
                // valid output ranges for this tap
                const int oy_lo = std::max(0, (ph - ky + stride - 1) / stride);
                const int oy_hi = std::min(oh - 1, (h - 1 + ph - ky) / stride);
                const int ox_lo = std::max(0, (pw - kx + stride - 1) / stride);
                const int ox_hi = std::min(ow - 1, (w - 1 + pw - kx) / stride);
                for (int oy = 0; oy < oh; ++oy) {
                    T* row = dst + static_cast<std::size_t>(oy) * ow;
                    if (oy < oy_lo || oy > oy_hi || ox_lo > ox_hi) {
                        std::fill(row, row + ow, T(0));
                        continue;
                    }
                    const int iy = oy * stride + ky - ph;
                    const T* src = im + static_cast<std::size_t>(c) * plane +
                                   static_cast<std::size_t>(iy) * w;
                    std::fill(row, row + ox_lo, T(0));
                    if (stride == 1) {
                        std::memcpy(row + ox_lo, src + (ox_lo + kx - pw),
                                    sizeof(T) * static_cast<std::size_t>(ox_hi - ox_lo + 1));
                    } else {
                        for (int ox = ox_lo; ox <= ox_hi; ++ox)
                            row[ox] = src[ox * stride + kx - pw];
                    }
                    std::fill(row + ox_hi + 1, row + ow, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates the column matrix back into the image.
template <typename T>
void col2im(const T* col, int C, int h, int w, int kh, int kw, int stride, int ph, int pw,
            int oh, int ow, T* im) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const T* src = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * cols;
                const int oy_lo = std::max(0, (ph - ky + stride - 1) / stride);
                const int oy_hi = std::min(oh - 1, (h - 1 + ph - ky) / stride);
                const int ox_lo = std::max(0, (pw - kx + stride - 1) / stride);
                const int ox_hi = std::min(ow - 1, (w - 1 + pw - kx) / stride);
                if (ox_lo > ox_hi) continue;
                for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                    const int iy = oy * stride + ky - ph;
                    const T* row = src + static_cast<std::size_t>(oy) * ow;
                    T* dst = im + static_cast<std::size_t>(c) * plane +
                             static_cast<std::size_t>(iy) * w;
                    for (int ox = ox_lo; ox <= ox_hi; ++ox)
                        dst[ox * stride + kx - pw] += row[ox];
                }
            }
        }
    }
}

}  // namespace detail

namespace ops {

// x: (n, ci, h, w), k: (co, ci, kh, kw), bias: co entries or empty.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& k, std::span<const T> bias,
                  int stride, Padding pad) {
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(k.shape.c == x.shape.c, "conv2d: input shape " + to_string(x.shape) +
                                        " does not match kernel shape " + to_string(k.shape));
    require(bias.empty() || static_cast<int>(bias.size()) == k.shape.n,
            "conv2d: bias length " + std::to_string(bias.size()) + " vs " +
                std::to_string(k.shape.n) + " output channels");
    const int ci = k.shape.c, co = k.shape.n, kh = k.shape.h, kw = k.shape.w;
    const auto d = detail::conv_dims(x.shape.h, x.shape.w, kh, kw, stride, pad);
    TensorT<T> out(Shape{x.shape.n, co, d.oh, d.ow});
    const int spatial = d.oh * d.ow;
    std::vector<T> col(static_cast<std::size_t>(ci) * kh * kw * spatial);
    for (int n = 0; n < x.shape.n; ++n) {
        detail::im2col(x.plane(n, 0), ci, x.shape.h, x.shape.w, kh, kw, stride, d.ph, d.pw,
                       d.oh, d.ow, col.data());
        detail::gemm_nn(co, spatial, ci * kh * kw, k.data.data(), col.data(), out.plane(n, 0),
                        false);
        if (!bias.empty()) {
            for (int c = 0; c < co; ++c) {
                T* p = out.plane(n, c);
                const T b = bias[c];
                for (int i = 0; i < spatial; ++i) p[i] += b;
            }
        }
    }
    return out;
}

// Accumulates into gx / gk / gb; any of them may be null to skip.
template <typename T>
void conv2d_backward(const TensorT<T>& gout, const TensorT<T>& x, const TensorT<T>& k,
                     int stride, Padding pad, TensorT<T>* gx, TensorT<T>* gk,
                     std::vector<T>* gb) {
    const int ci = k.shape.c, co = k.shape.n, kh = k.shape.h, kw = k.shape.w;
    const auto d = detail::conv_dims(x.shape.h, x.shape.w, kh, kw, stride, pad);
    require(gout.shape == Shape{x.shape.n, co, d.oh, d.ow},
            "conv2d_backward: gradient shape " + to_string(gout.shape) + " vs expected " +
                to_string(Shape{x.shape.n, co, d.oh, d.ow}));
    const int spatial = d.oh * d.ow;
    const int krows = ci * kh * kw;
    std::vector<T> col(static_cast<std::size_t>(krows) * spatial);
    for (int n = 0; n < x.shape.n; ++n) {
        if (gb) {
            for (int c = 0; c < co; ++c) {
                const T* p = gout.plane(n, c);
                T acc = T(0);
                for (int i = 0; i < spatial; ++i) acc += p[i];
                (*gb)[c] += acc;
            }
        }
        if (gk) {
            detail::im2col(x.plane(n, 0), ci, x.shape.h, x.shape.w, kh, kw, stride, d.ph,
                           d.pw, d.oh, d.ow, col.data());
            detail::gemm_nt(co, krows, spatial, gout.plane(n, 0), col.data(), gk->data.data(),
                            true);
        }
        if (gx) {
            detail::gemm_tn(co, krows, spatial, k.data.data(), gout.plane(n, 0), col.data(),
                            false);
            detail::col2im(col.data(), ci, x.shape.h, x.shape.w, kh, kw, stride, d.ph, d.pw,
                           d.oh, d.ow, gx->plane(n, 0));
        }
    }
}

// Adjoint of the valid-padding conv2d sharing the kernel: x has k.n channels,
// the result has k.c channels and spatial size (h-1)*stride + kh.
template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& k, int stride) {
    require(stride >= 1, "transposed_conv2d: stride must be >= 1");
    require(x.shape.c == k.shape.n,
            "transposed_conv2d: input shape " + to_string(x.shape) +
                " does not match kernel shape " + to_string(k.shape));
    const int A = k.shape.n, B = k.shape.c, kh = k.shape.h, kw = k.shape.w;
    const int oh = (x.shape.h - 1) * stride + kh;
    const int ow = (x.shape.w - 1) * stride + kw;
    TensorT<T> out(Shape{x.shape.n, B, oh, ow});
    const int spatial = x.shape.h * x.shape.w;
    const int krows = B * kh * kw;
    std::vector<T> col(static_cast<std::size_t>(krows) * spatial);
    for (int n = 0; n < x.shape.n; ++n) {
        detail::gemm_tn(A, krows, spatial, k.data.data(), x.plane(n, 0), col.data(), false);
        detail::col2im(col.data(), B, oh, ow, kh, kw, stride, 0, 0, x.shape.h, x.shape.w,
                       out.plane(n, 0));
    }
    return out;
}

template <typename T>
void transposed_conv2d_backward(const TensorT<T>& gout, const TensorT<T>& x,
                                const TensorT<T>& k, int stride, TensorT<T>* gx,
                                TensorT<T>* gk) {
    const int A = k.shape.n, B = k.shape.c, kh = k.shape.h, kw = k.shape.w;
    const int oh = (x.shape.h - 1) * stride + kh;
    const int ow = (x.shape.w - 1) * stride + kw;
    require(gout.shape == Shape{x.shape.n, B, oh, ow},
            "transposed_conv2d_backward: gradient shape " + to_string(gout.shape) +
                " vs expected " + to_string(Shape{x.shape.n, B, oh, ow}));
    const int spatial = x.shape.h * x.shape.w;
    const int krows = B * kh * kw;
    std::vector<T> col(static_cast<std::size_t>(krows) * spatial);
    for (int n = 0; n < x.shape.n; ++n) {
        detail::im2col(gout.plane(n, 0), B, oh, ow, kh, kw, stride, 0, 0, x.shape.h,
                       x.shape.w, col.data());
        if (gx)
            detail::gemm_nn(A, spatial, krows, k.data.data(), col.data(), gx->plane(n, 0),
                            true);
        if (gk)
            detail::gemm_nt(A, krows, spatial, x.plane(n, 0), col.data(), gk->data.data(),
                            true);
    }
}

template <typename T>
TensorT<T> avg_pool2d(const TensorT<T>& x, int window) {
    require(window >= 1, "avg_pool2d: window must be >= 1");
    require(x.shape.h % window == 0 && x.shape.w % window == 0,
            "avg_pool2d: spatial dims " + std::to_string(x.shape.h) + "x" +
                std::to_string(x.shape.w) + " not divisible by window " +
                std::to_string(window));
    const int oh = x.shape.h / window, ow = x.shape.w / window;
    TensorT<T> out(Shape{x.shape.n, x.shape.c, oh, ow});
    const T inv = T(1) / static_cast<T>(window * window);
    for (int n = 0; n < x.shape.n; ++n) {
        for (int c = 0; c < x.shape.c; ++c) {
            const T* src = x.plane(n, c);
            T* dst = out.plane(n, c);
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = T(0);
                    for (int dy = 0; dy < window; ++dy) {
                        const T* row = src + static_cast<std::size_t>(oy * window + dy) *
                                                 x.shape.w +
                                       ox * window;
                        for (int dx = 0; dx < window; ++dx) acc += row[dx];
                    }
                    dst[static_cast<std::size_t>(oy) * ow + ox] = acc * inv;
                }
            }
        }
    }
    return out;
}

template <typename T>
void avg_pool2d_backward(const TensorT<T>& gout, int window, TensorT<T>* gx) {
    const int oh = gout.shape.h, ow = gout.shape.w;
    const T inv = T(1) / static_cast<T>(window * window);
    for (int n = 0; n < gout.shape.n; ++n) {
        for (int c = 0; c < gout.shape.c; ++c) {
            const T* src = gout.plane(n, c);
            T* dst = gx->plane(n, c);
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const T g = src[static_cast<std::size_t>(oy) * ow + ox] * inv;
                    for (int dy = 0; dy < window; ++dy) {
                        T* row = dst + static_cast<std::size_t>(oy * window + dy) *
                                           gx->shape.w +
                                 ox * window;
                        for (int dx = 0; dx < window; ++dx) row[dx] += g;
                    }
                }
            }
        }
    }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return out;
}

template <typename T>
void relu_backward(const TensorT<T>& gout, const TensorT<T>& x, TensorT<T>* gx) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x.data[i] > T(0)) gx->data[i] += gout.data[i];
}

// Output is clamped to [eps, 1-eps] so downstream ratios never see an exact
// 0 or 1 even in float.
template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    constexpr T eps = T(1e-6);
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x.data[i];
        T y;
        if (v >= T(0)) {
            y = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            y = e / (T(1) + e);
        }
        out.data[i] = std::clamp(y, eps, T(1) - eps);
    }
    return out;
}

// y is the sigmoid output.
template <typename T>
void sigmoid_backward(const TensorT<T>& gout, const TensorT<T>& y, TensorT<T>* gx) {
    for (std::size_t i = 0; i < y.size(); ++i)
        gx->data[i] += gout.data[i] * y.data[i] * (T(1) - y.data[i]);
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape.n == b.shape.n && a.shape.h == b.shape.h && a.shape.w == b.shape.w,
            "concat_channels: shapes " + to_string(a.shape) + " and " + to_string(b.shape) +
                " differ outside the channel axis");
    TensorT<T> out(Shape{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const std::size_t plane = static_cast<std::size_t>(a.shape.h) * a.shape.w;
    for (int n = 0; n < a.shape.n; ++n) {
        std::memcpy(out.plane(n, 0), a.plane(n, 0), sizeof(T) * plane * a.shape.c);
        std::memcpy(out.plane(n, a.shape.c), b.plane(n, 0), sizeof(T) * plane * b.shape.c);
    }
    return out;
}

template <typename T>
void concat_channels_backward(const TensorT<T>& gout, int channels_a, TensorT<T>* ga,
                              TensorT<T>* gb) {
    const std::size_t plane = static_cast<std::size_t>(gout.shape.h) * gout.shape.w;
    const int channels_b = gout.shape.c - channels_a;
    for (int n = 0; n < gout.shape.n; ++n) {
        if (ga) {
            const T* src = gout.plane(n, 0);
            T* dst = ga->plane(n, 0);
            for (std::size_t i = 0; i < plane * channels_a; ++i) dst[i] += src[i];
        }
        if (gb) {
            const T* src = gout.plane(n, channels_a);
            T* dst = gb->plane(n, 0);
            for (std::size_t i = 0; i < plane * channels_b; ++i) dst[i] += src[i];
        }
    }
}

template <typename T>
TensorT<T> mean_fuse(const std::vector<const TensorT<T>*>& maps) {
    require(!maps.empty(), "mean_fuse: empty map list");
    const Shape s = maps[0]->shape;
    for (const auto* m : maps)
        require(m->shape == s, "mean_fuse: map shape " + to_string(m->shape) +
                                   " differs from " + to_string(s));
    TensorT<T> out(s);
    const T inv = T(1) / static_cast<T>(maps.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        T acc = T(0);
        for (const auto* m : maps) acc += m->data[i];
        out.data[i] = acc * inv;
    }
    return out;
}

template <typename T>
void mean_fuse_backward(const TensorT<T>& gout, std::size_t num_maps,
                        const std::vector<TensorT<T>*>& gmaps) {
    const T inv = T(1) / static_cast<T>(num_maps);
    for (TensorT<T>* g : gmaps) {
        if (!g) continue;
        for (std::size_t i = 0; i < gout.size(); ++i) g->data[i] += gout.data[i] * inv;
    }
}

}  // namespace ops
}  // namespace polarseg

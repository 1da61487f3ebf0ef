#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dspec/gemm.hpp"
#include "dspec/parallel.hpp"
#include "dspec/rng.hpp"
#include "dspec/tensor.hpp"

namespace dspec {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
std::vector<T>& conv_scratch() {
    thread_local std::vector<T> scratch;
    return scratch;
}

/// col (K*K*C rows, Ho*Wo cols): col[(ci*K+kh)*K+kw][oh*Wo+ow] =
/// x[ci][oh*stride+kh-pad][ow*stride+kw-pad], zero where out of bounds.
/// Row order matches the kernel's (ci,kh,kw) layout.
template <typename T>
void im2col(const T* xplane, int C, int H, int W, int K, int stride, int pad,
            int Ho, int Wo, T* col) {
    for (int ci = 0; ci < C; ++ci) {
        const T* xc = xplane + static_cast<std::int64_t>(ci) * H * W;
        for (int kh = 0; kh < K; ++kh) {
            for (int kw = 0; kw < K; ++kw) {
                T* row = col + ((static_cast<std::int64_t>(ci) * K + kh) * K + kw) * Ho * Wo;
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + kh - pad;
                    T* dst = row + static_cast<std::int64_t>(oh) * Wo;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const T* src = xc + static_cast<std::int64_t>(ih) * W;
                    const int ow_lo = pad > kw ? (pad - kw + stride - 1) / stride : 0;
                    const int ow_hi = (W - 1 + pad - kw) < 0
                                          ? 0
                                          : std::min(Wo, (W - 1 + pad - kw) / stride + 1);
                    for (int ow = 0; ow < ow_lo; ++ow) dst[ow] = T(0);
                    if (stride == 1) {
                        const T* s = src + (kw - pad + ow_lo);
                        for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow] = s[ow - ow_lo];
                    } else {
                        for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow] = src[ow * stride + kw - pad];
                    }
                    for (int ow = ow_hi; ow < Wo; ++ow) dst[ow] = T(0);
                }
            }
        }
    }
}

/// Transposed layout for the weight-gradient pass: im2row (Ho*Wo rows,
/// K*K*C cols).
template <typename T>
void im2row(const T* xplane, int C, int H, int W, int K, int stride, int pad,
            int Ho, int Wo, T* rows) {
    const int ncols = C * K * K;
    parallel_for(Ho, [&](std::int64_t ohb, std::int64_t ohe) {
    for (int oh = static_cast<int>(ohb); oh < static_cast<int>(ohe); ++oh) {
        for (int ow = 0; ow < Wo; ++ow) {
            T* dst = rows + (static_cast<std::int64_t>(oh) * Wo + ow) * ncols;
            for (int ci = 0; ci < C; ++ci) {
                const T* xc = xplane + static_cast<std::int64_t>(ci) * H * W;
                for (int kh = 0; kh < K; ++kh) {
                    const int ih = oh * stride + kh - pad;
                    for (int kw = 0; kw < K; ++kw) {
                        const int iw = ow * stride + kw - pad;
                        *dst++ = (ih < 0 || ih >= H || iw < 0 || iw >= W)
                                     ? T(0)
                                     : xc[static_cast<std::int64_t>(ih) * W + iw];
                    }
                }
            }
        }
    }
    });
}

template <typename T>
void col2im(const T* col, int C, int H, int W, int K, int stride, int pad,
            int Ho, int Wo, T* xplane) {
    std::fill(xplane, xplane + static_cast<std::int64_t>(C) * H * W, T(0));
    for (int ci = 0; ci < C; ++ci) {
        T* xc = xplane + static_cast<std::int64_t>(ci) * H * W;
        for (int kh = 0; kh < K; ++kh) {
            for (int kw = 0; kw < K; ++kw) {
                const T* row = col + ((static_cast<std::int64_t>(ci) * K + kh) * K + kw) * Ho * Wo;
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + kh - pad;
                    if (ih < 0 || ih >= H) continue;
                    const T* src = row + static_cast<std::int64_t>(oh) * Wo;
                    T* dst = xc + static_cast<std::int64_t>(ih) * W;
                    const int ow_lo = pad > kw ? (pad - kw + stride - 1) / stride : 0;
                    const int ow_hi = (W - 1 + pad - kw) < 0
                                          ? 0
                                          : std::min(Wo, (W - 1 + pad - kw) / stride + 1);
                    if (stride == 1) {
                        T* d = dst + (kw - pad + ow_lo);
                        for (int ow = ow_lo; ow < ow_hi; ++ow) d[ow - ow_lo] += src[ow];
                    } else {
                        for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow * stride + kw - pad] += src[ow];
                    }
                }
            }
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: x (N,Cin,H,W) * kernel (Cout,Cin,K,K) -> y (N,Cout,Ho,Wo).
// im2col + GEMM; samples are parallel slices, each output element's sum is
// k-serial, so results never depend on the thread count.
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                    int stride, int pad, Tensor<T>& y) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = kernel.dim(0), K = kernel.dim(2);
    const int Ho = y.dim(2), Wo = y.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(Ho) * Wo;
    const int kdim = C * K * K;
    const bool direct = K == 1 && stride == 1 && pad == 0;

    parallel_for(N, [&](std::int64_t nb, std::int64_t ne) {
        std::vector<T>& scratch = detail::conv_scratch<T>();
        if (!direct) scratch.resize(static_cast<std::size_t>(kdim) * plane);
        for (std::int64_t n = nb; n < ne; ++n) {
            const T* xplane = x.data() + n * C * H * W;
            const T* col = xplane;
            if (!direct) {
                detail::im2col(xplane, C, H, W, K, stride, pad, Ho, Wo, scratch.data());
                col = scratch.data();
            }
            T* yplane = y.data() + n * Cout * plane;
            gemm_rowmajor(kernel.data(), col, yplane, Cout, kdim, static_cast<int>(plane),
                          kdim, static_cast<int>(plane), static_cast<int>(plane), false);
            if (bias) {
                for (int co = 0; co < Cout; ++co) {
                    const T b = bias->data()[co];
                    T* row = yplane + static_cast<std::int64_t>(co) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) row[i] += b;
                }
            }
        }
    });
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& kernel,
                           int stride, int pad, Tensor<T>& grad_in) {
    const int N = grad_in.dim(0), C = grad_in.dim(1), H = grad_in.dim(2), W = grad_in.dim(3);
    const int Cout = kernel.dim(0), K = kernel.dim(2);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(Ho) * Wo;
    const int kdim = C * K * K;
    const bool direct = K == 1 && stride == 1 && pad == 0;

    // kernel transposed to (K*K*C, Cout) so the GEMM reduction runs over Cout
    std::vector<T> wt(static_cast<std::size_t>(kdim) * Cout);
    for (int co = 0; co < Cout; ++co)
        for (int r = 0; r < kdim; ++r)
            wt[static_cast<std::size_t>(r) * Cout + co] = kernel.data()[static_cast<std::int64_t>(co) * kdim + r];

    parallel_for(N, [&](std::int64_t nb, std::int64_t ne) {
        std::vector<T>& scratch = detail::conv_scratch<T>();
        if (!direct) scratch.resize(static_cast<std::size_t>(kdim) * plane);
        for (std::int64_t n = nb; n < ne; ++n) {
            const T* gplane = grad_out.data() + n * Cout * plane;
            T* xplane = grad_in.data() + n * C * H * W;
            T* dcol = direct ? xplane : scratch.data();
            gemm_rowmajor(wt.data(), gplane, dcol, kdim, Cout, static_cast<int>(plane),
                          Cout, static_cast<int>(plane), static_cast<int>(plane), false);
            if (!direct) detail::col2im(dcol, C, H, W, K, stride, pad, Ho, Wo, xplane);
        }
    });
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& x, const Tensor<T>& grad_out,
                            int stride, int pad,
                            Tensor<T>& grad_kernel, Tensor<T>* grad_bias) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = grad_kernel.dim(0), K = grad_kernel.dim(2);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(Ho) * Wo;
    const int kdim = C * K * K;

    grad_kernel.fill(T(0));
    std::vector<T>& rows = detail::conv_scratch<T>();
    rows.resize(static_cast<std::size_t>(plane) * kdim);
    // samples stay sequential (fixed accumulation order); the M rows of the
    // per-sample GEMM are the parallel slices
    for (int n = 0; n < N; ++n) {
        detail::im2row(x.data() + static_cast<std::int64_t>(n) * C * H * W, C, H, W, K, stride, pad,
                       Ho, Wo, rows.data());
        const T* gplane = grad_out.data() + static_cast<std::int64_t>(n) * Cout * plane;
        parallel_for(Cout, [&](std::int64_t mb, std::int64_t me) {
            gemm_rowmajor(gplane + mb * plane, rows.data(),
                          grad_kernel.data() + mb * kdim,
                          static_cast<int>(me - mb), static_cast<int>(plane), kdim,
                          static_cast<int>(plane), kdim, kdim, true);
        });
    }

    if (grad_bias) {
        T* bd = grad_bias->data();
        for (int co = 0; co < Cout; ++co) {
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                const T* gplane = grad_out.data() + (static_cast<std::int64_t>(n) * Cout + co) * plane;
                for (std::int64_t i = 0; i < plane; ++i) acc += gplane[i];
            }
            bd[co] = acc;
        }
    }
}

namespace detail {

// 8-lane partial sums: fixed association, vectorizable without reassociation.
template <typename T>
double lane_sum(const T* p, std::int64_t n) {
    double acc[8] = {};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += static_cast<double>(p[i + j]);
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += static_cast<double>(p[i]);
    return s;
}

template <typename T>
double lane_sumsq(const T* p, std::int64_t n, double mean) {
    double acc[8] = {};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) {
            const double d = static_cast<double>(p[i + j]) - mean;
            acc[j] += d * d;
        }
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) {
        const double d = static_cast<double>(p[i]) - mean;
        s += d * d;
    }
    return s;
}

} // namespace detail

// ---------------------------------------------------------------------------
// batchnorm over N,H,W per channel
// ---------------------------------------------------------------------------

template <typename T>
void batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       Tensor<T>& running_mean, Tensor<T>& running_var,
                       bool use_batch_stats, bool update_running,
                       double momentum, double eps,
                       Tensor<T>& y, Tensor<T>& save_mean, Tensor<T>& save_invstd) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t m = static_cast<std::int64_t>(N) * plane;

    parallel_for(C, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t c = b; c < e; ++c) {
            double mean, var;
            if (use_batch_stats) {
                double sum = 0.0;
                for (int n = 0; n < N; ++n)
                    sum += detail::lane_sum(x.data() + (static_cast<std::int64_t>(n) * C + c) * plane, plane);
                mean = sum / static_cast<double>(m);
                double sq = 0.0;
                for (int n = 0; n < N; ++n)
                    sq += detail::lane_sumsq(x.data() + (static_cast<std::int64_t>(n) * C + c) * plane, plane, mean);
                var = sq / static_cast<double>(m);
                if (update_running) {
                    const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
                    running_mean[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_mean[c]) + momentum * mean);
                    running_var[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_var[c]) + momentum * unbiased);
                }
            } else {
                mean = static_cast<double>(running_mean[c]);
                var = static_cast<double>(running_var[c]);
            }
            const T invstd = static_cast<T>(1.0 / std::sqrt(var + eps));
            const T mu = static_cast<T>(mean);
            const T g = gamma[c], bt = beta[c];
            save_mean[c] = mu;
            save_invstd[c] = invstd;
            for (int n = 0; n < N; ++n) {
                const T* xrow = x.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                T* yrow = y.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) yrow[i] = (xrow[i] - mu) * invstd * g + bt;
            }
        }
    });
}

/// Backward through batch statistics (use_batch_stats forward). For the
/// frozen path (running stats) the statistics are constants: pass
/// through_stats=false.
template <typename T>
void batchnorm_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                        const Tensor<T>& save_mean, const Tensor<T>& save_invstd,
                        const Tensor<T>& grad_out, bool through_stats,
                        Tensor<T>& grad_in, Tensor<T>& grad_gamma, Tensor<T>& grad_beta) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t m = static_cast<std::int64_t>(N) * plane;

    parallel_for(C, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t c = b; c < e; ++c) {
            const T mu = save_mean[c];
            const T invstd = save_invstd[c];
            const T g = gamma[c];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < N; ++n) {
                const T* xrow = x.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                const T* grow = grad_out.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                double a1[8] = {}, a2[8] = {};
                std::int64_t i = 0;
                for (; i + 8 <= plane; i += 8)
                    for (int j = 0; j < 8; ++j) {
                        const double dy = static_cast<double>(grow[i + j]);
                        a1[j] += dy;
                        a2[j] += dy * static_cast<double>((xrow[i + j] - mu) * invstd);
                    }
                double s1 = ((a1[0] + a1[1]) + (a1[2] + a1[3])) + ((a1[4] + a1[5]) + (a1[6] + a1[7]));
                double s2 = ((a2[0] + a2[1]) + (a2[2] + a2[3])) + ((a2[4] + a2[5]) + (a2[6] + a2[7]));
                for (; i < plane; ++i) {
                    const double dy = static_cast<double>(grow[i]);
                    s1 += dy;
                    s2 += dy * static_cast<double>((xrow[i] - mu) * invstd);
                }
                sum_dy += s1;
                sum_dy_xhat += s2;
            }
            grad_gamma[c] = static_cast<T>(sum_dy_xhat);
            grad_beta[c] = static_cast<T>(sum_dy);
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(m));
            for (int n = 0; n < N; ++n) {
                const T* xrow = x.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                const T* grow = grad_out.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                T* orow = grad_in.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                if (through_stats) {
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const T xhat = (xrow[i] - mu) * invstd;
                        orow[i] = g * invstd * (grow[i] - mean_dy - xhat * mean_dy_xhat);
                    }
                } else {
                    for (std::int64_t i = 0; i < plane; ++i) orow[i] = g * invstd * grow[i];
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// elementwise and pooling layers
// ---------------------------------------------------------------------------

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    const T* xd = x.data();
    T* yd = y.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out, Tensor<T>& grad_in) {
    const T* xd = x.data();
    const T* gd = grad_out.data();
    T* od = grad_in.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) od[i] = xd[i] > T(0) ? gd[i] : T(0);
}

/// 2x2 window, stride 2, no padding; trailing odd row/column is dropped.
/// Ties keep the first element in row-major window order.
template <typename T>
void maxpool2x2_forward(const Tensor<T>& x, Tensor<T>& y, Tensor<int>& argmax) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = H / 2, Wo = W / 2;
    parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t idx = b; idx < e; ++idx) {
            const T* xplane = x.data() + idx * H * W;
            T* yplane = y.data() + idx * Ho * Wo;
            int* aplane = argmax.data() + idx * Ho * Wo;
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow) {
                    const int ih = oh * 2, iw = ow * 2;
                    int best = ih * W + iw;
                    T bv = xplane[best];
                    const int cand[3] = {ih * W + iw + 1, (ih + 1) * W + iw, (ih + 1) * W + iw + 1};
                    for (int k = 0; k < 3; ++k) {
                        if (xplane[cand[k]] > bv) {
                            bv = xplane[cand[k]];
                            best = cand[k];
                        }
                    }
                    yplane[oh * Wo + ow] = bv;
                    aplane[oh * Wo + ow] = best;
                }
            }
        }
    });
}

template <typename T>
void maxpool2x2_backward(const Tensor<int>& argmax, const Tensor<T>& grad_out, Tensor<T>& grad_in) {
    const int N = grad_in.dim(0), C = grad_in.dim(1), H = grad_in.dim(2), W = grad_in.dim(3);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    grad_in.fill(T(0));
    parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t idx = b; idx < e; ++idx) {
            const int* aplane = argmax.data() + idx * Ho * Wo;
            const T* gplane = grad_out.data() + idx * Ho * Wo;
            T* xplane = grad_in.data() + idx * H * W;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i)
                xplane[aplane[i]] += gplane[i];
        }
    });
}

template <typename T>
void global_avg_pool_forward(const Tensor<T>& x, Tensor<T>& y) {
    const int N = x.dim(0), C = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const T* row = x.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
            T acc = T(0);
            for (std::int64_t i = 0; i < plane; ++i) acc += row[i];
            y.at(n, c) = acc / static_cast<T>(plane);
        }
    }
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& grad_out, Tensor<T>& grad_in) {
    const int N = grad_in.dim(0), C = grad_in.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(grad_in.dim(2)) * grad_in.dim(3);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const T g = grad_out.at(n, c) / static_cast<T>(plane);
            T* row = grad_in.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) row[i] = g;
        }
    }
}

// ---------------------------------------------------------------------------
// dense: x (N,I) * W (O,I)^T + b -> y (N,O)
// ---------------------------------------------------------------------------

template <typename T>
void dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Tensor<T>& y) {
    const int N = x.dim(0), I = x.dim(1), O = weight.dim(0);
    for (int n = 0; n < N; ++n) {
        const T* xrow = x.data() + static_cast<std::int64_t>(n) * I;
        T* yrow = y.data() + static_cast<std::int64_t>(n) * O;
        for (int o = 0; o < O; ++o) {
            const T* wrow = weight.data() + static_cast<std::int64_t>(o) * I;
            T acc = bias[o];
            for (int i = 0; i < I; ++i) acc += wrow[i] * xrow[i];
            yrow[o] = acc;
        }
    }
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                    Tensor<T>& grad_in, Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
    const int N = x.dim(0), I = x.dim(1), O = weight.dim(0);
    grad_weight.fill(T(0));
    grad_bias.fill(T(0));
    for (int n = 0; n < N; ++n) {
        const T* xrow = x.data() + static_cast<std::int64_t>(n) * I;
        const T* grow = grad_out.data() + static_cast<std::int64_t>(n) * O;
        T* irow = grad_in.data() + static_cast<std::int64_t>(n) * I;
        std::fill(irow, irow + I, T(0));
        for (int o = 0; o < O; ++o) {
            const T g = grow[o];
            const T* wrow = weight.data() + static_cast<std::int64_t>(o) * I;
            T* dwrow = grad_weight.data() + static_cast<std::int64_t>(o) * I;
            grad_bias[o] += g;
            for (int i = 0; i < I; ++i) {
                dwrow[i] += g * xrow[i];
                irow[i] += g * wrow[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling): kept units scale by 1/(1-rate)
// ---------------------------------------------------------------------------

template <typename T>
void dropout_forward(const Tensor<T>& x, double rate, Rng& rng, Tensor<T>& y, Tensor<T>& mask) {
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const T m = rng.uniform() < rate ? T(0) : scale;
        mask[i] = m;
        y[i] = x[i] * m;
    }
}

template <typename T>
void dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out, Tensor<T>& grad_in) {
    const std::int64_t n = mask.numel();
    for (std::int64_t i = 0; i < n; ++i) grad_in[i] = grad_out[i] * mask[i];
}

} // namespace dspec

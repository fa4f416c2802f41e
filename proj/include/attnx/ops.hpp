#pragma once

#include "attnx/tensor.hpp"

namespace attnx {

enum class act { none, relu, leaky_relu_02, sigmoid, tanh_h };
enum class pad_mode { zero, reflect };

inline const char* act_name(act a) {
    switch (a) {
        case act::none: return "none";
        case act::relu: return "relu";
        case act::leaky_relu_02: return "leaky_relu_0.2";
        case act::sigmoid: return "sigmoid";
        case act::tanh_h: return "tanh";
    }
    return "?";
}

namespace detail {

// C[M x N] += A[M x K] * B[K x N], row-major.
template <class T>
void gemm_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * K;
        T* c = C + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            if (av == T(0)) continue;
            const T* b = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

inline int reflect_idx(int p, int n) {
    if (p < 0) p = -p;
    if (p >= n) p = 2 * n - 2 - p;
    return p;
}

// Zero- or reflect-pad each spatial plane of a NCHW block.
template <class T>
std::vector<T> pad_nchw(const std::vector<T>& x, int N, int C, int H, int W, int p, pad_mode pm) {
    if (p == 0) return x;
    if (pm == pad_mode::reflect && (p >= H || p >= W))
        throw std::invalid_argument("reflect padding requires pad < spatial extent");
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    std::vector<T> out(static_cast<std::size_t>(N) * C * Hp * Wp, T(0));
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = x.data() + static_cast<std::size_t>(nc) * H * W;
        T* dst = out.data() + static_cast<std::size_t>(nc) * Hp * Wp;
        for (int i = 0; i < Hp; ++i) {
            const int si = (pm == pad_mode::zero) ? i - p : reflect_idx(i - p, H);
            if (si < 0 || si >= H) continue;  // zero pad rows stay zero
            for (int j = 0; j < Wp; ++j) {
                const int sj = (pm == pad_mode::zero) ? j - p : reflect_idx(j - p, W);
                if (sj < 0 || sj >= W) continue;
                dst[i * Wp + j] = src[si * W + sj];
            }
        }
    }
    return out;
}

// Scatter gradients of the padded block back onto the unpadded input.
template <class T>
void unpad_acc_nchw(const std::vector<T>& gp, T* gx, int N, int C, int H, int W, int p, pad_mode pm) {
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = gp.data() + static_cast<std::size_t>(nc) * Hp * Wp;
        T* dst = gx + static_cast<std::size_t>(nc) * H * W;
        for (int i = 0; i < Hp; ++i) {
            const int si = (pm == pad_mode::zero) ? i - p : reflect_idx(i - p, H);
            if (si < 0 || si >= H) continue;
            for (int j = 0; j < Wp; ++j) {
                const int sj = (pm == pad_mode::zero) ? j - p : reflect_idx(j - p, W);
                if (sj < 0 || sj >= W) continue;
                dst[si * W + sj] += src[i * Wp + j];
            }
        }
    }
}

// col has C*kh*kw rows and Ho*Wo columns; xp is one padded sample (C x Hp x Wp).
template <class T>
void im2col(const T* xp, int C, int Hp, int Wp, int kh, int kw, int stride,
            int Ho, int Wo, T* col) {
    for (int c = 0; c < C; ++c) {
        const T* plane = xp + static_cast<std::size_t>(c) * Hp * Wp;
        for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v) {
                T* row = col + (static_cast<std::size_t>((c * kh + u) * kw + v)) * Ho * Wo;
                for (int oh = 0; oh < Ho; ++oh) {
                    const T* sp = plane + (oh * stride + u) * Wp + v;
                    T* rp = row + static_cast<std::size_t>(oh) * Wo;
                    if (stride == 1) {
                        std::copy(sp, sp + Wo, rp);
                    } else {
                        for (int ow = 0; ow < Wo; ++ow) rp[ow] = sp[ow * stride];
                    }
                }
            }
    }
}

template <class T>
void col2im_acc(const T* col, int C, int Hp, int Wp, int kh, int kw, int stride,
                int Ho, int Wo, T* xp) {
    for (int c = 0; c < C; ++c) {
        T* plane = xp + static_cast<std::size_t>(c) * Hp * Wp;
        for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v) {
                const T* row = col + (static_cast<std::size_t>((c * kh + u) * kw + v)) * Ho * Wo;
                for (int oh = 0; oh < Ho; ++oh) {
                    T* sp = plane + (oh * stride + u) * Wp + v;
                    const T* rp = row + static_cast<std::size_t>(oh) * Wo;
                    for (int ow = 0; ow < Wo; ++ow) sp[ow * stride] += rp[ow];
                }
            }
    }
}

template <class T>
bool any_needs_grad(std::initializer_list<const tensor<T>*> ts) {
    if (!grad_enabled()) return false;
    for (const auto* t : ts)
        if (t->node()->needs_grad()) return true;
    return false;
}

}  // namespace detail

template <class T>
tensor<T> conv2d(const tensor<T>& x, const tensor<T>& w, const tensor<T>& b,
                 int stride = 1, int padding = 0, pad_mode pm = pad_mode::zero) {
    if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1)
        throw std::invalid_argument("conv2d expects NCHW input, KCkk weight, K bias");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != C)
        throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(x.shape()) +
                                    " weight " + shape_str(w.shape()));
    if (b.dim(0) != K) throw std::invalid_argument("conv2d bias size mismatch");
    if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1");
    const int Hp = H + 2 * padding, Wp = W + 2 * padding;
    if (kh > Hp || kw > Wp)
        throw std::invalid_argument("conv2d kernel larger than padded input");
    x.check_finite("conv2d input");
    w.check_finite("conv2d weight");

    const int Ho = (Hp - kh) / stride + 1;
    const int Wo = (Wp - kw) / stride + 1;
    const int CKK = C * kh * kw;
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;

    auto xp = detail::pad_nchw(x.data(), N, C, H, W, padding, pm);
    tensor<T> out(shape_t{N, K, Ho, Wo});
    std::vector<T> col(static_cast<std::size_t>(CKK) * plane);
    for (int n = 0; n < N; ++n) {
        detail::im2col(xp.data() + static_cast<std::size_t>(n) * C * Hp * Wp,
                       C, Hp, Wp, kh, kw, stride, Ho, Wo, col.data());
        T* on = out.data().data() + static_cast<std::size_t>(n) * K * plane;
        for (int k = 0; k < K; ++k)
            std::fill(on + k * plane, on + (k + 1) * plane, b.data()[k]);
        detail::gemm_acc(w.data().data(), col.data(), on, K, CKK, static_cast<int>(plane));
    }

    if (detail::any_needs_grad<T>({&x, &w, &b})) {
        auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
        on->parents = {xn, wn, bn};
        auto pad_saved = std::make_shared<std::vector<T>>(std::move(xp));
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            const bool need_x = xn->needs_grad();
            const bool need_w = wn->needs_grad();
            const bool need_b = bn->needs_grad();
            std::vector<T> col2(static_cast<std::size_t>(CKK) * plane);
            std::vector<T> gcol;
            std::vector<T> gxp;
            if (need_x) gxp.assign(pad_saved->size(), T(0));
            for (int n = 0; n < N; ++n) {
                const T* gon = go + static_cast<std::size_t>(n) * K * plane;
                detail::im2col(pad_saved->data() + static_cast<std::size_t>(n) * C * Hp * Wp,
                               C, Hp, Wp, kh, kw, stride, Ho, Wo, col2.data());
                if (need_b) {
                    T* gb = bn->grad_buffer().data();
                    for (int k = 0; k < K; ++k) {
                        T s = T(0);
                        const T* gk = gon + k * plane;
                        for (std::size_t j = 0; j < plane; ++j) s += gk[j];
                        gb[k] += s;
                    }
                }
                if (need_w) {
                    T* gw = wn->grad_buffer().data();
                    for (int k = 0; k < K; ++k) {
                        const T* gk = gon + k * plane;
                        for (int r = 0; r < CKK; ++r) {
                            const T* cr = col2.data() + static_cast<std::size_t>(r) * plane;
                            T s = T(0);
                            for (std::size_t j = 0; j < plane; ++j) s += gk[j] * cr[j];
                            gw[static_cast<std::size_t>(k) * CKK + r] += s;
                        }
                    }
                }
                if (need_x) {
                    gcol.assign(static_cast<std::size_t>(CKK) * plane, T(0));
                    // gcol = W^T * gout
                    for (int k = 0; k < K; ++k) {
                        const T* gk = gon + k * plane;
                        const T* wk = wn->value.data() + static_cast<std::size_t>(k) * CKK;
                        for (int r = 0; r < CKK; ++r) {
                            const T wv = wk[r];
                            if (wv == T(0)) continue;
                            T* cr = gcol.data() + static_cast<std::size_t>(r) * plane;
                            for (std::size_t j = 0; j < plane; ++j) cr[j] += wv * gk[j];
                        }
                    }
                    detail::col2im_acc(gcol.data(), C, Hp, Wp, kh, kw, stride, Ho, Wo,
                                       gxp.data() + static_cast<std::size_t>(n) * C * Hp * Wp);
                }
            }
            if (need_x)
                detail::unpad_acc_nchw(gxp, xn->grad_buffer().data(), N, C, H, W, padding, pm);
        };
    }
    return out;
}

// 3x3 transpose convolution, stride 2, pad 1, output padding 1: out = 2x in.
// Weight layout is [Cin, Cout, 3, 3].
template <class T>
tensor<T> transpose_conv2d(const tensor<T>& x, const tensor<T>& w, const tensor<T>& b) {
    if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1)
        throw std::invalid_argument("transpose_conv2d expects NCHW input");
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1);
    if (w.dim(0) != Ci || w.dim(2) != 3 || w.dim(3) != 3)
        throw std::invalid_argument("transpose_conv2d weight must be [Cin,Cout,3,3], got " +
                                    shape_str(w.shape()));
    if (b.dim(0) != Co) throw std::invalid_argument("transpose_conv2d bias size mismatch");
    x.check_finite("transpose_conv2d input");

    const int Ho = 2 * H, Wo = 2 * W;
    tensor<T> out(shape_t{N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            T* op = &out.at(n, co, 0, 0);
            std::fill(op, op + static_cast<std::size_t>(Ho) * Wo, b.data()[co]);
        }
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const T xv = x.at(n, ci, i, j);
                    if (xv == T(0)) continue;
                    for (int u = 0; u < 3; ++u) {
                        const int oi = 2 * i + u - 1;
                        if (oi < 0 || oi >= Ho) continue;
                        for (int v = 0; v < 3; ++v) {
                            const int oj = 2 * j + v - 1;
                            if (oj < 0 || oj >= Wo) continue;
                            for (int co = 0; co < Co; ++co)
                                out.at(n, co, oi, oj) += xv * w.at(ci, co, u, v);
                        }
                    }
                }

    if (detail::any_needs_grad<T>({&x, &w, &b})) {
        auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
        on->parents = {xn, wn, bn};
        on->backprop = [=, out_raw = on.get()]() {
            const auto& go = out_raw->grad_buffer();
            auto g_at = [&](int n, int co, int i, int j) {
                return go[((static_cast<std::size_t>(n) * Co + co) * Ho + i) * Wo + j];
            };
            if (bn->needs_grad()) {
                T* gb = bn->grad_buffer().data();
                for (int n = 0; n < N; ++n)
                    for (int co = 0; co < Co; ++co) {
                        T s = T(0);
                        for (int i = 0; i < Ho; ++i)
                            for (int j = 0; j < Wo; ++j) s += g_at(n, co, i, j);
                        gb[co] += s;
                    }
            }
            const bool need_x = xn->needs_grad(), need_w = wn->needs_grad();
            if (!need_x && !need_w) return;
            T* gx = need_x ? xn->grad_buffer().data() : nullptr;
            T* gw = need_w ? wn->grad_buffer().data() : nullptr;
            for (int n = 0; n < N; ++n)
                for (int ci = 0; ci < Ci; ++ci)
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j) {
                            const std::size_t xi =
                                ((static_cast<std::size_t>(n) * Ci + ci) * H + i) * W + j;
                            const T xv = xn->value[xi];
                            T acc = T(0);
                            for (int u = 0; u < 3; ++u) {
                                const int oi = 2 * i + u - 1;
                                if (oi < 0 || oi >= Ho) continue;
                                for (int v = 0; v < 3; ++v) {
                                    const int oj = 2 * j + v - 1;
                                    if (oj < 0 || oj >= Wo) continue;
                                    for (int co = 0; co < Co; ++co) {
                                        const T g = g_at(n, co, oi, oj);
                                        const std::size_t wi =
                                            ((static_cast<std::size_t>(ci) * Co + co) * 3 + u) * 3 + v;
                                        if (need_x) acc += g * wn->value[wi];
                                        if (need_w) gw[wi] += g * xv;
                                    }
                                }
                            }
                            if (need_x) gx[xi] += acc;
                        }
        };
    }
    return out;
}

template <class T>
tensor<T> nearest_upsample2x(const tensor<T>& x) {
    if (x.rank() != 4) throw std::invalid_argument("nearest_upsample2x expects NCHW");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    tensor<T> out(shape_t{N, C, 2 * H, 2 * W});
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = x.data().data() + static_cast<std::size_t>(nc) * H * W;
        T* dst = out.data().data() + static_cast<std::size_t>(nc) * 4 * H * W;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                const T v = src[i * W + j];
                T* d = dst + (2 * i) * 2 * W + 2 * j;
                d[0] = v;
                d[1] = v;
                d[2 * W] = v;
                d[2 * W + 1] = v;
            }
    }
    if (detail::any_needs_grad<T>({&x})) {
        auto xn = x.node(), on = out.node();
        on->parents = {xn};
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            T* gx = xn->grad_buffer().data();
            for (int nc = 0; nc < N * C; ++nc) {
                const T* g = go + static_cast<std::size_t>(nc) * 4 * H * W;
                T* gd = gx + static_cast<std::size_t>(nc) * H * W;
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        const T* s = g + (2 * i) * 2 * W + 2 * j;
                        gd[i * W + j] += s[0] + s[1] + s[2 * W] + s[2 * W + 1];
                    }
            }
        };
    }
    return out;
}

// Per-(sample, channel) normalization to zero mean / unit population variance.
// No learned affine.
template <class T>
tensor<T> instance_norm(const tensor<T>& x, T eps = T(1e-5)) {
    if (x.rank() != 4) throw std::invalid_argument("instance_norm expects NCHW");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    tensor<T> out(x.shape());
    std::vector<T> istd(static_cast<std::size_t>(N) * C);
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = x.data().data() + nc * hw;
        T* dst = out.data().data() + nc * hw;
        T mu = T(0);
        for (std::size_t i = 0; i < hw; ++i) mu += src[i];
        mu /= static_cast<T>(hw);
        T var = T(0);
        for (std::size_t i = 0; i < hw; ++i) {
            const T d = src[i] - mu;
            var += d * d;
        }
        var /= static_cast<T>(hw);
        const T is = T(1) / std::sqrt(var + eps);
        istd[nc] = is;
        for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - mu) * is;
    }
    if (detail::any_needs_grad<T>({&x})) {
        auto xn = x.node(), on = out.node();
        on->parents = {xn};
        auto istd_saved = std::make_shared<std::vector<T>>(std::move(istd));
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            const T* y = out_raw->value.data();
            T* gx = xn->grad_buffer().data();
            for (int nc = 0; nc < N * C; ++nc) {
                const T* g = go + nc * hw;
                const T* yh = y + nc * hw;
                T* gd = gx + nc * hw;
                T mg = T(0), mgy = T(0);
                for (std::size_t i = 0; i < hw; ++i) {
                    mg += g[i];
                    mgy += g[i] * yh[i];
                }
                mg /= static_cast<T>(hw);
                mgy /= static_cast<T>(hw);
                const T is = (*istd_saved)[nc];
                for (std::size_t i = 0; i < hw; ++i)
                    gd[i] += is * (g[i] - mg - yh[i] * mgy);
            }
        };
    }
    return out;
}

template <class T>
tensor<T> activation(const tensor<T>& x, act kind) {
    if (kind == act::none) return x;
    tensor<T> out(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    switch (kind) {
        case act::relu:
            for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
            break;
        case act::leaky_relu_02:
            for (std::size_t i = 0; i < xv.size(); ++i)
                ov[i] = xv[i] > T(0) ? xv[i] : T(0.2) * xv[i];
            break;
        case act::sigmoid:
            for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
            break;
        case act::tanh_h:
            for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = std::tanh(xv[i]);
            break;
        default: break;
    }
    if (detail::any_needs_grad<T>({&x})) {
        auto xn = x.node(), on = out.node();
        on->parents = {xn};
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            const T* y = out_raw->value.data();
            const T* xd = xn->value.data();
            T* gx = xn->grad_buffer().data();
            const std::size_t n = out_raw->value.size();
            switch (kind) {
                case act::relu:
                    for (std::size_t i = 0; i < n; ++i) gx[i] += xd[i] > T(0) ? go[i] : T(0);
                    break;
                case act::leaky_relu_02:
                    for (std::size_t i = 0; i < n; ++i)
                        gx[i] += xd[i] > T(0) ? go[i] : T(0.2) * go[i];
                    break;
                case act::sigmoid:
                    for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * y[i] * (T(1) - y[i]);
                    break;
                case act::tanh_h:
                    for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * (T(1) - y[i] * y[i]);
                    break;
                default: break;
            }
        };
    }
    return out;
}

enum class ew { mul, add, sub };

namespace detail {

// Broadcast contract: either identical shapes, or rank-4 with one operand
// single-channel spanning the other's channels (the mask case of the blend).
template <class T>
int broadcast_mode(const tensor<T>& a, const tensor<T>& b) {
    if (a.shape() == b.shape()) return 0;
    if (a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
        a.dim(3) == b.dim(3)) {
        if (b.dim(1) == 1 && a.dim(1) > 1) return 2;  // b broadcasts over a's channels
        if (a.dim(1) == 1 && b.dim(1) > 1) return 1;  // a broadcasts
    }
    throw std::invalid_argument("elementwise shapes not broadcastable: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class T>
tensor<T> elementwise(const tensor<T>& a, const tensor<T>& b, ew kind) {
    const int mode = detail::broadcast_mode(a, b);
    const tensor<T>& full = (mode == 1) ? b : a;
    tensor<T> out(full.shape());
    const int N = (mode == 0) ? 1 : full.dim(0);
    const int C = (mode == 0) ? 1 : full.dim(1);
    const std::size_t hw = (mode == 0) ? full.numel() : static_cast<std::size_t>(full.dim(2)) * full.dim(3);

    auto idx_small = [hw](int n, std::size_t i) { return static_cast<std::size_t>(n) * hw + i; };
    auto& ov = out.data();
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const T x = (mode == 1) ? av[idx_small(n, i)] : av[base + i];
                const T y = (mode == 2) ? bv[idx_small(n, i)] : bv[base + i];
                ov[base + i] = (kind == ew::mul) ? x * y : (kind == ew::add) ? x + y : x - y;
            }
        }

    if (detail::any_needs_grad<T>({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        on->parents = {an, bn};
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            const bool need_a = an->needs_grad(), need_b = bn->needs_grad();
            T* ga = need_a ? an->grad_buffer().data() : nullptr;
            T* gb = need_b ? bn->grad_buffer().data() : nullptr;
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const std::size_t ia = (mode == 1) ? idx_small(n, i) : base + i;
                        const std::size_t ib = (mode == 2) ? idx_small(n, i) : base + i;
                        const T g = go[base + i];
                        switch (kind) {
                            case ew::mul:
                                if (need_a) ga[ia] += g * bn->value[ib];
                                if (need_b) gb[ib] += g * an->value[ia];
                                break;
                            case ew::add:
                                if (need_a) ga[ia] += g;
                                if (need_b) gb[ib] += g;
                                break;
                            case ew::sub:
                                if (need_a) ga[ia] += g;
                                if (need_b) gb[ib] -= g;
                                break;
                        }
                    }
                }
        };
    }
    return out;
}

template <class T>
tensor<T> mul(const tensor<T>& a, const tensor<T>& b) { return elementwise(a, b, ew::mul); }
template <class T>
tensor<T> add(const tensor<T>& a, const tensor<T>& b) { return elementwise(a, b, ew::add); }
template <class T>
tensor<T> sub(const tensor<T>& a, const tensor<T>& b) { return elementwise(a, b, ew::sub); }

// y = scale * x + shift, scalars. (1 - a) is affine(a, -1, 1).
template <class T>
tensor<T> affine(const tensor<T>& x, T scale, T shift) {
    tensor<T> out(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = scale * xv[i] + shift;
    if (detail::any_needs_grad<T>({&x})) {
        auto xn = x.node(), on = out.node();
        on->parents = {xn};
        on->backprop = [=, out_raw = on.get()]() {
            const T* go = out_raw->grad_buffer().data();
            T* gx = xn->grad_buffer().data();
            for (std::size_t i = 0; i < out_raw->value.size(); ++i) gx[i] += scale * go[i];
        };
    }
    return out;
}

enum class reduce_kind { l1_mean, sq_mean };

template <class T>
tensor<T> reduce_loss(const tensor<T>& x, reduce_kind kind) {
    if (x.numel() == 0) throw std::invalid_argument("reduce_loss on empty tensor");
    const auto& xv = x.data();
    const T inv_n = T(1) / static_cast<T>(xv.size());
    T acc = T(0);
    if (kind == reduce_kind::l1_mean)
        for (T v : xv) acc += std::abs(v);
    else
        for (T v : xv) acc += v * v;
    tensor<T> out = tensor<T>::scalar(acc * inv_n);
    out.check_finite("reduce_loss output");
    if (detail::any_needs_grad<T>({&x})) {
        auto xn = x.node(), on = out.node();
        on->parents = {xn};
        on->backprop = [=, out_raw = on.get()]() {
            const T g = out_raw->grad_buffer()[0];
            T* gx = xn->grad_buffer().data();
            const T* xd = xn->value.data();
            if (kind == reduce_kind::l1_mean) {
                for (std::size_t i = 0; i < xn->value.size(); ++i)
                    gx[i] += g * inv_n * (xd[i] > T(0) ? T(1) : (xd[i] < T(0) ? T(-1) : T(0)));
            } else {
                for (std::size_t i = 0; i < xn->value.size(); ++i)
                    gx[i] += g * inv_n * T(2) * xd[i];
            }
        };
    }
    return out;
}

template <class T>
tensor<T> l1_mean(const tensor<T>& x) { return reduce_loss(x, reduce_kind::l1_mean); }
template <class T>
tensor<T> sq_mean(const tensor<T>& x) { return reduce_loss(x, reduce_kind::sq_mean); }

// Plain value helpers (no graph participation).
template <class T>
T mean_value(const tensor<T>& x) {
    T s = T(0);
    for (T v : x.data()) s += v;
    return s / static_cast<T>(x.numel());
}

template <class T>
tensor<T> ones_like(const tensor<T>& x) { return tensor<T>(x.shape(), T(1)); }
template <class T>
tensor<T> zeros_like(const tensor<T>& x) { return tensor<T>(x.shape(), T(0)); }

}  // namespace attnx

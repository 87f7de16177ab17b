#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "mvc/tensor.hpp"

// Minimal reverse-mode tape. Ops append a backward closure in creation order;
// backward() replays the tape in reverse. Creation order is a valid
// topological order because graphs are built by executing the forward pass.
// Nodes reached only from constant inputs record no closures, so inference
// costs no tape.

namespace mvc::ad {

template <typename T>
struct NodeT {
    TensorT<T> val;
    TensorT<T> grad;  // allocated lazily
    bool needs_grad = false;

    void ensure_grad() {
        if (grad.v.empty()) grad = TensorT<T>(val.shape);
    }
};

template <typename T>
using VarT = std::shared_ptr<NodeT<T>>;

template <typename T>
class TapeT {
  public:
    using Ten = TensorT<T>;
    using Var = VarT<T>;

    explicit TapeT(bool recording = true) : recording_(recording) {}

    Var leaf(Ten value, bool needs_grad) {
        auto node = std::make_shared<NodeT<T>>();
        node->val = std::move(value);
        node->needs_grad = needs_grad && recording_;
        return node;
    }
    Var constant(Ten value) { return leaf(std::move(value), false); }

    void backward(const Var& loss) {
        require(loss->val.numel() == 1, ErrorKind::invalid_argument,
                "backward expects a scalar loss");
        loss->ensure_grad();
        loss->grad.v[0] = T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    std::size_t op_count() const { return ops_.size(); }

    // ---- elementwise ----

    Var add(const Var& a, const Var& b) {
        require_same_shape(a->val, b->val, "add");
        Var out = fresh({a, b}, a->val.shape);
        for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = a->val.v[i] + b->val.v[i];
        if (track(out, {a, b}))
            ops_.push_back([a, b, out] {
                if (a->needs_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.v.size(); ++i) a->grad.v[i] += out->grad.v[i];
                }
                if (b->needs_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.v.size(); ++i) b->grad.v[i] += out->grad.v[i];
                }
            });
        return out;
    }

    Var scale(const Var& a, T s) {
        Var out = fresh({a}, a->val.shape);
        for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = a->val.v[i] * s;
        if (track(out, {a}))
            ops_.push_back([a, out, s] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.v.size(); ++i) a->grad.v[i] += s * out->grad.v[i];
            });
        return out;
    }

    Var silu(const Var& a) {
        Var out = fresh({a}, a->val.shape);
        for (std::size_t i = 0; i < out->val.v.size(); ++i) {
            const T x = a->val.v[i];
            out->val.v[i] = x * sigmoid_of(x);
        }
        if (track(out, {a}))
            ops_.push_back([a, out] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.v.size(); ++i) {
                    const T x = a->val.v[i];
                    const T s = sigmoid_of(x);
                    a->grad.v[i] += out->grad.v[i] * (s + x * s * (T(1) - s));
                }
            });
        return out;
    }

    Var sigmoid(const Var& a) {
        Var out = fresh({a}, a->val.shape);
        for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = sigmoid_of(a->val.v[i]);
        if (track(out, {a}))
            ops_.push_back([a, out] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.v.size(); ++i) {
                    const T y = out->val.v[i];
                    a->grad.v[i] += out->grad.v[i] * y * (T(1) - y);
                }
            });
        return out;
    }

    Var tanh_op(const Var& a) {
        Var out = fresh({a}, a->val.shape);
        for (std::size_t i = 0; i < out->val.v.size(); ++i)
            out->val.v[i] = std::tanh(a->val.v[i]);
        if (track(out, {a}))
            ops_.push_back([a, out] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.v.size(); ++i) {
                    const T y = out->val.v[i];
                    a->grad.v[i] += out->grad.v[i] * (T(1) - y * y);
                }
            });
        return out;
    }

    // ---- shape plumbing ----

    Var reshape(const Var& a, std::vector<int> shape) {
        require(TensorT<T>::numel_of(shape) == a->val.numel(), ErrorKind::shape,
                "reshape element count mismatch");
        Var out = fresh({a}, shape);
        out->val.v = a->val.v;
        if (track(out, {a}))
            ops_.push_back([a, out] {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.v.size(); ++i) a->grad.v[i] += out->grad.v[i];
            });
        return out;
    }

    // [C,H,W] -> [H*W, C] (positions as rows)
    Var chw_to_pc(const Var& a) {
        const int C = a->val.c(), H = a->val.h(), W = a->val.w();
        Var out = fresh({a}, {H * W, C});
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < H * W; ++p)
                out->val.v[static_cast<std::size_t>(p) * C + c] =
                    a->val.v[static_cast<std::size_t>(c) * H * W + p];
        if (track(out, {a}))
            ops_.push_back([a, out, C, H, W] {
                a->ensure_grad();
                for (int c = 0; c < C; ++c)
                    for (int p = 0; p < H * W; ++p)
                        a->grad.v[static_cast<std::size_t>(c) * H * W + p] +=
                            out->grad.v[static_cast<std::size_t>(p) * C + c];
            });
        return out;
    }

    // [P, C] -> [C, H, W] with P == H*W
    Var pc_to_chw(const Var& a, int C, int H, int W) {
        require(a->val.rank() == 2 && a->val.shape[0] == H * W && a->val.shape[1] == C,
                ErrorKind::shape, "pc_to_chw shape mismatch");
        Var out = fresh({a}, {C, H, W});
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < H * W; ++p)
                out->val.v[static_cast<std::size_t>(c) * H * W + p] =
                    a->val.v[static_cast<std::size_t>(p) * C + c];
        if (track(out, {a}))
            ops_.push_back([a, out, C, H, W] {
                a->ensure_grad();
                for (int c = 0; c < C; ++c)
                    for (int p = 0; p < H * W; ++p)
                        a->grad.v[static_cast<std::size_t>(p) * C + c] +=
                            out->grad.v[static_cast<std::size_t>(c) * H * W + p];
            });
        return out;
    }

    Var concat_channels(const Var& a, const Var& b) {
        require(a->val.rank() == 3 && b->val.rank() == 3 && a->val.h() == b->val.h() &&
                    a->val.w() == b->val.w(),
                ErrorKind::shape, "concat_channels spatial mismatch");
        const int Ca = a->val.c(), Cb = b->val.c(), H = a->val.h(), W = a->val.w();
        Var out = fresh({a, b}, {Ca + Cb, H, W});
        std::copy(a->val.v.begin(), a->val.v.end(), out->val.v.begin());
        std::copy(b->val.v.begin(), b->val.v.end(), out->val.v.begin() + a->val.v.size());
        if (track(out, {a, b}))
            ops_.push_back([a, b, out] {
                const std::size_t na = a->val.v.size();
                if (a->needs_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < na; ++i) a->grad.v[i] += out->grad.v[i];
                }
                if (b->needs_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < b->val.v.size(); ++i)
                        b->grad.v[i] += out->grad.v[na + i];
                }
            });
        return out;
    }

    // ---- dense ----

    // y[o] = sum_i W[o,i] x[i] (+ b[o]); x is rank-1
    Var linear(const Var& x, const Var& W, const Var& b) {
        require(x->val.rank() == 1 && W->val.rank() == 2 &&
                    W->val.shape[1] == x->val.shape[0] &&
                    (!b || (b->val.rank() == 1 && b->val.shape[0] == W->val.shape[0])),
                ErrorKind::shape, "linear shape mismatch");
        const int out_dim = W->val.shape[0], in_dim = W->val.shape[1];
        std::vector<Var> parents = {x, W};
        if (b) parents.push_back(b);
        Var out = fresh(parents, {out_dim});
        for (int o = 0; o < out_dim; ++o) {
            T acc = b ? b->val.v[static_cast<std::size_t>(o)] : T(0);
            const T* wrow = &W->val.v[static_cast<std::size_t>(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) acc += wrow[i] * x->val.v[static_cast<std::size_t>(i)];
            out->val.v[static_cast<std::size_t>(o)] = acc;
        }
        if (track(out, parents))
            ops_.push_back([x, W, b, out, out_dim, in_dim] {
                if (x->needs_grad) x->ensure_grad();
                if (W->needs_grad) W->ensure_grad();
                if (b && b->needs_grad) b->ensure_grad();
                for (int o = 0; o < out_dim; ++o) {
                    const T g = out->grad.v[static_cast<std::size_t>(o)];
                    if (g == T(0)) continue;
                    const T* wrow = &W->val.v[static_cast<std::size_t>(o) * in_dim];
                    if (x->needs_grad)
                        for (int i = 0; i < in_dim; ++i)
                            x->grad.v[static_cast<std::size_t>(i)] += g * wrow[i];
                    if (W->needs_grad) {
                        T* dwrow = &W->grad.v[static_cast<std::size_t>(o) * in_dim];
                        for (int i = 0; i < in_dim; ++i)
                            dwrow[i] += g * x->val.v[static_cast<std::size_t>(i)];
                    }
                    if (b && b->needs_grad) b->grad.v[static_cast<std::size_t>(o)] += g;
                }
            });
        return out;
    }

    // C = A B with A [n,k], B [k,m]
    Var matmul(const Var& A, const Var& B) {
        require(A->val.rank() == 2 && B->val.rank() == 2 && A->val.shape[1] == B->val.shape[0],
                ErrorKind::shape, "matmul shape mismatch");
        const int n = A->val.shape[0], k = A->val.shape[1], m = B->val.shape[1];
        Var out = fresh({A, B}, {n, m});
        for (int i = 0; i < n; ++i)
            for (int kk = 0; kk < k; ++kk) {
                const T a = A->val.v[static_cast<std::size_t>(i) * k + kk];
                if (a == T(0)) continue;
                const T* brow = &B->val.v[static_cast<std::size_t>(kk) * m];
                T* crow = &out->val.v[static_cast<std::size_t>(i) * m];
                for (int j = 0; j < m; ++j) crow[j] += a * brow[j];
            }
        if (track(out, {A, B}))
            ops_.push_back([A, B, out, n, k, m] {
                if (A->needs_grad) {
                    A->ensure_grad();  // dA = dC B^T
                    for (int i = 0; i < n; ++i)
                        for (int kk = 0; kk < k; ++kk) {
                            T acc = T(0);
                            const T* crow = &out->grad.v[static_cast<std::size_t>(i) * m];
                            const T* brow = &B->val.v[static_cast<std::size_t>(kk) * m];
                            for (int j = 0; j < m; ++j) acc += crow[j] * brow[j];
                            A->grad.v[static_cast<std::size_t>(i) * k + kk] += acc;
                        }
                }
                if (B->needs_grad) {
                    B->ensure_grad();  // dB = A^T dC
                    for (int kk = 0; kk < k; ++kk)
                        for (int i = 0; i < n; ++i) {
                            const T a = A->val.v[static_cast<std::size_t>(i) * k + kk];
                            if (a == T(0)) continue;
                            const T* crow = &out->grad.v[static_cast<std::size_t>(i) * m];
                            T* brow = &B->grad.v[static_cast<std::size_t>(kk) * m];
                            for (int j = 0; j < m; ++j) brow[j] += a * crow[j];
                        }
                }
            });
        return out;
    }

    // C = A B^T with A [n,k], B [m,k]
    Var matmul_nt(const Var& A, const Var& B) {
        require(A->val.rank() == 2 && B->val.rank() == 2 && A->val.shape[1] == B->val.shape[1],
                ErrorKind::shape, "matmul_nt shape mismatch");
        const int n = A->val.shape[0], k = A->val.shape[1], m = B->val.shape[0];
        Var out = fresh({A, B}, {n, m});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                T acc = T(0);
                const T* arow = &A->val.v[static_cast<std::size_t>(i) * k];
                const T* brow = &B->val.v[static_cast<std::size_t>(j) * k];
                for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                out->val.v[static_cast<std::size_t>(i) * m + j] = acc;
            }
        if (track(out, {A, B}))
            ops_.push_back([A, B, out, n, k, m] {
                if (A->needs_grad) {
                    A->ensure_grad();  // dA = dC B
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < m; ++j) {
                            const T g = out->grad.v[static_cast<std::size_t>(i) * m + j];
                            if (g == T(0)) continue;
                            const T* brow = &B->val.v[static_cast<std::size_t>(j) * k];
                            T* arow = &A->grad.v[static_cast<std::size_t>(i) * k];
                            for (int kk = 0; kk < k; ++kk) arow[kk] += g * brow[kk];
                        }
                }
                if (B->needs_grad) {
                    B->ensure_grad();  // dB = dC^T A
                    for (int j = 0; j < m; ++j)
                        for (int i = 0; i < n; ++i) {
                            const T g = out->grad.v[static_cast<std::size_t>(i) * m + j];
                            if (g == T(0)) continue;
                            const T* arow = &A->val.v[static_cast<std::size_t>(i) * k];
                            T* brow = &B->grad.v[static_cast<std::size_t>(j) * k];
                            for (int kk = 0; kk < k; ++kk) brow[kk] += g * arow[kk];
                        }
                }
            });
        return out;
    }

    Var softmax_rows(const Var& a) {
        require(a->val.rank() == 2, ErrorKind::shape, "softmax_rows expects a matrix");
        const int n = a->val.shape[0], m = a->val.shape[1];
        Var out = fresh({a}, a->val.shape);
        for (int i = 0; i < n; ++i) {
            const T* row = &a->val.v[static_cast<std::size_t>(i) * m];
            T* orow = &out->val.v[static_cast<std::size_t>(i) * m];
            T mx = row[0];
            for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
            T sum = T(0);
            for (int j = 0; j < m; ++j) {
                orow[j] = std::exp(row[j] - mx);
                sum += orow[j];
            }
            for (int j = 0; j < m; ++j) orow[j] /= sum;
        }
        if (track(out, {a}))
            ops_.push_back([a, out, n, m] {
                a->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    const T* y = &out->val.v[static_cast<std::size_t>(i) * m];
                    const T* dy = &out->grad.v[static_cast<std::size_t>(i) * m];
                    T dot = T(0);
                    for (int j = 0; j < m; ++j) dot += y[j] * dy[j];
                    T* da = &a->grad.v[static_cast<std::size_t>(i) * m];
                    for (int j = 0; j < m; ++j) da[j] += y[j] * (dy[j] - dot);
                }
            });
        return out;
    }

    // x [C,H,W] + b[C] broadcast
    Var add_channel_bias(const Var& x, const Var& b) {
        require(x->val.rank() == 3 && b->val.rank() == 1 && b->val.shape[0] == x->val.c(),
                ErrorKind::shape, "add_channel_bias shape mismatch");
        const int C = x->val.c(), HW = x->val.h() * x->val.w();
        Var out = fresh({x, b}, x->val.shape);
        for (int c = 0; c < C; ++c) {
            const T bias = b->val.v[static_cast<std::size_t>(c)];
            for (int p = 0; p < HW; ++p)
                out->val.v[static_cast<std::size_t>(c) * HW + p] =
                    x->val.v[static_cast<std::size_t>(c) * HW + p] + bias;
        }
        if (track(out, {x, b}))
            ops_.push_back([x, b, out, C, HW] {
                if (x->needs_grad) {
                    x->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.v.size(); ++i) x->grad.v[i] += out->grad.v[i];
                }
                if (b->needs_grad) {
                    b->ensure_grad();
                    for (int c = 0; c < C; ++c) {
                        T acc = T(0);
                        for (int p = 0; p < HW; ++p)
                            acc += out->grad.v[static_cast<std::size_t>(c) * HW + p];
                        b->grad.v[static_cast<std::size_t>(c)] += acc;
                    }
                }
            });
        return out;
    }

    // ---- conv ----

    Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
        require(x->val.rank() == 3 && w->val.rank() == 4 && w->val.shape[1] == x->val.c(),
                ErrorKind::shape, "conv2d shape mismatch");
        const int Cin = x->val.c(), H = x->val.h(), W = x->val.w();
        const int Cout = w->val.shape[0], kh = w->val.shape[2], kw = w->val.shape[3];
        const int Ho = (H + 2 * pad - kh) / stride + 1;
        const int Wo = (W + 2 * pad - kw) / stride + 1;
        require(Ho >= 1 && Wo >= 1, ErrorKind::shape, "conv2d output collapsed to zero size");
        require(!b || (b->val.rank() == 1 && b->val.shape[0] == Cout), ErrorKind::shape,
                "conv2d bias shape mismatch");
        std::vector<Var> parents = {x, w};
        if (b) parents.push_back(b);
        Var out = fresh(parents, {Cout, Ho, Wo});
        conv_forward(x->val, w->val, b ? &b->val : nullptr, out->val, stride, pad);
        if (track(out, parents))
            ops_.push_back([x, w, b, out, stride, pad] {
                conv_backward(x, w, b, out, stride, pad);
            });
        return out;
    }

    Var upsample2(const Var& x) {
        require(x->val.rank() == 3, ErrorKind::shape, "upsample2 expects CHW");
        const int C = x->val.c(), H = x->val.h(), W = x->val.w();
        Var out = fresh({x}, {C, 2 * H, 2 * W});
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const T v = x->val.at(c, i, j);
                    out->val.at(c, 2 * i, 2 * j) = v;
                    out->val.at(c, 2 * i, 2 * j + 1) = v;
                    out->val.at(c, 2 * i + 1, 2 * j) = v;
                    out->val.at(c, 2 * i + 1, 2 * j + 1) = v;
                }
        if (track(out, {x}))
            ops_.push_back([x, out, C, H, W] {
                x->ensure_grad();
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j)
                            x->grad.at(c, i, j) +=
                                out->grad.at(c, 2 * i, 2 * j) + out->grad.at(c, 2 * i, 2 * j + 1) +
                                out->grad.at(c, 2 * i + 1, 2 * j) +
                                out->grad.at(c, 2 * i + 1, 2 * j + 1);
            });
        return out;
    }

    // global average pool: [C,H,W] -> [C]
    Var mean_spatial(const Var& a) {
        require(a->val.rank() == 3, ErrorKind::shape, "mean_spatial expects CHW");
        const int C = a->val.c(), HW = a->val.h() * a->val.w();
        Var out = fresh({a}, {C});
        for (int c = 0; c < C; ++c) {
            T acc = T(0);
            for (int p = 0; p < HW; ++p) acc += a->val.v[static_cast<std::size_t>(c) * HW + p];
            out->val.v[static_cast<std::size_t>(c)] = acc / static_cast<T>(HW);
        }
        if (track(out, {a}))
            ops_.push_back([a, out, C, HW] {
                a->ensure_grad();
                for (int c = 0; c < C; ++c) {
                    const T g = out->grad.v[static_cast<std::size_t>(c)] / static_cast<T>(HW);
                    for (int p = 0; p < HW; ++p)
                        a->grad.v[static_cast<std::size_t>(c) * HW + p] += g;
                }
            });
        return out;
    }

    // mean over rows: [m, d] -> [d]
    Var mean_rows(const Var& a) {
        require(a->val.rank() == 2, ErrorKind::shape, "mean_rows expects a matrix");
        const int m = a->val.shape[0], d = a->val.shape[1];
        Var out = fresh({a}, {d});
        for (int j = 0; j < d; ++j) {
            T acc = T(0);
            for (int i = 0; i < m; ++i) acc += a->val.v[static_cast<std::size_t>(i) * d + j];
            out->val.v[static_cast<std::size_t>(j)] = acc / static_cast<T>(m);
        }
        if (track(out, {a}))
            ops_.push_back([a, out, m, d] {
                a->ensure_grad();
                for (int j = 0; j < d; ++j) {
                    const T g = out->grad.v[static_cast<std::size_t>(j)] / static_cast<T>(m);
                    for (int i = 0; i < m; ++i) a->grad.v[static_cast<std::size_t>(i) * d + j] += g;
                }
            });
        return out;
    }

    // ---- losses ----

    // mean over elements of (pred - target)^2; target is a constant
    Var mse_against(const Var& pred, const Ten& target) {
        require_same_shape(pred->val, target, "mse_against");
        Var out = fresh({pred}, {1});
        const std::size_t n = pred->val.v.size();
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T r = pred->val.v[i] - target.v[i];
            acc += r * r;
        }
        out->val.v[0] = acc / static_cast<T>(n);
        if (track(out, {pred})) {
            Ten tgt = target;
            ops_.push_back([pred, out, tgt = std::move(tgt), n] {
                pred->ensure_grad();
                const T g = out->grad.v[0] * T(2) / static_cast<T>(n);
                for (std::size_t i = 0; i < n; ++i)
                    pred->grad.v[i] += g * (pred->val.v[i] - tgt.v[i]);
            });
        }
        return out;
    }

    // softmax cross-entropy from logits, single example
    Var cross_entropy_logits(const Var& logits, int label) {
        require(logits->val.rank() == 1, ErrorKind::shape, "cross_entropy expects a vector");
        const int k = logits->val.shape[0];
        require(0 <= label && label < k, ErrorKind::invalid_argument, "label out of range");
        Var out = fresh({logits}, {1});
        T mx = logits->val.v[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits->val.v[static_cast<std::size_t>(j)]);
        T sum = T(0);
        for (int j = 0; j < k; ++j) sum += std::exp(logits->val.v[static_cast<std::size_t>(j)] - mx);
        out->val.v[0] =
            std::log(sum) + mx - logits->val.v[static_cast<std::size_t>(label)];
        if (track(out, {logits}))
            ops_.push_back([logits, out, label, k, mx, sum] {
                logits->ensure_grad();
                const T g = out->grad.v[0];
                for (int j = 0; j < k; ++j) {
                    const T p = std::exp(logits->val.v[static_cast<std::size_t>(j)] - mx) / sum;
                    logits->grad.v[static_cast<std::size_t>(j)] +=
                        g * (p - (j == label ? T(1) : T(0)));
                }
            });
        return out;
    }

    Var add_scalars(const std::vector<Var>& xs) {
        require(!xs.empty(), ErrorKind::invalid_argument, "add_scalars on empty list");
        Var out = fresh(xs, {1});
        T acc = T(0);
        for (const Var& x : xs) acc += x->val.v[0];
        out->val.v[0] = acc;
        if (track(out, xs))
            ops_.push_back([xs, out] {
                for (const Var& x : xs)
                    if (x->needs_grad) {
                        x->ensure_grad();
                        x->grad.v[0] += out->grad.v[0];
                    }
            });
        return out;
    }

  private:
    static T sigmoid_of(T x) { return T(1) / (T(1) + std::exp(-x)); }

    Var fresh(const std::vector<Var>& parents, std::vector<int> shape) {
        auto node = std::make_shared<NodeT<T>>();
        node->val = Ten(std::move(shape));
        if (recording_)
            for (const Var& p : parents)
                if (p && p->needs_grad) {
                    node->needs_grad = true;
                    break;
                }
        return node;
    }

    bool track(const Var& out, const std::vector<Var>& parents) {
        (void)parents;
        if (!recording_ || !out->needs_grad) return false;
        out->ensure_grad();
        for (const Var& p : parents)
            if (p && p->needs_grad) p->ensure_grad();
        return true;
    }

    static void conv_forward(const Ten& x, const Ten& w, const Ten* b, Ten& y, int stride,
                             int pad) {
        const int Cin = x.c(), H = x.h(), W = x.w();
        const int Cout = y.c(), Ho = y.h(), Wo = y.w();
        const int kh = w.shape[2], kw = w.shape[3];
        for (int oc = 0; oc < Cout; ++oc) {
            const T bias = b ? b->v[static_cast<std::size_t>(oc)] : T(0);
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    T acc = bias;
                    for (int ic = 0; ic < Cin; ++ic)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                acc += x.at(ic, iy, ix) *
                                       w.v[((static_cast<std::size_t>(oc) * Cin + ic) * kh + ky) *
                                               kw +
                                           kx];
                            }
                        }
                    y.at(oc, oy, ox) = acc;
                }
        }
    }

    static void conv_backward(const Var& x, const Var& w, const Var& b, const Var& out, int stride,
                              int pad) {
        const Ten& xv = x->val;
        const Ten& wv = w->val;
        const Ten& dy = out->grad;
        const int Cin = xv.c(), H = xv.h(), W = xv.w();
        const int Cout = dy.c(), Ho = dy.h(), Wo = dy.w();
        const int kh = wv.shape[2], kw = wv.shape[3];
        if (x->needs_grad) x->ensure_grad();
        if (w->needs_grad) w->ensure_grad();
        if (b && b->needs_grad) b->ensure_grad();
        for (int oc = 0; oc < Cout; ++oc) {
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    const T g = dy.at(oc, oy, ox);
                    if (g == T(0)) continue;
                    if (b && b->needs_grad) b->grad.v[static_cast<std::size_t>(oc)] += g;
                    for (int ic = 0; ic < Cin; ++ic)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                const std::size_t wi =
                                    ((static_cast<std::size_t>(oc) * Cin + ic) * kh + ky) * kw + kx;
                                if (w->needs_grad) w->grad.v[wi] += g * xv.at(ic, iy, ix);
                                if (x->needs_grad) x->grad.at(ic, iy, ix) += g * wv.v[wi];
                            }
                        }
                }
        }
    }

    bool recording_;
    std::vector<std::function<void()>> ops_;
};

using Tape = TapeT<float>;
template <typename T>
using Var = VarT<T>;

}  // namespace mvc::ad

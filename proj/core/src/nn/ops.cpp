#include "epf/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "epf/error.hpp"

namespace epf::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// c[m x n] (+)= op(a) . op(b); a is stored [m x k] (or [k x m] when trans_a),
// b is stored [k x n] (or [n x k] when trans_b).
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool trans_a, bool trans_b, bool accumulate) {
    const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
               N = static_cast<Eigen::Index>(n);
    MutMap cm(c, M, N);
    if (!accumulate) cm.setZero();
    if (m == 0 || n == 0 || k == 0) return;
    ConstMap am(a, trans_a ? K : M, trans_a ? M : K);
    ConstMap bm(b, trans_b ? N : K, trans_b ? K : N);
    if (!trans_a && !trans_b) cm.noalias() += am * bm;
    else if (trans_a && !trans_b) cm.noalias() += am.transpose() * bm;
    else if (!trans_a && trans_b) cm.noalias() += am * bm.transpose();
    else cm.noalias() += am.transpose() * bm.transpose();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
    }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
    }
}

std::size_t norm_axis(int axis, std::size_t rank) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw ShapeError("axis out of range");
    return static_cast<std::size_t>(a);
}

// outer x axis x inner decomposition around `axis`.
struct Split3 {
    std::size_t outer, mid, inner;
};

Split3 split_at(const Shape& s, std::size_t axis) {
    Split3 r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
    const auto& xv = x.values();
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
    auto xn = x.node();
    auto out = make_result(x.shape(), std::move(y), {x}, nullptr);
    if (out.requires_grad()) {
        // The closure reads the output value through a weak handle to avoid a
        // self-reference cycle.
        std::weak_ptr<Node> self = out.node();
        out.node()->backward = [xn, self, df](const std::vector<double>& g) {
            auto yn = self.lock();
            for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i] * df(xn->value[i], yn->value[i]);
        };
    }
    return out;
}

}  // namespace

// ---- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(y), {a, b}, [an, bn](const std::vector<double>& g) {
        if (an->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
        if (bn->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(y), {a, b}, [an, bn](const std::vector<double>& g) {
        if (an->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
        if (bn->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) bn->grad[i] -= g[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(y), {a, b}, [an, bn](const std::vector<double>& g) {
        if (an->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * bn->value[i];
        if (bn->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i] * an->value[i];
    });
}

Tensor scale(const Tensor& x, double s) {
    std::vector<double> y(x.values());
    for (auto& v : y) v *= s;
    auto xn = x.node();
    return make_result(x.shape(), std::move(y), {x}, [xn, s](const std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i] * s;
    });
}

Tensor add_scalar(const Tensor& x, double s) {
    std::vector<double> y(x.values());
    for (auto& v : y) v += s;
    auto xn = x.node();
    return make_result(x.shape(), std::move(y), {x}, [xn](const std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i];
    });
}

namespace {

std::size_t trailing_repeat(const Tensor& x, const Tensor& b, const char* op) {
    const auto& xs = x.shape();
    const auto& bs = b.shape();
    if (bs.size() > xs.size() || !std::equal(bs.rbegin(), bs.rend(), xs.rbegin())) {
        throw ShapeError(std::string(op) + ": " + shape_string(bs) + " is not a trailing shape of " +
                         shape_string(xs));
    }
    return x.numel() / std::max<std::size_t>(b.numel(), 1);
}

}  // namespace

Tensor add_trailing(const Tensor& x, const Tensor& b) {
    const std::size_t reps = trailing_repeat(x, b, "add_trailing");
    const std::size_t n = b.numel();
    std::vector<double> y(x.values());
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] += b.values()[j];
    auto xn = x.node(), bn = b.node();
    return make_result(x.shape(), std::move(y), {x, b}, [xn, bn, reps, n](const std::vector<double>& g) {
        if (xn->requires_grad) for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i];
        if (bn->requires_grad)
            for (std::size_t r = 0; r < reps; ++r)
                for (std::size_t j = 0; j < n; ++j) bn->grad[j] += g[r * n + j];
    });
}

Tensor mul_trailing(const Tensor& x, const Tensor& b) {
    const std::size_t reps = trailing_repeat(x, b, "mul_trailing");
    const std::size_t n = b.numel();
    std::vector<double> y(x.values());
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] *= b.values()[j];
    auto xn = x.node(), bn = b.node();
    return make_result(x.shape(), std::move(y), {x, b}, [xn, bn, reps, n](const std::vector<double>& g) {
        for (std::size_t r = 0; r < reps; ++r) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t i = r * n + j;
                if (xn->requires_grad) xn->grad[i] += g[i] * bn->value[j];
                if (bn->requires_grad) bn->grad[j] += g[i] * xn->value[i];
            }
        }
    });
}

Tensor affine_rows(const Tensor& x, std::span<const double> scale_by, std::span<const double> shift) {
    const std::size_t rows = x.dim(0);
    if (scale_by.size() != rows || shift.size() != rows) throw ShapeError("affine_rows: factor count");
    const std::size_t inner = x.numel() / std::max<std::size_t>(rows, 1);
    std::vector<double> y(x.values());
    std::vector<double> s(scale_by.begin(), scale_by.end());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < inner; ++j) y[r * inner + j] = y[r * inner + j] * s[r] + shift[r];
    auto xn = x.node();
    return make_result(x.shape(), std::move(y), {x}, [xn, s, inner](const std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i] * s[i / inner];
    });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0 ? v : 0.0; },
                 [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [inv_sqrt_2pi](double v, double) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor silu(const Tensor& x) {
    return unary(
        x, [](double v) { return v / (1.0 + std::exp(-v)); },
        [](double v, double) {
            const double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 + v * (1.0 - s));
        });
}

Tensor softplus(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 20.0 ? v : std::log1p(std::exp(v)); },
        [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor exp(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

// ---- linear algebra -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = trans_a ? a.dim(1) : a.dim(0);
    const std::size_t k = trans_a ? a.dim(0) : a.dim(1);
    const std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
    const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
    if (k != kb) throw ShapeError("matmul: inner dimensions " + std::to_string(k) + " and " + std::to_string(kb));
    std::vector<double> y(m * n);
    gemm(a.values().data(), b.values().data(), y.data(), m, k, n, trans_a, trans_b, false);
    auto an = a.node(), bn = b.node();
    return make_result({m, n}, std::move(y), {a, b},
                       [an, bn, m, k, n, trans_a, trans_b](const std::vector<double>& g) {
                           if (an->requires_grad) {
                               if (!trans_a) gemm(g.data(), bn->value.data(), an->grad.data(), m, n, k, false, !trans_b, true);
                               else gemm(bn->value.data(), g.data(), an->grad.data(), k, n, m, trans_b, true, true);
                           }
                           if (bn->requires_grad) {
                               if (!trans_b) gemm(an->value.data(), g.data(), bn->grad.data(), k, m, n, !trans_a, false, true);
                               else gemm(g.data(), an->value.data(), bn->grad.data(), n, m, k, true, trans_a, true);
                           }
                       });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    require_rank(a, 3, "bmm");
    require_rank(b, 3, "bmm");
    const std::size_t batch = a.dim(0);
    if (b.dim(0) != batch) throw ShapeError("bmm: batch sizes differ");
    const std::size_t m = trans_a ? a.dim(2) : a.dim(1);
    const std::size_t k = trans_a ? a.dim(1) : a.dim(2);
    const std::size_t kb = trans_b ? b.dim(2) : b.dim(1);
    const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
    if (k != kb) throw ShapeError("bmm: inner dimensions differ");
    std::vector<double> y(batch * m * n);
    const std::size_t sa = m * k, sb = k * n, sc = m * n;
    for (std::size_t i = 0; i < batch; ++i) {
        gemm(a.values().data() + i * sa, b.values().data() + i * sb, y.data() + i * sc, m, k, n,
             trans_a, trans_b, false);
    }
    auto an = a.node(), bn = b.node();
    return make_result({batch, m, n}, std::move(y), {a, b},
                       [an, bn, batch, m, k, n, sa, sb, sc, trans_a, trans_b](const std::vector<double>& g) {
                           for (std::size_t i = 0; i < batch; ++i) {
                               const double* gi = g.data() + i * sc;
                               const double* ai = an->value.data() + i * sa;
                               const double* bi = bn->value.data() + i * sb;
                               if (an->requires_grad) {
                                   double* dai = an->grad.data() + i * sa;
                                   if (!trans_a) gemm(gi, bi, dai, m, n, k, false, !trans_b, true);
                                   else gemm(bi, gi, dai, k, n, m, trans_b, true, true);
                               }
                               if (bn->requires_grad) {
                                   double* dbi = bn->grad.data() + i * sb;
                                   if (!trans_b) gemm(ai, gi, dbi, k, m, n, !trans_a, false, true);
                                   else gemm(gi, ai, dbi, n, m, k, true, trans_a, true);
                               }
                           }
                       });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
    require_rank(q, 3, "attention");
    require_rank(k, 3, "attention");
    require_same_shape(k, v, "attention");
    const std::size_t batch = q.dim(0), tq = q.dim(1), tk = k.dim(1), d = q.dim(2);
    if (k.dim(0) != batch || k.dim(2) != d) throw ShapeError("attention: query/key mismatch");
    if (heads == 0 || d % heads != 0) throw ShapeError("attention: heads must divide the width");
    const std::size_t dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    // per-head contiguous copies of a [T x d] slice
    auto take = [dh, d](const double* src, std::size_t t, std::size_t h, std::vector<double>& dst) {
        dst.resize(t * dh);
        for (std::size_t i = 0; i < t; ++i) std::copy_n(src + i * d + h * dh, dh, dst.data() + i * dh);
    };
    auto put = [dh, d](const std::vector<double>& src, std::size_t t, std::size_t h, double* dst, bool add) {
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < dh; ++j) {
                double& o = dst[i * d + h * dh + j];
                o = add ? o + src[i * dh + j] : src[i * dh + j];
            }
    };
    auto probs = [tq, tk, sc](const std::vector<double>& qh, const std::vector<double>& kh, std::size_t dh_,
                              std::vector<double>& p, double* lse, bool have_lse) {
        p.resize(tq * tk);
        gemm(qh.data(), kh.data(), p.data(), tq, dh_, tk, false, true, false);
        Eigen::Map<Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> s(
            p.data(), static_cast<Eigen::Index>(tq), static_cast<Eigen::Index>(tk));
        s *= sc;
        Eigen::Map<Eigen::ArrayXd> l(lse, static_cast<Eigen::Index>(tq));
        if (!have_lse) {
            const Eigen::ArrayXd mx = s.rowwise().maxCoeff();
            l = mx + (s.colwise() - mx).exp().rowwise().sum().log();
        }
        s = (s.colwise() - l).exp();
    };

    std::vector<double> y(batch * tq * d), lse(batch * heads * tq);
    {
        std::vector<double> qh, kh, vh, p, oh(tq * dh);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t h = 0; h < heads; ++h) {
                take(q.values().data() + b * tq * d, tq, h, qh);
                take(k.values().data() + b * tk * d, tk, h, kh);
                take(v.values().data() + b * tk * d, tk, h, vh);
                probs(qh, kh, dh, p, lse.data() + (b * heads + h) * tq, false);
                gemm(p.data(), vh.data(), oh.data(), tq, tk, dh, false, false, false);
                put(oh, tq, h, y.data() + b * tq * d, false);
            }
        }
    }
    auto qn = q.node(), kn = k.node(), vn = v.node();
    auto out = make_result({batch, tq, d}, std::move(y), {q, k, v}, nullptr);
    if (out.requires_grad()) {
        std::weak_ptr<Node> self = out.node();
        out.node()->backward = [=, lse = std::move(lse)](const std::vector<double>& g) mutable {
            auto yn = self.lock();
            std::vector<double> qh, kh, vh, oh, go, p, dp(tq * tk), dq(tq * dh), dk(tk * dh), dv(tk * dh), rs(tq);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t h = 0; h < heads; ++h) {
                    take(qn->value.data() + b * tq * d, tq, h, qh);
                    take(kn->value.data() + b * tk * d, tk, h, kh);
                    take(vn->value.data() + b * tk * d, tk, h, vh);
                    take(yn->value.data() + b * tq * d, tq, h, oh);
                    take(g.data() + b * tq * d, tq, h, go);
                    probs(qh, kh, dh, p, lse.data() + (b * heads + h) * tq, true);
                    if (vn->requires_grad) {
                        gemm(p.data(), go.data(), dv.data(), tk, tq, dh, true, false, false);
                        put(dv, tk, h, vn->grad.data() + b * tk * d, true);
                    }
                    if (!qn->requires_grad && !kn->requires_grad) continue;
                    gemm(go.data(), vh.data(), dp.data(), tq, dh, tk, false, true, false);
                    for (std::size_t i = 0; i < tq; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < dh; ++j) s += go[i * dh + j] * oh[i * dh + j];
                        rs[i] = s;
                    }
                    for (std::size_t i = 0; i < tq; ++i)
                        for (std::size_t j = 0; j < tk; ++j) dp[i * tk + j] = p[i * tk + j] * (dp[i * tk + j] - rs[i]) * sc;
                    if (qn->requires_grad) {
                        gemm(dp.data(), kh.data(), dq.data(), tq, tk, dh, false, false, false);
                        put(dq, tq, h, qn->grad.data() + b * tq * d, true);
                    }
                    if (kn->requires_grad) {
                        gemm(dp.data(), qh.data(), dk.data(), tk, tq, dh, true, false, false);
                        put(dk, tk, h, kn->grad.data() + b * tk * d, true);
                    }
                }
            }
        };
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "linear");
    const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
    if (x.dim(-1) != in) {
        throw ShapeError("linear: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(weight.shape()));
    }
    if (bias.defined() && bias.numel() != out_dim) throw ShapeError("linear: bias size");
    const std::size_t rows = x.numel() / in;
    Shape shape = x.shape();
    shape.back() = out_dim;
    std::vector<double> y(rows * out_dim);
    gemm(x.values().data(), weight.values().data(), y.data(), rows, in, out_dim, false, false, false);
    if (bias.defined()) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < out_dim; ++j) y[r * out_dim + j] += bias.values()[j];
    }
    auto xn = x.node(), wn = weight.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_result(std::move(shape), std::move(y), std::move(parents),
                       [xn, wn, bn, rows, in, out_dim](const std::vector<double>& g) {
                           if (xn->requires_grad) gemm(g.data(), wn->value.data(), xn->grad.data(), rows, out_dim, in, false, true, true);
                           if (wn->requires_grad) gemm(xn->value.data(), g.data(), wn->grad.data(), in, rows, out_dim, true, false, true);
                           if (bn && bn->requires_grad) {
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t j = 0; j < out_dim; ++j) bn->grad[j] += g[r * out_dim + j];
                           }
                       });
}

// ---- normalisation --------------------------------------------------------------

Tensor softmax(const Tensor& x) {
    const std::size_t n = x.dim(-1);
    const std::size_t rows = x.numel() / n;
    std::vector<double> y(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * n;
        double* yr = y.data() + r * n;
        const double mx = *std::max_element(xr, xr + n);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += (yr[j] = std::exp(xr[j] - mx));
        for (std::size_t j = 0; j < n; ++j) yr[j] /= sum;
    }
    auto xn = x.node();
    auto out = make_result(x.shape(), std::move(y), {x}, nullptr);
    if (out.requires_grad()) {
        std::weak_ptr<Node> self = out.node();
        out.node()->backward = [xn, self, rows, n](const std::vector<double>& g) {
            auto yn = self.lock();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = yn->value.data() + r * n;
                const double* gr = g.data() + r * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                for (std::size_t j = 0; j < n; ++j) xn->grad[r * n + j] += yr[j] * (gr[j] - dot);
            }
        };
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t n = x.dim(-1);
    if (gamma.numel() != n || beta.numel() != n) throw ShapeError("layer_norm: parameter size");
    const std::size_t rows = x.numel() / n;
    std::vector<double> y(x.numel()), xhat(x.numel()), inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xr[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[r * n + j] = (xr[j] - mu) * inv_std[r];
            y[r * n + j] = xhat[r * n + j] * gamma.values()[j] + beta.values()[j];
        }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make_result(x.shape(), std::move(y), {x, gamma, beta},
                       [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n](const std::vector<double>& g) {
                           std::vector<double> dxhat(n);
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* gr = g.data() + r * n;
                               const double* hr = xhat.data() + r * n;
                               double mean_d = 0.0, mean_dh = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                   if (gn->requires_grad) gn->grad[j] += gr[j] * hr[j];
                                   if (bn->requires_grad) bn->grad[j] += gr[j];
                                   dxhat[j] = gr[j] * gn->value[j];
                                   mean_d += dxhat[j];
                                   mean_dh += dxhat[j] * hr[j];
                               }
                               if (!xn->requires_grad) continue;
                               mean_d /= static_cast<double>(n);
                               mean_dh /= static_cast<double>(n);
                               for (std::size_t j = 0; j < n; ++j) {
                                   xn->grad[r * n + j] += inv_std[r] * (dxhat[j] - mean_d - hr[j] * mean_dh);
                               }
                           }
                       });
}

Tensor rms_norm(const Tensor& x, const Tensor& gamma, double eps) {
    const std::size_t n = x.dim(-1);
    if (gamma.numel() != n) throw ShapeError("rms_norm: parameter size");
    const std::size_t rows = x.numel() / n;
    std::vector<double> y(x.numel()), inv_rms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * n;
        double ms = 0.0;
        for (std::size_t j = 0; j < n; ++j) ms += xr[j] * xr[j];
        inv_rms[r] = 1.0 / std::sqrt(ms / static_cast<double>(n) + eps);
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] = xr[j] * inv_rms[r] * gamma.values()[j];
    }
    auto xn = x.node(), gn = gamma.node();
    return make_result(x.shape(), std::move(y), {x, gamma},
                       [xn, gn, inv_rms = std::move(inv_rms), rows, n](const std::vector<double>& g) {
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* xr = xn->value.data() + r * n;
                               const double* gr = g.data() + r * n;
                               const double ir = inv_rms[r];
                               double dot = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                   if (gn->requires_grad) gn->grad[j] += gr[j] * xr[j] * ir;
                                   dot += gr[j] * gn->value[j] * xr[j];
                               }
                               if (!xn->requires_grad) continue;
                               const double coef = dot * ir * ir * ir / static_cast<double>(n);
                               for (std::size_t j = 0; j < n; ++j) {
                                   xn->grad[r * n + j] += gr[j] * gn->value[j] * ir - xr[j] * coef;
                               }
                           }
                       });
}

// ---- shape --------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
    }
    auto xn = x.node();
    return make_result(std::move(shape), x.values(), {x}, [xn](const std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xn->grad[i] += g[i];
    });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
    const auto& in_shape = x.shape();
    const std::size_t r = in_shape.size();
    if (perm.size() != r) throw ShapeError("permute: rank mismatch");
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r - 1; i-- > 0;) in_stride[i] = in_stride[i + 1] * in_shape[i + 1];
    Shape out_shape(r);
    std::vector<std::size_t> src_stride(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in_shape[perm[i]];
        src_stride[i] = in_stride[perm[i]];
    }
    // map[o] = source offset of output element o
    const std::size_t n = x.numel();
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        map[o] = src;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            src += src_stride[d];
            if (idx[d] < out_shape[d]) break;
            src -= src_stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    std::vector<double> y(n);
    for (std::size_t o = 0; o < n; ++o) y[o] = x.values()[map[o]];
    auto xn = x.node();
    return make_result(std::move(out_shape), std::move(y), {x}, [xn, map = std::move(map)](const std::vector<double>& g) {
        for (std::size_t o = 0; o < g.size(); ++o) xn->grad[map[o]] += g[o];
    });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
    const std::size_t a = norm_axis(axis, x.rank());
    const auto s = split_at(x.shape(), a);
    if (start + length > s.mid) throw ShapeError("slice out of range of " + shape_string(x.shape()));
    Shape shape = x.shape();
    shape[a] = length;
    std::vector<double> y(s.outer * length * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
        std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>((o * s.mid + start) * s.inner),
                    length * s.inner, y.begin() + static_cast<std::ptrdiff_t>(o * length * s.inner));
    }
    auto xn = x.node();
    return make_result(std::move(shape), std::move(y), {x}, [xn, s, start, length](const std::vector<double>& g) {
        for (std::size_t o = 0; o < s.outer; ++o) {
            const double* src = g.data() + o * length * s.inner;
            double* dst = xn->grad.data() + (o * s.mid + start) * s.inner;
            for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
        }
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    const std::size_t a = norm_axis(axis, parts.front().rank());
    Shape shape = parts.front().shape();
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape ps = p.shape();
        if (ps.size() != shape.size()) throw ShapeError("concat: rank mismatch");
        total += ps[a];
        ps[a] = shape[a];
        if (ps != shape) throw ShapeError("concat: incompatible shapes");
    }
    shape[a] = total;
    const auto s = split_at(shape, a);
    std::vector<double> y(numel(shape));
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t len = p.dim(static_cast<int>(a));
        for (std::size_t o = 0; o < s.outer; ++o) {
            std::copy_n(p.values().begin() + static_cast<std::ptrdiff_t>(o * len * s.inner), len * s.inner,
                        y.begin() + static_cast<std::ptrdiff_t>((o * total + off) * s.inner));
        }
        off += len;
    }
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result(std::move(shape), std::move(y), parts,
                       [nodes, offsets, s, total, a](const std::vector<double>& g) {
                           for (std::size_t k = 0; k < nodes.size(); ++k) {
                               auto& pn = nodes[k];
                               if (!pn->requires_grad) continue;
                               const std::size_t len = pn->shape[a];
                               for (std::size_t o = 0; o < s.outer; ++o) {
                                   const double* src = g.data() + (o * total + offsets[k]) * s.inner;
                                   double* dst = pn->grad.data() + o * len * s.inner;
                                   for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
                               }
                           }
                       });
}

Tensor resize_time(const Tensor& x, std::size_t length) {
    if (x.rank() < 2) throw ShapeError("resize_time needs rank >= 2");
    const auto s = split_at(x.shape(), 1);
    Shape shape = x.shape();
    shape[1] = length;
    const std::size_t keep = std::min(length, s.mid);
    std::vector<double> y(s.outer * length * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(o * s.mid * s.inner), keep * s.inner,
                    y.begin() + static_cast<std::ptrdiff_t>(o * length * s.inner));
    }
    auto xn = x.node();
    return make_result(std::move(shape), std::move(y), {x}, [xn, s, keep, length](const std::vector<double>& g) {
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < keep * s.inner; ++i)
                xn->grad[o * s.mid * s.inner + i] += g[o * length * s.inner + i];
    });
}

// ---- reductions ---------------------------------------------------------------------

Tensor mean(const Tensor& x, int axis) {
    const std::size_t a = norm_axis(axis, x.rank());
    const auto s = split_at(x.shape(), a);
    Shape shape = x.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(a));
    std::vector<double> y(s.outer * s.inner, 0.0);
    const double inv = 1.0 / static_cast<double>(s.mid);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t m = 0; m < s.mid; ++m)
            for (std::size_t i = 0; i < s.inner; ++i)
                y[o * s.inner + i] += x.values()[(o * s.mid + m) * s.inner + i] * inv;
    auto xn = x.node();
    return make_result(std::move(shape), std::move(y), {x}, [xn, s, inv](const std::vector<double>& g) {
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t m = 0; m < s.mid; ++m)
                for (std::size_t i = 0; i < s.inner; ++i)
                    xn->grad[(o * s.mid + m) * s.inner + i] += g[o * s.inner + i] * inv;
    });
}

Tensor sum_all(const Tensor& x) {
    const double total = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    auto xn = x.node();
    return make_result({1}, {total}, {x}, [xn](const std::vector<double>& g) {
        for (auto& v : xn->grad) v += g[0];
    });
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.values()[i] - target.values()[i];
        acc += d * d;
    }
    auto pn = pred.node(), tn = target.node();
    return make_result({1}, {acc / static_cast<double>(n)}, {pred, target}, [pn, tn, n](const std::vector<double>& g) {
        const double c = 2.0 * g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pn->value[i] - tn->value[i];
            if (pn->requires_grad) pn->grad[i] += c * d;
            if (tn->requires_grad) tn->grad[i] -= c * d;
        }
    });
}

// ---- temporal -------------------------------------------------------------------------

namespace {

// Source index for padded position p (in [0, T + pad_l + pad_r)), or -1 for a zero pad.
long pad_source(long p, std::size_t pad_left, std::size_t len, PadMode mode) {
    const long t = p - static_cast<long>(pad_left);
    const long n = static_cast<long>(len);
    if (t >= 0 && t < n) return t;
    switch (mode) {
        case PadMode::Zero: return -1;
        case PadMode::Circular: return ((t % n) + n) % n;
        case PadMode::Replicate: return t < 0 ? 0 : n - 1;
    }
    return -1;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t pad_left,
              std::size_t pad_right, PadMode mode) {
    require_rank(x, 3, "conv1d");
    require_rank(weight, 3, "conv1d");
    const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != cin) throw ShapeError("conv1d: channel mismatch");
    if (bias.defined() && bias.numel() != cout) throw ShapeError("conv1d: bias size");
    if (len + pad_left + pad_right < k) throw ShapeError("conv1d: kernel longer than padded input");
    const std::size_t tout = len + pad_left + pad_right - k + 1;
    const std::size_t rows = cin * k;

    // src[(ci*K + j) * tout + t] = input offset inside one sample, or -1.
    std::vector<long> src(rows * tout);
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t t = 0; t < tout; ++t) {
                const long s = pad_source(static_cast<long>(t + j), pad_left, len, mode);
                src[(ci * k + j) * tout + t] = s < 0 ? -1 : static_cast<long>(ci * len) + s;
            }

    std::vector<double> y(batch * cout * tout);
    std::vector<double> col(rows * tout);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = x.values().data() + b * cin * len;
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = src[i] < 0 ? 0.0 : xb[src[i]];
        double* yb = y.data() + b * cout * tout;
        gemm(weight.values().data(), col.data(), yb, cout, rows, tout, false, false, false);
        if (bias.defined())
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t t = 0; t < tout; ++t) yb[co * tout + t] += bias.values()[co];
    }
    auto xn = x.node(), wn = weight.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_result({batch, cout, tout}, std::move(y), std::move(parents),
                       [xn, wn, bn, src = std::move(src), batch, cin, len, cout, tout, rows](const std::vector<double>& g) {
                           std::vector<double> col(rows * tout), dcol(rows * tout);
                           for (std::size_t b = 0; b < batch; ++b) {
                               const double* gb = g.data() + b * cout * tout;
                               if (wn->requires_grad) {
                                   const double* xb = xn->value.data() + b * cin * len;
                                   for (std::size_t i = 0; i < col.size(); ++i) col[i] = src[i] < 0 ? 0.0 : xb[src[i]];
                                   gemm(gb, col.data(), wn->grad.data(), cout, tout, rows, false, true, true);
                               }
                               if (bn && bn->requires_grad)
                                   for (std::size_t co = 0; co < cout; ++co)
                                       for (std::size_t t = 0; t < tout; ++t) bn->grad[co] += gb[co * tout + t];
                               if (xn->requires_grad) {
                                   gemm(wn->value.data(), gb, dcol.data(), rows, cout, tout, true, false, false);
                                   double* dx = xn->grad.data() + b * cin * len;
                                   for (std::size_t i = 0; i < dcol.size(); ++i)
                                       if (src[i] >= 0) dx[src[i]] += dcol[i];
                               }
                           }
                       });
}

Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 3, "depthwise_causal_conv1d");
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const std::size_t k = weight.dim(1);
    if (weight.dim(0) != ch || bias.numel() != ch) throw ShapeError("depthwise conv: channel mismatch");
    std::vector<double> y(x.numel());
    const auto& xv = x.values();
    const auto& wv = weight.values();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < len; ++t)
            for (std::size_t c = 0; c < ch; ++c) {
                double acc = bias.values()[c];
                for (std::size_t j = 0; j < k; ++j) {
                    const long s = static_cast<long>(t + j) - static_cast<long>(k - 1);
                    if (s >= 0) acc += wv[c * k + j] * xv[(b * len + static_cast<std::size_t>(s)) * ch + c];
                }
                y[(b * len + t) * ch + c] = acc;
            }
    auto xn = x.node(), wn = weight.node(), bn = bias.node();
    return make_result(x.shape(), std::move(y), {x, weight, bias},
                       [xn, wn, bn, batch, len, ch, k](const std::vector<double>& g) {
                           for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t t = 0; t < len; ++t)
                                   for (std::size_t c = 0; c < ch; ++c) {
                                       const double gv = g[(b * len + t) * ch + c];
                                       if (bn->requires_grad) bn->grad[c] += gv;
                                       for (std::size_t j = 0; j < k; ++j) {
                                           const long s = static_cast<long>(t + j) - static_cast<long>(k - 1);
                                           if (s < 0) continue;
                                           const std::size_t xi = (b * len + static_cast<std::size_t>(s)) * ch + c;
                                           if (wn->requires_grad) wn->grad[c * k + j] += gv * xn->value[xi];
                                           if (xn->requires_grad) xn->grad[xi] += gv * wn->value[c * k + j];
                                       }
                                   }
                       });
}

Tensor conv2d_same(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 4, "conv2d_same");
    require_rank(weight, 4, "conv2d_same");
    const std::size_t batch = x.dim(0), cin = x.dim(1), hgt = x.dim(2), wid = x.dim(3);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != cin || weight.dim(3) != k || k % 2 == 0) throw ShapeError("conv2d_same: kernel shape");
    const long pad = static_cast<long>(k / 2);
    const std::size_t plane = hgt * wid;
    const std::size_t rows = cin * k * k;

    std::vector<long> src(rows * plane);
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const std::size_t r = (ci * k + ky) * k + kx;
                for (std::size_t i = 0; i < hgt; ++i)
                    for (std::size_t j = 0; j < wid; ++j) {
                        const long si = static_cast<long>(i + ky) - pad;
                        const long sj = static_cast<long>(j + kx) - pad;
                        const bool inside = si >= 0 && sj >= 0 && si < static_cast<long>(hgt) && sj < static_cast<long>(wid);
                        src[r * plane + i * wid + j] =
                            inside ? static_cast<long>(ci * plane) + si * static_cast<long>(wid) + sj : -1;
                    }
            }

    std::vector<double> y(batch * cout * plane);
    std::vector<double> col(rows * plane);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = x.values().data() + b * cin * plane;
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = src[i] < 0 ? 0.0 : xb[src[i]];
        double* yb = y.data() + b * cout * plane;
        gemm(weight.values().data(), col.data(), yb, cout, rows, plane, false, false, false);
        if (bias.defined())
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t p = 0; p < plane; ++p) yb[co * plane + p] += bias.values()[co];
    }
    auto xn = x.node(), wn = weight.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_result({batch, cout, hgt, wid}, std::move(y), std::move(parents),
                       [xn, wn, bn, src = std::move(src), batch, cin, cout, plane, rows](const std::vector<double>& g) {
                           std::vector<double> col(rows * plane), dcol(rows * plane);
                           for (std::size_t b = 0; b < batch; ++b) {
                               const double* gb = g.data() + b * cout * plane;
                               if (wn->requires_grad) {
                                   const double* xb = xn->value.data() + b * cin * plane;
                                   for (std::size_t i = 0; i < col.size(); ++i) col[i] = src[i] < 0 ? 0.0 : xb[src[i]];
                                   gemm(gb, col.data(), wn->grad.data(), cout, plane, rows, false, true, true);
                               }
                               if (bn && bn->requires_grad)
                                   for (std::size_t co = 0; co < cout; ++co)
                                       for (std::size_t p = 0; p < plane; ++p) bn->grad[co] += gb[co * plane + p];
                               if (xn->requires_grad) {
                                   gemm(wn->value.data(), gb, dcol.data(), rows, cout, plane, true, false, false);
                                   double* dx = xn->grad.data() + b * cin * plane;
                                   for (std::size_t i = 0; i < dcol.size(); ++i)
                                       if (src[i] >= 0) dx[src[i]] += dcol[i];
                               }
                           }
                       });
}

Tensor moving_average(const Tensor& x, std::size_t kernel) {
    require_rank(x, 3, "moving_average");
    if (kernel % 2 == 0) throw ShapeError("moving_average needs an odd kernel");
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const long half = static_cast<long>(kernel / 2);
    const double inv = 1.0 / static_cast<double>(kernel);
    auto src_of = [len](long t) {
        return static_cast<std::size_t>(std::clamp<long>(t, 0, static_cast<long>(len) - 1));
    };
    std::vector<double> y(x.numel(), 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < len; ++t)
            for (long j = -half; j <= half; ++j) {
                const std::size_t s = src_of(static_cast<long>(t) + j);
                for (std::size_t c = 0; c < ch; ++c)
                    y[(b * len + t) * ch + c] += x.values()[(b * len + s) * ch + c] * inv;
            }
    auto xn = x.node();
    return make_result(x.shape(), std::move(y), {x}, [xn, batch, len, ch, half, inv, src_of](const std::vector<double>& g) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < len; ++t)
                for (long j = -half; j <= half; ++j) {
                    const std::size_t s = src_of(static_cast<long>(t) + j);
                    for (std::size_t c = 0; c < ch; ++c)
                        xn->grad[(b * len + s) * ch + c] += g[(b * len + t) * ch + c] * inv;
                }
    });
}

Tensor avg_pool_time(const Tensor& x, std::size_t window) {
    require_rank(x, 3, "avg_pool_time");
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const std::size_t out_len = len / window;
    if (out_len == 0) throw ShapeError("avg_pool_time: window longer than sequence");
    const double inv = 1.0 / static_cast<double>(window);
    std::vector<double> y(batch * out_len * ch, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < out_len * window; ++t)
            for (std::size_t c = 0; c < ch; ++c)
                y[(b * out_len + t / window) * ch + c] += x.values()[(b * len + t) * ch + c] * inv;
    auto xn = x.node();
    return make_result({batch, out_len, ch}, std::move(y), {x}, [xn, batch, len, ch, out_len, window, inv](const std::vector<double>& g) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < out_len * window; ++t)
                for (std::size_t c = 0; c < ch; ++c)
                    xn->grad[(b * len + t) * ch + c] += g[(b * out_len + t / window) * ch + c] * inv;
    });
}

Tensor spectral_amplitude(const Tensor& x, const std::vector<std::size_t>& freqs) {
    require_rank(x, 3, "spectral_amplitude");
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const std::size_t nf = freqs.size();
    const double w = 2.0 * std::numbers::pi / static_cast<double>(len);
    // Per (b, f, c): real and imaginary parts, kept for the backward pass.
    std::vector<double> re(batch * nf * ch, 0.0), im(batch * nf * ch, 0.0);
    std::vector<double> y(batch * nf, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t fi = 0; fi < nf; ++fi) {
            for (std::size_t t = 0; t < len; ++t) {
                const double theta = w * static_cast<double>((freqs[fi] * t) % len);
                const double cs = std::cos(theta), sn = std::sin(theta);
                for (std::size_t c = 0; c < ch; ++c) {
                    const double v = x.values()[(b * len + t) * ch + c];
                    re[(b * nf + fi) * ch + c] += v * cs;
                    im[(b * nf + fi) * ch + c] -= v * sn;
                }
            }
            for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t i = (b * nf + fi) * ch + c;
                y[b * nf + fi] += std::hypot(re[i], im[i]) / static_cast<double>(ch);
            }
        }
    auto xn = x.node();
    return make_result({batch, nf}, std::move(y), {x},
                       [xn, re = std::move(re), im = std::move(im), freqs, batch, len, ch, nf, w](const std::vector<double>& g) {
                           for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t fi = 0; fi < nf; ++fi)
                                   for (std::size_t c = 0; c < ch; ++c) {
                                       const std::size_t i = (b * nf + fi) * ch + c;
                                       const double amp = std::hypot(re[i], im[i]);
                                       if (amp == 0.0) continue;
                                       const double coef = g[b * nf + fi] / (static_cast<double>(ch) * amp);
                                       for (std::size_t t = 0; t < len; ++t) {
                                           const double theta = w * static_cast<double>((freqs[fi] * t) % len);
                                           xn->grad[(b * len + t) * ch + c] +=
                                               coef * (re[i] * std::cos(theta) - im[i] * std::sin(theta));
                                       }
                                   }
                       });
}

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b_in,
                      const Tensor& c_out, const Tensor& d_skip) {
    require_rank(u, 3, "selective_scan");
    const std::size_t batch = u.dim(0), len = u.dim(1), dim = u.dim(2);
    const std::size_t ns = a.dim(1);
    if (delta.shape() != u.shape() || a.dim(0) != dim || b_in.shape() != Shape{batch, len, ns} ||
        c_out.shape() != Shape{batch, len, ns} || d_skip.numel() != dim) {
        throw ShapeError("selective_scan: inconsistent operand shapes");
    }
    std::vector<double> y(u.numel());
    const auto& uv = u.values();
    const auto& dv = delta.values();
    const auto& av = a.values();
    const auto& bv = b_in.values();
    const auto& cv = c_out.values();
    const auto& skip = d_skip.values();
    std::vector<double> h(ns);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t d = 0; d < dim; ++d) {
            std::fill(h.begin(), h.end(), 0.0);
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t i = (b * len + t) * dim + d;
                const std::size_t bt = (b * len + t) * ns;
                double acc = skip[d] * uv[i];
                for (std::size_t n = 0; n < ns; ++n) {
                    h[n] = std::exp(dv[i] * av[d * ns + n]) * h[n] + dv[i] * bv[bt + n] * uv[i];
                    acc += cv[bt + n] * h[n];
                }
                y[i] = acc;
            }
        }
    auto un = u.node(), dn = delta.node(), an = a.node(), bn = b_in.node(), cn = c_out.node(), sn = d_skip.node();
    return make_result(u.shape(), std::move(y), {u, delta, a, b_in, c_out, d_skip},
                       [un, dn, an, bn, cn, sn, batch, len, dim, ns](const std::vector<double>& g) {
                           const auto& uv = un->value;
                           const auto& dv = dn->value;
                           const auto& av = an->value;
                           const auto& bv = bn->value;
                           const auto& cv = cn->value;
                           const auto& skip = sn->value;
                           // States are recomputed per (batch, channel) so memory stays O(T * N).
                           std::vector<double> hs((len + 1) * ns), dh(ns);
                           for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t d = 0; d < dim; ++d) {
                                   std::fill(hs.begin(), hs.begin() + static_cast<std::ptrdiff_t>(ns), 0.0);
                                   for (std::size_t t = 0; t < len; ++t) {
                                       const std::size_t i = (b * len + t) * dim + d;
                                       const std::size_t bt = (b * len + t) * ns;
                                       for (std::size_t n = 0; n < ns; ++n)
                                           hs[(t + 1) * ns + n] = std::exp(dv[i] * av[d * ns + n]) * hs[t * ns + n] +
                                                                  dv[i] * bv[bt + n] * uv[i];
                                   }
                                   std::fill(dh.begin(), dh.end(), 0.0);
                                   for (std::size_t t = len; t-- > 0;) {
                                       const std::size_t i = (b * len + t) * dim + d;
                                       const std::size_t bt = (b * len + t) * ns;
                                       const double gy = g[i];
                                       if (sn->requires_grad) sn->grad[d] += gy * uv[i];
                                       double du = gy * skip[d];
                                       double ddelta = 0.0;
                                       for (std::size_t n = 0; n < ns; ++n) {
                                           const double ht = hs[(t + 1) * ns + n];
                                           const double hprev = hs[t * ns + n];
                                           if (cn->requires_grad) cn->grad[bt + n] += gy * ht;
                                           dh[n] += gy * cv[bt + n];
                                           const double decay = std::exp(dv[i] * av[d * ns + n]);
                                           const double g_decay = dh[n] * hprev * decay;
                                           ddelta += g_decay * av[d * ns + n] + dh[n] * bv[bt + n] * uv[i];
                                           if (an->requires_grad) an->grad[d * ns + n] += g_decay * dv[i];
                                           if (bn->requires_grad) bn->grad[bt + n] += dh[n] * dv[i] * uv[i];
                                           du += dh[n] * dv[i] * bv[bt + n];
                                           dh[n] *= decay;
                                       }
                                       if (un->requires_grad) un->grad[i] += du;
                                       if (dn->requires_grad) dn->grad[i] += ddelta;
                                   }
                               }
                       });
}

}  // namespace epf::nn

namespace epf::nn {

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    const std::size_t rows = x.dim(0);
    if (s.numel() != rows) throw ShapeError("scale_rows: factor count");
    const std::size_t inner = x.numel() / std::max<std::size_t>(rows, 1);
    std::vector<double> y(x.values());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s.values()[i / inner];
    auto xn = x.node(), sn = s.node();
    return make_result(x.shape(), std::move(y), {x, s}, [xn, sn, inner](const std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xn->requires_grad) xn->grad[i] += g[i] * sn->value[i / inner];
            if (sn->requires_grad) sn->grad[i / inner] += g[i] * xn->value[i];
        }
    });
}

Tensor lstm_sequence(const Tensor& x_proj, const Tensor& w_hh) {
    require_rank(x_proj, 3, "lstm_sequence");
    const std::size_t batch = x_proj.dim(0), len = x_proj.dim(1), h = w_hh.dim(0);
    const std::size_t g4 = 4 * h;
    if (x_proj.dim(2) != g4 || w_hh.dim(1) != g4) throw ShapeError("lstm_sequence: gate width");

    auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
    // acts[b, t] = (i, f, g, o) after their nonlinearities; cells[b, t] = c_t.
    std::vector<double> acts(batch * len * g4), cells(batch * len * h), hs(batch * len * h);
    std::vector<double> hprev(batch * h, 0.0), cprev(batch * h, 0.0), z(batch * g4);
    const auto& xp = x_proj.values();
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(xp.begin() + static_cast<std::ptrdiff_t>((b * len + t) * g4), g4,
                        z.begin() + static_cast<std::ptrdiff_t>(b * g4));
        gemm(hprev.data(), w_hh.values().data(), z.data(), batch, h, g4, false, false, true);
        for (std::size_t b = 0; b < batch; ++b) {
            double* a = acts.data() + (b * len + t) * g4;
            const double* zb = z.data() + b * g4;
            for (std::size_t j = 0; j < h; ++j) {
                a[j] = sig(zb[j]);
                a[h + j] = sig(zb[h + j]);
                a[2 * h + j] = std::tanh(zb[2 * h + j]);
                a[3 * h + j] = sig(zb[3 * h + j]);
                const double c = a[h + j] * cprev[b * h + j] + a[j] * a[2 * h + j];
                cprev[b * h + j] = c;
                hprev[b * h + j] = a[3 * h + j] * std::tanh(c);
                cells[(b * len + t) * h + j] = c;
                hs[(b * len + t) * h + j] = hprev[b * h + j];
            }
        }
    }
    auto xn = x_proj.node(), wn = w_hh.node();
    std::vector<double> out = hs;
    return make_result({batch, len, h}, std::move(out), {x_proj, w_hh},
                       [xn, wn, acts = std::move(acts), cells = std::move(cells), hs = std::move(hs), batch, len, h, g4](
                           const std::vector<double>& g) {
                           std::vector<double> dh_next(batch * h, 0.0), dc_next(batch * h, 0.0);
                           std::vector<double> dz(batch * g4), hp(batch * h);
                           for (std::size_t t = len; t-- > 0;) {
                               for (std::size_t b = 0; b < batch; ++b) {
                                   const double* a = acts.data() + (b * len + t) * g4;
                                   for (std::size_t j = 0; j < h; ++j) {
                                       const std::size_t k = b * h + j;
                                       const double c = cells[(b * len + t) * h + j];
                                       const double c_prev = t > 0 ? cells[(b * len + t - 1) * h + j] : 0.0;
                                       const double tc = std::tanh(c);
                                       const double dh = g[(b * len + t) * h + j] + dh_next[k];
                                       const double dc = dc_next[k] + dh * a[3 * h + j] * (1.0 - tc * tc);
                                       const double i = a[j], f = a[h + j], gg = a[2 * h + j], o = a[3 * h + j];
                                       double* dzb = dz.data() + b * g4;
                                       dzb[j] = dc * gg * i * (1.0 - i);
                                       dzb[h + j] = dc * c_prev * f * (1.0 - f);
                                       dzb[2 * h + j] = dc * i * (1.0 - gg * gg);
                                       dzb[3 * h + j] = dh * tc * o * (1.0 - o);
                                       dc_next[k] = dc * f;
                                       hp[k] = t > 0 ? hs[(b * len + t - 1) * h + j] : 0.0;
                                   }
                               }
                               if (xn->requires_grad)
                                   for (std::size_t b = 0; b < batch; ++b)
                                       for (std::size_t j = 0; j < g4; ++j) xn->grad[(b * len + t) * g4 + j] += dz[b * g4 + j];
                               if (wn->requires_grad) gemm(hp.data(), dz.data(), wn->grad.data(), h, batch, g4, true, false, true);
                               gemm(dz.data(), wn->value.data(), dh_next.data(), batch, g4, h, false, true, false);
                           }
                       });
}

}  // namespace epf::nn

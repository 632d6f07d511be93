#include "vcsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vcsr/kernels.hpp"

namespace vcsr {

namespace {

using detail::Node;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

// Softmax of src[0..n) into dst, max-shifted so kMaskLogit entries underflow
// to exactly zero.
void softmax_row(const double* src, double* dst, int n) {
    double m = src[0];
    for (int i = 1; i < n; ++i) m = std::max(m, src[i]);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        dst[i] = std::exp(src[i] - m);
        s += dst[i];
    }
    for (int i = 0; i < n; ++i) dst[i] /= s;
}

// Given p = softmax(z) and dp, accumulates dz += J_softmax^T dp.
void softmax_backward_row(const double* p, const double* dp, double* dz, int n) {
    double inner = 0.0;
    for (int i = 0; i < n; ++i) inner += dp[i] * p[i];
    for (int i = 0; i < n; ++i) dz[i] += p[i] * (dp[i] - inner);
}

}  // namespace

int argmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values().begin(), a.values().end());
    for (int64_t i = 0; i < b.numel(); ++i) out[i] += b.at(i);
    return detail::make_op(a.shape(), std::move(out), "add", {a, b}, [](Node& n) {
        for (auto& in : n.inputs) {
            if (!in->requires_grad) continue;
            for (size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values().begin(), a.values().end());
    for (int64_t i = 0; i < b.numel(); ++i) out[i] -= b.at(i);
    return detail::make_op(a.shape(), std::move(out), "sub", {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[0]->grad[i] += n.grad[i];
        if (n.inputs[1]->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) n.inputs[1]->grad[i] -= n.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.at(i) * b.at(i);
    return detail::make_op(a.shape(), std::move(out), "mul", {a, b}, [](Node& n) {
        auto& na = n.inputs[0];
        auto& nb = n.inputs[1];
        for (size_t i = 0; i < n.grad.size(); ++i) {
            if (na->requires_grad) na->grad[i] += n.grad[i] * nb->value[i];
            if (nb->requires_grad) nb->grad[i] += n.grad[i] * na->value[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    require(std::isfinite(c), "scale: factor must be finite");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = c * a.at(i);
    return detail::make_op(a.shape(), std::move(out), "scale", {a}, [c](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += c * n.grad[i];
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
    return detail::make_op(a.shape(), std::move(out), "relu", {a}, [](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (in->value[i] > 0.0) in->grad[i] += n.grad[i];
    });
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) {
        if (a.at(i) <= 0.0)
            throw std::invalid_argument("log: non-positive entry " + std::to_string(a.at(i)));
        out[i] = std::log(a.at(i));
    }
    return detail::make_op(a.shape(), std::move(out), "log", {a}, [](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i] / in->value[i];
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require(x.rank() == 2 && v.rank() == 1, "add_rowvec: expects [n x d] and [d]");
    require(x.dim(1) == v.dim(0), "add_rowvec: width mismatch " + shape_str(x.shape()) + " vs " +
                                      shape_str(v.shape()));
    const int rows = x.dim(0), d = x.dim(1);
    std::vector<double> out(x.values().begin(), x.values().end());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) out[static_cast<int64_t>(i) * d + j] += v.at(j);
    return detail::make_op(x.shape(), std::move(out), "add_rowvec", {x, v}, [rows, d](Node& n) {
        auto& nx = n.inputs[0];
        auto& nv = n.inputs[1];
        if (nx->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) nx->grad[i] += n.grad[i];
        if (nv->requires_grad)
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < d; ++j) nv->grad[j] += n.grad[static_cast<int64_t>(i) * d + j];
    });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    require(numel_of(shape) == a.numel(), "reshape: cannot view " + shape_str(a.shape()) + " as " +
                                              shape_str(shape));
    std::vector<double> out(a.values().begin(), a.values().end());
    return detail::make_op(shape, std::move(out), "reshape", {a}, [](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
    });
}

Tensor row(const Tensor& x, int i) {
    require(x.rank() == 2, "row: expects a matrix, got " + shape_str(x.shape()));
    require(i >= 0 && i < x.dim(0), "row: index " + std::to_string(i) + " out of range");
    const int d = x.dim(1);
    std::vector<double> out(x.values().begin() + static_cast<int64_t>(i) * d,
                            x.values().begin() + static_cast<int64_t>(i + 1) * d);
    return detail::make_op({d}, std::move(out), "row", {x}, [i, d](Node& n) {
        auto& in = n.inputs[0];
        for (int j = 0; j < d; ++j) in->grad[static_cast<int64_t>(i) * d + j] += n.grad[j];
    });
}

Tensor rows(const Tensor& x, int r0, int r1) {
    require(x.rank() == 2, "rows: expects a matrix, got " + shape_str(x.shape()));
    require(0 <= r0 && r0 < r1 && r1 <= x.dim(0),
            "rows: bad range [" + std::to_string(r0) + ", " + std::to_string(r1) + ") for " +
                shape_str(x.shape()));
    const int d = x.dim(1);
    std::vector<double> out(x.values().begin() + static_cast<int64_t>(r0) * d,
                            x.values().begin() + static_cast<int64_t>(r1) * d);
    return detail::make_op({r1 - r0, d}, std::move(out), "rows", {x}, [r0, d](Node& n) {
        auto& in = n.inputs[0];
        const int64_t base = static_cast<int64_t>(r0) * d;
        for (size_t i = 0; i < n.grad.size(); ++i) in->grad[base + i] += n.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    int d = -1;
    int total = 0;
    std::vector<int> counts;
    counts.reserve(parts.size());
    for (const auto& p : parts) {
        require(p.defined() && (p.rank() == 1 || p.rank() == 2),
                "concat_rows: pieces must be vectors or matrices");
        const int pd = p.rank() == 1 ? p.dim(0) : p.dim(1);
        if (d < 0) d = pd;
        require(pd == d, "concat_rows: width mismatch, got " + std::to_string(pd) +
                             " after " + std::to_string(d));
        const int pr = p.rank() == 1 ? 1 : p.dim(0);
        counts.push_back(pr);
        total += pr;
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total) * d);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return detail::make_op({total, d}, std::move(out), "concat_rows", parts,
                           [counts, d](Node& n) {
                               int64_t off = 0;
                               for (size_t k = 0; k < n.inputs.size(); ++k) {
                                   auto& in = n.inputs[k];
                                   const int64_t count = static_cast<int64_t>(counts[k]) * d;
                                   if (in->requires_grad)
                                       for (int64_t i = 0; i < count; ++i)
                                           in->grad[i] += n.grad[off + i];
                                   off += count;
                               }
                           });
}

Tensor stack_scalars(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "stack_scalars: no inputs");
    std::vector<double> out;
    out.reserve(parts.size());
    for (const auto& p : parts) {
        require(p.defined() && p.numel() == 1, "stack_scalars: pieces must hold one value");
        out.push_back(p.at(0));
    }
    return detail::make_op({static_cast<int>(parts.size())}, std::move(out), "stack_scalars",
                           parts, [](Node& n) {
                               for (size_t k = 0; k < n.inputs.size(); ++k)
                                   if (n.inputs[k]->requires_grad)
                                       n.inputs[k]->grad[0] += n.grad[k];
                           });
}

Tensor element(const Tensor& v, int i) {
    require(v.rank() == 1, "element: expects a vector, got " + shape_str(v.shape()));
    require(i >= 0 && i < v.dim(0), "element: index " + std::to_string(i) + " out of range");
    return detail::make_op({}, {v.at(i)}, "element", {v},
                           [i](Node& n) { n.inputs[0]->grad[i] += n.grad[0]; });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    require(table.rank() == 2, "gather_rows: table must be a matrix");
    require(!ids.empty(), "gather_rows: no ids");
    const int v = table.dim(0), d = table.dim(1);
    std::vector<double> out;
    out.reserve(ids.size() * static_cast<size_t>(d));
    for (int id : ids) {
        require(id >= 0 && id < v, "gather_rows: id " + std::to_string(id) + " outside table of " +
                                       std::to_string(v) + " rows");
        out.insert(out.end(), table.values().begin() + static_cast<int64_t>(id) * d,
                   table.values().begin() + static_cast<int64_t>(id + 1) * d);
    }
    return detail::make_op({static_cast<int>(ids.size()), d}, std::move(out), "gather_rows",
                           {table}, [ids, d](Node& n) {
                               auto& in = n.inputs[0];
                               for (size_t r = 0; r < ids.size(); ++r) {
                                   const int64_t src = static_cast<int64_t>(r) * d;
                                   const int64_t dst = static_cast<int64_t>(ids[r]) * d;
                                   for (int j = 0; j < d; ++j)
                                       in->grad[dst + j] += n.grad[src + j];
                               }
                           });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a.at(i);
    return detail::make_op({}, {s}, "sum", {a}, [](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += n.grad[0];
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a.at(i);
    const double inv = 1.0 / static_cast<double>(a.numel());
    return detail::make_op({}, {s * inv}, "mean_all", {a}, [inv](Node& n) {
        auto& in = n.inputs[0];
        for (size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += inv * n.grad[0];
    });
}

Tensor mean_rows(const Tensor& x) {
    require(x.rank() == 2, "mean_rows: expects a matrix, got " + shape_str(x.shape()));
    const int rows = x.dim(0), d = x.dim(1);
    std::vector<double> out(d, 0.0);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) out[j] += x.at(i, j);
    const double inv = 1.0 / rows;
    for (double& o : out) o *= inv;
    return detail::make_op({d}, std::move(out), "mean_rows", {x}, [rows, d, inv](Node& n) {
        auto& in = n.inputs[0];
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < d; ++j) in->grad[static_cast<int64_t>(i) * d + j] += inv * n.grad[j];
    });
}

Tensor dot(const Tensor& u, const Tensor& v) {
    require(u.rank() == 1 && v.rank() == 1 && u.dim(0) == v.dim(0),
            "dot: expects equal-length vectors, got " + shape_str(u.shape()) + " and " +
                shape_str(v.shape()));
    double s = 0.0;
    for (int64_t i = 0; i < u.numel(); ++i) s += u.at(i) * v.at(i);
    return detail::make_op({}, {s}, "dot", {u, v}, [](Node& n) {
        auto& nu = n.inputs[0];
        auto& nv = n.inputs[1];
        const double g = n.grad[0];
        for (size_t i = 0; i < nu->value.size(); ++i) {
            if (nu->requires_grad) nu->grad[i] += g * nv->value[i];
            if (nv->requires_grad) nv->grad[i] += g * nu->value[i];
        }
    });
}

Tensor logsumexp(const Tensor& v) {
    require(v.rank() == 1, "logsumexp: expects a vector, got " + shape_str(v.shape()));
    const int n = v.dim(0);
    std::vector<double> p(n);
    softmax_row(v.values().data(), p.data(), n);
    double m = v.at(0);
    for (int i = 1; i < n; ++i) m = std::max(m, v.at(i));
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(v.at(i) - m);
    return detail::make_op({}, {m + std::log(s)}, "logsumexp", {v}, [p](Node& n_) {
        auto& in = n_.inputs[0];
        for (size_t i = 0; i < p.size(); ++i) in->grad[i] += n_.grad[0] * p[i];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
            "matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    detail::mm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
    return detail::make_op({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& nd) {
        auto& na = nd.inputs[0];
        auto& nb = nd.inputs[1];
        if (na->requires_grad)
            detail::mm_abt_acc(nd.grad.data(), nb->value.data(), na->grad.data(), m, n, k);
        if (nb->requires_grad)
            detail::mm_atb_acc(na->value.data(), nd.grad.data(), nb->grad.data(), m, k, n);
    });
}

Tensor matvec(const Tensor& a, const Tensor& v) {
    require(a.rank() == 2 && v.rank() == 1 && a.dim(1) == v.dim(0),
            "matvec: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(v.shape()));
    const int m = a.dim(0), k = a.dim(1);
    std::vector<double> out(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += a.at(i, p) * v.at(p);
        out[i] = s;
    }
    return detail::make_op({m}, std::move(out), "matvec", {a, v}, [m, k](Node& nd) {
        auto& na = nd.inputs[0];
        auto& nv = nd.inputs[1];
        for (int i = 0; i < m; ++i) {
            const double g = nd.grad[i];
            const int64_t base = static_cast<int64_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                if (na->requires_grad) na->grad[base + p] += g * nv->value[p];
                if (nv->requires_grad) nv->grad[p] += g * na->value[base + p];
            }
        }
    });
}

Tensor vecmat(const Tensor& v, const Tensor& b) {
    require(v.rank() == 1 && b.rank() == 2 && v.dim(0) == b.dim(0),
            "vecmat: incompatible shapes " + shape_str(v.shape()) + " and " +
                shape_str(b.shape()));
    const int k = v.dim(0), n = b.dim(1);
    std::vector<double> out(n, 0.0);
    for (int p = 0; p < k; ++p) {
        const double a = v.at(p);
        for (int j = 0; j < n; ++j) out[j] += a * b.at(p, j);
    }
    return detail::make_op({n}, std::move(out), "vecmat", {v, b}, [k, n](Node& nd) {
        auto& nv = nd.inputs[0];
        auto& nb = nd.inputs[1];
        for (int p = 0; p < k; ++p) {
            const int64_t base = static_cast<int64_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += nd.grad[j] * nb->value[base + j];
                if (nb->requires_grad) nb->grad[base + j] += nv->value[p] * nd.grad[j];
            }
            if (nv->requires_grad) nv->grad[p] += acc;
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(w.rank() == 2 && b.rank() == 1 && b.dim(0) == w.dim(1),
            "linear: weight " + shape_str(w.shape()) + " and bias " + shape_str(b.shape()) +
                " do not agree");
    require(x.rank() == 1 || x.rank() == 2, "linear: input must be a vector or matrix");
    const bool vec_in = x.rank() == 1;
    const int din = vec_in ? x.dim(0) : x.dim(1);
    require(din == w.dim(0), "linear: input width " + std::to_string(din) +
                                 " does not match weight " + shape_str(w.shape()));
    const int m = vec_in ? 1 : x.dim(0);
    const int dout = w.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * dout, 0.0);
    detail::mm_acc(x.values().data(), w.values().data(), out.data(), m, din, dout);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < dout; ++j) out[static_cast<int64_t>(i) * dout + j] += b.at(j);
    Shape out_shape = vec_in ? Shape{dout} : Shape{m, dout};
    return detail::make_op(out_shape, std::move(out), "linear", {x, w, b},
                           [m, din, dout](Node& nd) {
                               auto& nx = nd.inputs[0];
                               auto& nw = nd.inputs[1];
                               auto& nb = nd.inputs[2];
                               if (nx->requires_grad)
                                   detail::mm_abt_acc(nd.grad.data(), nw->value.data(),
                                                      nx->grad.data(), m, dout, din);
                               if (nw->requires_grad)
                                   detail::mm_atb_acc(nx->value.data(), nd.grad.data(),
                                                      nw->grad.data(), m, din, dout);
                               if (nb->requires_grad)
                                   for (int i = 0; i < m; ++i)
                                       for (int j = 0; j < dout; ++j)
                                           nb->grad[j] += nd.grad[static_cast<int64_t>(i) * dout + j];
                           });
}

Tensor softmax_lastdim(const Tensor& x) {
    require(x.rank() == 1 || x.rank() == 2, "softmax_lastdim: expects a vector or matrix");
    const int rows = x.rank() == 1 ? 1 : x.dim(0);
    const int cols = x.rank() == 1 ? x.dim(0) : x.dim(1);
    std::vector<double> out(x.numel());
    for (int i = 0; i < rows; ++i)
        softmax_row(x.values().data() + static_cast<int64_t>(i) * cols,
                    out.data() + static_cast<int64_t>(i) * cols, cols);
    return detail::make_op(x.shape(), std::move(out), "softmax_lastdim", {x},
                           [rows, cols](Node& nd) {
                               auto& in = nd.inputs[0];
                               for (int i = 0; i < rows; ++i) {
                                   const int64_t base = static_cast<int64_t>(i) * cols;
                                   softmax_backward_row(nd.value.data() + base,
                                                        nd.grad.data() + base,
                                                        in->grad.data() + base, cols);
                               }
                           });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    require(x.rank() == 1 || x.rank() == 2, "layer_norm: input must be a vector or matrix");
    const int rows = x.rank() == 1 ? 1 : x.dim(0);
    const int d = x.rank() == 1 ? x.dim(0) : x.dim(1);
    require(gamma.rank() == 1 && gamma.dim(0) == d && beta.rank() == 1 && beta.dim(0) == d,
            "layer_norm: gain/bias must be [" + std::to_string(d) + "]");
    constexpr double kEps = 1e-5;
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (int i = 0; i < rows; ++i) {
        const int64_t base = static_cast<int64_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x.at(base + j);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x.at(base + j) - mu;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std[i] = inv;
        for (int j = 0; j < d; ++j) {
            xhat[base + j] = (x.at(base + j) - mu) * inv;
            out[base + j] = gamma.at(j) * xhat[base + j] + beta.at(j);
        }
    }
    return detail::make_op(
        x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
        [rows, d, xhat, inv_std](Node& nd) {
            auto& nx = nd.inputs[0];
            auto& ng = nd.inputs[1];
            auto& nb = nd.inputs[2];
            for (int i = 0; i < rows; ++i) {
                const int64_t base = static_cast<int64_t>(i) * d;
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double g = nd.grad[base + j];
                    if (ng->requires_grad) ng->grad[j] += g * xhat[base + j];
                    if (nb->requires_grad) nb->grad[j] += g;
                    const double dxh = g * ng->value[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat[base + j];
                }
                mean_dxhat /= d;
                mean_dxhat_xhat /= d;
                if (nx->requires_grad) {
                    for (int j = 0; j < d; ++j) {
                        const double dxh = nd.grad[base + j] * ng->value[j];
                        nx->grad[base + j] +=
                            inv_std[i] * (dxh - mean_dxhat - xhat[base + j] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

Tensor gumbel_softmax(const Tensor& logits, double temperature, bool hard, Rng& rng,
                      int* argmax_out) {
    require(logits.rank() == 1, "gumbel_softmax: expects a logit vector, got " +
                                    shape_str(logits.shape()));
    require(temperature > 0.0, "gumbel_softmax: temperature must be positive");
    const int n = logits.dim(0);
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = (logits.at(i) + rng.gumbel()) / temperature;
    std::vector<double> soft(n);
    softmax_row(z.data(), soft.data(), n);
    const int a = argmax(soft);
    if (argmax_out) *argmax_out = a;
    std::vector<double> out;
    if (hard) {
        out.assign(n, 0.0);
        out[a] = 1.0;
    } else {
        out = soft;
    }
    // Straight-through: the hard one-hot forward reuses the soft weights'
    // Jacobian, so both modes backpropagate identically.
    return detail::make_op({n}, std::move(out), "gumbel_softmax", {logits},
                           [soft, temperature](Node& nd) {
                               auto& in = nd.inputs[0];
                               const int n_ = static_cast<int>(soft.size());
                               std::vector<double> dz(n_, 0.0);
                               softmax_backward_row(soft.data(), nd.grad.data(), dz.data(), n_);
                               for (int i = 0; i < n_; ++i)
                                   in->grad[i] += dz[i] / temperature;
                           });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
    require(u.rank() == 1 && v.rank() == 1 && u.dim(0) == v.dim(0),
            "cosine_similarity: expects equal-length vectors, got " + shape_str(u.shape()) +
                " and " + shape_str(v.shape()));
    const int n = u.dim(0);
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (int i = 0; i < n; ++i) {
        uu += u.at(i) * u.at(i);
        vv += v.at(i) * v.at(i);
        uv += u.at(i) * v.at(i);
    }
    if (uu == 0.0 || vv == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm input");
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    const double c = uv / (nu * nv);
    return detail::make_op({}, {c}, "cosine_similarity", {u, v}, [nu, nv, c](Node& nd) {
        auto& a = nd.inputs[0];
        auto& b = nd.inputs[1];
        const double g = nd.grad[0];
        const double inv = 1.0 / (nu * nv);
        for (size_t i = 0; i < a->value.size(); ++i) {
            if (a->requires_grad)
                a->grad[i] += g * (b->value[i] * inv - c * a->value[i] / (nu * nu));
            if (b->requires_grad)
                b->grad[i] += g * (a->value[i] * inv - c * b->value[i] / (nv * nv));
        }
    });
}

Tensor cross_entropy(const Tensor& logits, int target) {
    require(logits.rank() == 1, "cross_entropy: expects a logit vector, got " +
                                    shape_str(logits.shape()));
    const int n = logits.dim(0);
    require(target >= 0 && target < n, "cross_entropy: target " + std::to_string(target) +
                                           " outside " + std::to_string(n) + " classes");
    std::vector<double> p(n);
    softmax_row(logits.values().data(), p.data(), n);
    double m = logits.at(0);
    for (int i = 1; i < n; ++i) m = std::max(m, logits.at(i));
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(logits.at(i) - m);
    const double loss = m + std::log(s) - logits.at(target);
    return detail::make_op({}, {loss}, "cross_entropy", {logits}, [p, target](Node& nd) {
        auto& in = nd.inputs[0];
        const double g = nd.grad[0];
        for (size_t i = 0; i < p.size(); ++i)
            in->grad[i] += g * (p[i] - (static_cast<int>(i) == target ? 1.0 : 0.0));
    });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            int block, std::vector<double>* attn_out) {
    require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2,
            "multi_head_attention: q/k/v must be matrices");
    const int nq = q.dim(0), d = q.dim(1), nk = k.dim(0);
    require(k.dim(1) == d && v.dim(1) == d && v.dim(0) == nk,
            "multi_head_attention: shape mismatch between q " + shape_str(q.shape()) + ", k " +
                shape_str(k.shape()) + ", v " + shape_str(v.shape()));
    require(heads > 0 && d % heads == 0, "multi_head_attention: width " + std::to_string(d) +
                                             " not divisible by " + std::to_string(heads) +
                                             " heads");
    if (block > 0)
        require(nq == nk && nq % block == 0,
                "multi_head_attention: block " + std::to_string(block) +
                    " must evenly split square attention of " + std::to_string(nq) + " rows");
    const int dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    const int cols = block > 0 ? block : nk;

    const double* qv = q.values().data();
    const double* kv = k.values().data();
    const double* vv = v.values().data();
    std::vector<double> attn(static_cast<size_t>(heads) * nq * cols);
    std::vector<double> out(static_cast<size_t>(nq) * d, 0.0);
    std::vector<double> s(cols);
    for (int h = 0; h < heads; ++h) {
        const int ho = h * dh;
        for (int i = 0; i < nq; ++i) {
            const int j0 = block > 0 ? (i / block) * block : 0;
            const double* qi = qv + static_cast<int64_t>(i) * d + ho;
            for (int j = 0; j < cols; ++j) {
                const double* kj = kv + static_cast<int64_t>(j0 + j) * d + ho;
                double acc = 0.0;
                for (int t = 0; t < dh; ++t) acc += qi[t] * kj[t];
                s[j] = sc * acc;
            }
            double* a_row = attn.data() + (static_cast<int64_t>(h) * nq + i) * cols;
            softmax_row(s.data(), a_row, cols);
            double* oi = out.data() + static_cast<int64_t>(i) * d + ho;
            for (int j = 0; j < cols; ++j) {
                const double w = a_row[j];
                const double* vj = vv + static_cast<int64_t>(j0 + j) * d + ho;
                for (int t = 0; t < dh; ++t) oi[t] += w * vj[t];
            }
        }
    }
    if (attn_out) *attn_out = attn;

    return detail::make_op(
        {nq, d}, std::move(out), "multi_head_attention", {q, k, v},
        [heads, nq, d, dh, sc, block, cols, attn](Node& nd) {
            auto& nq_in = nd.inputs[0];
            auto& nk_in = nd.inputs[1];
            auto& nv_in = nd.inputs[2];
            std::vector<double> da(cols), ds(cols);
            for (int h = 0; h < heads; ++h) {
                const int ho = h * dh;
                for (int i = 0; i < nq; ++i) {
                    const int j0 = block > 0 ? (i / block) * block : 0;
                    const double* go = nd.grad.data() + static_cast<int64_t>(i) * d + ho;
                    const double* a_row =
                        attn.data() + (static_cast<int64_t>(h) * nq + i) * cols;
                    for (int j = 0; j < cols; ++j) {
                        const double* vj =
                            nv_in->value.data() + static_cast<int64_t>(j0 + j) * d + ho;
                        double acc = 0.0;
                        for (int t = 0; t < dh; ++t) acc += go[t] * vj[t];
                        da[j] = acc;
                        if (nv_in->requires_grad) {
                            double* dvj =
                                nv_in->grad.data() + static_cast<int64_t>(j0 + j) * d + ho;
                            for (int t = 0; t < dh; ++t) dvj[t] += a_row[j] * go[t];
                        }
                    }
                    std::fill(ds.begin(), ds.end(), 0.0);
                    softmax_backward_row(a_row, da.data(), ds.data(), cols);
                    const double* qi = nq_in->value.data() + static_cast<int64_t>(i) * d + ho;
                    double* dqi = nq_in->requires_grad
                                      ? nq_in->grad.data() + static_cast<int64_t>(i) * d + ho
                                      : nullptr;
                    for (int j = 0; j < cols; ++j) {
                        const double dsj = sc * ds[j];
                        const double* kj =
                            nk_in->value.data() + static_cast<int64_t>(j0 + j) * d + ho;
                        if (dqi)
                            for (int t = 0; t < dh; ++t) dqi[t] += dsj * kj[t];
                        if (nk_in->requires_grad) {
                            double* dkj =
                                nk_in->grad.data() + static_cast<int64_t>(j0 + j) * d + ho;
                            for (int t = 0; t < dh; ++t) dkj[t] += dsj * qi[t];
                        }
                    }
                }
            }
        });
}

Tensor attention_pool_blocks(const Tensor& query, const Tensor& keys, const Tensor& vals,
                             int block, double scale, std::vector<double>* attn_out) {
    require(query.rank() == 1 && keys.rank() == 2 && vals.rank() == 2,
            "attention_pool_blocks: expects query vector, key matrix, value matrix");
    const int dk = query.dim(0), n = keys.dim(0), dv = vals.dim(1);
    require(keys.dim(1) == dk, "attention_pool_blocks: key width " + shape_str(keys.shape()) +
                                   " does not match query " + shape_str(query.shape()));
    require(vals.dim(0) == n, "attention_pool_blocks: keys and values disagree on row count");
    require(block > 0 && n % block == 0, "attention_pool_blocks: block " + std::to_string(block) +
                                             " must evenly split " + std::to_string(n) + " rows");
    const int nb = n / block;
    std::vector<double> w(n);
    std::vector<double> s(block);
    std::vector<double> out(static_cast<size_t>(nb) * dv, 0.0);
    for (int t = 0; t < nb; ++t) {
        const int j0 = t * block;
        for (int j = 0; j < block; ++j) {
            double acc = 0.0;
            for (int p = 0; p < dk; ++p) acc += keys.at(j0 + j, p) * query.at(p);
            s[j] = scale * acc;
        }
        softmax_row(s.data(), w.data() + j0, block);
        for (int j = 0; j < block; ++j) {
            const double wj = w[j0 + j];
            for (int p = 0; p < dv; ++p)
                out[static_cast<int64_t>(t) * dv + p] += wj * vals.at(j0 + j, p);
        }
    }
    if (attn_out) *attn_out = w;
    return detail::make_op(
        {nb, dv}, std::move(out), "attention_pool_blocks", {query, keys, vals},
        [nb, block, dk, dv, scale, w](Node& nd) {
            auto& nq = nd.inputs[0];
            auto& nk = nd.inputs[1];
            auto& nv = nd.inputs[2];
            std::vector<double> dw(block), ds(block);
            for (int t = 0; t < nb; ++t) {
                const int j0 = t * block;
                const double* gt = nd.grad.data() + static_cast<int64_t>(t) * dv;
                for (int j = 0; j < block; ++j) {
                    const double* vj = nv->value.data() + static_cast<int64_t>(j0 + j) * dv;
                    double acc = 0.0;
                    for (int p = 0; p < dv; ++p) acc += gt[p] * vj[p];
                    dw[j] = acc;
                    if (nv->requires_grad) {
                        double* dvj = nv->grad.data() + static_cast<int64_t>(j0 + j) * dv;
                        for (int p = 0; p < dv; ++p) dvj[p] += w[j0 + j] * gt[p];
                    }
                }
                std::fill(ds.begin(), ds.end(), 0.0);
                softmax_backward_row(w.data() + j0, dw.data(), ds.data(), block);
                for (int j = 0; j < block; ++j) {
                    const double dsj = scale * ds[j];
                    const double* kj = nk->value.data() + static_cast<int64_t>(j0 + j) * dk;
                    if (nq->requires_grad)
                        for (int p = 0; p < dk; ++p) nq->grad[p] += dsj * kj[p];
                    if (nk->requires_grad) {
                        double* dkj = nk->grad.data() + static_cast<int64_t>(j0 + j) * dk;
                        for (int p = 0; p < dk; ++p) dkj[p] += dsj * nq->value[p];
                    }
                }
            }
        });
}

}  // namespace ops
}  // namespace vcsr

#include "cria/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cria/kernels.hpp"
#include "cria/rng.hpp"

namespace cria {

namespace {

thread_local Tape* g_tape = nullptr;

bool recording(const std::vector<const Tensor*>& inputs) {
    if (!g_tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    Tensor t(std::move(shape), std::move(data));
    t.set_requires_grad(requires_grad);
    return t;
}

void check_2d(const Tensor& x, const char* op) {
    if (x.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(x.shape()));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor::Tensor(std::vector<int> shape) {
    impl = std::make_shared<TensorImpl>();
    impl->data.assign(numel(shape), 0.0);
    impl->shape = std::move(shape);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) {
    if (numel(shape) != data.size())
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item: tensor " + shape_str(shape()) + " is not scalar");
    return impl->data[0];
}

const std::vector<double>& Tensor::grad() const {
    impl->ensure_grad();
    return impl->grad;
}

Tape* Tape::current() { return g_tape; }

Tape::Scope::Scope(Tape& t) : prev_(g_tape) { g_tape = &t; }
Tape::Scope::~Scope() { g_tape = prev_; }
Tape::Pause::Pause() : prev_(g_tape) { g_tape = nullptr; }
Tape::Pause::~Pause() { g_tape = prev_; }

// ---------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kernels::matmul_nn(out.data(), a.data().data(), b.data().data(), m, k, n, false);
    Tensor y = make({m, n}, std::move(out), recording({&a, &b}));
    if (y.requires_grad()) {
        auto ai = a.impl, bi = b.impl, yi = y.impl;
        g_tape->record([ai, bi, yi, m, k, n] {
            if (ai->requires_grad) {
                ai->ensure_grad();
                kernels::matmul_nt(ai->grad.data(), yi->grad.data(), bi->data.data(), m, n, k, true);
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                kernels::matmul_tn(bi->grad.data(), ai->data.data(), yi->grad.data(), k, m, n, true);
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor transpose(const Tensor& x) {
    check_2d(x, "transpose");
    const int r = x.rows(), c = x.cols();
    std::vector<double> out(x.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = x.data()[static_cast<std::size_t>(i) * c + j];
    Tensor y = make({c, r}, std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, r, c] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    xi->grad[static_cast<std::size_t>(i) * c + j] += yi->grad[static_cast<std::size_t>(j) * r + i];
        });
        y.impl->ensure_grad();
    }
    return y;
}

// ------------------------------------------------------------ elementwise

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " are not broadcast-compatible");
}

template <typename Fwd, typename Bwd>
Tensor pointwise(const Tensor& a, Fwd fwd, Bwd dydx) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = fwd(a.data()[i]);
    Tensor y = make(a.shape(), std::move(out), recording({&a}));
    if (y.requires_grad()) {
        auto ai = a.impl, yi = y.impl;
        g_tape->record([ai, yi, dydx] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < ai->data.size(); ++i)
                ai->grad[i] += yi->grad[i] * dydx(ai->data[i], yi->data[i]);
        });
        y.impl->ensure_grad();
    }
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    kernels::add(out.data(), a.data().data(), b.data().data(), a.size());
    Tensor y = make(a.shape(), std::move(out), recording({&a, &b}));
    if (y.requires_grad()) {
        auto ai = a.impl, bi = b.impl, yi = y.impl;
        g_tape->record([ai, bi, yi] {
            if (ai->requires_grad) {
                ai->ensure_grad();
                kernels::axpy(ai->grad.data(), yi->grad.data(), 1.0, ai->grad.size());
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                kernels::axpy(bi->grad.data(), yi->grad.data(), 1.0, bi->grad.size());
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_2d(x, "add_rowvec");
    const int r = x.rows(), c = x.cols();
    if (static_cast<int>(v.size()) != c)
        throw DimensionError("add_rowvec: vector length " + std::to_string(v.size()) +
                             " does not match columns of " + shape_str(x.shape()));
    std::vector<double> out(x.size());
    for (int i = 0; i < r; ++i)
        kernels::add(out.data() + static_cast<std::size_t>(i) * c, x.data().data() + static_cast<std::size_t>(i) * c,
                     v.data().data(), c);
    Tensor y = make(x.shape(), std::move(out), recording({&x, &v}));
    if (y.requires_grad()) {
        auto xi = x.impl, vi = v.impl, yi = y.impl;
        g_tape->record([xi, vi, yi, r, c] {
            if (xi->requires_grad) {
                xi->ensure_grad();
                kernels::axpy(xi->grad.data(), yi->grad.data(), 1.0, xi->grad.size());
            }
            if (vi->requires_grad) {
                vi->ensure_grad();
                for (int i = 0; i < r; ++i)
                    kernels::axpy(vi->grad.data(), yi->grad.data() + static_cast<std::size_t>(i) * c, 1.0, c);
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    kernels::sub(out.data(), a.data().data(), b.data().data(), a.size());
    Tensor y = make(a.shape(), std::move(out), recording({&a, &b}));
    if (y.requires_grad()) {
        auto ai = a.impl, bi = b.impl, yi = y.impl;
        g_tape->record([ai, bi, yi] {
            if (ai->requires_grad) {
                ai->ensure_grad();
                kernels::axpy(ai->grad.data(), yi->grad.data(), 1.0, ai->grad.size());
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                kernels::axpy(bi->grad.data(), yi->grad.data(), -1.0, bi->grad.size());
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    kernels::mul(out.data(), a.data().data(), b.data().data(), a.size());
    Tensor y = make(a.shape(), std::move(out), recording({&a, &b}));
    if (y.requires_grad()) {
        auto ai = a.impl, bi = b.impl, yi = y.impl;
        g_tape->record([ai, bi, yi] {
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += yi->grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < bi->grad.size(); ++i) bi->grad[i] += yi->grad[i] * ai->data[i];
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor div_rows(const Tensor& a, const Tensor& s) {
    check_2d(a, "div_rows");
    const int r = a.rows(), c = a.cols();
    if (static_cast<int>(s.size()) != r)
        throw DimensionError("div_rows: divisor " + shape_str(s.shape()) + " does not match rows of " +
                             shape_str(a.shape()));
    std::vector<double> out(a.size());
    for (int i = 0; i < r; ++i) {
        const double inv = 1.0 / s.data()[i];
        kernels::scale(out.data() + static_cast<std::size_t>(i) * c, a.data().data() + static_cast<std::size_t>(i) * c,
                       inv, c);
    }
    Tensor y = make(a.shape(), std::move(out), recording({&a, &s}));
    if (y.requires_grad()) {
        auto ai = a.impl, si = s.impl, yi = y.impl;
        g_tape->record([ai, si, yi, r, c] {
            for (int i = 0; i < r; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                const double sv = si->data[i];
                if (ai->requires_grad) {
                    ai->ensure_grad();
                    kernels::axpy(ai->grad.data() + off, yi->grad.data() + off, 1.0 / sv, c);
                }
                if (si->requires_grad) {
                    si->ensure_grad();
                    const double gdota = kernels::dot(yi->grad.data() + off, ai->data.data() + off, c);
                    si->grad[i] -= gdota / (sv * sv);
                }
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    kernels::scale(out.data(), a.data().data(), s, a.size());
    Tensor y = make(a.shape(), std::move(out), recording({&a}));
    if (y.requires_grad()) {
        auto ai = a.impl, yi = y.impl;
        g_tape->record([ai, yi, s] {
            ai->ensure_grad();
            kernels::axpy(ai->grad.data(), yi->grad.data(), s, ai->grad.size());
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor add_const(const Tensor& a, double c) {
    return pointwise(a, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor abs_t(const Tensor& a) {
    return pointwise(a, [](double v) { return std::fabs(v); },
                     [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
    return pointwise(a, [](double v) { return v * v; }, [](double x, double) { return 2.0 * x; });
}

Tensor elu(const Tensor& a) {
    return pointwise(a, [](double v) { return v > 0 ? v : std::expm1(v); },
                     [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Tensor exp_t(const Tensor& a) {
    return pointwise(a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
    return pointwise(a, [](double v) { return std::log(v); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
    return pointwise(a,
                     [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
                     [](double, double y) { return y * (1.0 - y); });
}

Tensor pow_const(const Tensor& a, double p) {
    return pointwise(a, [p](double v) { return std::pow(v, p); },
                     [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

// --------------------------------------------------------- shape plumbing

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (numel(shape) != x.size())
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    Tensor y = make(std::move(shape), x.data(), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi] {
            xi->ensure_grad();
            kernels::axpy(xi->grad.data(), yi->grad.data(), 1.0, xi->grad.size());
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor slice_cols(const Tensor& x, int c0, int len) {
    check_2d(x, "slice_cols");
    const int r = x.rows(), c = x.cols();
    if (c0 < 0 || len <= 0 || c0 + len > c)
        throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c0 + len) +
                             ") out of range for " + shape_str(x.shape()));
    std::vector<double> out(static_cast<std::size_t>(r) * len);
    for (int i = 0; i < r; ++i)
        std::copy_n(x.data().data() + static_cast<std::size_t>(i) * c + c0, len,
                    out.data() + static_cast<std::size_t>(i) * len);
    Tensor y = make({r, len}, std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, r, c, c0, len] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i)
                kernels::axpy(xi->grad.data() + static_cast<std::size_t>(i) * c + c0,
                              yi->grad.data() + static_cast<std::size_t>(i) * len, 1.0, len);
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const int r = parts[0].rows();
    int total = 0;
    std::vector<const Tensor*> ins;
    for (const auto& p : parts) {
        check_2d(p, "concat_cols");
        if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
        total += p.cols();
        ins.push_back(&p);
    }
    std::vector<double> out(static_cast<std::size_t>(r) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int c = p.cols();
        for (int i = 0; i < r; ++i)
            std::copy_n(p.data().data() + static_cast<std::size_t>(i) * c, c,
                        out.data() + static_cast<std::size_t>(i) * total + off);
        off += c;
    }
    Tensor y = make({r, total}, std::move(out), recording(ins));
    if (y.requires_grad()) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        for (const auto& p : parts) impls.push_back(p.impl);
        auto yi = y.impl;
        g_tape->record([impls, yi, r, total] {
            int off2 = 0;
            for (const auto& pi : impls) {
                const int c = pi->shape[1];
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    for (int i = 0; i < r; ++i)
                        kernels::axpy(pi->grad.data() + static_cast<std::size_t>(i) * c,
                                      yi->grad.data() + static_cast<std::size_t>(i) * total + off2, 1.0, c);
                }
                off2 += c;
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const int c = parts[0].cols();
    int total = 0;
    std::vector<const Tensor*> ins;
    for (const auto& p : parts) {
        check_2d(p, "concat_rows");
        if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
        total += p.rows();
        ins.push_back(&p);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total) * c);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    Tensor y = make({total, c}, std::move(out), recording(ins));
    if (y.requires_grad()) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        for (const auto& p : parts) impls.push_back(p.impl);
        auto yi = y.impl;
        g_tape->record([impls, yi] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    kernels::axpy(pi->grad.data(), yi->grad.data() + off, 1.0, pi->grad.size());
                }
                off += pi->data.size();
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
    check_2d(x, "gather_rows");
    const int c = x.cols();
    std::vector<double> out(idx.size() * static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= x.rows())
            throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                                 shape_str(x.shape()));
        std::copy_n(x.data().data() + static_cast<std::size_t>(idx[i]) * c, c, out.data() + i * c);
    }
    Tensor y = make({static_cast<int>(idx.size()), c}, std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, idx, c] {
            xi->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i)
                kernels::axpy(xi->grad.data() + static_cast<std::size_t>(idx[i]) * c, yi->grad.data() + i * c, 1.0, c);
        });
        y.impl->ensure_grad();
    }
    return y;
}

// ------------------------------------------------ reductions / normalizers

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor y = make({1}, {s}, recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi] {
            xi->ensure_grad();
            const double g = yi->grad[0];
            for (double& gv : xi->grad) gv += g;
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor row_sums(const Tensor& x) {
    check_2d(x, "row_sums");
    const int r = x.rows(), c = x.cols();
    std::vector<double> out(r);
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += x.data()[static_cast<std::size_t>(i) * c + j];
        out[i] = s;
    }
    Tensor y = make({r, 1}, std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, r, c] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i) {
                const double g = yi->grad[i];
                for (int j = 0; j < c; ++j) xi->grad[static_cast<std::size_t>(i) * c + j] += g;
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor col_mean(const Tensor& x) {
    check_2d(x, "col_mean");
    const int r = x.rows(), c = x.cols();
    std::vector<double> out(c, 0.0);
    for (int i = 0; i < r; ++i) kernels::axpy(out.data(), x.data().data() + static_cast<std::size_t>(i) * c, 1.0, c);
    kernels::scale(out.data(), out.data(), 1.0 / r, c);
    Tensor y = make({1, c}, std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, r, c] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i)
                kernels::axpy(xi->grad.data() + static_cast<std::size_t>(i) * c, yi->grad.data(), 1.0 / r, c);
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() < 1 || x.shape().back() < 1)
        throw DimensionError("softmax: empty last axis in " + shape_str(x.shape()));
    const int c = x.shape().back();
    const std::size_t rows = x.size() / c;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xr = x.data().data() + i * c;
        double* yr = out.data() + i * c;
        double mx = xr[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        for (int j = 0; j < c; ++j) yr[j] /= s;
    }
    Tensor y = make(x.shape(), std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        g_tape->record([xi, yi, rows, c] {
            xi->ensure_grad();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* yr = yi->data.data() + i * c;
                const double* gr = yi->grad.data() + i * c;
                const double gdoty = kernels::dot(gr, yr, c);
                double* gx = xi->grad.data() + i * c;
                for (int j = 0; j < c; ++j) gx[j] += yr[j] * (gr[j] - gdoty);
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int c = x.shape().back();
    if (static_cast<int>(gain.size()) != c || static_cast<int>(bias.size()) != c)
        throw DimensionError("layer_norm: gain/bias length must match last axis " + std::to_string(c));
    if (c < 2 && eps == 0.0)
        throw DimensionError("layer_norm: degenerate variance, last axis " + std::to_string(c) + " with eps=0");
    const std::size_t rows = x.size() / c;
    std::vector<double> out(x.size()), xhat(x.size()), inv_sigma(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xr = x.data().data() + i * c;
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += xr[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = is;
        for (int j = 0; j < c; ++j) {
            const double h = (xr[j] - mu) * is;
            xhat[i * c + j] = h;
            out[i * c + j] = h * gain.data()[j] + bias.data()[j];
        }
    }
    Tensor y = make(x.shape(), std::move(out), recording({&x, &gain, &bias}));
    if (y.requires_grad()) {
        auto xi = x.impl, gi = gain.impl, bi = bias.impl, yi = y.impl;
        auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
        auto isv = std::make_shared<std::vector<double>>(std::move(inv_sigma));
        g_tape->record([xi, gi, bi, yi, xh, isv, rows, c] {
            for (std::size_t i = 0; i < rows; ++i) {
                const double* g = yi->grad.data() + i * c;
                const double* h = xh->data() + i * c;
                if (gi->requires_grad) {
                    gi->ensure_grad();
                    for (int j = 0; j < c; ++j) gi->grad[j] += g[j] * h[j];
                }
                if (bi->requires_grad) {
                    bi->ensure_grad();
                    for (int j = 0; j < c; ++j) bi->grad[j] += g[j];
                }
                if (xi->requires_grad) {
                    xi->ensure_grad();
                    double gg_mean = 0.0, ggh_mean = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double gg = g[j] * gi->data[j];
                        gg_mean += gg;
                        ggh_mean += gg * h[j];
                    }
                    gg_mean /= c;
                    ggh_mean /= c;
                    const double is = (*isv)[i];
                    for (int j = 0; j < c; ++j) {
                        const double gg = g[j] * gi->data[j];
                        xi->grad[i * c + j] += is * (gg - gg_mean - h[j] * ggh_mean);
                    }
                }
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor l2_normalize_rows(const Tensor& x) {
    check_2d(x, "l2_normalize_rows");
    const int r = x.rows(), c = x.cols();
    std::vector<double> out(x.size()), norms(r);
    for (int i = 0; i < r; ++i) {
        const double* xr = x.data().data() + static_cast<std::size_t>(i) * c;
        const double n = std::max(std::sqrt(kernels::dot(xr, xr, c)), 1e-12);
        norms[i] = n;
        kernels::scale(out.data() + static_cast<std::size_t>(i) * c, xr, 1.0 / n, c);
    }
    Tensor y = make(x.shape(), std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        auto ns = std::make_shared<std::vector<double>>(std::move(norms));
        g_tape->record([xi, yi, ns, r, c] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                const double n = (*ns)[i];
                const double gdoty = kernels::dot(yi->grad.data() + off, yi->data.data() + off, c);
                for (int j = 0; j < c; ++j)
                    xi->grad[off + j] += (yi->grad[off + j] - yi->data[off + j] * gdoty) / n;
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor rope_rows(const Tensor& x, const std::vector<double>& positions) {
    check_2d(x, "rope_rows");
    const int r = x.rows(), c = x.cols();
    if (c % 2 != 0) throw DimensionError("rope: last axis must be even for complex pairing, got " + std::to_string(c));
    if (static_cast<int>(positions.size()) != r)
        throw DimensionError("rope: positions length " + std::to_string(positions.size()) + " != rows " +
                             std::to_string(r));
    const int half = c / 2;
    std::vector<double> cs(static_cast<std::size_t>(r) * half), sn(static_cast<std::size_t>(r) * half);
    std::vector<double> out(x.size());
    for (int i = 0; i < r; ++i) {
        for (int d = 0; d < half; ++d) {
            const double theta = positions[i] * std::pow(10000.0, -2.0 * (d + 1) / c);
            const double co = std::cos(theta), si = std::sin(theta);
            cs[static_cast<std::size_t>(i) * half + d] = co;
            sn[static_cast<std::size_t>(i) * half + d] = si;
            const double a = x.data()[static_cast<std::size_t>(i) * c + 2 * d];
            const double b = x.data()[static_cast<std::size_t>(i) * c + 2 * d + 1];
            out[static_cast<std::size_t>(i) * c + 2 * d] = a * co - b * si;
            out[static_cast<std::size_t>(i) * c + 2 * d + 1] = a * si + b * co;
        }
    }
    Tensor y = make(x.shape(), std::move(out), recording({&x}));
    if (y.requires_grad()) {
        auto xi = x.impl, yi = y.impl;
        auto csp = std::make_shared<std::vector<double>>(std::move(cs));
        auto snp = std::make_shared<std::vector<double>>(std::move(sn));
        g_tape->record([xi, yi, csp, snp, r, c, half] {
            xi->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int d = 0; d < half; ++d) {
                    const double co = (*csp)[static_cast<std::size_t>(i) * half + d];
                    const double si = (*snp)[static_cast<std::size_t>(i) * half + d];
                    const double g0 = yi->grad[static_cast<std::size_t>(i) * c + 2 * d];
                    const double g1 = yi->grad[static_cast<std::size_t>(i) * c + 2 * d + 1];
                    xi->grad[static_cast<std::size_t>(i) * c + 2 * d] += g0 * co + g1 * si;
                    xi->grad[static_cast<std::size_t>(i) * c + 2 * d + 1] += -g0 * si + g1 * co;
                }
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw DimensionError("dropout: rate must be < 1");
    Tensor mask(x.shape());
    const double keep = 1.0 - rate;
    for (double& m : mask.data()) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return mul(x, mask);
}

Tensor value_mask_renorm(const Tensor& attn, const std::vector<std::uint8_t>& mask) {
    check_2d(attn, "value_mask_renorm");
    const int r = attn.rows(), c = attn.cols();
    if (mask.size() != attn.size()) throw DimensionError("value_mask_renorm: mask size mismatch");
    std::vector<double> out(attn.size()), rowsum(r);
    std::vector<std::uint8_t> uniform_row(r, 0);
    for (int i = 0; i < r; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * c;
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += mask[off + j] ? attn.data()[off + j] : 0.0;
        if (s <= 0.0) {
            uniform_row[i] = 1;
            for (int j = 0; j < c; ++j) out[off + j] = 1.0 / c;
        } else {
            rowsum[i] = s;
            for (int j = 0; j < c; ++j) out[off + j] = mask[off + j] ? attn.data()[off + j] / s : 0.0;
        }
    }
    Tensor y = make(attn.shape(), std::move(out), recording({&attn}));
    if (y.requires_grad()) {
        auto ai = attn.impl, yi = y.impl;
        auto rs = std::make_shared<std::vector<double>>(std::move(rowsum));
        auto ur = std::make_shared<std::vector<std::uint8_t>>(std::move(uniform_row));
        auto mk = std::make_shared<std::vector<std::uint8_t>>(mask);
        g_tape->record([ai, yi, rs, ur, mk, r, c] {
            ai->ensure_grad();
            for (int i = 0; i < r; ++i) {
                if ((*ur)[i]) continue;  // constant fallback row
                const std::size_t off = static_cast<std::size_t>(i) * c;
                double gdoty = 0.0;
                for (int j = 0; j < c; ++j) gdoty += yi->grad[off + j] * yi->data[off + j];
                const double s = (*rs)[i];
                for (int j = 0; j < c; ++j)
                    if ((*mk)[off + j]) ai->grad[off + j] += (yi->grad[off + j] - gdoty) / s;
            }
        });
        y.impl->ensure_grad();
    }
    return y;
}

// ----------------------------------------------------------------- losses

Tensor ce_identity(const Tensor& logits) {
    check_2d(logits, "ce_identity");
    if (logits.rows() != logits.cols())
        throw DimensionError("ce_identity: logits must be square, got " + shape_str(logits.shape()));
    const int b = logits.rows();
    std::vector<double> probs(logits.size());
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* lr = logits.data().data() + static_cast<std::size_t>(i) * b;
        double mx = lr[0];
        for (int j = 1; j < b; ++j) mx = std::max(mx, lr[j]);
        double s = 0.0;
        for (int j = 0; j < b; ++j) {
            probs[static_cast<std::size_t>(i) * b + j] = std::exp(lr[j] - mx);
            s += probs[static_cast<std::size_t>(i) * b + j];
        }
        for (int j = 0; j < b; ++j) probs[static_cast<std::size_t>(i) * b + j] /= s;
        loss += mx + std::log(s) - lr[i];
    }
    loss /= b;
    Tensor y = make({1}, {loss}, recording({&logits}));
    if (y.requires_grad()) {
        auto li = logits.impl, yi = y.impl;
        auto pp = std::make_shared<std::vector<double>>(std::move(probs));
        g_tape->record([li, yi, pp, b] {
            li->ensure_grad();
            const double g = yi->grad[0] / b;
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < b; ++j)
                    li->grad[static_cast<std::size_t>(i) * b + j] +=
                        g * ((*pp)[static_cast<std::size_t>(i) * b + j] - (i == j ? 1.0 : 0.0));
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor ce_labels(const Tensor& logits, const std::vector<int>& labels) {
    check_2d(logits, "ce_labels");
    const int b = logits.rows(), k = logits.cols();
    if (static_cast<int>(labels.size()) != b) throw DimensionError("ce_labels: labels length mismatch");
    for (int y : labels)
        if (y < 0 || y >= k)
            throw DimensionError("ce_labels: label " + std::to_string(y) + " out of range [0," + std::to_string(k) + ")");
    std::vector<double> probs(logits.size());
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* lr = logits.data().data() + static_cast<std::size_t>(i) * k;
        double mx = lr[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, lr[j]);
        double s = 0.0;
        for (int j = 0; j < k; ++j) {
            probs[static_cast<std::size_t>(i) * k + j] = std::exp(lr[j] - mx);
            s += probs[static_cast<std::size_t>(i) * k + j];
        }
        for (int j = 0; j < k; ++j) probs[static_cast<std::size_t>(i) * k + j] /= s;
        loss += mx + std::log(s) - lr[labels[i]];
    }
    loss /= b;
    Tensor y = make({1}, {loss}, recording({&logits}));
    if (y.requires_grad()) {
        auto li = logits.impl, yi = y.impl;
        auto pp = std::make_shared<std::vector<double>>(std::move(probs));
        g_tape->record([li, yi, pp, labels, b, k] {
            li->ensure_grad();
            const double g = yi->grad[0] / b;
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < k; ++j)
                    li->grad[static_cast<std::size_t>(i) * k + j] +=
                        g * ((*pp)[static_cast<std::size_t>(i) * k + j] - (j == labels[i] ? 1.0 : 0.0));
        });
        y.impl->ensure_grad();
    }
    return y;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t b = logits.size();
    if (labels.size() != b) throw DimensionError("bce: labels length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double s = logits.data()[i];
        const double y = labels[i];
        // max(s,0) - s*y + log1p(exp(-|s|))
        loss += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::fabs(s)));
    }
    loss /= static_cast<double>(b);
    Tensor out = make({1}, {loss}, recording({&logits}));
    if (out.requires_grad()) {
        auto li = logits.impl, oi = out.impl;
        g_tape->record([li, oi, labels, b] {
            li->ensure_grad();
            const double g = oi->grad[0] / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) {
                const double s = li->data[i];
                const double p = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
                li->grad[i] += g * (p - labels[i]);
            }
        });
        out.impl->ensure_grad();
    }
    return out;
}

// ----------------------------------------------------------- reverse pass

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw AutodiffError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    Tape* tape = Tape::current();
    if (!tape) throw AutodiffError("backward: no active tape");
    if (!loss.requires_grad() || tape->size() == 0)
        throw AutodiffError("backward: loss is detached from the tape");
    loss.impl->ensure_grad();
    loss.impl->grad[0] = 1.0;
    tape->run_backward_and_clear();
}

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    // analytic gradient
    Tensor xc(x.shape(), x.data());
    xc.set_requires_grad(true);
    std::vector<double> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor y = f(xc);
        if (y.size() != 1) throw AutodiffError("finite_difference_check: f must return a scalar");
        if (!std::isfinite(y.item())) throw AutodiffError("finite_difference_check: non-finite f output");
        backward(y);
        analytic = xc.grad();
    }
    // central differences
    double max_rel = 0.0;
    Tape::Pause pause;
    Tensor xp(x.shape(), x.data());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp.data()[i];
        xp.data()[i] = orig + h;
        const double fp = f(xp).item();
        xp.data()[i] = orig - h;
        const double fm = f(xp).item();
        xp.data()[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw AutodiffError("finite_difference_check: non-finite f output");
        const double numeric = (fp - fm) / (2.0 * h);
        const double rel = std::fabs(analytic[i] - numeric) / (std::fabs(analytic[i]) + std::fabs(numeric) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace cria

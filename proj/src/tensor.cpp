#include "icicle/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "icicle/errors.hpp"

namespace icicle {

namespace {

std::atomic<std::uint64_t> g_seq{0};

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw TrainingDivergence(std::string("non-finite value produced by '") + op + "'");
        }
    }
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data, const char* op,
                                      std::vector<std::shared_ptr<TensorNode>> parents,
                                      std::function<void(TensorNode&)> backward) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = op;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    check_finite(n->data, op);
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->grad.assign(n->data.size(), 0.0);
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return n;
}

void require_2d(const Tensor& t, const char* op) {
    if (t.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected 2-D tensor, got shape " +
                             shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

// ---- matmul kernels ----
// All kernels keep a fixed per-element summation order (k ascending), so the
// result is bitwise identical regardless of row blocking or thread count.

// C(MxN) = A(MxK) * B(KxN), overwrite
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k_dim,
           std::size_t n) {
    const std::ptrdiff_t mb = static_cast<std::ptrdiff_t>(m / 4);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t blk = 0; blk < mb; ++blk) {
        const std::size_t i = static_cast<std::size_t>(blk) * 4;
        double* c0 = c + (i + 0) * n;
        double* c1 = c + (i + 1) * n;
        double* c2 = c + (i + 2) * n;
        double* c3 = c + (i + 3) * n;
        std::fill(c0, c0 + n, 0.0);
        std::fill(c1, c1 + n, 0.0);
        std::fill(c2, c2 + n, 0.0);
        std::fill(c3, c3 + n, 0.0);
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double* bk = b + k * n;
            const double a0 = a[(i + 0) * k_dim + k];
            const double a1 = a[(i + 1) * k_dim + k];
            const double a2 = a[(i + 2) * k_dim + k];
            const double a3 = a[(i + 3) * k_dim + k];
            // exact-zero quads (common for sparse adjacency operands) cannot
            // change any accumulator bitwise
            if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double bv = bk[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
    }
    for (std::size_t i = static_cast<std::size_t>(mb) * 4; i < m; ++i) {
        double* ci = c + i * n;
        std::fill(ci, ci + n, 0.0);
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = a[i * k_dim + k];
            if (aik == 0.0) continue;
            const double* bk = b + k * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

// C(MxN) += A(MxK) * B(KxN), same per-element summation order as mm_nn
void mm_nn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k_dim,
               std::size_t n) {
    const std::ptrdiff_t mb = static_cast<std::ptrdiff_t>(m / 4);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t blk = 0; blk < mb; ++blk) {
        const std::size_t i = static_cast<std::size_t>(blk) * 4;
        double* c0 = c + (i + 0) * n;
        double* c1 = c + (i + 1) * n;
        double* c2 = c + (i + 2) * n;
        double* c3 = c + (i + 3) * n;
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double* bk = b + k * n;
            const double a0 = a[(i + 0) * k_dim + k];
            const double a1 = a[(i + 1) * k_dim + k];
            const double a2 = a[(i + 2) * k_dim + k];
            const double a3 = a[(i + 3) * k_dim + k];
            if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double bv = bk[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
    }
    for (std::size_t i = static_cast<std::size_t>(mb) * 4; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = a[i * k_dim + k];
            if (aik == 0.0) continue;
            const double* bk = b + k * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

// C(MxK) += A(MxN) * B(KxN)^T, via an explicit transpose of B so the inner
// loop streams; per-element order stays j ascending
void mm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k_dim) {
    std::vector<double> bt(n * k_dim);
    for (std::size_t k = 0; k < k_dim; ++k) {
        for (std::size_t j = 0; j < n; ++j) bt[j * k_dim + k] = b[k * n + j];
    }
    mm_nn_acc(a, bt.data(), c, m, n, k_dim);
}

// C(KxN) += A(MxK)^T * B(MxN)
void mm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k_dim,
               std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(k_dim); ++kk) {
        const std::size_t k = static_cast<std::size_t>(kk);
        double* ck = c + k * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double aik = a[i * k_dim + k];
            if (aik == 0.0) continue;
            const double* bi = b + i * n;
            for (std::size_t j = 0; j < n; ++j) ck[j] += aik * bi[j];
        }
    }
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

// ---- Tensor ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->data.assign(shape_numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    if (requires_grad) n->grad.assign(n->data.size(), 0.0);
    check_finite(n->data, "full");
    return Tensor(std::move(n));
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    auto& d = t.node()->data;
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("from_data: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    if (requires_grad) n->grad.assign(n->data.size(), 0.0);
    check_finite(n->data, "from_data");
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return from_data({1, 1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> d;
    d.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("matrix: ragged rows");
        d.insert(d.end(), row.begin(), row.end());
    }
    return from_data({r, c}, std::move(d), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::rows() const {
    require_2d(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_2d(*this, "cols");
    return node_->shape[1];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
const std::vector<double>& Tensor::data() const { return node_->data; }
std::vector<double>& Tensor::mutable_data() { return node_->data; }

const std::vector<double>& Tensor::grad() const {
    if (!node_->requires_grad) throw ContractError("grad(): tensor does not require grad");
    return node_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
    if (!node_->requires_grad) throw ContractError("grad(): tensor does not require grad");
    return node_->grad;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
    }
    return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    require_2d(*this, "at");
    return node_->data[i * node_->shape[1] + j];
}

void Tensor::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_data(node_->shape, node_->data, false); }

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(a.shape(), std::move(out), "add", {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
    }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(a.shape(), std::move(out), "sub", {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(a.shape(), std::move(out), "mul", {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i] += self.grad[i] * an->data[i];
        }
    }));
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + s;
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), "add_scalar", {an}, [an](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }));
}

Tensor mul_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * s;
    auto an = a.node();
    return Tensor(
        make_node(a.shape(), std::move(out), "mul_scalar", {an}, [an, s](TensorNode& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
        }));
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(m * n);
    mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto an = a.node();
    auto bn = b.node();
    return Tensor(
        make_node({m, n}, std::move(out), "matmul", {an, bn}, [an, bn, m, k, n](TensorNode& self) {
            if (an->requires_grad) {
                mm_nt_acc(self.grad.data(), bn->data.data(), an->grad.data(), m, n, k);
            }
            if (bn->requires_grad) {
                mm_tn_acc(an->data.data(), self.grad.data(), bn->grad.data(), m, k, n);
            }
        }));
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = ad[i * c + j];
    }
    auto an = a.node();
    return Tensor(
        make_node({c, r}, std::move(out), "transpose", {an}, [an, r, c](TensorNode& self) {
            for (std::size_t j = 0; j < c; ++j) {
                for (std::size_t i = 0; i < r; ++i) an->grad[i * c + j] += self.grad[j * r + i];
            }
        }));
}

// ---- nonlinearities ----

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] > 0.0 ? ad[i] : 0.0;
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), "relu", {an}, [an](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (an->data[i] > 0.0) an->grad[i] += self.grad[i];
        }
    }));
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), "exp", {an}, [an](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * self.data[i];
    }));
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(ad[i]);
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), "log", {an}, [an](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] / an->data[i];
    }));
}

Tensor pow_scalar(const Tensor& a, double p) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::pow(ad[i], p);
    auto an = a.node();
    return Tensor(
        make_node(a.shape(), std::move(out), "pow_scalar", {an}, [an, p](TensorNode& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                an->grad[i] += self.grad[i] * p * std::pow(an->data[i], p - 1.0);
            }
        }));
}

// ---- reductions and row ops ----

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto an = a.node();
    return Tensor(make_node({1, 1}, {s}, "sum", {an}, [an](TensorNode& self) {
        const double g = self.grad[0];
        for (double& gi : an->grad) gi += g;
    }));
}

Tensor row_softmax(const Tensor& a) {
    require_2d(a, "row_softmax");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = ad.data() + i * c;
        double* yi = out.data() + i * c;
        double mx = xi[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            s += yi[j];
        }
        for (std::size_t j = 0; j < c; ++j) yi[j] /= s;
    }
    auto an = a.node();
    return Tensor(
        make_node({r, c}, std::move(out), "row_softmax", {an}, [an, r, c](TensorNode& self) {
            for (std::size_t i = 0; i < r; ++i) {
                const double* yi = self.data.data() + i * c;
                const double* gi = self.grad.data() + i * c;
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += gi[j] * yi[j];
                double* out_g = an->grad.data() + i * c;
                for (std::size_t j = 0; j < c; ++j) out_g[j] += yi[j] * (gi[j] - dot);
            }
        }));
}

Tensor l2_normalize_rows(const Tensor& a) {
    require_2d(a, "l2_normalize_rows");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    std::vector<double> norms(r);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = ad.data() + i * c;
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += xi[j] * xi[j];
        const double nrm = std::sqrt(s);
        if (nrm < 1e-12) {
            throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(i) +
                                       " has norm below 1e-12");
        }
        norms[i] = nrm;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xi[j] / nrm;
    }
    auto an = a.node();
    return Tensor(make_node({r, c}, std::move(out), "l2_normalize_rows", {an},
                            [an, r, c, norms](TensorNode& self) {
                                for (std::size_t i = 0; i < r; ++i) {
                                    const double* yi = self.data.data() + i * c;
                                    const double* gi = self.grad.data() + i * c;
                                    double dot = 0.0;
                                    for (std::size_t j = 0; j < c; ++j) dot += gi[j] * yi[j];
                                    double* out_g = an->grad.data() + i * c;
                                    for (std::size_t j = 0; j < c; ++j) {
                                        out_g[j] += (gi[j] - yi[j] * dot) / norms[i];
                                    }
                                }
                            }));
}

Tensor row_normalize(const Tensor& a) {
    require_2d(a, "row_normalize");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    std::vector<double> sums(r);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += ad[i * c + j];
        if (!(s > 1e-300)) {
            throw DegenerateInputError("row_normalize: row " + std::to_string(i) +
                                       " has non-positive sum");
        }
        sums[i] = s;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = ad[i * c + j] / s;
    }
    auto an = a.node();
    return Tensor(make_node({r, c}, std::move(out), "row_normalize", {an},
                            [an, r, c, sums](TensorNode& self) {
                                for (std::size_t i = 0; i < r; ++i) {
                                    const double* yi = self.data.data() + i * c;
                                    const double* gi = self.grad.data() + i * c;
                                    double dot = 0.0;
                                    for (std::size_t j = 0; j < c; ++j) dot += gi[j] * yi[j];
                                    double* out_g = an->grad.data() + i * c;
                                    for (std::size_t j = 0; j < c; ++j) {
                                        out_g[j] += (gi[j] - dot) / sums[i];
                                    }
                                }
                            }));
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
    require_2d(a, "add_row_broadcast");
    require_2d(bias, "add_row_broadcast");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    if (bias.shape()[0] != 1 || bias.shape()[1] != c) {
        throw DimensionError("add_row_broadcast: bias shape " + shape_str(bias.shape()) +
                             " does not match row width " + std::to_string(c));
    }
    std::vector<double> out(r * c);
    const auto& ad = a.data();
    const auto& bd = bias.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = ad[i * c + j] + bd[j];
    }
    auto an = a.node();
    auto bn = bias.node();
    return Tensor(make_node({r, c}, std::move(out), "add_row_broadcast", {an, bn},
                            [an, bn, r, c](TensorNode& self) {
                                if (an->requires_grad) {
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                        an->grad[i] += self.grad[i];
                                }
                                if (bn->requires_grad) {
                                    for (std::size_t i = 0; i < r; ++i) {
                                        for (std::size_t j = 0; j < c; ++j)
                                            bn->grad[j] += self.grad[i * c + j];
                                    }
                                }
                            }));
}

// ---- convolution stack ----

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride) {
    if (input.shape().size() != 4 || kernel.shape().size() != 4) {
        throw DimensionError("conv2d: expected 4-D input and kernel, got " +
                             shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    }
    if (stride == 0) throw ConfigError("conv2d: stride must be positive");
    const std::size_t n = input.shape()[0], c = input.shape()[1];
    const std::size_t h = input.shape()[2], w = input.shape()[3];
    const std::size_t f = kernel.shape()[0], kc = kernel.shape()[1];
    const std::size_t kh = kernel.shape()[2], kw = kernel.shape()[3];
    if (kc != c) {
        throw DimensionError("conv2d: kernel channels " + std::to_string(kc) +
                             " != input channels " + std::to_string(c));
    }
    if (kh > h || kw > w) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                             " larger than input " + shape_str(input.shape()));
    }
    const std::size_t oh = (h - kh) / stride + 1;
    const std::size_t ow = (w - kw) / stride + 1;
    std::vector<double> out(n * f * oh * ow, 0.0);
    const auto& x = input.data();
    const auto& k = kernel.data();
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t fo = 0; fo < f; ++fo) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const double* xp = x.data() + ((b * c + ci) * h + oy * stride) * w +
                                           ox * stride;
                        const double* kp = k.data() + ((fo * c + ci) * kh) * kw;
                        for (std::size_t u = 0; u < kh; ++u) {
                            for (std::size_t v = 0; v < kw; ++v) acc += xp[u * w + v] * kp[u * kw + v];
                        }
                    }
                    out[((b * f + fo) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    auto xn = input.node();
    auto kn = kernel.node();
    return Tensor(make_node(
        {n, f, oh, ow}, std::move(out), "conv2d", {xn, kn},
        [xn, kn, n, c, h, w, f, kh, kw, oh, ow, stride](TensorNode& self) {
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t fo = 0; fo < f; ++fo) {
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const double g = self.grad[((b * f + fo) * oh + oy) * ow + ox];
                            if (g == 0.0) continue;
                            for (std::size_t ci = 0; ci < c; ++ci) {
                                const std::size_t xbase =
                                    ((b * c + ci) * h + oy * stride) * w + ox * stride;
                                const std::size_t kbase = ((fo * c + ci) * kh) * kw;
                                for (std::size_t u = 0; u < kh; ++u) {
                                    for (std::size_t v = 0; v < kw; ++v) {
                                        if (xn->requires_grad) {
                                            xn->grad[xbase + u * w + v] +=
                                                g * kn->data[kbase + u * kw + v];
                                        }
                                        if (kn->requires_grad) {
                                            kn->grad[kbase + u * kw + v] +=
                                                g * xn->data[xbase + u * w + v];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }));
}

Tensor maxpool2x2(const Tensor& input) {
    if (input.shape().size() != 4) {
        throw DimensionError("maxpool2x2: expected 4-D input, got " + shape_str(input.shape()));
    }
    const std::size_t n = input.shape()[0], c = input.shape()[1];
    const std::size_t h = input.shape()[2], w = input.shape()[3];
    if (h < 2 || w < 2) {
        throw DimensionError("maxpool2x2: spatial extent below 2 in " + shape_str(input.shape()));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    std::vector<double> out(n * c * oh * ow);
    std::vector<std::size_t> argmax(out.size());
    const auto& x = input.data();
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    std::size_t best = ((b * c + ci) * h + oy * 2) * w + ox * 2;
                    double bv = x[best];
                    // fixed scan order; first max wins on ties
                    for (std::size_t u = 0; u < 2; ++u) {
                        for (std::size_t v = 0; v < 2; ++v) {
                            const std::size_t idx = ((b * c + ci) * h + oy * 2 + u) * w + ox * 2 + v;
                            if (x[idx] > bv) {
                                bv = x[idx];
                                best = idx;
                            }
                        }
                    }
                    const std::size_t o = ((b * c + ci) * oh + oy) * ow + ox;
                    out[o] = bv;
                    argmax[o] = best;
                }
            }
        }
    }
    auto xn = input.node();
    return Tensor(make_node({n, c, oh, ow}, std::move(out), "maxpool2x2", {xn},
                            [xn, argmax](TensorNode& self) {
                                for (std::size_t o = 0; o < self.grad.size(); ++o) {
                                    xn->grad[argmax[o]] += self.grad[o];
                                }
                            }));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(shape));
    }
    auto an = a.node();
    return Tensor(make_node(std::move(shape), a.data(), "reshape", {an}, [an](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }));
}

Tensor pairwise_sqdist(const Tensor& x, const Tensor& centers) {
    require_2d(x, "pairwise_sqdist");
    require_2d(centers, "pairwise_sqdist");
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    const std::size_t k = centers.shape()[0];
    if (centers.shape()[1] != d) {
        throw DimensionError("pairwise_sqdist: width mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(centers.shape()));
    }
    std::vector<double> out(n * k);
    const auto& xd = x.data();
    const auto& cd = centers.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = xd[i * d + t] - cd[j * d + t];
                s += diff * diff;
            }
            out[i * k + j] = s;
        }
    }
    auto xn = x.node();
    auto cn = centers.node();
    return Tensor(make_node({n, k}, std::move(out), "pairwise_sqdist", {xn, cn},
                            [xn, cn, n, d, k](TensorNode& self) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    for (std::size_t j = 0; j < k; ++j) {
                                        const double g = self.grad[i * k + j];
                                        if (g == 0.0) continue;
                                        for (std::size_t t = 0; t < d; ++t) {
                                            const double diff =
                                                xn->data[i * d + t] - cn->data[j * d + t];
                                            if (xn->requires_grad)
                                                xn->grad[i * d + t] += 2.0 * g * diff;
                                            if (cn->requires_grad)
                                                cn->grad[j * d + t] -= 2.0 * g * diff;
                                        }
                                    }
                                }
                            }));
}

Tensor make_custom_op(Shape shape, std::vector<double> data, const char* op,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_rule) {
    std::vector<std::shared_ptr<TensorNode>> parent_nodes;
    parent_nodes.reserve(parents.size());
    for (const auto& p : parents) parent_nodes.push_back(p.node());
    return Tensor(make_node(std::move(shape), std::move(data), op, std::move(parent_nodes),
                            std::move(backward_rule)));
}

// ---- tape ----

GradTape::GradTape(const std::shared_ptr<TensorNode>& root) : root_(root) {
    if (!root->requires_grad) return;  // constant: nothing recorded
    // iterative DFS postorder: parents land before children
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next].get();
            ++next;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

void GradTape::run() {
    if (order_.empty()) return;
    root_->grad[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward) node->backward(*node);
    }
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(loss.shape()));
    }
    GradTape tape(loss.node());
    tape.run();
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor probe = Tensor::from_data(x.shape(), x.data(), true);
    Tensor y = f(probe);
    if (y.numel() != 1) throw ContractError("grad_check: f must be scalar-valued");
    backward(y);
    const std::vector<double> analytic = probe.grad();

    std::vector<double> base = x.data();
    double worst = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double keep = base[i];
        base[i] = keep + h;
        const double fp = f(Tensor::from_data(x.shape(), base)).item();
        base[i] = keep - h;
        const double fm = f(Tensor::from_data(x.shape(), base)).item();
        base[i] = keep;
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace icicle

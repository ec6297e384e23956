#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace icicle {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// One recorded node of the gradient tape: the stored value, its gradient
/// accumulator, and the rule that pushes gradients to its inputs.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data iff requires_grad
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;  // accumulates into parents' grad
    const char* op = "leaf";
    std::uint64_t seq = 0;  // creation order; parents always precede children
};

/**
 * @brief Dense n-d array of doubles with reverse-mode autodiff.
 *
 * A Tensor is a cheap handle onto a shared node. Operations build a DAG of
 * nodes; backward() on a scalar loss replays the recorded rules in reverse
 * topological order. Values are validated finite after every operation.
 */
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor ones(Shape shape);
    static Tensor identity(std::size_t n);
    static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);
    /// 2-D convenience for tests and small literals.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rows() const;  // 2-D only
    std::size_t cols() const;  // 2-D only
    bool requires_grad() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // in-place edits (optimizer updates on leaves)
    const std::vector<double>& grad() const;
    std::vector<double>& mutable_grad();

    double item() const;  // scalar extraction; ContractError if numel != 1
    double at(std::size_t i, std::size_t j) const;

    void zero_grad();
    /// Constant snapshot: same values, no history, no gradient.
    Tensor detach() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- primitives (forward + recorded backward rule) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow_scalar(const Tensor& a, double p);
Tensor sum(const Tensor& a);  // -> 1x1
Tensor row_softmax(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a);
Tensor row_normalize(const Tensor& a);  // divide each row by its sum (entries must be > 0)
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);  // NxK + 1xK
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride);
Tensor maxpool2x2(const Tensor& input);
Tensor reshape(const Tensor& a, Shape shape);
Tensor pairwise_sqdist(const Tensor& x, const Tensor& centers);  // NxD, KxD -> NxK

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }

/// Record a custom primitive on the tape: `data` is the forward result and
/// `backward_rule` pushes self.grad into the parents' grad buffers.
Tensor make_custom_op(Shape shape, std::vector<double> data, const char* op,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_rule);

/// Reachable subgraph of a root node in topological order; running it
/// accumulates gradients into every requires_grad leaf exactly once per use.
class GradTape {
public:
    explicit GradTape(const std::shared_ptr<TensorNode>& root);
    void run();  // seeds d(root)/d(root) = 1 and replays in reverse order
    std::size_t num_ops() const { return order_.size(); }

private:
    std::shared_ptr<TensorNode> root_;
    std::vector<TensorNode*> order_;
};

/// Populate gradients of every requires_grad leaf reachable from `loss`.
/// `loss` must be scalar. A detached (constant) loss is a no-op.
void backward(const Tensor& loss);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double h = 1e-6);

}  // namespace icicle

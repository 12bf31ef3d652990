#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "micacl/errors.hpp"
#include "micacl/rng.hpp"

namespace micacl {

using Shape = std::vector<int>;

enum class Activation { ReLU, Sigmoid, Tanh };
enum class Reduce { Sum, Mean, Max };

std::string shape_str(const Shape& s);
int shape_size(const Shape& s);

namespace detail {

// One entry of the computation tape. Nodes are created in forward order
// (creation order is topological by construction) and hold everything the
// backward pass needs: the recorded value, the parent links and a closure
// that pushes this node's gradient into its parents.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool consumed = false;  // set once a backward pass has replayed this node
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // empty for leaves

    int size() const { return static_cast<int>(value.size()); }
    bool is_leaf() const { return parents.empty(); }

    // Gradient buffer, zero-initialized on first use.
    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> value, bool requires_grad);

}  // namespace detail

// Dense row-major float64 tensor participating in a define-by-run reverse-mode
// autodiff graph. A Tensor is a cheap handle: copying it copies the handle,
// not the buffer. Leaf tensors may be mutated through mutable_values()
// (optimizer updates, finite-difference probes); recorded tensors must not be.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int size() const { return node_->size(); }
    int dim(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }

    const std::vector<double>& values() const { return node_->value; }
    // Leaf-only mutable access; a recorded node's value is part of the tape.
    // A Tensor is a handle, so buffer mutation does not need a mutable handle.
    std::vector<double>& mutable_values() const;
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad() const { node_->grad.clear(); }

    // Copy of the values as a fresh non-differentiable leaf.
    Tensor detach() const;

    std::uint64_t node_id() const { return node_->id; }
    const std::shared_ptr<detail::Node>& node() const { return node_; }

    // Factory for modules that define their own differentiable primitives
    // (losses, similarity kernels). `backward` reads self.grad and accumulates
    // into self.parents. Parents without requires_grad are still linked so the
    // tape stays replayable in one pass.
    static Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backward);

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    std::shared_ptr<detail::Node> node_;
};

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
// x scaled by a scalar tensor (gradient flows to both).
Tensor scale(const Tensor& x, const Tensor& s);
// [R x C] plus a length-C row vector broadcast over rows.
Tensor add_rowvec(const Tensor& a, const Tensor& v);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
Tensor transpose(const Tensor& a);                // 2-D

// ---- nonlinearities / reductions ----
Tensor softmax(const Tensor& x, int axis);
Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::ReLU); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::Sigmoid); }
inline Tensor tanh_act(const Tensor& x) { return activation(x, Activation::Tanh); }
Tensor reduce(const Tensor& x, int axis, Reduce kind);
Tensor reduce_all(const Tensor& x, Reduce kind);  // to a rank-0 scalar
// Pools the last axis to out_len buckets; bucket i averages input indices
// [floor(i*n/out_len), floor((i+1)*n/out_len)). Rank 1 or 2.
Tensor adaptive_avg_pool(const Tensor& x, int out_len);

// ---- shape manipulation ----
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor select(const Tensor& x, int axis, int index);   // drops the axis
Tensor stack(const std::vector<Tensor>& xs, int axis); // inserts a new axis
Tensor concat_last(const std::vector<Tensor>& xs);     // along the existing last axis

// Seeds d(loss)/d(loss) = 1 and replays the tape once in reverse topological
// order, accumulating gradients into every requires_grad ancestor. The loss
// must be a recorded scalar; replaying a consumed tape throws.
void backward(const Tensor& loss);

}  // namespace micacl

#include "micacl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace micacl {

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};

// Row-major decomposition around `axis`: flat index = (o*n + i)*inner + j
// with o < outer, i < n, j < inner.
struct AxisView {
    int outer = 1;
    int n = 1;
    int inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
    AxisView v;
    v.n = shape[static_cast<std::size_t>(axis)];
    for (int k = 0; k < axis; ++k) v.outer *= shape[static_cast<std::size_t>(k)];
    for (int k = axis + 1; k < static_cast<int>(shape.size()); ++k)
        v.inner *= shape[static_cast<std::size_t>(k)];
    return v;
}

void check_axis(const Shape& shape, int axis, const char* op) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

int shape_size(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

namespace detail {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> value, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_str(shape));
    if (static_cast<std::size_t>(shape_size(shape)) != value.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(value.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

}  // namespace detail

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    return Tensor(detail::make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = static_cast<std::size_t>(shape_size(shape));
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    const auto n = static_cast<std::size_t>(shape_size(shape));
    return from(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : data) x = rng.uniform_in(lo, hi);
    return from(std::move(shape), std::move(data), requires_grad);
}

std::vector<double>& Tensor::mutable_values() const {
    if (!node_->is_leaf())
        throw NumericError("tensor: mutating a recorded (non-leaf) tensor is not allowed");
    return node_->value;
}

double Tensor::item() const {
    if (size() != 1)
        throw ShapeError("tensor: item() requires a single element, got shape " + shape_str(shape()));
    return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty())
        throw NumericError("tensor: gradient not populated; run backward() first");
    return node_->grad;
}

Tensor Tensor::detach() const { return from(shape(), values(), false); }

Tensor Tensor::make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                       std::function<void(detail::Node&)> backward_fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    auto n = detail::make_leaf(std::move(shape), std::move(value), rg);
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward_fn);
    return Tensor(std::move(n));
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (int k = 0; k < 2; ++k) {
            auto& p = self.parents[static_cast<std::size_t>(k)];
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.values());
    for (auto& x : out) x += c;
    return Tensor::make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.values());
    for (auto& x : out) x *= c;
    return Tensor::make_op(a.shape(), std::move(out), {a}, [c](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
    });
}

Tensor scale(const Tensor& x, const Tensor& s) {
    if (s.size() != 1)
        throw ShapeError("scale: scaling factor must be a single element, got shape " +
                         shape_str(s.shape()));
    const double sv = s.values()[0];
    std::vector<double> out(x.values());
    for (auto& v : out) v *= sv;
    return Tensor::make_op(x.shape(), std::move(out), {x, s}, [sv](detail::Node& self) {
        auto& px = self.parents[0];
        auto& ps = self.parents[1];
        if (px->requires_grad) {
            auto& g = px->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sv * self.grad[i];
        }
        if (ps->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px->value[i];
            ps->ensure_grad()[0] += acc;
        }
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.dim(1) != v.dim(0))
        throw ShapeError("add_rowvec: expected [R x C] + [C], got " + shape_str(a.shape()) +
                         " and " + shape_str(v.shape()));
    const int rows = a.dim(0), cols = a.dim(1);
    std::vector<double> out(a.values());
    const auto& vv = v.values();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(r * cols + c)] += vv[static_cast<std::size_t>(c)];
    return Tensor::make_op(a.shape(), std::move(out), {a, v}, [rows, cols](detail::Node& self) {
        auto& pa = self.parents[0];
        auto& pv = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pv->requires_grad) {
            auto& g = pv->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    g[static_cast<std::size_t>(c)] += self.grad[static_cast<std::size_t>(r * cols + c)];
        }
    });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double aik = av[static_cast<std::size_t>(i * k + kk)];
            const double* brow = bv.data() + static_cast<std::size_t>(kk * n);
            double* orow = out.data() + static_cast<std::size_t>(i * n);
            for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    return Tensor::make_op({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        // dA = G * B^T
        if (pa->requires_grad) {
            auto& ga = pa->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    const double* grow = self.grad.data() + static_cast<std::size_t>(i * n);
                    const double* brow = pb->value.data() + static_cast<std::size_t>(kk * n);
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[static_cast<std::size_t>(i * k + kk)] += acc;
                }
        }
        // dB = A^T * G
        if (pb->requires_grad) {
            auto& gb = pb->ensure_grad();
            for (int kk = 0; kk < k; ++kk)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i)
                        acc += pa->value[static_cast<std::size_t>(i * k + kk)] *
                               self.grad[static_cast<std::size_t>(i * n + j)];
                    gb[static_cast<std::size_t>(kk * n + j)] += acc;
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2)
        throw ShapeError("transpose: expected a 2-D tensor, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n));
    const auto& av = a.values();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j * m + i)] = av[static_cast<std::size_t>(i * n + j)];
    return Tensor::make_op({n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                g[static_cast<std::size_t>(i * n + j)] += self.grad[static_cast<std::size_t>(j * m + i)];
    });
}

// ---- nonlinearities / reductions ----

Tensor softmax(const Tensor& x, int axis) {
    check_axis(x.shape(), axis, "softmax");
    const AxisView v = axis_view(x.shape(), axis);
    std::vector<double> out(x.values());
    for (int o = 0; o < v.outer; ++o)
        for (int j = 0; j < v.inner; ++j) {
            const auto at = [&](int i) -> double& {
                return out[static_cast<std::size_t>((o * v.n + i) * v.inner + j)];
            };
            double mx = at(0);
            for (int i = 1; i < v.n; ++i) mx = std::max(mx, at(i));
            double sum = 0.0;
            for (int i = 0; i < v.n; ++i) {
                at(i) = std::exp(at(i) - mx);
                sum += at(i);
            }
            for (int i = 0; i < v.n; ++i) at(i) /= sum;
        }
    return Tensor::make_op(x.shape(), std::move(out), {x}, [v](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (int o = 0; o < v.outer; ++o)
            for (int j = 0; j < v.inner; ++j) {
                double dot = 0.0;
                for (int i = 0; i < v.n; ++i) {
                    const auto idx = static_cast<std::size_t>((o * v.n + i) * v.inner + j);
                    dot += self.grad[idx] * self.value[idx];
                }
                for (int i = 0; i < v.n; ++i) {
                    const auto idx = static_cast<std::size_t>((o * v.n + i) * v.inner + j);
                    g[idx] += self.value[idx] * (self.grad[idx] - dot);
                }
            }
    });
}

Tensor activation(const Tensor& x, Activation kind) {
    std::vector<double> out(x.values());
    switch (kind) {
        case Activation::ReLU:
            for (auto& v : out) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Sigmoid:
            for (auto& v : out) {
                // branch keeps exp() argument non-positive
                if (v >= 0.0) {
                    v = 1.0 / (1.0 + std::exp(-v));
                } else {
                    const double e = std::exp(v);
                    v = e / (1.0 + e);
                }
            }
            break;
        case Activation::Tanh:
            for (auto& v : out) v = std::tanh(v);
            break;
    }
    return Tensor::make_op(x.shape(), std::move(out), {x}, [kind](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        switch (kind) {
            case Activation::ReLU:
                // subgradient 0 at the kink
                for (std::size_t i = 0; i < g.size(); ++i)
                    g[i] += p->value[i] > 0.0 ? self.grad[i] : 0.0;
                break;
            case Activation::Sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double s = self.value[i];
                    g[i] += self.grad[i] * s * (1.0 - s);
                }
                break;
            case Activation::Tanh:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double t = self.value[i];
                    g[i] += self.grad[i] * (1.0 - t * t);
                }
                break;
        }
    });
}

Tensor reduce(const Tensor& x, int axis, Reduce kind) {
    check_axis(x.shape(), axis, "reduce");
    const AxisView v = axis_view(x.shape(), axis);
    Shape out_shape;
    for (int k = 0; k < static_cast<int>(x.shape().size()); ++k)
        if (k != axis) out_shape.push_back(x.dim(k));
    const auto out_n = static_cast<std::size_t>(v.outer * v.inner);
    std::vector<double> out(out_n, 0.0);
    std::vector<int> argmax;  // only for Max: routes the gradient to the first maximal element
    if (kind == Reduce::Max) argmax.assign(out_n, 0);
    const auto& xv = x.values();
    for (int o = 0; o < v.outer; ++o)
        for (int j = 0; j < v.inner; ++j) {
            const auto oidx = static_cast<std::size_t>(o * v.inner + j);
            if (kind == Reduce::Max) {
                double best = xv[static_cast<std::size_t>((o * v.n) * v.inner + j)];
                int best_i = 0;
                for (int i = 1; i < v.n; ++i) {
                    const double val = xv[static_cast<std::size_t>((o * v.n + i) * v.inner + j)];
                    if (val > best) {
                        best = val;
                        best_i = i;
                    }
                }
                out[oidx] = best;
                argmax[oidx] = best_i;
            } else {
                double acc = 0.0;
                for (int i = 0; i < v.n; ++i)
                    acc += xv[static_cast<std::size_t>((o * v.n + i) * v.inner + j)];
                out[oidx] = kind == Reduce::Mean ? acc / v.n : acc;
            }
        }
    return Tensor::make_op(std::move(out_shape), std::move(out), {x},
                           [v, kind, argmax = std::move(argmax)](detail::Node& self) {
                               auto& p = self.parents[0];
                               if (!p->requires_grad) return;
                               auto& g = p->ensure_grad();
                               for (int o = 0; o < v.outer; ++o)
                                   for (int j = 0; j < v.inner; ++j) {
                                       const auto oidx = static_cast<std::size_t>(o * v.inner + j);
                                       const double go = self.grad[oidx];
                                       if (kind == Reduce::Max) {
                                           g[static_cast<std::size_t>((o * v.n + argmax[oidx]) * v.inner + j)] += go;
                                       } else {
                                           const double share = kind == Reduce::Mean ? go / v.n : go;
                                           for (int i = 0; i < v.n; ++i)
                                               g[static_cast<std::size_t>((o * v.n + i) * v.inner + j)] += share;
                                       }
                                   }
                           });
}

Tensor reduce_all(const Tensor& x, Reduce kind) {
    return reduce(reshape(x, {x.size()}), 0, kind);
}

Tensor adaptive_avg_pool(const Tensor& x, int out_len) {
    if (x.rank() != 1 && x.rank() != 2)
        throw ShapeError("adaptive_avg_pool: expected rank 1 or 2, got " + shape_str(x.shape()));
    const int n = x.dim(x.rank() - 1);
    if (out_len < 1 || out_len > n)
        throw ShapeError("adaptive_avg_pool: out_len " + std::to_string(out_len) +
                         " outside [1, " + std::to_string(n) + "]");
    const int rows = x.rank() == 2 ? x.dim(0) : 1;
    Shape out_shape = x.rank() == 2 ? Shape{rows, out_len} : Shape{out_len};
    std::vector<double> out(static_cast<std::size_t>(rows * out_len), 0.0);
    const auto& xv = x.values();
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < out_len; ++i) {
            const int lo = static_cast<int>(static_cast<long long>(i) * n / out_len);
            const int hi = static_cast<int>(static_cast<long long>(i + 1) * n / out_len);
            double acc = 0.0;
            for (int k = lo; k < hi; ++k) acc += xv[static_cast<std::size_t>(r * n + k)];
            out[static_cast<std::size_t>(r * out_len + i)] = acc / (hi - lo);
        }
    return Tensor::make_op(std::move(out_shape), std::move(out), {x},
                           [rows, n, out_len](detail::Node& self) {
                               auto& p = self.parents[0];
                               if (!p->requires_grad) return;
                               auto& g = p->ensure_grad();
                               for (int r = 0; r < rows; ++r)
                                   for (int i = 0; i < out_len; ++i) {
                                       const int lo = static_cast<int>(static_cast<long long>(i) * n / out_len);
                                       const int hi = static_cast<int>(static_cast<long long>(i + 1) * n / out_len);
                                       const double share =
                                           self.grad[static_cast<std::size_t>(r * out_len + i)] / (hi - lo);
                                       for (int k = lo; k < hi; ++k)
                                           g[static_cast<std::size_t>(r * n + k)] += share;
                                   }
                           });
}

// ---- shape manipulation ----

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_size(new_shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    return Tensor::make_op(std::move(new_shape), x.values(), {x}, [](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor select(const Tensor& x, int axis, int index) {
    check_axis(x.shape(), axis, "select");
    const AxisView v = axis_view(x.shape(), axis);
    if (index < 0 || index >= v.n)
        throw ShapeError("select: index " + std::to_string(index) + " out of range for axis of size " +
                         std::to_string(v.n));
    Shape out_shape;
    for (int k = 0; k < static_cast<int>(x.shape().size()); ++k)
        if (k != axis) out_shape.push_back(x.dim(k));
    std::vector<double> out(static_cast<std::size_t>(v.outer * v.inner));
    const auto& xv = x.values();
    for (int o = 0; o < v.outer; ++o)
        for (int j = 0; j < v.inner; ++j)
            out[static_cast<std::size_t>(o * v.inner + j)] =
                xv[static_cast<std::size_t>((o * v.n + index) * v.inner + j)];
    return Tensor::make_op(std::move(out_shape), std::move(out), {x}, [v, index](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        for (int o = 0; o < v.outer; ++o)
            for (int j = 0; j < v.inner; ++j)
                g[static_cast<std::size_t>((o * v.n + index) * v.inner + j)] +=
                    self.grad[static_cast<std::size_t>(o * v.inner + j)];
    });
}

Tensor stack(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw ShapeError("stack: empty tensor list");
    const Shape& base = xs[0].shape();
    for (const auto& t : xs)
        if (t.shape() != base)
            throw ShapeError("stack: mismatched shapes " + shape_str(base) + " vs " +
                             shape_str(t.shape()));
    if (axis < 0 || axis > static_cast<int>(base.size()))
        throw ShapeError("stack: axis " + std::to_string(axis) + " out of range");
    Shape out_shape = base;
    out_shape.insert(out_shape.begin() + axis, static_cast<int>(xs.size()));
    const AxisView v = axis_view(out_shape, axis);
    std::vector<double> out(static_cast<std::size_t>(v.outer * v.n * v.inner));
    for (int i = 0; i < v.n; ++i) {
        const auto& src = xs[static_cast<std::size_t>(i)].values();
        for (int o = 0; o < v.outer; ++o)
            for (int j = 0; j < v.inner; ++j)
                out[static_cast<std::size_t>((o * v.n + i) * v.inner + j)] =
                    src[static_cast<std::size_t>(o * v.inner + j)];
    }
    return Tensor::make_op(std::move(out_shape), std::move(out), xs, [v](detail::Node& self) {
        for (int i = 0; i < v.n; ++i) {
            auto& p = self.parents[static_cast<std::size_t>(i)];
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (int o = 0; o < v.outer; ++o)
                for (int j = 0; j < v.inner; ++j)
                    g[static_cast<std::size_t>(o * v.inner + j)] +=
                        self.grad[static_cast<std::size_t>((o * v.n + i) * v.inner + j)];
        }
    });
}

Tensor concat_last(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_last: empty tensor list");
    const int rank = xs[0].rank();
    if (rank < 1) throw ShapeError("concat_last: scalars cannot be concatenated");
    Shape lead(xs[0].shape().begin(), xs[0].shape().end() - 1);
    int total = 0;
    std::vector<int> widths;
    for (const auto& t : xs) {
        if (t.rank() != rank ||
            !std::equal(lead.begin(), lead.end(), t.shape().begin()))
            throw ShapeError("concat_last: incompatible shapes " + shape_str(xs[0].shape()) +
                             " vs " + shape_str(t.shape()));
        widths.push_back(t.dim(rank - 1));
        total += widths.back();
    }
    const int rows = shape_size(lead);
    Shape out_shape = lead;
    out_shape.push_back(total);
    std::vector<double> out(static_cast<std::size_t>(rows * total));
    int off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const int w = widths[k];
        const auto& src = xs[k].values();
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < w; ++c)
                out[static_cast<std::size_t>(r * total + off + c)] =
                    src[static_cast<std::size_t>(r * w + c)];
        off += w;
    }
    return Tensor::make_op(std::move(out_shape), std::move(out), xs,
                           [rows, total, widths](detail::Node& self) {
                               int off = 0;
                               for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                   const int w = widths[k];
                                   auto& p = self.parents[k];
                                   if (p->requires_grad) {
                                       auto& g = p->ensure_grad();
                                       for (int r = 0; r < rows; ++r)
                                           for (int c = 0; c < w; ++c)
                                               g[static_cast<std::size_t>(r * w + c)] +=
                                                   self.grad[static_cast<std::size_t>(r * total + off + c)];
                                   }
                                   off += w;
                               }
                           });
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (!loss.defined()) throw NumericError("backward: undefined tensor");
    auto root = loss.node();
    if (root->size() != 1)
        throw NumericError("backward: loss must be a scalar, got shape " + shape_str(root->shape));
    if (root->is_leaf())
        throw NumericError("backward: empty tape (loss records no operations)");

    // Iterative DFS post-order: every recorded node appears after its parents,
    // so the reversed order replays each backward exactly once.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stk;
    stk.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stk.empty()) {
        auto& top = stk.back();
        detail::Node* n = top.first;
        if (top.second < n->parents.size()) {
            detail::Node* p = n->parents[top.second].get();
            ++top.second;
            if (!p->is_leaf() && visited.insert(p).second) stk.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stk.pop_back();
        }
    }

    root->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->consumed)
            throw NumericError("backward: tape already consumed; rebuild the forward graph");
        n->consumed = true;
        if (n->backward) n->backward(*n);
    }
}

}  // namespace micacl

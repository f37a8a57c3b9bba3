#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffnerv {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <typename T>
class BasicTensor;

namespace detail {

template <typename T>
struct TensorImpl;

// One recorded operation. `apply` receives the gradient of the op's output and
// accumulates into the gradient buffers of `inputs`.
template <typename T>
struct Node {
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    std::function<void(std::span<const T>)> apply;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::shared_ptr<Node<T>> grad_fn;

    // Returns the gradient buffer, allocating zeros on first use.
    std::vector<T>& grad_buffer()
    {
        if (grad.empty() && !data.empty()) {
            grad.assign(data.size(), T(0));
        }
        return grad;
    }
};

std::uint64_t next_node_seq();

}  // namespace detail

// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool recording();

private:
    bool previous_;
};

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// Copies share storage (handle semantics, like a framework tensor). Use
/// clone() for an independent deep copy. Storage is 32-bit for `Tensor`;
/// `Tensor64` runs the identical graph in double precision for gradient checks.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor();
    BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false);

    static BasicTensor zeros(const Shape& shape, bool requires_grad = false);
    static BasicTensor full(const Shape& shape, T value, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    const Shape& shape() const { return impl_->shape; }
    std::int64_t dim(std::size_t axis) const;
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }
    bool defined() const { return impl_ != nullptr; }

    std::span<const T> data() const { return impl_->data; }
    // Direct mutation bypasses the graph; only use on leaves outside recording.
    std::span<T> mutable_data() { return impl_->data; }
    T item() const;
    T at(std::int64_t i0, std::int64_t i1, std::int64_t i2) const;

    bool requires_grad() const { return impl_->requires_grad; }
    BasicTensor& set_requires_grad(bool flag);
    bool is_leaf() const { return impl_->grad_fn == nullptr; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    void zero_grad();

    // A new leaf holding a copy of the values, with no graph history.
    BasicTensor detach() const;
    BasicTensor clone() const { return detach(); }

    /// Back-propagates from this scalar into every requires_grad leaf.
    /// Gradients accumulate across calls until zero_grad(). Returns the
    /// number of recorded ops visited.
    std::size_t backward() const;

    // Internal: used by op implementations.
    const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }
    static BasicTensor from_impl(std::shared_ptr<detail::TensorImpl<T>> impl);

private:
    std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Converts between storage precisions; the result is a fresh leaf.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& x)
{
    std::vector<To> values(x.numel());
    auto src = x.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<To>(src[i]);
    }
    return BasicTensor<To>(x.shape(), std::move(values), x.requires_grad());
}

namespace detail {

// Builds an op output. When recording is on and any input needs gradients,
// attaches a node that calls `backward_fn(grad_out)`.
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> values,
                           std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                           std::function<void(std::span<const T>)> backward_fn)
{
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    bool needs_grad = false;
    if (NoGradGuard::recording()) {
        for (const auto& in : inputs) {
            needs_grad = needs_grad || in->requires_grad;
        }
    }
    if (needs_grad) {
        impl->requires_grad = true;
        auto node = std::make_shared<Node<T>>();
        node->seq = next_node_seq();
        node->inputs = std::move(inputs);
        node->apply = std::move(backward_fn);
        impl->grad_fn = std::move(node);
    }
    return BasicTensor<T>::from_impl(std::move(impl));
}

}  // namespace detail

}  // namespace ffnerv

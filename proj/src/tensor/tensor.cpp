#include "ffnerv/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ffnerv {

std::int64_t shape_numel(const Shape& shape)
{
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e < 0) {
            throw ShapeError("negative extent in shape " + shape_string(shape));
        }
        n *= e;
    }
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    if (shape.empty()) {
        os << "scalar";
    }
    return os.str();
}

namespace detail {

std::uint64_t next_node_seq()
{
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

}  // namespace detail

namespace {
thread_local bool t_recording = true;
}

NoGradGuard::NoGradGuard() : previous_(t_recording) { t_recording = false; }
NoGradGuard::~NoGradGuard() { t_recording = previous_; }
bool NoGradGuard::recording() { return t_recording; }

template <typename T>
BasicTensor<T>::BasicTensor() : impl_(std::make_shared<detail::TensorImpl<T>>())
{
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl<T>>())
{
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(const Shape& shape, bool requires_grad)
{
    return full(shape, T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value, bool requires_grad)
{
    return BasicTensor(shape, std::vector<T>(static_cast<std::size_t>(shape_numel(shape)), value),
                       requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad)
{
    return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::int64_t BasicTensor<T>::dim(std::size_t axis) const
{
    if (axis >= impl_->shape.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(impl_->shape));
    }
    return impl_->shape[axis];
}

template <typename T>
T BasicTensor<T>::item() const
{
    if (impl_->data.size() != 1) {
        throw ShapeError("item() needs a single-element tensor, shape is " +
                         shape_string(impl_->shape));
    }
    return impl_->data[0];
}

template <typename T>
T BasicTensor<T>::at(std::int64_t i0, std::int64_t i1, std::int64_t i2) const
{
    const auto& s = impl_->shape;
    if (s.size() != 3) {
        throw ShapeError("at(c, y, x) needs a rank-3 tensor, shape is " + shape_string(s));
    }
    return impl_->data[static_cast<std::size_t>((i0 * s[1] + i1) * s[2] + i2)];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool flag)
{
    if (!is_leaf()) {
        throw std::logic_error("requires_grad can only be changed on leaf tensors");
    }
    impl_->requires_grad = flag;
    if (!flag) {
        impl_->grad.clear();
    }
    return *this;
}

template <typename T>
void BasicTensor<T>::zero_grad()
{
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const
{
    return BasicTensor(impl_->shape, impl_->data, false);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_impl(std::shared_ptr<detail::TensorImpl<T>> impl)
{
    BasicTensor t;
    t.impl_ = std::move(impl);
    return t;
}

template <typename T>
std::size_t BasicTensor<T>::backward() const
{
    if (impl_->data.size() != 1 || !impl_->shape.empty()) {
        throw ShapeError("backward() needs a scalar loss, shape is " +
                         shape_string(impl_->shape));
    }
    if (!impl_->requires_grad) {
        return 0;
    }

    // Every non-leaf reachable from the loss, ordered newest op first. Op
    // sequence numbers follow execution order, so this is a valid reverse
    // topological order.
    std::vector<detail::TensorImpl<T>*> order;
    std::unordered_set<const detail::TensorImpl<T>*> seen;
    std::vector<detail::TensorImpl<T>*> stack{impl_.get()};
    while (!stack.empty()) {
        auto* cur = stack.back();
        stack.pop_back();
        if (!cur->grad_fn || !seen.insert(cur).second) {
            continue;
        }
        order.push_back(cur);
        for (const auto& in : cur->grad_fn->inputs) {
            if (in->requires_grad) {
                stack.push_back(in.get());
            }
        }
    }
    std::sort(order.begin(), order.end(),
              [](const auto* a, const auto* b) { return a->grad_fn->seq > b->grad_fn->seq; });

    if (impl_->grad_fn) {
        impl_->grad.assign(1, T(1));
    } else {
        impl_->grad_buffer()[0] += T(1);
        return 0;
    }
    for (auto* node_out : order) {
        auto& g = node_out->grad_buffer();
        node_out->grad_fn->apply(std::span<const T>(g));
        // Intermediate gradients are transient; leaves keep theirs.
        std::vector<T>().swap(node_out->grad);
    }
    return order.size();
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace ffnerv

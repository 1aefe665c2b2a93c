#include "celebi/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace celebi {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

void TensorData::accumulate(const double* g, std::size_t n) {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    auto d = std::make_shared<TensorData>();
    d->shape = shape;
    d->values.assign(shape_numel(shape), 0.0);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    for (auto& v : t.mutable_values()) v = value;
    return t;
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
    check(values.size() == shape_numel(shape), "Tensor::from: values length must equal product of shape");
    auto d = std::make_shared<TensorData>();
    d->shape = shape;
    d->values = std::move(values);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::scalar_value(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

const std::vector<double>& Tensor::grad() const {
    check(!d_->grad.empty(), "Tensor::grad: gradient not populated");
    return d_->grad;
}

double Tensor::scalar() const {
    check(d_->numel() == 1, "Tensor::scalar: tensor is not a scalar");
    return d_->values[0];
}

Tape& Tape::active() {
    thread_local Tape tape;
    return tape;
}

void Tape::backward(const Tensor& loss) {
    check(loss.defined(), "backward: undefined loss");
    check(loss.numel() == 1, "backward: loss must be a scalar");
    if (consumed_) throw std::logic_error("backward: tape already consumed; rebuild the graph first");
    consumed_ = true;

    // mark nodes on a path from loss back to any grad-requiring input
    std::unordered_set<const TensorData*> reachable;
    std::vector<const TensorData*> stack{loss.raw()};
    while (!stack.empty()) {
        const TensorData* n = stack.back();
        stack.pop_back();
        if (!n->requires_grad || reachable.count(n)) continue;
        reachable.insert(n);
        for (const auto& p : n->parents) stack.push_back(p.get());
    }
    if (!loss.raw()->requires_grad) return;  // constant loss: nothing to do

    loss.raw()->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        TensorData* n = it->get();
        if (!reachable.count(n) || !n->backward_fn) continue;
        if (n->grad.empty()) continue;  // recorded but not on the loss path
        n->backward_fn(*n);
    }
}

void backward(const Tensor& loss) { Tape::active().backward(loss); }

}  // namespace celebi

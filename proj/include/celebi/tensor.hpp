#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "celebi/errors.hpp"

namespace celebi {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One node of the define-by-run graph. Nodes produced by an operation carry a
// closure that scatters the node's gradient into its parents; leaves carry
// none. Gradients are allocated on first touch, so a leaf whose grad is empty
// was never reached by a backward pass.
struct TensorData {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;

    std::vector<std::shared_ptr<TensorData>> parents;
    std::function<void(TensorData&)> backward_fn;

    std::size_t numel() const { return values.size(); }
    void accumulate(const double* g, std::size_t n);
};

// Value-semantics handle to a graph node.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar_value(double v, bool requires_grad = false);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    std::size_t numel() const { return d_->numel(); }
    bool requires_grad() const { return d_->requires_grad; }

    double* data() { return d_->values.data(); }
    const double* data() const { return d_->values.data(); }
    const std::vector<double>& values() const { return d_->values; }
    std::vector<double>& mutable_values() { return d_->values; }

    bool has_grad() const { return !d_->grad.empty(); }
    const std::vector<double>& grad() const;
    void clear_grad() { d_->grad.clear(); }

    double scalar() const;
    double item(std::size_t i) const { return d_->values[i]; }

    std::shared_ptr<TensorData> node() const { return d_; }
    TensorData* raw() const { return d_.get(); }

  private:
    std::shared_ptr<TensorData> d_;
};

// Define-by-run tape. Operations record their result nodes here in forward
// order (already topological). One backward per tape; reset() starts the next
// forward pass. Thread-local so parallel seed runs never share state.
class Tape {
  public:
    static Tape& active();

    void record(std::shared_ptr<TensorData> node) { nodes_.push_back(std::move(node)); }

    // Populates grads of every requires_grad tensor reachable from loss.
    void backward(const Tensor& loss);

    void reset() {
        nodes_.clear();
        consumed_ = false;
    }

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

    bool grad_enabled() const { return grad_enabled_; }
    void set_grad_enabled(bool on) { grad_enabled_ = on; }

  private:
    std::vector<std::shared_ptr<TensorData>> nodes_;
    bool consumed_ = false;
    bool grad_enabled_ = true;
};

// Evaluation scope: ops built inside do not record on the tape and their
// results never require grad.
struct NoGradGuard {
    NoGradGuard() : prev_(Tape::active().grad_enabled()) { Tape::active().set_grad_enabled(false); }
    ~NoGradGuard() { Tape::active().set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

void backward(const Tensor& loss);

}  // namespace celebi

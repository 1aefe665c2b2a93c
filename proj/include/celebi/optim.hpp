#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "celebi/tensor.hpp"

namespace celebi {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Named parameter tensors plus their Adam state. The state lives with the
// store for the whole run: re-initializing parameter values does not touch
// the moments or the step counter.
class ParameterStore {
  public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;
    ParameterStore(ParameterStore&&) = default;
    ParameterStore& operator=(ParameterStore&&) = default;

    Tensor create(const std::string& name, const Shape& shape);
    Tensor get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }

    void zero_grad();
    void set_requires_grad(bool on);

    // bit-exact value copy into an identically keyed/shaped store
    void copy_values_to(ParameterStore& other) const;

    // value snapshots for rollback on numeric failure (optimizer state and
    // step counter are not part of the snapshot)
    std::map<std::string, std::vector<double>> snapshot_values() const;
    void restore_values(const std::map<std::string, std::vector<double>>& snapshot);

    std::uint64_t checksum() const;
    std::int64_t step_count() const { return step_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

    friend void adam_step(ParameterStore& store, const AdamConfig& config);

  private:
    struct Slot {
        Tensor tensor;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::map<std::string, Slot> params_;
    std::int64_t step_ = 0;
};

// Standard Adam with bias correction; requires every parameter's gradient to
// be populated, and clears them afterwards.
void adam_step(ParameterStore& store, const AdamConfig& config);

}  // namespace celebi

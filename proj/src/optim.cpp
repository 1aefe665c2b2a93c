#include "celebi/optim.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "celebi/rng.hpp"

namespace celebi {

Tensor ParameterStore::create(const std::string& name, const Shape& shape) {
    check(!params_.count(name), "ParameterStore: duplicate parameter '" + name + "'");
    Tensor t = Tensor::zeros(shape, true);
    Slot slot;
    slot.tensor = t;
    slot.m.assign(t.numel(), 0.0);
    slot.v.assign(t.numel(), 0.0);
    params_.emplace(name, std::move(slot));
    return t;
}

Tensor ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    check(it != params_.end(), "ParameterStore: unknown parameter '" + name + "'");
    return it->second.tensor;
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [k, _] : params_) out.push_back(k);
    return out;
}

void ParameterStore::zero_grad() {
    for (auto& [_, slot] : params_) slot.tensor.clear_grad();
}

void ParameterStore::set_requires_grad(bool on) {
    for (auto& [_, slot] : params_) slot.tensor.raw()->requires_grad = on;
}

void ParameterStore::copy_values_to(ParameterStore& other) const {
    check(params_.size() == other.params_.size(), "copy_values_to: store layouts differ");
    for (const auto& [name, slot] : params_) {
        auto it = other.params_.find(name);
        check(it != other.params_.end(), "copy_values_to: missing parameter '" + name + "'");
        check(it->second.tensor.shape() == slot.tensor.shape(), "copy_values_to: shape mismatch for '" + name + "'");
        it->second.tensor.mutable_values() = slot.tensor.values();
    }
}

std::map<std::string, std::vector<double>> ParameterStore::snapshot_values() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, slot] : params_) out.emplace(name, slot.tensor.values());
    return out;
}

void ParameterStore::restore_values(const std::map<std::string, std::vector<double>>& snapshot) {
    check(snapshot.size() == params_.size(), "restore_values: snapshot layout differs");
    for (auto& [name, slot] : params_) {
        auto it = snapshot.find(name);
        check(it != snapshot.end() && it->second.size() == slot.tensor.numel(),
              "restore_values: missing or misshapen snapshot for '" + name + "'");
        slot.tensor.mutable_values() = it->second;
    }
}

std::uint64_t ParameterStore::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, slot] : params_) {
        h ^= fnv1a64(name);
        h *= 0x100000001b3ULL;
        const auto& v = slot.tensor.values();
        h ^= fnv1a64(v.data(), v.size() * sizeof(double));
        h *= 0x100000001b3ULL;
    }
    return h;
}

void adam_step(ParameterStore& store, const AdamConfig& config) {
    for (const auto& [name, slot] : store.params_) {
        if (slot.tensor.raw()->requires_grad && !slot.tensor.has_grad())
            throw std::logic_error("adam_step: missing gradient for parameter '" + name + "'");
    }
    store.step_ += 1;
    const double t = static_cast<double>(store.step_);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (auto& [name, slot] : store.params_) {
        if (!slot.tensor.raw()->requires_grad) continue;
        const auto& g = slot.tensor.grad();
        auto& p = slot.tensor.mutable_values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            slot.m[i] = config.beta1 * slot.m[i] + (1.0 - config.beta1) * g[i];
            slot.v[i] = config.beta2 * slot.v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    }
    store.zero_grad();
}

// Checkpoint format (versioned, textual):
//   celebi-checkpoint v1
//   <param count> <adam step>
//   per parameter: name, ndim, dims..., then values/m/v lines with %.17g
//   doubles (round-trips IEEE-754 exactly)
void ParameterStore::save(const std::string& path) const {
    std::ofstream out(path);
    check(out.good(), "ParameterStore::save: cannot open '" + path + "'");
    out << "celebi-checkpoint v1\n" << params_.size() << " " << step_ << "\n";
    char buf[40];
    auto write_vec = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << buf << (i + 1 == v.size() ? "" : " ");
        }
        out << "\n";
    };
    for (const auto& [name, slot] : params_) {
        out << name << " " << slot.tensor.shape().size();
        for (std::size_t d : slot.tensor.shape()) out << " " << d;
        out << "\n";
        write_vec(slot.tensor.values());
        write_vec(slot.m);
        write_vec(slot.v);
    }
    check(out.good(), "ParameterStore::save: write failed for '" + path + "'");
}

void ParameterStore::load(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "ParameterStore::load: cannot open '" + path + "'");
    std::string magic, version;
    in >> magic >> version;
    check(magic == "celebi-checkpoint" && version == "v1", "ParameterStore::load: unsupported format");
    std::size_t count = 0;
    in >> count >> step_;
    std::map<std::string, Slot> loaded;
    for (std::size_t k = 0; k < count; ++k) {
        std::string name;
        std::size_t ndim = 0;
        in >> name >> ndim;
        Shape shape(ndim);
        for (auto& d : shape) in >> d;
        const std::size_t n = shape_numel(shape);
        Slot slot;
        slot.tensor = Tensor::zeros(shape, true);
        slot.m.resize(n);
        slot.v.resize(n);
        for (auto& v : slot.tensor.mutable_values()) in >> v;
        for (auto& v : slot.m) in >> v;
        for (auto& v : slot.v) in >> v;
        check(in.good(), "ParameterStore::load: truncated checkpoint '" + path + "'");
        loaded.emplace(name, std::move(slot));
    }
    params_ = std::move(loaded);
}

}  // namespace celebi

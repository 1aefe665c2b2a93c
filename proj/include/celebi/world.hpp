#pragma once

#include <cstdint>
#include <vector>

#include "celebi/rng.hpp"
#include "celebi/tensor.hpp"

namespace celebi {

// Lattice of independent discrete generating factors; factor i takes values
// 1..cardinalities[i].
struct FactorSpace {
    std::vector<int> cardinalities;

    int n() const { return static_cast<int>(cardinalities.size()); }
    std::uint64_t size() const;
    void validate() const;
};

using FactorVector = std::vector<int>;

// All combinations exactly once, lexicographic order. Guarded at 10^7.
std::vector<FactorVector> enumerate_factors(const FactorSpace& space);

struct GenXConfig {
    FactorSpace space;
    std::vector<int> embed_dims;  // d_i per factor; observation dim = sum
    std::uint64_t seed = 0;
    bool rotate = false;  // mix coordinate blocks with a fixed random rotation
};

// Deterministic injective map from factor vectors to observation vectors:
// per-factor embedding tables drawn once from the seeded stream (redrawn while
// any two rows of a table come within 1e-3), concatenated per factor, then
// optionally passed through a fixed random rotation.
class GenX {
  public:
    explicit GenX(const GenXConfig& config);

    int dim() const { return dim_; }
    const GenXConfig& config() const { return config_; }

    std::vector<double> operator()(const FactorVector& g) const;
    Tensor batch(const std::vector<FactorVector>& gs) const;

  private:
    GenXConfig config_;
    int dim_ = 0;
    std::vector<std::vector<double>> tables_;  // per factor: N_i x d_i
    std::vector<double> rotation_;             // dim x dim when rotate
};

struct DatasetSplit {
    std::vector<FactorVector> train;
    std::vector<FactorVector> test;
    double p = 0.0;
};

// Uniformly random train subset of size round(p * |lattice|); the remainder
// is the test set.
DatasetSplit random_split(const FactorSpace& space, double p, RngStream& rng);

struct CoverageReport {
    bool ok = false;
    // each miss: the k factor indices (0-based) and the value combination
    struct Missing {
        std::vector<int> indices;
        std::vector<int> values;
    };
    std::vector<Missing> missing;
};

// True iff every value combination of every k-subset of factor indices
// appears in some train element.
CoverageReport validate_split_coverage(const FactorSpace& space, const std::vector<FactorVector>& train, int k);

}  // namespace celebi

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "celebi/agents.hpp"
#include "celebi/rng.hpp"
#include "celebi/world.hpp"

namespace celebi {

struct BoundCheckResult {
    std::string name;
    std::string parameters;
    double empirical = 0.0;
    double stderr_ = 0.0;  // 0 for exact checks
    double bound = 0.0;
    bool holds = false;
    std::uint64_t samples = 0;
    bool exact = true;

    static constexpr double kExactSlack = 1e-12;
};

// C row distributions over V; positions independent.
struct PositionDistribution {
    int vocab = 0;
    std::vector<double> probs;  // length x vocab, row-major

    int length() const { return vocab ? static_cast<int>(probs.size()) / vocab : 0; }
    static PositionDistribution from_rows(int vocab, std::vector<double> probs);  // validates simplex rows
};

// round(p * lattice); warns (via flag) when p * lattice is not an integer
std::uint64_t coverage_train_size(std::uint64_t lattice, double p, bool* rounded = nullptr);

// C(n,k) * N^k * (1 - 1/N^k)^(p N^n), uniform cardinalities
double coverage_bound(int n, int N, double p, int k);

// sum over k-index-subsets of prod(N_i) * (1 - 1/prod(N_i))^(p * prod all)
double coverage_bound_general(const std::vector<int>& cardinalities, double p, int k);

// exact fraction of size-round(pN^n) train subsets missing some k-combination,
// by enumeration of all subsets (guarded)
double coverage_probability_exact(int n, int N, double p, int k);

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
};

// Monte-Carlo miss probability over uniformly drawn train subsets
McEstimate coverage_probability_mc(const FactorSpace& space, double p, int k, std::uint64_t samples, RngStream& rng);

// natural-log entropy, sum over positions (0 ln 0 := 0)
double entropy_exact(const PositionDistribution& d);

// sum_t Pr(m_t != m_t') = sum_t (1 - sum_v p_tv^2) for i.i.d. message pairs
double expected_hamming_exact(const PositionDistribution& d);

// entropy >= expected un-normalized Hamming distance
BoundCheckResult verify_entropy_lower_bound(const PositionDistribution& d);

// Unaugmented NT-Xent at temperature 1 on exact one-hot messages:
//   l_i = -1 + ln sum_k exp(sim(z_i, z_k)), sim = 1 - normalized Hamming.
std::vector<double> ntxent_unaugmented(const std::vector<Message>& batch);

// Checks the re-derived chain (diagonal terms included, Hamming normalized):
//   mean_i l_i <= ln N - (1 - 1/e) * (1/N^2) sum_{i,k} d_H(m_i, m_k).
// The bound follows from exp(-d) <= 1 - (1-1/e) d on [0,1] and
// ln(N - s) <= ln N - s/N; it is tight for an all-identical batch.
BoundCheckResult verify_ntxent_upper_bound(const std::vector<Message>& batch);

struct InclusionCheckResult {
    BoundCheckResult general;   // final <= C * full on every sampled triple
    BoundCheckResult monotone;  // final <= full when per-position means are non-increasing
    BoundCheckResult witness;   // some S has final loss 0 but large full loss
    std::uint64_t monotone_trials = 0;
};

// Random tabular (R*, S*, S) triples on tiny spaces.
InclusionCheckResult verify_imitation_inclusion(std::uint64_t samples, RngStream& rng);

// the full default grid; bound_scale < 1 is a negative-control knob that
// shrinks every bound before comparison
std::vector<BoundCheckResult> run_default_verification(std::uint64_t seed, double bound_scale = 1.0);

}  // namespace celebi

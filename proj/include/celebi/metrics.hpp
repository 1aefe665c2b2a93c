#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "celebi/rng.hpp"
#include "celebi/world.hpp"

namespace celebi {

struct CorpusRecord {
    FactorVector factors;
    std::vector<int> symbols;        // discrete message, values in [0, vocab)
    std::vector<double> prefix_mse;  // one entry per message prefix
};

struct MessageCorpus {
    int vocab = 0;
    int length = 0;
    std::vector<CorpusRecord> records;
};

// Tab-separated, one record per line: factor indices, symbol indices and
// per-prefix MSEs, each comma-joined; errors at 6 significant digits.
void save_corpus(const MessageCorpus& corpus, const std::string& path);
MessageCorpus load_corpus(const std::string& path);

// fraction of differing positions
double hamming(const std::vector<int>& a, const std::vector<int>& b);

struct TopSimResult {
    double value = 0.0;
    bool degenerate = false;  // constant messages or constant factors
};

// Spearman rank correlation (average-rank ties) between pairwise message
// Hamming distances and pairwise factor Hamming distances. All pairs are used
// unless their count exceeds max_pairs, in which case max_pairs pairs are
// sampled uniformly.
TopSimResult topsim(const MessageCorpus& corpus, std::size_t max_pairs, RngStream& rng);

// smallest 1-based prefix whose error is at or below epsilon; C when unmet
int useful_length(const std::vector<double>& per_prefix_mse, double epsilon);

struct EpsilonSelection {
    double epsilon = 0.0;
    int position = 0;             // 1-based plateau position
    bool increasing_curve = false;  // no net drop: fell back to the final value
};

// Plateau rule over the mean of the given per-position loss curves: the value
// at the smallest position whose improvement from adding the next symbol
// drops to at most 5% of the total drop.
EpsilonSelection select_epsilon(const std::vector<std::vector<double>>& loss_by_position);

struct PermutationResult {
    double statistic = 0.0;  // mean(a) - mean(b)
    double p_value = 1.0;    // two-sided, plus-one corrected
};

PermutationResult permutation_test(const std::vector<double>& a, const std::vector<double>& b, int n_perms,
                                   RngStream& rng);

struct MetricReport {
    double topsim = 0.0;
    bool topsim_degenerate = false;
    double useful_length = 0.0;  // mean over the corpus
    double final_mse = 0.0;
    double epsilon = 0.0;
    std::size_t corpus_size = 0;
    std::uint64_t seed = 0;
};

MetricReport compute_metrics(const MessageCorpus& corpus, double epsilon, std::size_t max_pairs, RngStream& rng);

}  // namespace celebi

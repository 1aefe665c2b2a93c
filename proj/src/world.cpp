#include "celebi/world.hpp"

#include <algorithm>
#include <cmath>

namespace celebi {

namespace {
constexpr std::uint64_t kDeskScaleLimit = 10'000'000;
}

std::uint64_t FactorSpace::size() const {
    std::uint64_t total = 1;
    for (int c : cardinalities) {
        check(c >= 2, "FactorSpace: every cardinality must be at least 2");
        check(total <= kDeskScaleLimit / static_cast<std::uint64_t>(c),
              "FactorSpace: lattice larger than the desk-scale limit of 10^7");
        total *= static_cast<std::uint64_t>(c);
    }
    return total;
}

void FactorSpace::validate() const {
    check(!cardinalities.empty(), "FactorSpace: need at least one factor");
    (void)size();
}

std::vector<FactorVector> enumerate_factors(const FactorSpace& space) {
    space.validate();
    const std::uint64_t total = space.size();
    const int n = space.n();
    std::vector<FactorVector> out;
    out.reserve(total);
    FactorVector g(n, 1);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        out.push_back(g);
        for (int i = n - 1; i >= 0; --i) {
            if (g[i] < space.cardinalities[i]) {
                ++g[i];
                break;
            }
            g[i] = 1;
        }
    }
    return out;
}

GenX::GenX(const GenXConfig& config) : config_(config) {
    config_.space.validate();
    check(config_.embed_dims.size() == config_.space.cardinalities.size(),
          "GenX: one embedding dimension per factor required");
    for (int d : config_.embed_dims) {
        check(d >= 1, "GenX: embedding dimensions must be positive");
        dim_ += d;
    }

    RngStream rng = RngStream::derive(config_.seed, "genx-tables");
    tables_.resize(config_.space.n());
    for (int f = 0; f < config_.space.n(); ++f) {
        const int rows = config_.space.cardinalities[f];
        const int cols = config_.embed_dims[f];
        auto& table = tables_[f];
        for (int attempt = 0; attempt < 64; ++attempt) {
            table.resize(static_cast<std::size_t>(rows) * cols);
            for (auto& v : table) v = rng.normal();
            double min_dist = 1e300;
            for (int a = 0; a < rows; ++a)
                for (int b = a + 1; b < rows; ++b) {
                    double s = 0.0;
                    for (int c = 0; c < cols; ++c) {
                        const double diff = table[a * cols + c] - table[b * cols + c];
                        s += diff * diff;
                    }
                    min_dist = std::min(min_dist, std::sqrt(s));
                }
            if (min_dist > 1e-3) break;
            check(attempt + 1 < 64, "GenX: could not draw distinct embedding rows");
        }
    }

    if (config_.rotate) {
        // random orthogonal matrix via Gram-Schmidt on a seeded normal matrix
        RngStream rot_rng = RngStream::derive(config_.seed, "genx-rotation");
        const int d = dim_;
        rotation_.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (auto& v : rotation_) v = rot_rng.normal();
        for (int i = 0; i < d; ++i) {
            double* row = rotation_.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < i; ++j) {
                const double* prev = rotation_.data() + static_cast<std::size_t>(j) * d;
                double dot = 0.0;
                for (int c = 0; c < d; ++c) dot += row[c] * prev[c];
                for (int c = 0; c < d; ++c) row[c] -= dot * prev[c];
            }
            double norm = 0.0;
            for (int c = 0; c < d; ++c) norm += row[c] * row[c];
            norm = std::sqrt(norm);
            check(norm > 1e-8, "GenX: degenerate rotation draw");
            for (int c = 0; c < d; ++c) row[c] /= norm;
        }
    }
}

std::vector<double> GenX::operator()(const FactorVector& g) const {
    check(static_cast<int>(g.size()) == config_.space.n(), "GenX: factor vector has wrong length");
    std::vector<double> out;
    out.reserve(dim_);
    for (int f = 0; f < config_.space.n(); ++f) {
        check(g[f] >= 1 && g[f] <= config_.space.cardinalities[f],
              "GenX: factor value out of range at position " + std::to_string(f));
        const int cols = config_.embed_dims[f];
        const double* row = tables_[f].data() + static_cast<std::size_t>(g[f] - 1) * cols;
        out.insert(out.end(), row, row + cols);
    }
    if (!rotation_.empty()) {
        std::vector<double> mixed(dim_, 0.0);
        for (int i = 0; i < dim_; ++i) {
            const double* rrow = rotation_.data() + static_cast<std::size_t>(i) * dim_;
            double acc = 0.0;
            for (int c = 0; c < dim_; ++c) acc += rrow[c] * out[c];
            mixed[i] = acc;
        }
        return mixed;
    }
    return out;
}

Tensor GenX::batch(const std::vector<FactorVector>& gs) const {
    std::vector<double> values;
    values.reserve(gs.size() * dim_);
    for (const auto& g : gs) {
        auto x = (*this)(g);
        values.insert(values.end(), x.begin(), x.end());
    }
    return Tensor::from({gs.size(), static_cast<std::size_t>(dim_)}, std::move(values), false);
}

DatasetSplit random_split(const FactorSpace& space, double p, RngStream& rng) {
    check(p > 0.0 && p <= 1.0, "random_split: train fraction must lie in (0,1]");
    auto all = enumerate_factors(space);
    const auto train_size = static_cast<std::size_t>(std::llround(p * static_cast<double>(all.size())));
    check(train_size >= 1, "random_split: train fraction selects no elements");

    rng.partial_shuffle(all, train_size);
    DatasetSplit split;
    split.p = p;
    split.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_size));
    split.test.assign(all.begin() + static_cast<std::ptrdiff_t>(train_size), all.end());
    return split;
}

CoverageReport validate_split_coverage(const FactorSpace& space, const std::vector<FactorVector>& train, int k) {
    space.validate();
    const int n = space.n();
    check(k >= 1 && k <= n, "validate_split_coverage: k must lie in [1, n]");

    CoverageReport report;
    report.ok = true;

    // iterate k-subsets of factor indices
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        std::uint64_t combos = 1;
        for (int i = 0; i < k; ++i) combos *= static_cast<std::uint64_t>(space.cardinalities[idx[i]]);
        std::vector<char> seen(combos, 0);
        for (const auto& g : train) {
            std::uint64_t code = 0;
            for (int i = 0; i < k; ++i)
                code = code * static_cast<std::uint64_t>(space.cardinalities[idx[i]]) +
                       static_cast<std::uint64_t>(g[idx[i]] - 1);
            seen[code] = 1;
        }
        for (std::uint64_t code = 0; code < combos; ++code) {
            if (seen[code]) continue;
            report.ok = false;
            CoverageReport::Missing miss;
            miss.indices = idx;
            miss.values.resize(k);
            std::uint64_t rem = code;
            for (int i = k - 1; i >= 0; --i) {
                const auto card = static_cast<std::uint64_t>(space.cardinalities[idx[i]]);
                miss.values[i] = static_cast<int>(rem % card) + 1;
                rem /= card;
            }
            report.missing.push_back(std::move(miss));
        }
        // next subset
        int pos = k - 1;
        while (pos >= 0 && idx[pos] == n - k + pos) --pos;
        if (pos < 0) break;
        ++idx[pos];
        for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
    return report;
}

}  // namespace celebi

#include "celebi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace celebi {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// average ranks with tie handling
std::vector<double> ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y, bool* degenerate) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        *degenerate = true;
        return 0.0;
    }
    *degenerate = false;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

void save_corpus(const MessageCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    check(out.good(), "save_corpus: cannot open '" + path + "'");
    char buf[40];
    for (const auto& rec : corpus.records) {
        for (std::size_t i = 0; i < rec.factors.size(); ++i) out << (i ? "," : "") << rec.factors[i];
        out << "\t";
        for (std::size_t i = 0; i < rec.symbols.size(); ++i) out << (i ? "," : "") << rec.symbols[i];
        out << "\t";
        for (std::size_t i = 0; i < rec.prefix_mse.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.6g", rec.prefix_mse[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
    check(out.good(), "save_corpus: write failed");
}

MessageCorpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "load_corpus: cannot open '" + path + "'");
    MessageCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        check(fields.size() == 3, "load_corpus: malformed line");
        CorpusRecord rec;
        for (const auto& tok : split(fields[0], ',')) rec.factors.push_back(std::stoi(tok));
        for (const auto& tok : split(fields[1], ',')) rec.symbols.push_back(std::stoi(tok));
        for (const auto& tok : split(fields[2], ',')) rec.prefix_mse.push_back(std::stod(tok));
        for (int s : rec.symbols) corpus.vocab = std::max(corpus.vocab, s + 1);
        corpus.length = static_cast<int>(rec.symbols.size());
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

double hamming(const std::vector<int>& a, const std::vector<int>& b) {
    check(a.size() == b.size() && !a.empty(), "hamming: lengths differ or empty");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

TopSimResult topsim(const MessageCorpus& corpus, std::size_t max_pairs, RngStream& rng) {
    const std::size_t n = corpus.records.size();
    check(n >= 3, "topsim: need at least three records");

    std::vector<double> msg_d, fac_d;
    const std::size_t total_pairs = n * (n - 1) / 2;
    auto push_pair = [&](std::size_t i, std::size_t j) {
        const auto& a = corpus.records[i];
        const auto& b = corpus.records[j];
        std::vector<int> fa(a.factors.begin(), a.factors.end());
        std::vector<int> fb(b.factors.begin(), b.factors.end());
        msg_d.push_back(hamming(a.symbols, b.symbols));
        fac_d.push_back(hamming(fa, fb));
    };
    if (total_pairs <= max_pairs) {
        msg_d.reserve(total_pairs);
        fac_d.reserve(total_pairs);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) push_pair(i, j);
    } else {
        msg_d.reserve(max_pairs);
        fac_d.reserve(max_pairs);
        for (std::size_t k = 0; k < max_pairs; ++k) {
            std::size_t i = rng.below(n), j = rng.below(n - 1);
            if (j >= i) ++j;
            push_pair(i, j);
        }
    }

    TopSimResult result;
    auto rm = ranks(msg_d);
    auto rf = ranks(fac_d);
    result.value = pearson(rm, rf, &result.degenerate);
    if (result.degenerate) result.value = 0.0;
    return result;
}

int useful_length(const std::vector<double>& per_prefix_mse, double epsilon) {
    check(!per_prefix_mse.empty(), "useful_length: empty error list");
    const int c = static_cast<int>(per_prefix_mse.size());
    for (int i = 0; i < c; ++i)
        if (per_prefix_mse[i] <= epsilon) return i + 1;
    return c;
}

EpsilonSelection select_epsilon(const std::vector<std::vector<double>>& loss_by_position) {
    check(!loss_by_position.empty(), "select_epsilon: no curves");
    const std::size_t c = loss_by_position.front().size();
    check(c >= 1, "select_epsilon: empty curve");
    std::vector<double> mean(c, 0.0);
    for (const auto& curve : loss_by_position) {
        check(curve.size() == c, "select_epsilon: curves have different lengths");
        for (std::size_t i = 0; i < c; ++i) mean[i] += curve[i];
    }
    for (auto& v : mean) v /= static_cast<double>(loss_by_position.size());

    EpsilonSelection sel;
    const double total_drop = mean.front() - mean.back();
    if (total_drop < 0.0) {
        sel.increasing_curve = true;
        sel.position = static_cast<int>(c);
        sel.epsilon = mean.back();
        return sel;
    }
    const double threshold = 0.05 * total_drop;
    for (std::size_t i = 0; i + 1 < c; ++i) {
        if (mean[i] - mean[i + 1] <= threshold) {
            sel.position = static_cast<int>(i) + 1;
            sel.epsilon = mean[i];
            return sel;
        }
    }
    sel.position = static_cast<int>(c);
    sel.epsilon = mean.back();
    return sel;
}

PermutationResult permutation_test(const std::vector<double>& a, const std::vector<double>& b, int n_perms,
                                   RngStream& rng) {
    check(!a.empty() && !b.empty(), "permutation_test: empty sample");
    check(n_perms >= 1000, "permutation_test: need at least 1000 permutations");

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    PermutationResult result;
    result.statistic = mean(a) - mean(b);

    std::vector<double> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    const std::size_t na = a.size();
    const double inv_na = 1.0 / static_cast<double>(na);
    const double inv_nb = 1.0 / static_cast<double>(b.size());
    const double obs = std::abs(result.statistic);

    int hits = 0;
    for (int k = 0; k < n_perms; ++k) {
        rng.partial_shuffle(pool, na);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < na; ++i) sa += pool[i];
        for (std::size_t i = na; i < pool.size(); ++i) sb += pool[i];
        if (std::abs(sa * inv_na - sb * inv_nb) >= obs - 1e-15) ++hits;
    }
    result.p_value = static_cast<double>(hits + 1) / static_cast<double>(n_perms + 1);
    return result;
}

MetricReport compute_metrics(const MessageCorpus& corpus, double epsilon, std::size_t max_pairs, RngStream& rng) {
    MetricReport report;
    report.epsilon = epsilon;
    report.corpus_size = corpus.records.size();
    auto ts = topsim(corpus, max_pairs, rng);
    report.topsim = ts.value;
    report.topsim_degenerate = ts.degenerate;
    double ul = 0.0, fm = 0.0;
    for (const auto& rec : corpus.records) {
        ul += useful_length(rec.prefix_mse, epsilon);
        fm += rec.prefix_mse.back();
    }
    report.useful_length = ul / static_cast<double>(corpus.records.size());
    report.final_mse = fm / static_cast<double>(corpus.records.size());
    return report;
}

}  // namespace celebi

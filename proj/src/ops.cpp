#include "celebi/ops.hpp"

#include <algorithm>
#include <cmath>

namespace celebi {

namespace {

using NodePtr = std::shared_ptr<TensorData>;

Tensor make_node(Shape shape, std::vector<double> values, std::vector<NodePtr> parents,
                 std::function<void(TensorData&)> backward_fn) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    bool needs_grad = false;
    if (Tape::active().grad_enabled()) {
        for (const auto& p : parents)
            if (p->requires_grad) needs_grad = true;
    }
    if (needs_grad) {
        d->requires_grad = true;
        d->parents = std::move(parents);
        d->backward_fn = std::move(backward_fn);
        Tape::active().record(d);
    }
    return Tensor(std::move(d));
}

void check_2d(const Tensor& t, const char* who) {
    check(t.defined() && t.shape().size() == 2, std::string(who) + ": expected a 2-D tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    check(k == k2, "matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));

    std::vector<double> out(m * n, 0.0);
    {
        const double* pa = a.data();
        const double* pb = b.data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double av = pa[i * k + p];
                if (av == 0.0) continue;
                const double* brow = pb + p * n;
                double* crow = out.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
    }
    auto an = a.node(), bn = b.node();
    return make_node({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](TensorData& self) {
        const double* g = self.grad.data();
        if (an->requires_grad) {
            if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
            const double* pb = bn->values.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double* grow = g + i * n;
                    const double* brow = pb + p * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    an->grad[i * k + p] += acc;
                }
        }
        if (bn->requires_grad) {
            if (bn->grad.empty()) bn->grad.assign(bn->values.size(), 0.0);
            const double* pa = an->values.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    if (av == 0.0) continue;
                    const double* grow = g + i * n;
                    double* brow = bn->grad.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_node(a.shape(), std::move(out), {an, bn}, [an, bn](TensorData& self) {
        if (an->requires_grad) an->accumulate(self.grad.data(), self.grad.size());
        if (bn->requires_grad) bn->accumulate(self.grad.data(), self.grad.size());
    });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    check_2d(a, "add_bias");
    check(bias.shape().size() == 1 && bias.shape()[0] == a.shape()[1],
          "add_bias: bias must match columns of input");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + bias.data()[j];
    auto an = a.node(), bn = bias.node();
    return make_node({m, n}, std::move(out), {an, bn}, [an, bn, m, n](TensorData& self) {
        if (an->requires_grad) an->accumulate(self.grad.data(), self.grad.size());
        if (bn->requires_grad) {
            if (bn->grad.empty()) bn->grad.assign(n, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) bn->grad[j] += self.grad[i * n + j];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {an}, [an, c](TensorData& self) {
        if (!an->requires_grad) return;
        if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += c * self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shapes differ");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_node(a.shape(), std::move(out), {an, bn}, [an, bn](TensorData& self) {
        if (an->requires_grad) {
            if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->values[i];
        }
        if (bn->requires_grad) {
            if (bn->grad.empty()) bn->grad.assign(bn->values.size(), 0.0);
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->values[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {an}, [an](TensorData& self) {
        if (!an->requires_grad) return;
        if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.values[i];
            an->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor tanh_op(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {an}, [an](TensorData& self) {
        if (!an->requires_grad) return;
        if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.values[i];
            an->grad[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {an}, [an](TensorData& self) {
        if (!an->requires_grad) return;
        if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (an->values[i] > 0.0) an->grad[i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, std::size_t col0, std::size_t ncols) {
    check_2d(a, "slice_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    check(col0 + ncols <= n, "slice_cols: range out of bounds");
    std::vector<double> out(m * ncols);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < ncols; ++j) out[i * ncols + j] = a.data()[i * n + col0 + j];
    auto an = a.node();
    return make_node({m, ncols}, std::move(out), {an}, [an, m, n, col0, ncols](TensorData& self) {
        if (!an->requires_grad) return;
        if (an->grad.empty()) an->grad.assign(an->values.size(), 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < ncols; ++j) an->grad[i * n + col0 + j] += self.grad[i * ncols + j];
    });
}

Tensor hconcat(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "hconcat: no parts");
    const std::size_t m = parts[0].shape()[0];
    std::size_t total = 0;
    std::vector<NodePtr> nodes;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        check_2d(p, "hconcat");
        check(p.shape()[0] == m, "hconcat: row counts differ");
        widths.push_back(p.shape()[1]);
        total += p.shape()[1];
        nodes.push_back(p.node());
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const double* src = parts[k].data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = src[i * widths[k] + j];
        off += widths[k];
    }
    return make_node({m, total}, std::move(out), nodes, [nodes, widths, m, total](TensorData& self) {
        std::size_t off2 = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& nd = nodes[k];
            if (nd->requires_grad) {
                if (nd->grad.empty()) nd->grad.assign(nd->values.size(), 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j)
                        nd->grad[i * widths[k] + j] += self.grad[i * total + off2 + j];
            }
            off2 += widths[k];
        }
    });
}

Tensor broadcast_row(const Tensor& row, std::size_t nrows) {
    check_2d(row, "broadcast_row");
    check(row.shape()[0] == 1, "broadcast_row: expected a single row");
    const std::size_t n = row.shape()[1];
    std::vector<double> out(nrows * n);
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row.data()[j];
    auto rn = row.node();
    return make_node({nrows, n}, std::move(out), {rn}, [rn, nrows, n](TensorData& self) {
        if (!rn->requires_grad) return;
        if (rn->grad.empty()) rn->grad.assign(n, 0.0);
        for (std::size_t i = 0; i < nrows; ++i)
            for (std::size_t j = 0; j < n; ++j) rn->grad[j] += self.grad[i * n + j];
    });
}

Tensor softmax(const Tensor& logits, double temperature) {
    check(logits.defined() && !logits.shape().empty(), "softmax: undefined input");
    if (!(temperature > 0.0)) throw ShapeError("softmax: temperature must be positive");
    const std::size_t v = logits.shape().back();
    const std::size_t rows = logits.numel() / v;
    std::vector<double> out(logits.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = logits.data() + r * v;
        double* y = out.data() + r * v;
        double mx = x[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < v; ++j) {
            y[j] = std::exp((x[j] - mx) / temperature);
            sum += y[j];
        }
        for (std::size_t j = 0; j < v; ++j) y[j] /= sum;
    }
    auto ln = logits.node();
    return make_node(logits.shape(), std::move(out), {ln}, [ln, rows, v, temperature](TensorData& self) {
        if (!ln->requires_grad) return;
        if (ln->grad.empty()) ln->grad.assign(ln->values.size(), 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.values.data() + r * v;
            const double* g = self.grad.data() + r * v;
            double dot = 0.0;
            for (std::size_t j = 0; j < v; ++j) dot += g[j] * y[j];
            double* gx = ln->grad.data() + r * v;
            for (std::size_t j = 0; j < v; ++j) gx[j] += y[j] * (g[j] - dot) / temperature;
        }
    });
}

Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, RngStream& rng) {
    if (!(temperature > 0.0)) throw ShapeError("gumbel_softmax_sample: temperature must be positive");
    std::vector<double> noise(logits.numel());
    for (auto& v : noise) v = rng.gumbel();
    Tensor shifted = add(logits, Tensor::from(logits.shape(), std::move(noise), false));
    return softmax(shifted, temperature);
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
    check(prediction.shape() == target.shape(), "mse: shapes differ");
    const std::size_t n = prediction.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = prediction.data()[i] - target.data()[i];
        acc += d * d;
    }
    auto pn = prediction.node(), tn = target.node();
    return make_node({1}, {acc / static_cast<double>(n)}, {pn, tn}, [pn, tn, n](TensorData& self) {
        const double g = self.grad[0] * 2.0 / static_cast<double>(n);
        if (pn->requires_grad) {
            if (pn->grad.empty()) pn->grad.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) pn->grad[i] += g * (pn->values[i] - tn->values[i]);
        }
        if (tn->requires_grad) {
            if (tn->grad.empty()) tn->grad.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) tn->grad[i] -= g * (pn->values[i] - tn->values[i]);
        }
    });
}

Tensor nll_rows(const Tensor& probs, const std::vector<int>& targets) {
    check_2d(probs, "nll_rows");
    const std::size_t r = probs.shape()[0], v = probs.shape()[1];
    check(targets.size() == r, "nll_rows: one target per row required");
    constexpr double kEps = 1e-12;
    double acc = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        check(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < v, "nll_rows: target out of range");
        acc -= std::log(probs.data()[i * v + targets[i]] + kEps);
    }
    auto pn = probs.node();
    auto tgt = targets;
    return make_node({1}, {acc / static_cast<double>(r)}, {pn}, [pn, tgt, r, v](TensorData& self) {
        if (!pn->requires_grad) return;
        if (pn->grad.empty()) pn->grad.assign(pn->values.size(), 0.0);
        const double g = self.grad[0] / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i) {
            const std::size_t idx = i * v + tgt[i];
            pn->grad[idx] -= g / (pn->values[idx] + kEps);
        }
    });
}

Tensor mean_pairwise_cosine(const Tensor& rows) {
    check_2d(rows, "mean_pairwise_cosine");
    const std::size_t n = rows.shape()[0], d = rows.shape()[1];
    check(n >= 2, "mean_pairwise_cosine: need at least two rows");
    constexpr double kNormFloor = 1e-30;

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double x = rows.data()[i * d + j];
            s += x * x;
        }
        norms[i] = std::max(std::sqrt(s), kNormFloor);
    }
    double total = static_cast<double>(n);  // diagonal: cosine(x,x) = 1
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < d; ++t) dot += rows.data()[i * d + t] * rows.data()[j * d + t];
            total += 2.0 * dot / (norms[i] * norms[j]);
        }
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    auto rn = rows.node();
    return make_node({1}, {total * inv_n2}, {rn}, [rn, norms, n, d, inv_n2](TensorData& self) {
        if (!rn->requires_grad) return;
        if (rn->grad.empty()) rn->grad.assign(rn->values.size(), 0.0);
        const double g = self.grad[0];
        const double* x = rn->values.data();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;  // d cosine(x,x)/dx = 0
                double dot = 0.0;
                for (std::size_t t = 0; t < d; ++t) dot += x[i * d + t] * x[j * d + t];
                const double s = dot / (norms[i] * norms[j]);
                // pair (i,j) and (j,i) both contribute to row i
                const double w = g * 2.0 * inv_n2;
                for (std::size_t t = 0; t < d; ++t)
                    rn->grad[i * d + t] +=
                        w * (x[j * d + t] / (norms[i] * norms[j]) - s * x[i * d + t] / (norms[i] * norms[i]));
            }
    });
}

Tensor koleo(const Tensor& rows) {
    check_2d(rows, "koleo");
    const std::size_t n = rows.shape()[0], d = rows.shape()[1];
    check(n >= 2, "koleo: need at least two rows");
    constexpr double kFloor = 1e-9;

    std::vector<std::size_t> nn(n);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1.0;
        std::size_t bj = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = rows.data()[i * d + t] - rows.data()[j * d + t];
                s += diff * diff;
            }
            if (best < 0.0 || s < best) {
                best = s;
                bj = j;
            }
        }
        nn[i] = bj;
        dist[i] = std::sqrt(best);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc -= std::log(std::max(dist[i], kFloor));
    auto rn = rows.node();
    return make_node({1}, {acc / static_cast<double>(n)}, {rn}, [rn, nn, dist, n, d](TensorData& self) {
        if (!rn->requires_grad) return;
        if (rn->grad.empty()) rn->grad.assign(rn->values.size(), 0.0);
        const double g = self.grad[0] / static_cast<double>(n);
        const double* x = rn->values.data();
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] <= kFloor) continue;  // floored: gradient cut
            const std::size_t j = nn[i];
            const double c = -g / (dist[i] * dist[i]);
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = x[i * d + t] - x[j * d + t];
                rn->grad[i * d + t] += c * diff;
                rn->grad[j * d + t] -= c * diff;
            }
        }
    });
}

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    return add_bias(matmul(input, weight), bias);
}

LstmState lstm_cell(const Tensor& input, const LstmState& state, const LstmParams& params) {
    check_2d(input, "lstm_cell");
    check_2d(state.h, "lstm_cell");
    const std::size_t h = state.h.shape()[1];
    check(params.w_ih.shape()[1] == 4 * h && params.w_hh.shape()[1] == 4 * h,
          "lstm_cell: gate weights must have 4*hidden columns");
    check(state.c.shape() == state.h.shape(), "lstm_cell: hidden/cell shapes differ");

    Tensor gates = add_bias(add(matmul(input, params.w_ih), matmul(state.h, params.w_hh)), params.bias);
    Tensor gi = sigmoid(slice_cols(gates, 0, h));
    Tensor gf = sigmoid(slice_cols(gates, h, h));
    Tensor gc = tanh_op(slice_cols(gates, 2 * h, h));
    Tensor go = sigmoid(slice_cols(gates, 3 * h, h));
    Tensor c_next = add(mul(gf, state.c), mul(gi, gc));
    Tensor h_next = mul(go, tanh_op(c_next));
    return {h_next, c_next};
}

}  // namespace celebi

#pragma once

#include <functional>
#include <vector>

#include "celebi/tensor.hpp"

namespace celebi::testing {

// Central-difference gradient check. forward() must rebuild the graph
// deterministically from the current parameter values (replay any noise).
// Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|),
// so near-zero gradients are compared absolutely.
inline double max_grad_error(const std::function<Tensor()>& forward, const std::vector<Tensor>& params,
                             double h = 1e-4) {
    Tape::active().reset();
    Tensor loss = forward();
    Tape::active().backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params)
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0));
    Tape::active().reset();

    auto eval = [&]() {
        NoGradGuard eval_scope;
        return forward().scalar();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor p = params[k];
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + h;
            const double fp = eval();
            p.data()[i] = saved - h;
            const double fm = eval();
            p.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k][i];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace celebi::testing

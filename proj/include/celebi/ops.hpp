#pragma once

#include "celebi/rng.hpp"
#include "celebi/tensor.hpp"

namespace celebi {

// All operations are dense, row-major, float64, and record themselves on the
// active tape when gradients are enabled and any input requires them.

Tensor matmul(const Tensor& a, const Tensor& b);                 // [m,k]x[k,n]
Tensor add(const Tensor& a, const Tensor& b);                    // same shape
Tensor add_bias(const Tensor& a, const Tensor& bias);            // [m,n]+[n]
Tensor scale(const Tensor& a, double c);
Tensor mul(const Tensor& a, const Tensor& b);                    // elementwise
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor slice_cols(const Tensor& a, std::size_t col0, std::size_t ncols);
Tensor hconcat(const std::vector<Tensor>& parts);                // [m,ni] -> [m,sum ni]
Tensor broadcast_row(const Tensor& row, std::size_t nrows);      // [1,n] -> [m,n]

// rows of softmax(logits/temperature) over the last dimension
Tensor softmax(const Tensor& logits, double temperature);

// softmax((logits + Gumbel noise)/temperature); relaxed sample, the gradient
// flows through the sample itself (no straight-through hard pass)
Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, RngStream& rng);

Tensor sum(const Tensor& a);                                     // scalar
Tensor mse(const Tensor& prediction, const Tensor& target);      // scalar

// -(1/R) sum_r ln(p[r, target_r] + 1e-12) over rows of a probability matrix
Tensor nll_rows(const Tensor& probs, const std::vector<int>& targets);

// (1/N^2) sum_{i,j} cosine(x_i, x_j) over rows (diagonal included)
Tensor mean_pairwise_cosine(const Tensor& rows);

// -(1/N) sum_i ln(max(nearest-neighbour L2 distance of row i, 1e-9))
Tensor koleo(const Tensor& rows);

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LstmParams {
    Tensor w_ih;  // [e, 4h]
    Tensor w_hh;  // [h, 4h]
    Tensor bias;  // [4h]
};

struct LstmState {
    Tensor h;
    Tensor c;
};

// standard gate order: input, forget, cell, output
LstmState lstm_cell(const Tensor& input, const LstmState& state, const LstmParams& params);

}  // namespace celebi

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hvq/tensor.hpp"

namespace hvq::kernels {

// Width-3 dilated temporal convolution with symmetric zero padding, so the
// output has the same number of frames as the input. Kernel layout is
// [tap][cin][cout] with tap 0/1/2 corresponding to offsets -d/0/+d.
//
// The OpenMP versions parallelize over independent output elements only and
// keep every accumulation in a fixed serial order, so results are bitwise
// identical for any thread count (and to the serial reference).
SeqTensor conv1d3_forward(const SeqTensor& x, const std::vector<double>& kernel,
                          const std::vector<double>& bias, int cout, int dilation);

void conv1d3_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& kernel, int cout, int dilation,
                      SeqTensor& grad_x, std::vector<double>& grad_kernel,
                      std::vector<double>& grad_bias);

// Pointwise (1x1) convolution: per-frame linear map. Weight layout [cin][cout].
SeqTensor conv1x1_forward(const SeqTensor& x, const std::vector<double>& weight,
                          const std::vector<double>& bias, int cout);

void conv1x1_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& weight, int cout,
                      SeqTensor& grad_x, std::vector<double>& grad_weight,
                      std::vector<double>& grad_bias);

SeqTensor relu_forward(const SeqTensor& x);
SeqTensor relu_backward(const SeqTensor& grad_out, const SeqTensor& cached_input);

// Inverted dropout. The mask is drawn serially from `rng` (one Bernoulli per
// element in row-major order) so runs are reproducible; kept entries are
// scaled by 1/(1-rate).
std::vector<uint8_t> dropout_mask(size_t n, double rate, std::mt19937_64& rng);
void dropout_apply(SeqTensor& x, const std::vector<uint8_t>& mask, double rate);
void dropout_backward(SeqTensor& grad, const std::vector<uint8_t>& mask, double rate);

// Row-parallel cosine argmax used by codebook assignment: for each row of E,
// the index of the prototype (row of P) with the highest cosine similarity,
// ties broken by lowest index. Zero rows map to index 0; their count is
// reported through `zero_rows` when non-null.
std::vector<int> cosine_argmax_rows(const SeqTensor& e, const SeqTensor& prototypes,
                                    uint64_t* zero_rows = nullptr);

// Serial reference implementations, kept for differential tests and the
// kernel benchmark.
namespace serial {

SeqTensor conv1d3_forward(const SeqTensor& x, const std::vector<double>& kernel,
                          const std::vector<double>& bias, int cout, int dilation);

void conv1d3_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& kernel, int cout, int dilation,
                      SeqTensor& grad_x, std::vector<double>& grad_kernel,
                      std::vector<double>& grad_bias);

SeqTensor conv1x1_forward(const SeqTensor& x, const std::vector<double>& weight,
                          const std::vector<double>& bias, int cout);

void conv1x1_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& weight, int cout,
                      SeqTensor& grad_x, std::vector<double>& grad_weight,
                      std::vector<double>& grad_bias);

std::vector<int> cosine_argmax_rows(const SeqTensor& e, const SeqTensor& prototypes,
                                    uint64_t* zero_rows = nullptr);

}  // namespace serial

}  // namespace hvq::kernels

#pragma once

// Batched forward / backward passes. Each kernel has a plain serial
// reference and an OpenMP version; tests check they agree and the benchmark
// in tools/ compares their timings.
//
// The parallel backward reduces per-block partial gradients in a fixed block
// order, so its result depends only on the inputs and kBlockRows, never on
// the thread count.

#include <cstddef>
#include <vector>

#include "mlcil/matrix.hpp"
#include "mlcil/numeric.hpp"

namespace mlcil::kernels {

inline constexpr std::size_t kBlockRows = 16;

// probs(r, :) = model.forward(inputs.row(r))
Matrix forward_batch_serial(const ClassifierModel& model, const Matrix& inputs);
Matrix forward_batch(const ClassifierModel& model, const Matrix& inputs);

// Sum over rows of the per-sample parameter gradient given d(loss)/d(probs).
std::vector<double> backward_batch_serial(const ClassifierModel& model, const Matrix& inputs,
                                          const Matrix& output_gradients);
std::vector<double> backward_batch(const ClassifierModel& model, const Matrix& inputs,
                                   const Matrix& output_gradients);

}  // namespace mlcil::kernels

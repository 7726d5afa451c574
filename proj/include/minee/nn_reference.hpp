#pragma once

// Plain-loop evaluation of the same networks as nn.hpp, one row at a time.
// Kept as a test oracle and as the serial baseline in the benchmark.

#include "minee/nn.hpp"

namespace minee::nn::reference {

Matrix forward(const ParameterSet& params, const SampleBatch& inputs);
Vector backward(const ParameterSet& params, const SampleBatch& inputs,
                const Matrix& output_cotangent);

}  // namespace minee::nn::reference

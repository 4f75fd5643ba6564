#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt {

// Per-tensor symmetric int8 quantization of weight matrices.
struct QuantizedTensor {
  int rows = 0, cols = 0;
  double scale = 1.0;  // dequantized = scale * value
  std::vector<std::int8_t> values;  // column-major, rows*cols entries
};

// scale = max|w| / 127 (1.0 for an all-zero tensor); values rounded half
// away from zero and clamped to [-127, 127]. Throws DataError on
// non-finite input.
QuantizedTensor quantize_tensor(const Eigen::Ref<const Mat>& w);
Mat dequantize_tensor(const QuantizedTensor& q);

// Linear projection weights are quantized; embeddings, biases and layer
// norms stay in double precision.
bool is_quantizable(const std::string& tensor_name);

// Round-trips every quantizable tensor through int8; what a quantized
// checkpoint yields after its load-time dequantization.
Params quantize_params(const Params& params);

}  // namespace speedbias::nmt

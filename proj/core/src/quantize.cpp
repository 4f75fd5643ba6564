#include "speedbias/quantize.hpp"

#include <cmath>

#include "speedbias/errors.hpp"

namespace speedbias::nmt {

QuantizedTensor quantize_tensor(const Eigen::Ref<const Mat>& w) {
  if (!w.allFinite()) throw DataError("quantize: tensor has non-finite values");
  QuantizedTensor q;
  q.rows = static_cast<int>(w.rows());
  q.cols = static_cast<int>(w.cols());
  double maxabs = w.size() > 0 ? w.cwiseAbs().maxCoeff() : 0.0;
  q.scale = maxabs > 0.0 ? maxabs / 127.0 : 1.0;
  q.values.resize(static_cast<std::size_t>(q.rows) * q.cols);
  const double* data = w.data();
  // w may be an arbitrary block; walk it column-wise explicitly
  std::size_t k = 0;
  for (int c = 0; c < q.cols; ++c) {
    for (int r = 0; r < q.rows; ++r) {
      double v = std::round(w(r, c) / q.scale);
      if (v > 127.0) v = 127.0;
      if (v < -127.0) v = -127.0;
      q.values[k++] = static_cast<std::int8_t>(v);
    }
  }
  (void)data;
  return q;
}

Mat dequantize_tensor(const QuantizedTensor& q) {
  Mat w(q.rows, q.cols);
  std::size_t k = 0;
  for (int c = 0; c < q.cols; ++c)
    for (int r = 0; r < q.rows; ++r) w(r, c) = q.scale * q.values[k++];
  return w;
}

bool is_quantizable(const std::string& name) {
  auto ends_with = [&](const char* suffix) {
    std::string s(suffix);
    return name.size() >= s.size() &&
           name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  if (name == "out.w") return true;
  return ends_with(".wq") || ends_with(".wk") || ends_with(".wv") ||
         ends_with(".wo") || ends_with(".w1") || ends_with(".w2") ||
         ends_with(".wg");
}

Params quantize_params(const Params& params) {
  Params out = params;
  for (const TensorInfo& t : params.layout.tensors()) {
    if (!is_quantizable(t.name)) continue;
    QuantizedTensor q = quantize_tensor(params.tensor(t.name));
    out.tensor(t.name) = dequantize_tensor(q);
  }
  return out;
}

}  // namespace speedbias::nmt

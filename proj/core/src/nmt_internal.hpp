#pragma once

// Internals shared between the training-time forward/backward pass and the
// incremental decoder. Not installed.

#include <string>
#include <vector>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt::detail {

constexpr double kLnEps = 1e-6;

// packed ragged batch: rows of consecutive sentences in one matrix
struct Ragged {
  std::vector<int> offsets{0};
  void push(int len) { offsets.push_back(offsets.back() + len); }
  int sentences() const { return static_cast<int>(offsets.size()) - 1; }
  int rows() const { return offsets.back(); }
  int off(int s) const { return offsets[s]; }
  int len(int s) const { return offsets[s + 1] - offsets[s]; }
};

// read-only named tensor views over a flat vector
class ConstView {
 public:
  ConstView(const ParamLayout& layout, const Vec& flat)
      : layout_(&layout), flat_(&flat) {}
  Eigen::Map<const Mat> operator()(const std::string& name) const {
    const TensorInfo& t = layout_->info(name);
    return {flat_->data() + t.offset, t.rows, t.cols};
  }

 private:
  const ParamLayout* layout_;
  const Vec* flat_;
};

class MutView {
 public:
  MutView(const ParamLayout& layout, Vec& flat) : layout_(&layout), flat_(&flat) {}
  Eigen::Map<Mat> operator()(const std::string& name) const {
    const TensorInfo& t = layout_->info(name);
    return {flat_->data() + t.offset, t.rows, t.cols};
  }

 private:
  const ParamLayout* layout_;
  Vec* flat_;
};

// embedding lookup * sqrt(d) + sinusoidal position encoding
Mat embed(Eigen::Map<const Mat> table, const std::vector<int>& ids,
          const Ragged& ragged, int model_dim);

Eigen::RowVectorXd layer_norm_row(const Eigen::RowVectorXd& x,
                                  Eigen::Map<const Mat> g,
                                  Eigen::Map<const Mat> b);

// accepts matrix rows (arbitrary inner stride)
void softmax_row_inplace(
    Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row);

// full encoder stack; returns the memory (post final layer norm)
Mat encode_source(const Params& params, const std::vector<int>& source_ids);

}  // namespace speedbias::nmt::detail

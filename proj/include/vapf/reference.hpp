#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vapf/attribute.hpp"
#include "vapf/metrics.hpp"
#include "vapf/model.hpp"
#include "vapf/parameter_store.hpp"

/// Plain-loop re-implementations used as test oracles. They read weights by
/// name from a ParameterStore and never touch the autodiff tape.
namespace vapf::reference {

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

Mat from_tensor(const Tensor& t);

Mat linear(const ParameterStore& s, const std::string& prefix, const Mat& x);
Mat layer_norm(const ParameterStore& s, const std::string& prefix, const Mat& x, double eps = 1e-5);
void softmax_rows(Mat& x);
double gelu(double x);

/// Pre-norm transformer layer with `heads` heads under `prefix`.
Mat transformer_layer(const ParameterStore& s, const std::string& prefix, const Mat& x,
                      std::size_t heads);
/// Prompt-free EPA block.
Mat epa_block(const ParameterStore& s, const std::string& prefix, const Mat& x);

/// Prompt-free visual encoder on a D x H x W volume stored raster-order.
Mat visual_encoder(const ParameterStore& s, const VisualEncoderConfig& cfg,
                   const std::vector<double>& volume);
/// Prompt-free attribute encoder.
Mat attribute_encoder(const ParameterStore& s, const AttributeSchema& schema,
                      const AttributeEncoderConfig& cfg, const AttributeRecord& record);
/// Whole prompt-free model logit.
double model_logit(const ParameterStore& s, const ModelConfig& cfg,
                   const std::vector<double>& volume, const AttributeRecord& record);

/// Exhaustive pairwise AUC.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels);
/// Counts by direct enumeration at threshold 0.5.
ConfusionCounts count_confusion(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace vapf::reference

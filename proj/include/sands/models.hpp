#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sands/corpus.hpp"

namespace sands {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Probabilities over the label set; every entry in (0, 1), summing to 1.
using StanceDistribution = RowVector;

enum class BodyKind { kConv, kBlstm };

std::string_view to_string(BodyKind kind);
BodyKind parse_body_kind(std::string_view name);

struct ModelDims {
  int word_table = 0;     // |V_w| + 2
  int hashtag_table = 0;  // |V_h| + 2
  int word_dim = 200;
  int hashtag_dim = 128;
  int attention_dim = 128;
  std::vector<int> conv_windows{1, 3, 5};
  std::vector<int> conv_filters{128, 64, 32};
  int lstm_hidden = 100;  // per direction
  int label_count = 0;
  // Divide attention scores by sqrt(attention_dim). Off by default.
  bool scale_attention = false;
};

// Every learnable tensor of one classifier. Vectors are stored as 1 x n
// matrices so that all tensors share one type and can be visited uniformly
// (optimizer, checkpoints, gradient checks).
struct ClassifierParams {
  BodyKind body = BodyKind::kConv;
  ModelDims dims;

  Matrix word_embedding;     // word_table x word_dim; row 0 is padding
  Matrix hashtag_embedding;  // hashtag_table x hashtag_dim
  Matrix query_weight, key_weight, value_weight;  // hashtag_dim x attention_dim
  Matrix query_bias, key_bias, value_bias;        // 1 x attention_dim

  // Convolutional body: branch-major, three blocks per branch.
  // kernel: (window * c_in) x c_out, bias: 1 x c_out.
  std::vector<Matrix> conv_kernels;
  std::vector<Matrix> conv_biases;

  // Recurrent body, gate order [input, forget, cell, output].
  Matrix forward_input, forward_recurrent, forward_bias;     // d x 4H, H x 4H, 1 x 4H
  Matrix backward_input, backward_recurrent, backward_bias;

  Matrix norm_gain, norm_bias;  // 1 x feature_dim
  Matrix output_weight;         // feature_dim x label_count
  Matrix output_bias;           // 1 x label_count

  int body_dim() const;
  int feature_dim() const { return dims.attention_dim + body_dim(); }
  size_t parameter_count() const;

  // Calls fn(name, tensor) for every tensor in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  // Same shapes, all zeros.
  ClassifierParams zeros_like() const;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn);
};

template <typename Self, typename Fn>
void ClassifierParams::visit_impl(Self& self, Fn& fn) {
  fn("word_embedding", self.word_embedding);
  fn("hashtag_embedding", self.hashtag_embedding);
  fn("query_weight", self.query_weight);
  fn("query_bias", self.query_bias);
  fn("key_weight", self.key_weight);
  fn("key_bias", self.key_bias);
  fn("value_weight", self.value_weight);
  fn("value_bias", self.value_bias);
  for (size_t i = 0; i < self.conv_kernels.size(); ++i) {
    const std::string tag = "conv" + std::to_string(i);
    fn(tag + "_kernel", self.conv_kernels[i]);
    fn(tag + "_bias", self.conv_biases[i]);
  }
  if (self.body == BodyKind::kBlstm) {
    fn("forward_input", self.forward_input);
    fn("forward_recurrent", self.forward_recurrent);
    fn("forward_bias", self.forward_bias);
    fn("backward_input", self.backward_input);
    fn("backward_recurrent", self.backward_recurrent);
    fn("backward_bias", self.backward_bias);
  }
  fn("norm_gain", self.norm_gain);
  fn("norm_bias", self.norm_bias);
  fn("output_weight", self.output_weight);
  fn("output_bias", self.output_bias);
}

// Reads `word v1 ... vd` lines. A leading `count dim` header line is
// skipped. Throws DataError when a vector length differs from `dim`.
std::unordered_map<std::string, std::vector<double>> read_embeddings(const std::string& path,
                                                                     int dim);

// Word rows found in `pretrained` are copied verbatim; other word rows and
// all hashtag rows are uniform in [-0.05, 0.05]; padding rows are zero.
// Dense weights use fan-in scaled uniform init, biases zero, forget-gate
// bias one, layer-norm gain one. Deterministic in `seed`.
ClassifierParams init_params(
    BodyKind body, ModelDims dims, uint64_t seed,
    const std::unordered_map<std::string, std::vector<double>>* pretrained = nullptr,
    const Vocabulary* vocab = nullptr);

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  uint64_t seed = 0;
};

// Intermediate values kept for the backward pass.
struct ForwardTrace {
  struct Attention {
    std::vector<int> ids;
    Matrix inputs, pre_query, pre_key, pre_value, query, key, value, weights, mixed;
    std::vector<int> pool_arg;
  };
  struct ConvBlock {
    int input_rows = 0;
    Matrix columns, pre_activation;
    std::vector<int> pool_arg;  // row index of the max, per output cell
    int pooled_rows = 0;
    Matrix dropout_mask;  // empty when inactive
  };
  struct Lstm {
    Matrix gates, cells, cell_tanh, hidden;
  };

  std::vector<int> tokens;
  Attention attention;
  RowVector hashtag_features;
  Matrix hashtag_mask;
  Matrix embedded;
  std::vector<std::vector<ConvBlock>> branches;
  Lstm forward_lstm, backward_lstm;
  std::vector<int> sequence_arg;
  Matrix body_mask;
  RowVector features, normalized_hat;
  double inv_std = 0.0;
  RowVector normalized;
  Matrix norm_mask;
  RowVector classifier_input, logits, log_probs, probs;
};

// Padding ids are skipped, so appending padding never changes the output.
// Returns the probability distribution; fills `trace` when given.
StanceDistribution forward(const ClassifierParams& params, const EncodedTweet& tweet,
                           const ForwardOptions& options, ForwardTrace* trace = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
void backward(const ClassifierParams& params, const ForwardTrace& trace,
              const RowVector& logit_grad, ClassifierParams& grads);

// Z_H: attention-pooled hashtag representation, zero when no hashtags.
RowVector encode_hashtags(std::span<const int> hashtag_ids, const ClassifierParams& params);

// Pooled text-body representation (no dropout).
RowVector encode_body(std::span<const int> token_ids, const ClassifierParams& params);

StanceDistribution classify_conv(const EncodedTweet& tweet, const ClassifierParams& params,
                                 double dropout_prob, bool training_mode, uint64_t seed);
StanceDistribution classify_blstm(const EncodedTweet& tweet, const ClassifierParams& params,
                                  double dropout_prob, bool training_mode, uint64_t seed);

// -sum_j target_j * log(p_j), computed from log-probabilities.
double cross_entropy(const RowVector& log_probs, const RowVector& target);

// Gradient of cross_entropy with respect to the logits.
RowVector cross_entropy_logit_grad(const RowVector& probs, const RowVector& target);

// Lowest index wins ties.
int argmax(const RowVector& v);

}  // namespace sands

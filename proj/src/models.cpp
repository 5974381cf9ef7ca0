#include "sands/models.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "sands/common.hpp"

namespace sands {
namespace {

constexpr double kNormEpsilon = 1e-5;
constexpr double kEmbeddingInitBound = 0.05;

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

Matrix make_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  Matrix mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = dist(rng) < p ? 0.0 : keep;
  return mask;
}

struct Dropout {
  bool active = false;
  double p = 0.0;
  std::mt19937_64 rng;

  explicit Dropout(const ForwardOptions& options)
      : active(options.training && options.dropout > 0.0),
        p(options.dropout),
        rng(derive_seed({options.seed, 0xd20u})) {}

  // Applies a fresh mask in place, keeping it for the backward pass.
  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& x, Matrix& mask) {
    if (!active) {
      mask.resize(0, 0);
      return;
    }
    mask = make_mask(x.rows(), x.cols(), p, rng);
    x.derived() = x.cwiseProduct(mask);
  }
};

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_grad(const Matrix& grad, const Matrix& pre) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

Matrix lookup(const Matrix& table, const std::vector<int>& ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw DataError("embedding id " + std::to_string(ids[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

void scatter_rows(Matrix& table_grad, const std::vector<int>& ids, const Matrix& row_grads) {
  for (size_t i = 0; i < ids.size(); ++i)
    table_grad.row(ids[i]) += row_grads.row(static_cast<Eigen::Index>(i));
}

// Column-wise max over rows; ties keep the lowest row.
RowVector column_max(const Matrix& x, std::vector<int>& arg) {
  RowVector out(x.cols());
  arg.assign(static_cast<size_t>(x.cols()), 0);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < x.rows(); ++r)
      if (x(r, c) > x(best, c)) best = r;
    out(c) = x(best, c);
    arg[static_cast<size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

RowVector row_softmax(const RowVector& logits, RowVector* log_probs) {
  const double m = logits.maxCoeff();
  RowVector shifted = logits.array() - m;
  const double log_z = std::log(shifted.array().exp().sum());
  RowVector lp = shifted.array() - log_z;
  if (log_probs) *log_probs = lp;
  return lp.array().exp();
}

// ---- hashtag self-attention ----

double attention_scale(const ClassifierParams& p) {
  return p.dims.scale_attention ? 1.0 / std::sqrt(static_cast<double>(p.dims.attention_dim))
                                : 1.0;
}

RowVector attention_forward(const ClassifierParams& p, ForwardTrace::Attention& t) {
  if (t.ids.empty()) return RowVector::Zero(p.dims.attention_dim);
  t.inputs = lookup(p.hashtag_embedding, t.ids);
  auto affine = [&](const Matrix& w, const Matrix& b) {
    Matrix out = t.inputs * w;
    out.rowwise() += b.row(0);
    return out;
  };
  t.pre_query = affine(p.query_weight, p.query_bias);
  t.pre_key = affine(p.key_weight, p.key_bias);
  t.pre_value = affine(p.value_weight, p.value_bias);
  t.query = relu(t.pre_query);
  t.key = relu(t.pre_key);
  t.value = relu(t.pre_value);
  Matrix scores = (t.query * t.key.transpose()) * attention_scale(p);
  t.weights.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    t.weights.row(i) = row_softmax(scores.row(i), nullptr);
  t.mixed = t.weights * t.value;
  return column_max(t.mixed, t.pool_arg);
}

void attention_backward(const ClassifierParams& p, const ForwardTrace::Attention& t,
                        const RowVector& dz, ClassifierParams& g) {
  if (t.ids.empty()) return;
  Matrix d_mixed = Matrix::Zero(t.mixed.rows(), t.mixed.cols());
  for (Eigen::Index c = 0; c < d_mixed.cols(); ++c) d_mixed(t.pool_arg[c], c) = dz(c);
  Matrix d_weights = d_mixed * t.value.transpose();
  Matrix d_value = t.weights.transpose() * d_mixed;
  Matrix d_scores(d_weights.rows(), d_weights.cols());
  for (Eigen::Index i = 0; i < d_weights.rows(); ++i) {
    const double dot = d_weights.row(i).dot(t.weights.row(i));
    d_scores.row(i) = t.weights.row(i).array() * (d_weights.row(i).array() - dot);
  }
  d_scores *= attention_scale(p);
  Matrix d_query = d_scores * t.key;
  Matrix d_key = d_scores.transpose() * t.query;

  Matrix d_pre_q = relu_grad(d_query, t.pre_query);
  Matrix d_pre_k = relu_grad(d_key, t.pre_key);
  Matrix d_pre_v = relu_grad(d_value, t.pre_value);
  g.query_weight += t.inputs.transpose() * d_pre_q;
  g.key_weight += t.inputs.transpose() * d_pre_k;
  g.value_weight += t.inputs.transpose() * d_pre_v;
  g.query_bias += d_pre_q.colwise().sum();
  g.key_bias += d_pre_k.colwise().sum();
  g.value_bias += d_pre_v.colwise().sum();
  Matrix d_inputs = d_pre_q * p.query_weight.transpose() + d_pre_k * p.key_weight.transpose() +
                    d_pre_v * p.value_weight.transpose();
  scatter_rows(g.hashtag_embedding, t.ids, d_inputs);
}

// ---- convolutional body ----

Matrix im2col(const Matrix& x, int window) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  const int pad = window / 2;
  Matrix cols = Matrix::Zero(n, window * c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int o = 0; o < window; ++o) {
      const Eigen::Index src = i + o - pad;
      if (src >= 0 && src < n) cols.block(i, o * c, 1, c) = x.row(src);
    }
  }
  return cols;
}

Matrix col2im(const Matrix& d_cols, Eigen::Index n, Eigen::Index c, int window) {
  const int pad = window / 2;
  Matrix dx = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int o = 0; o < window; ++o) {
      const Eigen::Index src = i + o - pad;
      if (src >= 0 && src < n) dx.row(src) += d_cols.block(i, o * c, 1, c);
    }
  }
  return dx;
}

// Window-2 stride-2 max pool; a trailing odd row pools alone.
Matrix pool_pairs(const Matrix& x, std::vector<int>& arg) {
  const Eigen::Index out_rows = (x.rows() + 1) / 2;
  Matrix out(out_rows, x.cols());
  arg.assign(static_cast<size_t>(out_rows * x.cols()), 0);
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = 2 * r;
      if (2 * r + 1 < x.rows() && x(2 * r + 1, c) > x(best, c)) best = 2 * r + 1;
      out(r, c) = x(best, c);
      arg[static_cast<size_t>(r * x.cols() + c)] = static_cast<int>(best);
    }
  }
  return out;
}

RowVector conv_branch_forward(const ClassifierParams& p, size_t branch, const Matrix& input,
                              std::vector<ForwardTrace::ConvBlock>& blocks, Dropout& dropout) {
  const int window = p.dims.conv_windows[branch];
  const size_t depth = p.dims.conv_filters.size();
  blocks.assign(depth, {});
  Matrix h = input;
  for (size_t b = 0; b < depth; ++b) {
    auto& blk = blocks[b];
    const size_t k = branch * depth + b;
    blk.input_rows = static_cast<int>(h.rows());
    blk.columns = im2col(h, window);
    blk.pre_activation = blk.columns * p.conv_kernels[k];
    blk.pre_activation.rowwise() += p.conv_biases[k].row(0);
    Matrix act = relu(blk.pre_activation);
    if (b + 1 < depth) {
      h = pool_pairs(act, blk.pool_arg);
    } else {
      h = column_max(act, blk.pool_arg);
    }
    blk.pooled_rows = static_cast<int>(h.rows());
    dropout.apply(h, blk.dropout_mask);
  }
  return h.row(0);
}

Matrix conv_branch_backward(const ClassifierParams& p, size_t branch,
                            const std::vector<ForwardTrace::ConvBlock>& blocks,
                            const RowVector& dz, ClassifierParams& g) {
  const int window = p.dims.conv_windows[branch];
  const size_t depth = blocks.size();
  Matrix d_out = dz;
  for (size_t b = depth; b-- > 0;) {
    const auto& blk = blocks[b];
    const size_t k = branch * depth + b;
    if (blk.dropout_mask.size() > 0) d_out = d_out.cwiseProduct(blk.dropout_mask);
    Matrix d_act = Matrix::Zero(blk.pre_activation.rows(), blk.pre_activation.cols());
    const Eigen::Index c_out = d_act.cols();
    for (Eigen::Index r = 0; r < d_out.rows(); ++r)
      for (Eigen::Index c = 0; c < c_out; ++c)
        d_act(blk.pool_arg[static_cast<size_t>(r * c_out + c)], c) += d_out(r, c);
    Matrix d_pre = relu_grad(d_act, blk.pre_activation);
    g.conv_kernels[k] += blk.columns.transpose() * d_pre;
    g.conv_biases[k] += d_pre.colwise().sum();
    Matrix d_cols = d_pre * p.conv_kernels[k].transpose();
    const Eigen::Index c_in = d_cols.cols() / window;
    d_out = col2im(d_cols, blk.input_rows, c_in, window);
  }
  return d_out;
}

// ---- recurrent body ----

RowVector sigmoid(const RowVector& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

void lstm_forward(const Matrix& x, const Matrix& w_in, const Matrix& w_rec, const Matrix& bias,
                  bool reverse, ForwardTrace::Lstm& t) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h_dim = w_rec.rows();
  Matrix projected = x * w_in;
  projected.rowwise() += bias.row(0);
  t.gates.resize(n, 4 * h_dim);
  t.cells.resize(n, h_dim);
  t.cell_tanh.resize(n, h_dim);
  t.hidden.resize(n, h_dim);
  RowVector h = RowVector::Zero(h_dim);
  RowVector c = RowVector::Zero(h_dim);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index row = reverse ? n - 1 - s : s;
    RowVector z = projected.row(row) + h * w_rec;
    RowVector in = sigmoid(z.segment(0, h_dim));
    RowVector forget = sigmoid(z.segment(h_dim, h_dim));
    RowVector cell = z.segment(2 * h_dim, h_dim).array().tanh();
    RowVector out = sigmoid(z.segment(3 * h_dim, h_dim));
    c = forget.cwiseProduct(c) + in.cwiseProduct(cell);
    RowVector ct = c.array().tanh();
    h = out.cwiseProduct(ct);
    t.gates.row(row) << in, forget, cell, out;
    t.cells.row(row) = c;
    t.cell_tanh.row(row) = ct;
    t.hidden.row(row) = h;
  }
}

Matrix lstm_backward(const Matrix& x, const Matrix& w_in, const Matrix& w_rec, bool reverse,
                     const ForwardTrace::Lstm& t, const Matrix& d_hidden, Matrix& g_in,
                     Matrix& g_rec, Matrix& g_bias) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h_dim = w_rec.rows();
  Matrix d_z(n, 4 * h_dim);
  RowVector dh_next = RowVector::Zero(h_dim);
  RowVector dc_next = RowVector::Zero(h_dim);
  for (Eigen::Index s = n; s-- > 0;) {
    const Eigen::Index row = reverse ? n - 1 - s : s;
    const Eigen::Index prev = reverse ? row + 1 : row - 1;
    const bool has_prev = s > 0;
    auto gates = t.gates.row(row);
    RowVector in = gates.segment(0, h_dim);
    RowVector forget = gates.segment(h_dim, h_dim);
    RowVector cell = gates.segment(2 * h_dim, h_dim);
    RowVector out = gates.segment(3 * h_dim, h_dim);
    RowVector ct = t.cell_tanh.row(row);
    RowVector c_prev = has_prev ? RowVector(t.cells.row(prev)) : RowVector::Zero(h_dim);

    RowVector dh = d_hidden.row(row) + dh_next;
    RowVector d_out = dh.cwiseProduct(ct);
    RowVector dc = dh.cwiseProduct(out).cwiseProduct((1.0 - ct.array().square()).matrix()) +
                   dc_next;
    RowVector d_in = dc.cwiseProduct(cell);
    RowVector d_cell = dc.cwiseProduct(in);
    RowVector d_forget = dc.cwiseProduct(c_prev);
    dc_next = dc.cwiseProduct(forget);

    RowVector dz(4 * h_dim);
    dz << (d_in.array() * in.array() * (1.0 - in.array())).matrix(),
        (d_forget.array() * forget.array() * (1.0 - forget.array())).matrix(),
        (d_cell.array() * (1.0 - cell.array().square())).matrix(),
        (d_out.array() * out.array() * (1.0 - out.array())).matrix();
    if (has_prev) g_rec += t.hidden.row(prev).transpose() * dz;
    dh_next = dz * w_rec.transpose();
    d_z.row(row) = dz;
  }
  g_in += x.transpose() * d_z;
  g_bias += d_z.colwise().sum();
  return d_z * w_in.transpose();
}

// ---- shared head ----

RowVector body_forward(const ClassifierParams& p, ForwardTrace& t, Dropout& dropout) {
  const int body_dim = p.body_dim();
  if (t.tokens.empty()) {
    t.branches.clear();
    t.body_mask.resize(0, 0);
    return RowVector::Zero(body_dim);
  }
  t.embedded = lookup(p.word_embedding, t.tokens);
  if (p.body == BodyKind::kConv) {
    const size_t branches = p.dims.conv_windows.size();
    const int width = p.dims.conv_filters.back();
    RowVector z(body_dim);
    t.branches.resize(branches);
    for (size_t b = 0; b < branches; ++b)
      z.segment(static_cast<Eigen::Index>(b) * width, width) =
          conv_branch_forward(p, b, t.embedded, t.branches[b], dropout);
    return z;
  }
  lstm_forward(t.embedded, p.forward_input, p.forward_recurrent, p.forward_bias, false,
               t.forward_lstm);
  lstm_forward(t.embedded, p.backward_input, p.backward_recurrent, p.backward_bias, true,
               t.backward_lstm);
  Matrix states(t.embedded.rows(), body_dim);
  states << t.forward_lstm.hidden, t.backward_lstm.hidden;
  RowVector z = column_max(states, t.sequence_arg);
  dropout.apply(z, t.body_mask);
  return z;
}

Matrix body_backward(const ClassifierParams& p, const ForwardTrace& t, const RowVector& dz,
                     ClassifierParams& g) {
  if (p.body == BodyKind::kConv) {
    const int width = p.dims.conv_filters.back();
    Matrix d_embedded = Matrix::Zero(t.embedded.rows(), t.embedded.cols());
    for (size_t b = 0; b < t.branches.size(); ++b)
      d_embedded += conv_branch_backward(
          p, b, t.branches[b], dz.segment(static_cast<Eigen::Index>(b) * width, width), g);
    return d_embedded;
  }
  RowVector d_pooled = t.body_mask.size() > 0 ? RowVector(dz.cwiseProduct(t.body_mask)) : dz;
  const Eigen::Index n = t.embedded.rows();
  const Eigen::Index h_dim = p.dims.lstm_hidden;
  Matrix d_states = Matrix::Zero(n, 2 * h_dim);
  for (Eigen::Index c = 0; c < d_pooled.size(); ++c) d_states(t.sequence_arg[c], c) += d_pooled(c);
  Matrix d_embedded =
      lstm_backward(t.embedded, p.forward_input, p.forward_recurrent, false, t.forward_lstm,
                    d_states.leftCols(h_dim), g.forward_input, g.forward_recurrent,
                    g.forward_bias);
  d_embedded += lstm_backward(t.embedded, p.backward_input, p.backward_recurrent, true,
                              t.backward_lstm, d_states.rightCols(h_dim), g.backward_input,
                              g.backward_recurrent, g.backward_bias);
  return d_embedded;
}

}  // namespace

std::string_view to_string(BodyKind kind) {
  return kind == BodyKind::kConv ? "conv" : "blstm";
}

BodyKind parse_body_kind(std::string_view name) {
  if (name == "conv") return BodyKind::kConv;
  if (name == "blstm") return BodyKind::kBlstm;
  throw UsageError("unknown classifier body '" + std::string(name) + "' (expected conv|blstm)");
}

int ClassifierParams::body_dim() const {
  if (body == BodyKind::kConv)
    return static_cast<int>(dims.conv_windows.size()) * dims.conv_filters.back();
  return 2 * dims.lstm_hidden;
}

size_t ClassifierParams::parameter_count() const {
  size_t n = 0;
  visit([&n](const std::string&, const Matrix& m) { n += static_cast<size_t>(m.size()); });
  return n;
}

ClassifierParams ClassifierParams::zeros_like() const {
  ClassifierParams out = *this;
  out.visit([](const std::string&, Matrix& m) { m.setZero(); });
  return out;
}

std::unordered_map<std::string, std::vector<double>> read_embeddings(const std::string& path,
                                                                     int dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file '" + path + "'");
  std::unordered_map<std::string, std::vector<double>> table;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::logic_error&) {
        throw DataError("embeddings line " + std::to_string(line_no) + ": bad number '" + tok +
                        "'");
      }
    }
    if (line_no == 1 && values.size() == 1 &&
        word.find_first_not_of("0123456789") == std::string::npos)
      continue;  // word2vec header
    if (static_cast<int>(values.size()) != dim)
      throw DataError("embeddings line " + std::to_string(line_no) + ": vector has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(dim));
    table[word] = std::move(values);
  }
  return table;
}

ClassifierParams init_params(BodyKind body, ModelDims dims, uint64_t seed,
                             const std::unordered_map<std::string, std::vector<double>>* pretrained,
                             const Vocabulary* vocab) {
  if (dims.label_count < 2) throw UsageError("label_count must be at least 2");
  if (dims.word_table < 2 || dims.hashtag_table < 2)
    throw UsageError("embedding tables need the two reserved rows");
  if (dims.conv_filters.empty() || dims.conv_windows.empty())
    throw UsageError("conv_filters and conv_windows must be non-empty");
  for (int w : dims.conv_windows)
    if (w < 1 || w % 2 == 0) throw UsageError("conv windows must be odd and positive");

  std::mt19937_64 rng(derive_seed({seed, 0x1417u}));
  ClassifierParams p;
  p.body = body;
  p.dims = dims;
  auto dense = [&rng](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    Matrix m(rows, cols);
    fill_uniform(m, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    return m;
  };

  p.word_embedding.resize(dims.word_table, dims.word_dim);
  fill_uniform(p.word_embedding, kEmbeddingInitBound, rng);
  p.word_embedding.row(Vocabulary::kPadId).setZero();
  if (pretrained && vocab) {
    for (const auto& entry : vocab->words) {
      auto it = pretrained->find(entry.term);
      if (it == pretrained->end()) continue;
      if (static_cast<int>(it->second.size()) != dims.word_dim)
        throw DataError("pretrained vector for '" + entry.term + "' has wrong dimension");
      for (int j = 0; j < dims.word_dim; ++j)
        p.word_embedding(entry.id, j) = it->second[static_cast<size_t>(j)];
    }
  }
  p.hashtag_embedding.resize(dims.hashtag_table, dims.hashtag_dim);
  fill_uniform(p.hashtag_embedding, kEmbeddingInitBound, rng);
  p.hashtag_embedding.row(Vocabulary::kPadId).setZero();

  p.query_weight = dense(dims.hashtag_dim, dims.attention_dim, dims.hashtag_dim);
  p.key_weight = dense(dims.hashtag_dim, dims.attention_dim, dims.hashtag_dim);
  p.value_weight = dense(dims.hashtag_dim, dims.attention_dim, dims.hashtag_dim);
  p.query_bias = Matrix::Zero(1, dims.attention_dim);
  p.key_bias = Matrix::Zero(1, dims.attention_dim);
  p.value_bias = Matrix::Zero(1, dims.attention_dim);

  if (body == BodyKind::kConv) {
    for (int window : dims.conv_windows) {
      int c_in = dims.word_dim;
      for (int c_out : dims.conv_filters) {
        p.conv_kernels.push_back(dense(window * c_in, c_out, window * c_in));
        p.conv_biases.push_back(Matrix::Zero(1, c_out));
        c_in = c_out;
      }
    }
  } else {
    const int h = dims.lstm_hidden;
    for (auto* cell : {&p.forward_input, &p.backward_input}) *cell = dense(dims.word_dim, 4 * h, dims.word_dim);
    for (auto* cell : {&p.forward_recurrent, &p.backward_recurrent}) *cell = dense(h, 4 * h, h);
    for (auto* bias : {&p.forward_bias, &p.backward_bias}) {
      *bias = Matrix::Zero(1, 4 * h);
      bias->block(0, h, 1, h).setOnes();
    }
  }

  const int features = p.feature_dim();
  p.norm_gain = Matrix::Ones(1, features);
  p.norm_bias = Matrix::Zero(1, features);
  p.output_weight = dense(features, dims.label_count, features);
  p.output_bias = Matrix::Zero(1, dims.label_count);
  return p;
}

StanceDistribution forward(const ClassifierParams& p, const EncodedTweet& tweet,
                           const ForwardOptions& options, ForwardTrace* trace) {
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  Dropout dropout(options);

  t.tokens = strip_padding(tweet.token_ids);
  t.attention = {};
  t.attention.ids = strip_padding(tweet.hashtag_ids);
  t.hashtag_features = attention_forward(p, t.attention);
  dropout.apply(t.hashtag_features, t.hashtag_mask);
  RowVector body = body_forward(p, t, dropout);

  t.features.resize(p.feature_dim());
  t.features << t.hashtag_features, body;
  const double mean = t.features.mean();
  const double var = (t.features.array() - mean).square().mean();
  t.inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
  t.normalized_hat = (t.features.array() - mean) * t.inv_std;
  t.normalized = t.normalized_hat.cwiseProduct(p.norm_gain.row(0)) + p.norm_bias.row(0);
  t.classifier_input = t.normalized;
  dropout.apply(t.classifier_input, t.norm_mask);
  t.logits = t.classifier_input * p.output_weight + p.output_bias.row(0);
  t.probs = row_softmax(t.logits, &t.log_probs);
  return t.probs;
}

void backward(const ClassifierParams& p, const ForwardTrace& t, const RowVector& logit_grad,
              ClassifierParams& g) {
  g.output_weight += t.classifier_input.transpose() * logit_grad;
  g.output_bias += logit_grad;
  RowVector d_norm = logit_grad * p.output_weight.transpose();
  if (t.norm_mask.size() > 0) d_norm = d_norm.cwiseProduct(t.norm_mask);

  g.norm_gain += d_norm.cwiseProduct(t.normalized_hat);
  g.norm_bias += d_norm;
  const RowVector d_hat = d_norm.cwiseProduct(p.norm_gain.row(0));
  const double dim = static_cast<double>(d_hat.size());
  const double sum_d = d_hat.sum();
  const double sum_dx = d_hat.dot(t.normalized_hat);
  RowVector d_features =
      (t.inv_std / dim) * (dim * d_hat.array() - sum_d - t.normalized_hat.array() * sum_dx).matrix();

  const Eigen::Index att = p.dims.attention_dim;
  RowVector d_hashtags = d_features.head(att);
  if (t.hashtag_mask.size() > 0) d_hashtags = d_hashtags.cwiseProduct(t.hashtag_mask);
  attention_backward(p, t.attention, d_hashtags, g);

  if (!t.tokens.empty()) {
    Matrix d_embedded = body_backward(p, t, d_features.tail(d_features.size() - att), g);
    scatter_rows(g.word_embedding, t.tokens, d_embedded);
  }
}

RowVector encode_hashtags(std::span<const int> hashtag_ids, const ClassifierParams& params) {
  ForwardTrace::Attention t;
  t.ids = strip_padding(hashtag_ids);
  return attention_forward(params, t);
}

RowVector encode_body(std::span<const int> token_ids, const ClassifierParams& params) {
  ForwardTrace t;
  t.tokens = strip_padding(token_ids);
  Dropout none(ForwardOptions{});
  return body_forward(params, t, none);
}

StanceDistribution classify_conv(const EncodedTweet& tweet, const ClassifierParams& params,
                                 double dropout_prob, bool training_mode, uint64_t seed) {
  if (params.body != BodyKind::kConv) throw UsageError("classify_conv needs conv parameters");
  return forward(params, tweet, {training_mode, dropout_prob, seed});
}

StanceDistribution classify_blstm(const EncodedTweet& tweet, const ClassifierParams& params,
                                  double dropout_prob, bool training_mode, uint64_t seed) {
  if (params.body != BodyKind::kBlstm) throw UsageError("classify_blstm needs blstm parameters");
  return forward(params, tweet, {training_mode, dropout_prob, seed});
}

double cross_entropy(const RowVector& log_probs, const RowVector& target) {
  return -target.dot(log_probs);
}

RowVector cross_entropy_logit_grad(const RowVector& probs, const RowVector& target) {
  return probs * target.sum() - target;
}

int argmax(const RowVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

}  // namespace sands

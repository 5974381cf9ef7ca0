#pragma once

// Scalar reference implementation of the classifiers, written with plain
// loops and std::vector so that it shares no arithmetic code with the
// Eigen-based model. Inference mode only.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sands/models.hpp"

namespace sands::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Vec row_of(const Matrix& m, int r) {
  Vec out(static_cast<size_t>(m.cols()));
  for (int j = 0; j < m.cols(); ++j) out[static_cast<size_t>(j)] = m(r, j);
  return out;
}

inline Vec affine(const Vec& x, const Matrix& w, const Matrix& b) {
  Vec out(static_cast<size_t>(w.cols()));
  for (int o = 0; o < w.cols(); ++o) {
    double s = b(0, o);
    for (int i = 0; i < w.rows(); ++i) s += x[static_cast<size_t>(i)] * w(i, o);
    out[static_cast<size_t>(o)] = s;
  }
  return out;
}

inline Vec relu(Vec v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
  return v;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<int> non_padding(const std::vector<int>& ids) {
  std::vector<int> out;
  for (int id : ids)
    if (id != 0) out.push_back(id);
  return out;
}

inline Vec column_max(const Mat& rows) {
  Vec out = rows.front();
  for (const auto& r : rows)
    for (size_t c = 0; c < r.size(); ++c) out[c] = std::max(out[c], r[c]);
  return out;
}

inline Vec attention(const ClassifierParams& p, const std::vector<int>& hashtag_ids) {
  const auto ids = non_padding(hashtag_ids);
  const size_t d = static_cast<size_t>(p.dims.attention_dim);
  if (ids.empty()) return Vec(d, 0.0);
  Mat q, k, v;
  for (int id : ids) {
    const Vec x = row_of(p.hashtag_embedding, id);
    q.push_back(relu(affine(x, p.query_weight, p.query_bias)));
    k.push_back(relu(affine(x, p.key_weight, p.key_bias)));
    v.push_back(relu(affine(x, p.value_weight, p.value_bias)));
  }
  const double scale = p.dims.scale_attention ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
  Mat mixed;
  for (size_t i = 0; i < ids.size(); ++i) {
    Vec scores(ids.size());
    for (size_t j = 0; j < ids.size(); ++j) {
      double s = 0.0;
      for (size_t c = 0; c < d; ++c) s += q[i][c] * k[j][c];
      scores[j] = s * scale;
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) z += (s = std::exp(s - m));
    Vec out(d, 0.0);
    for (size_t j = 0; j < ids.size(); ++j)
      for (size_t c = 0; c < d; ++c) out[c] += scores[j] / z * v[j][c];
    mixed.push_back(out);
  }
  return column_max(mixed);
}

// Same-padded 1-d convolution; kernel rows are (offset, input channel).
inline Mat conv(const Mat& x, const Matrix& kernel, const Matrix& bias, int window) {
  const int n = static_cast<int>(x.size());
  const int c_in = static_cast<int>(x.front().size());
  const int pad = window / 2;
  Mat out;
  for (int i = 0; i < n; ++i) {
    Vec r(static_cast<size_t>(kernel.cols()));
    for (int o = 0; o < kernel.cols(); ++o) {
      double s = bias(0, o);
      for (int t = 0; t < window; ++t) {
        const int src = i + t - pad;
        if (src < 0 || src >= n) continue;
        for (int c = 0; c < c_in; ++c)
          s += x[static_cast<size_t>(src)][static_cast<size_t>(c)] * kernel(t * c_in + c, o);
      }
      r[static_cast<size_t>(o)] = s > 0.0 ? s : 0.0;
    }
    out.push_back(r);
  }
  return out;
}

inline Mat pool_pairs(const Mat& x) {
  Mat out;
  for (size_t i = 0; i < x.size(); i += 2) {
    Vec r = x[i];
    if (i + 1 < x.size())
      for (size_t c = 0; c < r.size(); ++c) r[c] = std::max(r[c], x[i + 1][c]);
    out.push_back(r);
  }
  return out;
}

inline Vec conv_body(const ClassifierParams& p, const std::vector<int>& tokens) {
  const size_t depth = p.dims.conv_filters.size();
  Vec z;
  for (size_t b = 0; b < p.dims.conv_windows.size(); ++b) {
    Mat h;
    for (int id : tokens) h.push_back(row_of(p.word_embedding, id));
    for (size_t blk = 0; blk < depth; ++blk) {
      h = conv(h, p.conv_kernels[b * depth + blk], p.conv_biases[b * depth + blk],
               p.dims.conv_windows[b]);
      h = blk + 1 < depth ? pool_pairs(h) : Mat{column_max(h)};
    }
    z.insert(z.end(), h.front().begin(), h.front().end());
  }
  return z;
}

// One direction; returns hidden states indexed by original position.
inline Mat lstm(const ClassifierParams& p, const std::vector<int>& tokens, bool reverse) {
  const Matrix& w_in = reverse ? p.backward_input : p.forward_input;
  const Matrix& w_rec = reverse ? p.backward_recurrent : p.forward_recurrent;
  const Matrix& bias = reverse ? p.backward_bias : p.forward_bias;
  const size_t n = tokens.size();
  const size_t hd = static_cast<size_t>(p.dims.lstm_hidden);
  Vec h(hd, 0.0), c(hd, 0.0);
  Mat states(n);
  for (size_t s = 0; s < n; ++s) {
    const size_t pos = reverse ? n - 1 - s : s;
    const Vec x = row_of(p.word_embedding, tokens[pos]);
    Vec z = affine(x, w_in, bias);
    for (size_t o = 0; o < 4 * hd; ++o)
      for (size_t i = 0; i < hd; ++i) z[o] += h[i] * w_rec(static_cast<int>(i), static_cast<int>(o));
    for (size_t j = 0; j < hd; ++j) {
      const double in = sigmoid(z[j]);
      const double forget = sigmoid(z[hd + j]);
      const double cell = std::tanh(z[2 * hd + j]);
      const double out = sigmoid(z[3 * hd + j]);
      c[j] = forget * c[j] + in * cell;
      h[j] = out * std::tanh(c[j]);
    }
    states[pos] = h;
  }
  return states;
}

inline Vec blstm_body(const ClassifierParams& p, const std::vector<int>& tokens) {
  const Mat f = lstm(p, tokens, false);
  const Mat b = lstm(p, tokens, true);
  Mat both;
  for (size_t i = 0; i < tokens.size(); ++i) {
    Vec r = f[i];
    r.insert(r.end(), b[i].begin(), b[i].end());
    both.push_back(r);
  }
  return column_max(both);
}

inline Vec body(const ClassifierParams& p, const std::vector<int>& token_ids) {
  const auto tokens = non_padding(token_ids);
  if (tokens.empty()) return Vec(static_cast<size_t>(p.body_dim()), 0.0);
  return p.body == BodyKind::kConv ? conv_body(p, tokens) : blstm_body(p, tokens);
}

inline Vec classify(const ClassifierParams& p, const EncodedTweet& tweet) {
  Vec x = attention(p, tweet.hashtag_ids);
  const Vec z = body(p, tweet.token_ids);
  x.insert(x.end(), z.begin(), z.end());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec y(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * p.norm_gain(0, static_cast<int>(i)) +
           p.norm_bias(0, static_cast<int>(i));
  Vec logits = affine(y, p.output_weight, p.output_bias);
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - m));
  for (double& l : logits) l /= total;
  return logits;
}

}  // namespace sands::oracle

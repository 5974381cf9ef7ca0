#include "sands/optimizer.hpp"

#include <cmath>
#include <vector>

namespace sands {

Adam::Adam(const ClassifierParams& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(ClassifierParams& params, const ClassifierParams& grads) {
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;

  std::vector<Matrix*> p_list, m_list, v_list;
  std::vector<const Matrix*> g_list;
  std::vector<bool> embedding;
  params.visit([&](const std::string& name, Matrix& t) {
    p_list.push_back(&t);
    embedding.push_back(name.ends_with("_embedding"));
  });
  m_.visit([&](const std::string&, Matrix& t) { m_list.push_back(&t); });
  v_.visit([&](const std::string&, Matrix& t) { v_list.push_back(&t); });
  grads.visit([&](const std::string&, const Matrix& t) { g_list.push_back(&t); });

  for (size_t i = 0; i < p_list.size(); ++i) {
    // The padding row of an embedding table is pinned at zero.
    const Eigen::Index skip = embedding[i] ? 1 : 0;
    const Eigen::Index rows = p_list[i]->rows() - skip;
    auto p = p_list[i]->bottomRows(rows).array();
    auto m = m_list[i]->bottomRows(rows).array();
    auto v = v_list[i]->bottomRows(rows).array();
    auto g = g_list[i]->bottomRows(rows).array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    p -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

}  // namespace sands

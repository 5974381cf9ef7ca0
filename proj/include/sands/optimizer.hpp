#pragma once

#include <cstdint>

#include "sands/models.hpp"

namespace sands {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments mirror the parameter shapes.
class Adam {
 public:
  Adam() = default;
  Adam(const ClassifierParams& params, AdamConfig config);

  // Padding rows of both embedding tables never move.
  void step(ClassifierParams& params, const ClassifierParams& grads);

  int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  ClassifierParams& first_moment() { return m_; }
  ClassifierParams& second_moment() { return v_; }
  const ClassifierParams& first_moment() const { return m_; }
  const ClassifierParams& second_moment() const { return v_; }
  void set_steps(int64_t steps) { steps_ = steps; }

 private:
  AdamConfig config_;
  ClassifierParams m_;
  ClassifierParams v_;
  int64_t steps_ = 0;
};

}  // namespace sands

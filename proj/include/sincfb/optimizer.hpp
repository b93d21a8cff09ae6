#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace sincfb {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a flat parameter vector, with bias-corrected moments.
class Adam {
 public:
  Adam(std::size_t size, AdamParams params) : params_(params), m_(size, 0.0), v_(size, 0.0) {
    if (!(params_.learning_rate >= 0.0)) throw InvalidParameter("adam: learning rate must be >= 0");
  }

  void step(std::span<double> x, std::span<const double> grad) {
    if (x.size() != m_.size() || grad.size() != m_.size()) throw InvalidParameter("adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < x.size(); ++k) {
      m_[k] = params_.beta1 * m_[k] + (1.0 - params_.beta1) * grad[k];
      v_[k] = params_.beta2 * v_[k] + (1.0 - params_.beta2) * grad[k] * grad[k];
      x[k] -= params_.learning_rate * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + params_.epsilon);
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  AdamParams params_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace sincfb

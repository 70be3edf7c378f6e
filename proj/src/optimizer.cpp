#include "layersep/optimizer.hpp"

#include <cmath>

namespace layersep {

namespace {

void check_shapes(const std::vector<Image>& params, const std::vector<Image>& grads) {
  if (params.size() != grads.size()) throw ValidationError("optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(params[i], grads[i], "optimizer gradient");
}

std::vector<Image> zeros_like(const std::vector<Image>& xs) {
  std::vector<Image> out;
  for (const auto& x : xs) out.push_back(Image::Zero(x.rows(), x.cols()));
  return out;
}

}  // namespace

MomentumOptimizer::MomentumOptimizer(double momentum) : momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
}

void MomentumOptimizer::step(std::vector<Image>& params, const std::vector<Image>& grads, double lr) {
  check_shapes(params, grads);
  if (velocity_.size() != params.size()) velocity_ = zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grads[i];
    params[i] -= lr * velocity_[i];
  }
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw ValidationError("invalid Adam hyper-parameters");
  }
}

void AdamOptimizer::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

void AdamOptimizer::step(std::vector<Image>& params, const std::vector<Image>& grads, double lr) {
  check_shapes(params, grads);
  if (m_.size() != params.size()) {
    m_ = zeros_like(params);
    v_ = zeros_like(params);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].square();
    params[i] -= lr * (m_[i] / c1) / ((v_[i] / c2).sqrt() + epsilon_);
  }
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw ValidationError("unknown optimizer: " + name);
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "momentum";
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double momentum) {
  if (kind == OptimizerKind::Adam) return std::make_unique<AdamOptimizer>();
  return std::make_unique<MomentumOptimizer>(momentum);
}

}  // namespace layersep

#pragma once

#include "layersep/image.hpp"

#include <memory>
#include <string>
#include <vector>

namespace layersep {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// params -= lr * update(grads); state is keyed by parameter position.
  virtual void step(std::vector<Image>& params, const std::vector<Image>& grads, double lr) = 0;
  virtual void reset() = 0;
};

/// Heavy-ball momentum: v = mu v + g, p -= lr v.
class MomentumOptimizer final : public Optimizer {
 public:
  explicit MomentumOptimizer(double momentum = 0.9);
  void step(std::vector<Image>& params, const std::vector<Image>& grads, double lr) override;
  void reset() override { velocity_.clear(); }

 private:
  double momentum_;
  std::vector<Image> velocity_;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::vector<Image>& params, const std::vector<Image>& grads, double lr) override;
  void reset() override;

 private:
  double beta1_, beta2_, epsilon_;
  std::vector<Image> m_, v_;
  long t_ = 0;
};

enum class OptimizerKind { Momentum, Adam };

OptimizerKind optimizer_from_string(const std::string& name);
const char* to_string(OptimizerKind kind);
std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double momentum = 0.9);

}  // namespace layersep

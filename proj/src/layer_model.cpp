#include "layersep/layer_model.hpp"

#include "layersep/filters.hpp"
#include "layersep/laplace.hpp"

#include <cmath>

namespace layersep {

LayerModel::LayerModel(const JointCase& c) : masks_(c.stack_masks()) {
  validate_image(c.image, "case image");
  require_same_shape(c.image, c.lower, "case lower mask");
  require_same_shape(c.image, c.upper, "case upper mask");
  params_.assign(kNumLayers, Image::Zero(c.image.rows(), c.image.cols()));
}

LayerModel LayerModel::initialized(const JointCase& c, const InitOptions& options) {
  LayerModel model(c);
  model.set_from_layers(initial_layers(c, options));
  return model;
}

Eigen::Index LayerModel::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void LayerModel::set_from_layers(const std::vector<Image>& layers) {
  if (layers.size() != params_.size()) throw ValidationError("set_from_layers: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    require_same_shape(params_[i], layers[i], "set_from_layers");
    params_[i] = logit(layers[i]);
  }
}

LayerStack LayerModel::emit() const {
  LayerStack stack;
  stack.masks = masks_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    stack.layers.push_back(logistic(params_[i]) * masks_[i].cast<double>());
  }
  return stack;
}

std::vector<Image> LayerModel::chain_to_params(const std::vector<Image>& layer_grads) const {
  std::vector<Image> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Image s = logistic(params_[i]);
    out.push_back(layer_grads[i] * s * (1.0 - s) * masks_[i].cast<double>());
  }
  return out;
}

std::vector<Image> initial_layers(const JointCase& c, const InitOptions& options) {
  const Mask bones = c.bone_union();
  const Image lower = c.lower.cast<double>(), upper = c.upper.cast<double>();
  std::vector<Image> layers(kNumLayers);

  if (options.mode == InitMode::SmoothedImage) {
    const Image smooth = gaussian_blur(c.image, options.blur_sigma);
    const Image residual = (c.image - smooth).max(options.bone_floor);
    layers[kSoftTissue] = smooth;
    layers[kLowerBone] = residual * lower;
    layers[kUpperBone] = residual * upper;
    return layers;
  }

  Image soft = c.image;
  if (bones.any() && !bones.all()) soft = harmonic_inpaint(c.image, bones);
  soft = soft.max(1e-3).min(0.999);
  // Transmission the bones must supply, split evenly across overlapping bones.
  const Image remaining = ((1.0 - c.image) / (1.0 - soft)).min(1.0);
  const Image cover = lower + upper;
  Image per_bone = Image::Zero(c.image.rows(), c.image.cols());
  for (Eigen::Index i = 0; i < per_bone.size(); ++i) {
    const double k = cover.data()[i];
    if (k > 0.0) per_bone.data()[i] = std::max(1.0 - std::pow(remaining.data()[i], 1.0 / k), options.bone_floor);
  }
  layers[kSoftTissue] = soft;
  layers[kLowerBone] = per_bone * lower;
  layers[kUpperBone] = per_bone * upper;
  return layers;
}

}  // namespace layersep

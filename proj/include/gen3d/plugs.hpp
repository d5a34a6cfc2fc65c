#pragma once

#include <utility>

#include "gen3d/synergy.hpp"
#include "gen3d/toynet.hpp"

namespace gen3d {

// Adapters exposing the trainable networks through the sampler contracts.

class ToyReconstructorPlug : public GaussianReconstructor {
 public:
  ToyReconstructorPlug(ToyReconstructorNet net, double box_half_extent)
      : net_(std::move(net)), box_half_extent_(box_half_extent) {}

  GaussianCloud reconstruct(const MultiViewImages& x_t, int /*t*/,
                            const Image& context,
                            const MultiViewImages& x0_prior) override {
    return decode_feature_map(net_.forward(x_t, x0_prior, context),
                              box_half_extent_);
  }

  ToyReconstructorNet& net() { return net_; }

 private:
  ToyReconstructorNet net_;
  double box_half_extent_;
};

class ToyDenoiserPlug : public MultiViewDenoiser {
 public:
  explicit ToyDenoiserPlug(ToyDenoiserNet net) : net_(std::move(net)) {}

  MultiViewImages denoise(const DenoiserInput& in) override {
    return net_.forward(in.x_t, in.t, in.context);
  }

  ToyDenoiserNet& net() { return net_; }

 private:
  ToyDenoiserNet net_;
};

}  // namespace gen3d

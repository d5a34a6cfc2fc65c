#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"
#include "gen3d/scheduler.hpp"

namespace gen3d {

struct DenoiserInput {
  MultiViewImages x_t;
  Image context;
  std::string text_hint;         // opaque; plugs may ignore it
  int t = 1;
  double guidance_scale = 5.0;
};

// Multi-view noise predictor contract: output matches x_t's shape and the
// call is deterministic given identical inputs and internal state.
class MultiViewDenoiser {
 public:
  virtual ~MultiViewDenoiser() = default;
  virtual MultiViewImages denoise(const DenoiserInput& in) = 0;
};

// Maps noisy target views (+ clean-estimate prior and context) to a splat
// cloud.
class GaussianReconstructor {
 public:
  virtual ~GaussianReconstructor() = default;
  virtual GaussianCloud reconstruct(const MultiViewImages& x_t, int t,
                                    const Image& context,
                                    const MultiViewImages& x0_prior) = 0;
};

// Test double: its implied clean estimate is gt_views plus a seeded smooth
// per-view perturbation field (4x4 grid, bilinearly upsampled, independent of
// t), scaled by sigma_inc. It returns the exact noise residual that makes the
// one-step clean estimate reproduce that target.
class OracleDenoiser : public MultiViewDenoiser {
 public:
  OracleDenoiser(MultiViewImages gt_views, double sigma_inc, uint64_t seed,
                 const NoiseSchedule& schedule);

  MultiViewImages denoise(const DenoiserInput& in) override;
  // gt + sigma_inc * P_v; exposed for tests of the perturbation statistics.
  const MultiViewImages& implied_x0() const { return implied_x0_; }

 private:
  MultiViewImages implied_x0_;
  const NoiseSchedule* schedule_;
};

// Perturbation field used by OracleDenoiser: 4x4 seeded standard-normal grid,
// bilinearly upsampled; fixed per (seed, view), one per channel.
Image perturbation_field(int height, int width, int channels, uint64_t seed,
                         int view);

class OracleReconstructor : public GaussianReconstructor {
 public:
  explicit OracleReconstructor(GaussianCloud cloud) : cloud_(std::move(cloud)) {}
  GaussianCloud reconstruct(const MultiViewImages&, int, const Image&,
                            const MultiViewImages&) override {
    return cloud_;
  }

 private:
  GaussianCloud cloud_;
};

// Least-squares splat fit: seeded initialization, a fixed number of Adam
// steps through the rasterizer backward pass against the prior views at the
// rig's target cameras. Fixed iteration count keeps comparisons reproducible.
struct FittingReconstructorOptions {
  int splat_count = 125;
  int iterations = 200;
  double box_half_extent = 1.3;
  double lr = 0.05;
  uint64_t seed = 0;
  // Schedule used to weigh x_t against the x0 prior in the fitting target.
  NoiseSchedule schedule = linear_schedule(1000);
  // Assumed error scale of the x0 prior for that weighting.
  double prior_sigma = 0.05;
};

class FittingReconstructor : public GaussianReconstructor {
 public:
  FittingReconstructor(ViewRig rig, FittingReconstructorOptions opt);
  GaussianCloud reconstruct(const MultiViewImages& x_t, int t,
                            const Image& context,
                            const MultiViewImages& x0_prior) override;

 private:
  ViewRig rig_;
  FittingReconstructorOptions opt_;
};

enum class SamplerKind { ddpm, ddim };

struct SamplerOptions {
  int steps = 50;
  SamplerKind sampler = SamplerKind::ddim;
  double eta = 0.0;
  bool guided = true;
  double guidance_scale = 5.0;
  uint64_t seed = 0;
  // When set, each step also records inconsistency of the clean estimate the
  // sampler actually used (costs one extra reconstruct per step).
  bool record_inconsistency = false;
};

struct SamplerStepRecord {
  int t = 0;
  MultiViewImages x_tilde;  // denoiser clean estimate
  MultiViewImages x_hat;    // render of the reconstructed cloud
  GaussianCloud cloud;
  double inconsistency = -1.0;  // <0 when not recorded
};

struct SamplerTrace {
  std::vector<SamplerStepRecord> steps;
  GaussianCloud final_cloud;
  MultiViewImages final_views;
  bool guided = true;
  std::string sampler = "ddim";
  double eta = 0.0;
  uint64_t seed = 0;
};

// Reverse diffusion with per-step 3D reprojection: each step predicts clean
// views, reconstructs a cloud from them and (in guided mode) substitutes the
// cloud's own renders into the transition, forcing the trajectory through
// multi-view-consistent states. The initial state is seeded standard normal.
// A ddpm sampler on a strict subsequence runs as ddim with eta = 1, which is
// the same transition generalized to arbitrary step gaps.
SamplerTrace guided_sample(MultiViewDenoiser& den, GaussianReconstructor& rec,
                           const Image& context, const ViewRig& rig,
                           const NoiseSchedule& s, const SamplerOptions& opt);

// Reprojection residual: RMSE between `views` and the renders of the cloud
// the reconstructor fits to them (t clamped to 1). Zero iff the views are
// exactly explainable by a single cloud.
double inconsistency(const MultiViewImages& views, GaussianReconstructor& rec,
                     const Image& context, const ViewRig& rig);

void save_trace(const std::filesystem::path& dir, const SamplerTrace& trace);
SamplerTrace load_trace(const std::filesystem::path& dir);

}  // namespace gen3d

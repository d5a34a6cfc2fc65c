#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gen3d/scenes.hpp"
#include "gen3d/scheduler.hpp"
#include "gen3d/synergy.hpp"
#include "gen3d/toynet.hpp"

namespace gen3d {

struct TrainConfig {
  int steps = 2000;
  int checkpoint_interval = 500;
  uint64_t seed = 0;
  double lr = 5e-4;
  double weight_decay = 0.05;
  double clip_norm = 1.0;
  double box_half_extent = 1.3;
  int T = 1000;
  int feature_scale = 2;           // image-to-feature-grid downsample factor
  RenderLossWeights loss_weights;  // image/shape loss weights
  bool joint_denoiser = false;     // also train the toy noise predictor
  bool zero_prior = false;         // ablation: clean-estimate channels zeroed
  double oracle_sigma = 0.0;       // oracle noise-predictor perturbation
};

struct StepLoss {
  int step = 0;
  double loss_eps = 0.0;
  double loss_mse = 0.0;
  double loss_percep = 0.0;
  double loss_reg = 0.0;
  double lr = 0.0;
  double total = 0.0;
};

// Seeded, deterministic training over a fixed dataset: each step draws a
// timestep and noise, diffuses the target views, forms the clean-estimate
// prior, reconstructs a cloud, renders target + novel cameras and
// backpropagates the combined noise-prediction and rendering loss.
class Trainer {
 public:
  Trainer(std::vector<DatasetRecord> dataset, TrainConfig cfg);

  StepLoss step();
  // Loss at the current parameters for a fixed (scene, seed) draw; no update.
  StepLoss evaluate(int scene_index, uint64_t step_seed);
  // Same, but also fills the networks' gradient buffers (no optimizer step).
  StepLoss backward_probe(int scene_index, uint64_t step_seed);
  // Full loop: loss CSV (step,loss_eps,loss_mse,loss_percep,loss_reg,lr),
  // periodic checkpoints ckpt_%06d and a final ckpt_final.
  std::vector<StepLoss> run(const std::filesystem::path& out_dir);

  // Mean target-view PSNR of the reconstructor conditioned at t = 1 (lightly
  // diffused ground truth plus the configured prior).
  double eval_target_psnr_t1() const;

  ToyReconstructorNet& reconstructor() { return rec_; }
  ToyDenoiserNet& denoiser() { return den_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  StepLoss run_step(int scene_index, uint64_t step_seed, bool compute_grads);

  std::vector<DatasetRecord> dataset_;
  TrainConfig cfg_;
  NoiseSchedule schedule_;
  ToyReconstructorNet rec_;
  ToyDenoiserNet den_;
  AdamW opt_;
  int step_index_ = 0;
};

void save_loss_csv(const std::filesystem::path& path,
                   const std::vector<StepLoss>& log);

}  // namespace gen3d

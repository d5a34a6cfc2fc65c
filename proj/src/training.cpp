#include "gen3d/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "gen3d/metrics.hpp"
#include "gen3d/rasterizer.hpp"
#include "gen3d/rng.hpp"

namespace gen3d {

namespace fs = std::filesystem;

namespace {

const Eigen::Vector3d kWhite(1, 1, 1);

MultiViewImages zero_like(const MultiViewImages& views) {
  MultiViewImages out;
  out.reserve(views.size());
  for (const Image& v : views) out.emplace_back(v.height, v.width, v.channels);
  return out;
}

double mse_between(const MultiViewImages& a, const MultiViewImages& b) {
  double sq = 0.0;
  size_t count = 0;
  for (size_t v = 0; v < a.size(); ++v) {
    for (size_t i = 0; i < a[v].data.size(); ++i) {
      const double e = a[v].data[i] - b[v].data[i];
      sq += e * e;
    }
    count += a[v].data.size();
  }
  return sq / double(count);
}

}  // namespace

Trainer::Trainer(std::vector<DatasetRecord> dataset, TrainConfig cfg)
    : dataset_(std::move(dataset)), cfg_(cfg),
      schedule_(linear_schedule(cfg.T)),
      rec_(Rng::derive_seed(cfg.seed, "init")),
      den_(Rng::derive_seed(cfg.seed, "init"), cfg.T) {
  if (dataset_.empty()) throw std::invalid_argument("empty dataset");
  rec_.feature_scale = cfg_.feature_scale;
  opt_.lr = cfg_.lr;
  opt_.weight_decay = cfg_.weight_decay;
  opt_.clip_norm = cfg_.clip_norm;
  opt_.total_steps = cfg_.steps;
}

StepLoss Trainer::run_step(int scene_index, uint64_t step_seed,
                           bool compute_grads) {
  const DatasetRecord& scene = dataset_[scene_index];
  const int views = int(scene.targets.size());

  Rng rng(step_seed);
  const int t = rng.uniform_int(1, schedule_.T);
  MultiViewImages eps = zero_like(scene.targets);
  for (Image& img : eps)
    for (double& p : img.data) p = rng.normal();

  MultiViewImages x_t = forward_diffuse(scene.targets, t, eps, schedule_);

  // Clean-estimate prior feeding the reconstructor's conditioning channels.
  MultiViewImages eps_hat, prior;
  std::vector<ToyNet::Cache> den_caches;
  if (cfg_.joint_denoiser) {
    eps_hat = den_.forward_cached(x_t, t, scene.context, den_caches);
  } else {
    OracleDenoiser oracle(scene.targets, cfg_.oracle_sigma,
                          Rng::derive_seed(cfg_.seed, "oracle"), schedule_);
    DenoiserInput din;
    din.x_t = x_t;
    din.context = scene.context;
    din.t = t;
    eps_hat = oracle.denoise(din);
  }
  MultiViewImages x_tilde = predict_x0(x_t, eps_hat, t, schedule_);
  prior = cfg_.zero_prior ? zero_like(x_t) : x_tilde;

  std::vector<ToyNet::Cache> rec_caches;
  RawFeatureMap raw = rec_.forward_cached(x_t, prior, scene.context, rec_caches);
  GaussianCloud cloud = decode_feature_map(raw, cfg_.box_half_extent);

  std::vector<const Camera*> cams;
  MultiViewImages refs;
  for (int v = 0; v < views; ++v) {
    cams.push_back(&scene.rig.targets[v]);
    refs.push_back(scene.targets[v]);
  }
  for (size_t v = 0; v < scene.rig.novels.size(); ++v) {
    cams.push_back(&scene.rig.novels[v]);
    refs.push_back(scene.novels[v]);
  }
  MultiViewImages renders;
  renders.reserve(cams.size());
  for (const Camera* cam : cams)
    renders.push_back(render(cloud, *cam, kWhite).color);

  CloudGrads cloud_grads;
  cloud_grads.resize(cloud.size());
  cloud_grads.setZero();
  RenderLossResult gs = render_loss(renders, refs, cloud, cfg_.loss_weights,
                                    compute_grads ? &cloud_grads : nullptr);

  StepLoss out;
  out.step = step_index_;
  out.loss_eps = mse_between(eps, eps_hat);
  out.loss_mse = gs.mse;
  out.loss_percep = gs.percep;
  out.loss_reg = gs.reg;
  out.lr = opt_.current_lr();
  out.total = out.loss_eps + gs.total;
  if (!compute_grads) return out;

  for (size_t v = 0; v < cams.size(); ++v)
    cloud_grads.accumulate(
        render_backward(cloud, *cams[v], kWhite, gs.image_grads[v], nullptr));

  RawFeatureMap raw_grads =
      decode_feature_map_backward(raw, cfg_.box_half_extent, cloud_grads);
  rec_.net.zero_grads();
  std::vector<Tensor> input_grads = rec_.backward(rec_caches, raw_grads);

  if (cfg_.joint_denoiser) {
    // Noise-prediction MSE plus the rendering loss flowing back through the
    // clean estimate: d x_tilde / d eps_hat = -sqrt(1-abar)/sqrt(abar).
    const double abar = schedule_.alpha_bar_at(t);
    const double chain = -std::sqrt(1.0 - abar) / std::sqrt(abar);
    size_t eps_count = 0;
    for (const Image& img : eps) eps_count += img.data.size();
    MultiViewImages den_grads = zero_like(eps);
    for (int v = 0; v < views; ++v) {
      for (int y = 0; y < den_grads[v].height; ++y)
        for (int x = 0; x < den_grads[v].width; ++x)
          for (int c = 0; c < 3; ++c) {
            double g = 2.0 * (eps_hat[v].at(y, x, c) - eps[v].at(y, x, c)) /
                       double(eps_count);
            if (!cfg_.zero_prior)
              g += chain * input_grads[v].at(3 + c, y, x);
            den_grads[v].at(y, x, c) = g;
          }
    }
    den_.net.zero_grads();
    den_.backward(den_caches, den_grads);
  }

  return out;
}

StepLoss Trainer::evaluate(int scene_index, uint64_t step_seed) {
  return run_step(scene_index, step_seed, false);
}

StepLoss Trainer::backward_probe(int scene_index, uint64_t step_seed) {
  return run_step(scene_index, step_seed, true);
}

StepLoss Trainer::step() {
  const int scene = step_index_ % int(dataset_.size());
  const uint64_t seed =
      Rng::derive_seed(cfg_.seed, "train-step-" + std::to_string(step_index_));
  StepLoss loss = run_step(scene, seed, true);
  std::vector<double*> params, grads;
  rec_.net.collect(params, grads);
  if (cfg_.joint_denoiser) den_.net.collect(params, grads);
  opt_.step(params, grads);
  ++step_index_;
  return loss;
}

std::vector<StepLoss> Trainer::run(const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<StepLoss> log;
  log.reserve(cfg_.steps);
  save_checkpoint(out_dir / "ckpt_init", rec_, den_, opt_);
  for (int i = 0; i < cfg_.steps; ++i) {
    log.push_back(step());
    if (cfg_.checkpoint_interval > 0 && (i + 1) % cfg_.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06d", i + 1);
      save_checkpoint(out_dir / name, rec_, den_, opt_);
    }
  }
  save_checkpoint(out_dir / "ckpt_final", rec_, den_, opt_);
  save_loss_csv(out_dir / "loss.csv", log);
  return log;
}

double Trainer::eval_target_psnr_t1() const {
  double total = 0.0;
  int count = 0;
  for (size_t s = 0; s < dataset_.size(); ++s) {
    const DatasetRecord& scene = dataset_[s];
    Rng rng = Rng::substream(cfg_.seed, "eval-eps-" + std::to_string(s));
    MultiViewImages eps = zero_like(scene.targets);
    for (Image& img : eps)
      for (double& p : img.data) p = rng.normal();
    MultiViewImages x_1 = forward_diffuse(scene.targets, 1, eps, schedule_);

    MultiViewImages prior;
    if (cfg_.zero_prior) {
      prior = zero_like(x_1);
    } else if (cfg_.joint_denoiser) {
      MultiViewImages eps_hat = den_.forward(x_1, 1, scene.context);
      prior = predict_x0(x_1, eps_hat, 1, schedule_);
    } else {
      prior = scene.targets;  // oracle clean estimate, sigma 0
    }
    RawFeatureMap raw = rec_.forward(x_1, prior, scene.context);
    GaussianCloud cloud = decode_feature_map(raw, cfg_.box_half_extent);
    for (size_t v = 0; v < scene.targets.size(); ++v) {
      Image rendered = render(cloud, scene.rig.targets[v], kWhite).color;
      total += psnr(rendered, scene.targets[v]);
      ++count;
    }
  }
  return total / count;
}

void save_loss_csv(const fs::path& path, const std::vector<StepLoss>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss_eps,loss_mse,loss_percep,loss_reg,lr\n";
  char line[256];
  for (const StepLoss& l : log) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  l.step, l.loss_eps, l.loss_mse, l.loss_percep, l.loss_reg,
                  l.lr);
    out << line;
  }
}

}  // namespace gen3d

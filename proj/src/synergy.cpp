#include "gen3d/synergy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gen3d/rasterizer.hpp"
#include "gen3d/rng.hpp"

namespace gen3d {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

MultiViewImages render_targets(const GaussianCloud& cloud, const ViewRig& rig) {
  MultiViewImages out;
  out.reserve(rig.targets.size());
  for (const Camera& cam : rig.targets)
    out.push_back(render(cloud, cam, Eigen::Vector3d(1, 1, 1)).color);
  return out;
}

}  // namespace

Image perturbation_field(int height, int width, int channels, uint64_t seed,
                         int view) {
  constexpr int kGrid = 4;
  Rng rng = Rng::substream(seed, "perturbation-" + std::to_string(view));
  std::vector<double> grid(size_t(kGrid) * kGrid * channels);
  for (double& v : grid) v = rng.normal();
  auto grid_at = [&](int gy, int gx, int c) {
    return grid[(size_t(gy) * kGrid + gx) * channels + c];
  };
  Image field(height, width, channels);
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * kGrid / height - 0.5;
    int y0 = std::clamp(int(std::floor(fy)), 0, kGrid - 1);
    int y1 = std::min(y0 + 1, kGrid - 1);
    double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < width; ++x) {
      double fx = (x + 0.5) * kGrid / width - 0.5;
      int x0 = std::clamp(int(std::floor(fx)), 0, kGrid - 1);
      int x1 = std::min(x0 + 1, kGrid - 1);
      double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < channels; ++c) {
        double top = (1 - wx) * grid_at(y0, x0, c) + wx * grid_at(y0, x1, c);
        double bot = (1 - wx) * grid_at(y1, x0, c) + wx * grid_at(y1, x1, c);
        field.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return field;
}

OracleDenoiser::OracleDenoiser(MultiViewImages gt_views, double sigma_inc,
                               uint64_t seed, const NoiseSchedule& schedule)
    : schedule_(&schedule) {
  if (sigma_inc < 0.0) throw std::invalid_argument("sigma_inc must be >= 0");
  implied_x0_ = std::move(gt_views);
  if (sigma_inc > 0.0) {
    for (size_t v = 0; v < implied_x0_.size(); ++v) {
      Image& img = implied_x0_[v];
      Image p = perturbation_field(img.height, img.width, img.channels, seed,
                                   int(v));
      for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] += sigma_inc * p.data[i];
    }
  }
}

MultiViewImages OracleDenoiser::denoise(const DenoiserInput& in) {
  if (in.x_t.size() != implied_x0_.size())
    throw std::invalid_argument("view count mismatch");
  const double abar = schedule_->alpha_bar_at(in.t);
  const double sqrt_abar = std::sqrt(abar);
  const double sqrt_rem = std::sqrt(1.0 - abar);
  if (sqrt_rem == 0.0)
    throw std::domain_error("noise residual undefined at alpha_bar = 1");
  MultiViewImages eps;
  eps.reserve(in.x_t.size());
  for (size_t v = 0; v < in.x_t.size(); ++v) {
    if (!in.x_t[v].same_shape(implied_x0_[v]))
      throw std::invalid_argument("x_t shape mismatch");
    Image e(in.x_t[v].height, in.x_t[v].width, in.x_t[v].channels);
    for (size_t i = 0; i < e.data.size(); ++i)
      e.data[i] =
          (in.x_t[v].data[i] - sqrt_abar * implied_x0_[v].data[i]) / sqrt_rem;
    eps.push_back(std::move(e));
  }
  return eps;
}

FittingReconstructor::FittingReconstructor(ViewRig rig,
                                           FittingReconstructorOptions opt)
    : rig_(std::move(rig)), opt_(opt) {
  if (opt_.splat_count <= 0 || opt_.iterations < 0)
    throw std::invalid_argument("bad fitting reconstructor options");
}

GaussianCloud FittingReconstructor::reconstruct(const MultiViewImages& x_t, int t,
                                                const Image&,
                                                const MultiViewImages& x0_prior) {
  if (x0_prior.size() != rig_.targets.size())
    throw std::invalid_argument("prior view count must match target cameras");
  if (x_t.size() != x0_prior.size())
    throw std::invalid_argument("x_t view count must match the prior");
  const int n = opt_.splat_count;
  const double bhe = opt_.box_half_extent;
  const int height = x0_prior[0].height;

  // Fitting target: inverse-variance blend of the two inputs. x_t / sqrt(abar)
  // estimates x0 with noise variance (1 - abar) / abar; the prior's own error
  // scale is prior_sigma. The blend therefore ignores the trajectory while it
  // is noisier than the prior and trusts it near t = 1, where the state is the
  // sampler's (possibly guided) clean estimate.
  const double abar = opt_.schedule.alpha_bar_at(t);
  const double sp2 = opt_.prior_sigma * opt_.prior_sigma;
  const double w = sp2 * abar / (sp2 * abar + (1.0 - abar));
  const double w_xt = w / std::sqrt(abar), w_prior = 1.0 - w;
  MultiViewImages target;
  target.reserve(x0_prior.size());
  for (size_t v = 0; v < x0_prior.size(); ++v) {
    Image img(x0_prior[v].height, x0_prior[v].width, x0_prior[v].channels);
    for (size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = w_xt * x_t[v].data[i] + w_prior * x0_prior[v].data[i];
    target.push_back(std::move(img));
  }

  // Raw parameters: unconstrained center, log scale, logit opacity/color.
  std::vector<double> params(size_t(n) * 10);
  Rng rng = Rng::substream(opt_.seed, "fit-init");
  const double s0 = std::log(2.0 * base_scale_for(bhe, height));
  for (int i = 0; i < n; ++i) {
    double* p = &params[size_t(i) * 10];
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(-0.6 * bhe, 0.6 * bhe);
    for (int k = 0; k < 3; ++k) p[3 + k] = s0;
    p[6] = 0.0;                                    // opacity 0.5
    for (int k = 0; k < 3; ++k) p[7 + k] = 0.0;    // color 0.5
  }

  auto build_cloud = [&](const std::vector<double>& prm) {
    GaussianCloud cloud;
    cloud.gaussians.resize(n);
    for (int i = 0; i < n; ++i) {
      const double* p = &prm[size_t(i) * 10];
      Gaussian& g = cloud.gaussians[i];
      g.center = Eigen::Vector3d(p[0], p[1], p[2]);
      g.scale = Eigen::Vector3d(std::exp(p[3]), std::exp(p[4]), std::exp(p[5]));
      g.opacity = 1.0 / (1.0 + std::exp(-p[6]));
      for (int k = 0; k < 3; ++k) g.color[k] = 1.0 / (1.0 + std::exp(-p[7 + k]));
    }
    return cloud;
  };

  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  size_t pixel_total = 0;
  for (const Image& img : target) pixel_total += img.data.size();

  for (int it = 0; it < opt_.iterations; ++it) {
    GaussianCloud cloud = build_cloud(params);
    CloudGrads grads;
    grads.resize(size_t(n));
    grads.setZero();
    for (size_t view = 0; view < target.size(); ++view) {
      RenderOutput out =
          render(cloud, rig_.targets[view], Eigen::Vector3d(1, 1, 1));
      Image gimg(out.color.height, out.color.width, out.color.channels);
      for (size_t i = 0; i < gimg.data.size(); ++i)
        gimg.data[i] = 2.0 * (out.color.data[i] - target[view].data[i]) /
                       double(pixel_total);
      grads.accumulate(render_backward(cloud, rig_.targets[view],
                                       Eigen::Vector3d(1, 1, 1), gimg, nullptr));
    }
    std::vector<double> raw(params.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      const Gaussian& g = cloud.gaussians[i];
      double* r = &raw[size_t(i) * 10];
      for (int k = 0; k < 3; ++k) r[k] = grads.center[i][k];
      for (int k = 0; k < 3; ++k) r[3 + k] = grads.scale[i][k] * g.scale[k];
      r[6] = grads.opacity[i] * g.opacity * (1.0 - g.opacity);
      for (int k = 0; k < 3; ++k)
        r[7 + k] = grads.color[i][k] * g.color[k] * (1.0 - g.color[k]);
    }
    const double bc1 = 1.0 - std::pow(b1, it + 1);
    const double bc2 = 1.0 - std::pow(b2, it + 1);
    for (size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * raw[i];
      v[i] = b2 * v[i] + (1.0 - b2) * raw[i] * raw[i];
      params[i] -= opt_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
  return build_cloud(params);
}

SamplerTrace guided_sample(MultiViewDenoiser& den, GaussianReconstructor& rec,
                           const Image& context, const ViewRig& rig,
                           const NoiseSchedule& s, const SamplerOptions& opt) {
  if (opt.steps < 1) throw std::invalid_argument("steps must be >= 1");
  const CameraIntrinsics& intr = rig.targets[0].intrinsics;
  const int views = int(rig.targets.size());

  SamplerTrace trace;
  trace.guided = opt.guided;
  trace.sampler = opt.sampler == SamplerKind::ddim ? "ddim" : "ddpm";
  trace.eta = opt.sampler == SamplerKind::ddpm ? 1.0 : opt.eta;
  trace.seed = opt.seed;
  trace.steps.reserve(opt.steps);

  Rng init_rng = Rng::substream(opt.seed, "sample-init");
  MultiViewImages x;
  for (int v = 0; v < views; ++v) {
    Image img(intr.height, intr.width, 3);
    for (double& p : img.data) p = init_rng.normal();
    x.push_back(std::move(img));
  }

  Rng noise_rng = Rng::substream(opt.seed, "sample-noise");
  const std::vector<int> ts = timestep_subsequence(s.T, opt.steps);
  const double eta = trace.eta;

  MultiViewImages last_x_tilde;
  for (size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;

    DenoiserInput din;
    din.x_t = x;
    din.context = context;
    din.t = t;
    din.guidance_scale = opt.guidance_scale;
    MultiViewImages eps_hat;
    GaussianCloud cloud;
    MultiViewImages x_tilde, x_hat;
    try {
      eps_hat = den.denoise(din);
      x_tilde = predict_x0(x, eps_hat, t, s);
      cloud = rec.reconstruct(x, t, context, x_tilde);
    } catch (const std::exception& e) {
      throw std::runtime_error("sampler step t=" + std::to_string(t) + ": " +
                               e.what());
    }
    x_hat = render_targets(cloud, rig);

    const MultiViewImages& estimate = opt.guided ? x_hat : x_tilde;

    SamplerStepRecord record;
    record.t = t;
    record.x_tilde = x_tilde;
    record.x_hat = x_hat;
    record.cloud = cloud;
    if (opt.record_inconsistency)
      record.inconsistency = inconsistency(estimate, rec, context, rig);
    trace.steps.push_back(std::move(record));

    if (eta > 0.0 && t_prev > 0) {
      MultiViewImages noise;
      for (int v = 0; v < views; ++v) {
        Image img(intr.height, intr.width, 3);
        for (double& p : img.data) p = noise_rng.normal();
        noise.push_back(std::move(img));
      }
      x = ddim_step(x, estimate, t, t_prev, s, eta, &noise);
    } else {
      x = ddim_step(x, estimate, t, t_prev, s, eta, nullptr);
    }
    last_x_tilde = std::move(x_tilde);
  }

  // The schedule indexes from 1, so the closing reconstruct clamps there.
  trace.final_cloud = rec.reconstruct(x, 1, context, last_x_tilde);
  trace.final_views = render_targets(trace.final_cloud, rig);
  return trace;
}

double inconsistency(const MultiViewImages& views, GaussianReconstructor& rec,
                     const Image& context, const ViewRig& rig) {
  GaussianCloud cloud = rec.reconstruct(views, 1, context, views);
  MultiViewImages rendered = render_targets(cloud, rig);
  double sq = 0.0;
  size_t count = 0;
  for (size_t v = 0; v < views.size(); ++v) {
    if (!views[v].same_shape(rendered[v]))
      throw std::invalid_argument("render shape mismatch");
    for (size_t i = 0; i < views[v].data.size(); ++i) {
      const double e = views[v].data[i] - rendered[v].data[i];
      sq += e * e;
    }
    count += views[v].data.size();
  }
  return std::sqrt(sq / double(count));
}

namespace {

std::string step_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%04d", index);
  return buf;
}

}  // namespace

void save_trace(const fs::path& dir, const SamplerTrace& trace) {
  fs::create_directories(dir);
  json meta;
  meta["mode"] = trace.guided ? "guided" : "unguided";
  meta["sampler"] = trace.sampler;
  meta["eta"] = trace.eta;
  meta["seed"] = trace.seed;
  meta["views"] = trace.final_views.size();
  meta["timesteps"] = json::array();
  meta["inconsistency"] = json::array();
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const SamplerStepRecord& rec = trace.steps[i];
    meta["timesteps"].push_back(rec.t);
    meta["inconsistency"].push_back(rec.inconsistency);
    fs::path sdir = dir / step_dir_name(int(i));
    fs::create_directories(sdir);
    save_f32_stack(sdir / "x_tilde.f32", rec.x_tilde);
    save_f32_stack(sdir / "x_hat.f32", rec.x_hat);
    ply_write(rec.cloud, sdir / "cloud.ply");
  }
  ply_write(trace.final_cloud, dir / "final_cloud.ply");
  save_f32_stack(dir / "final_views.f32", trace.final_views);
  std::ofstream out(dir / "trace.json");
  out << meta.dump(2) << "\n";
}

SamplerTrace load_trace(const fs::path& dir) {
  std::ifstream in(dir / "trace.json");
  if (!in) throw std::runtime_error("missing trace.json in " + dir.string());
  json meta = json::parse(in);
  SamplerTrace trace;
  trace.guided = meta.at("mode").get<std::string>() == "guided";
  trace.sampler = meta.at("sampler").get<std::string>();
  trace.eta = meta.at("eta").get<double>();
  trace.seed = meta.at("seed").get<uint64_t>();
  const int views = meta.at("views").get<int>();
  const auto& ts = meta.at("timesteps");
  const auto& inc = meta.at("inconsistency");
  for (size_t i = 0; i < ts.size(); ++i) {
    SamplerStepRecord rec;
    rec.t = ts[i].get<int>();
    rec.inconsistency = inc[i].get<double>();
    fs::path sdir = dir / step_dir_name(int(i));
    rec.x_tilde = load_f32_stack(sdir / "x_tilde.f32", views);
    rec.x_hat = load_f32_stack(sdir / "x_hat.f32", views);
    rec.cloud = ply_read(sdir / "cloud.ply");
    trace.steps.push_back(std::move(rec));
  }
  trace.final_cloud = ply_read(dir / "final_cloud.ply");
  trace.final_views = load_f32_stack(dir / "final_views.f32", views);
  return trace;
}

}  // namespace gen3d

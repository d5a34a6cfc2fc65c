#include "gen3d/scheduler.hpp"

#include <cmath>
#include <stdexcept>

namespace gen3d {

namespace {

void check_step(int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.T) throw std::invalid_argument("timestep out of range");
}

void check_shapes(const MultiViewImages& a, const MultiViewImages& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("multi-view shape mismatch");
}

// out = ca * a + cb * b, elementwise.
MultiViewImages affine(const MultiViewImages& a, double ca, const MultiViewImages& b,
                       double cb) {
  MultiViewImages out = a;
  for (size_t v = 0; v < out.size(); ++v)
    for (size_t i = 0; i < out[v].data.size(); ++i)
      out[v].data[i] = ca * a[v].data[i] + cb * b[v].data[i];
  return out;
}

}  // namespace

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("schedule length must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("require 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  long double running = 1.0L;
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    s.beta[t - 1] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[t - 1] = 1.0 - s.beta[t - 1];
    running *= static_cast<long double>(s.alpha[t - 1]);
    s.alpha_bar[t - 1] = static_cast<double>(running);
  }
  return s;
}

MultiViewImages forward_diffuse(const MultiViewImages& x0, int t,
                                const MultiViewImages& eps, const NoiseSchedule& s) {
  check_step(t, s);
  check_shapes(x0, eps);
  const double abar = s.alpha_bar_at(t);
  return affine(x0, std::sqrt(abar), eps, std::sqrt(1.0 - abar));
}

MultiViewImages predict_x0(const MultiViewImages& x_t, const MultiViewImages& eps_hat,
                           int t, const NoiseSchedule& s) {
  check_step(t, s);
  check_shapes(x_t, eps_hat);
  const double abar = s.alpha_bar_at(t);
  const double inv = 1.0 / std::sqrt(abar);
  return affine(x_t, inv, eps_hat, -std::sqrt(1.0 - abar) * inv);
}

Posterior posterior_mean(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                         int t, const NoiseSchedule& s) {
  check_step(t, s);
  check_shapes(x_t, x0_est);
  Posterior p;
  if (t == 1) {
    // The posterior collapses onto the estimate; return it without the
    // coefficient arithmetic so the identity holds bitwise.
    p.mean = x0_est;
    p.var = 0.0;
    return p;
  }
  const double abar_t = s.alpha_bar_at(t);
  const double abar_prev = s.alpha_bar_at(t - 1);
  const double beta_t = s.beta_at(t);
  const double denom = 1.0 - abar_t;
  p.mean = affine(x_t, std::sqrt(s.alpha_at(t)) * (1.0 - abar_prev) / denom, x0_est,
                  std::sqrt(abar_prev) * beta_t / denom);
  p.var = (1.0 - abar_prev) / denom * beta_t;
  return p;
}

MultiViewImages ddpm_step(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                          int t, const NoiseSchedule& s, const MultiViewImages& noise) {
  Posterior p = posterior_mean(x_t, x0_est, t, s);
  if (t == 1) return p.mean;
  check_shapes(p.mean, noise);
  return affine(p.mean, 1.0, noise, std::sqrt(p.var));
}

MultiViewImages ddim_step(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                          int t, int t_prev, const NoiseSchedule& s, double eta,
                          const MultiViewImages* noise) {
  check_step(t, s);
  if (t_prev >= t || t_prev < 0) throw std::invalid_argument("require 0 <= t_prev < t");
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must be in [0,1]");
  check_shapes(x_t, x0_est);
  const double abar_t = s.alpha_bar_at(t);
  const double abar_prev = s.alpha_bar_at(t_prev);
  const double sigma = eta * std::sqrt((1.0 - abar_prev) / (1.0 - abar_t)) *
                       std::sqrt(1.0 - abar_t / abar_prev);
  // eps implied by inverting the forward process at t.
  const double eps_from_xt = 1.0 / std::sqrt(1.0 - abar_t);
  const double eps_from_x0 = -std::sqrt(abar_t) * eps_from_xt;
  const double dir = std::sqrt(std::max(0.0, 1.0 - abar_prev - sigma * sigma));
  MultiViewImages out = x_t;
  for (size_t v = 0; v < out.size(); ++v)
    for (size_t i = 0; i < out[v].data.size(); ++i) {
      const double eps = eps_from_xt * x_t[v].data[i] + eps_from_x0 * x0_est[v].data[i];
      double val = std::sqrt(abar_prev) * x0_est[v].data[i] + dir * eps;
      if (sigma > 0.0) {
        if (noise == nullptr) throw std::invalid_argument("ddim eta > 0 requires noise");
        val += sigma * (*noise)[v].data[i];
      }
      out[v].data[i] = val;
    }
  return out;
}

std::vector<int> timestep_subsequence(int T, int steps) {
  if (steps < 1 || steps > T) throw std::invalid_argument("require 1 <= steps <= T");
  std::vector<int> seq(steps);
  for (int i = 0; i < steps; ++i)
    seq[i] = T - static_cast<int>((static_cast<int64_t>(i) * T) / steps);
  return seq;
}

}  // namespace gen3d

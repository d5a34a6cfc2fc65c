#pragma once

#include <vector>

#include "gen3d/image.hpp"

namespace gen3d {

// Tables beta_t, alpha_t = 1 - beta_t and the running product alpha_bar_t for
// t = 1..T, with the convention alpha_bar_0 = 1. Stored in 64-bit precision
// regardless of image precision.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[t-1] = beta_t
  std::vector<double> alpha;      // alpha[t-1] = alpha_t
  std::vector<double> alpha_bar;  // alpha_bar[t-1] = prod_{s<=t} alpha_s

  double beta_at(int t) const { return beta[t - 1]; }
  double alpha_at(int t) const { return alpha[t - 1]; }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
};

// Linear beta ramp; the running product runs in extended precision so the
// deep-schedule tail does not accumulate rounding.
NoiseSchedule linear_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
MultiViewImages forward_diffuse(const MultiViewImages& x0, int t,
                                const MultiViewImages& eps, const NoiseSchedule& s);

// One-step clean estimate: (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
MultiViewImages predict_x0(const MultiViewImages& x_t, const MultiViewImages& eps_hat,
                           int t, const NoiseSchedule& s);

struct Posterior {
  MultiViewImages mean;
  double var = 0.0;
};

// mu = [sqrt(a_t)(1-abar_{t-1})/(1-abar_t)] x_t
//    + [sqrt(abar_{t-1}) beta_t/(1-abar_t)] x0_est;
// var = (1-abar_{t-1})/(1-abar_t) * beta_t. At t=1 this collapses to x0_est, 0.
Posterior posterior_mean(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                         int t, const NoiseSchedule& s);

// x_{t-1} = mu + sqrt(var) * noise; at t=1 the noise is ignored (var = 0).
MultiViewImages ddpm_step(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                          int t, const NoiseSchedule& s, const MultiViewImages& noise);

// Accelerated step to an arbitrary earlier t_prev (t_prev = 0 lands on x0_est
// exactly). Deterministic when eta = 0; noise may be null in that case.
MultiViewImages ddim_step(const MultiViewImages& x_t, const MultiViewImages& x0_est,
                          int t, int t_prev, const NoiseSchedule& s, double eta,
                          const MultiViewImages* noise = nullptr);

// Strictly decreasing, evenly spaced inference steps starting at T; the final
// entry's implied t_prev is 0.
std::vector<int> timestep_subsequence(int T, int steps);

}  // namespace gen3d

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"

namespace gen3d {

// Channel-major feature tensor: index = (c * height + y) * width + x.
struct Tensor {
  int channels = 0, height = 0, width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

Tensor tensor_from_image(const Image& img);
Image image_from_tensor(const Tensor& t);

// Same-size convolution (zero padding), kernel size 1 or 3.
struct ConvLayer {
  int in_channels = 0, out_channels = 0, kernel = 3;
  std::vector<double> weight;  // [out][in][k][k]
  std::vector<double> bias;    // [out]
  std::vector<double> grad_weight, grad_bias;

  ConvLayer() = default;
  ConvLayer(int in_ch, int out_ch, int k);

  Tensor forward(const Tensor& x) const;
  // Accumulates into grad_weight/grad_bias and returns the input gradient.
  Tensor backward(const Tensor& x, const Tensor& grad_out);

  size_t weight_count() const { return weight.size(); }
};

// Three-layer per-view convolutional head: 3x3 -> ReLU -> 3x3 -> ReLU -> 1x1.
// Small on purpose: enough capacity for the synthetic scenes while keeping a
// full training run inside the test budget.
struct ToyNet {
  ConvLayer conv1, conv2, head;

  ToyNet() = default;
  ToyNet(int in_channels, int out_channels, uint64_t seed);

  Tensor forward(const Tensor& x) const;

  struct Cache {
    Tensor input, a1, a2;  // post-ReLU activations
  };
  Tensor forward_cached(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& grad_out);

  void zero_grads();
  void collect(std::vector<double*>& params, std::vector<double*>& grads);
  size_t parameter_count() const;
};

// Maps each noisy target view (plus the same-size prior view and the resized
// context) to a 14-channel splat feature map. Input: 9 channels. The net runs
// on a feature grid at 1/feature_scale of the image resolution, so a view of
// H×W pixels yields (H/feature_scale)·(W/feature_scale) splats.
struct ToyReconstructorNet {
  ToyNet net;
  int feature_scale = 1;
  explicit ToyReconstructorNet(uint64_t seed);

  RawFeatureMap forward(const MultiViewImages& x_t, const MultiViewImages& prior,
                        const Image& context) const;
  RawFeatureMap forward_cached(const MultiViewImages& x_t,
                               const MultiViewImages& prior, const Image& context,
                               std::vector<ToyNet::Cache>& caches) const;
  // Returns per-view input grads (9 channels each) for the joint-training path.
  std::vector<Tensor> backward(std::vector<ToyNet::Cache>& caches,
                               const RawFeatureMap& grad_out);
};

// Per-view noise prediction: noisy view + resized context + constant t/T map.
// Input: 7 channels, output: 3.
struct ToyDenoiserNet {
  ToyNet net;
  int total_timesteps = 1000;
  explicit ToyDenoiserNet(uint64_t seed, int total_timesteps);

  MultiViewImages forward(const MultiViewImages& x_t, int t,
                          const Image& context) const;
  MultiViewImages forward_cached(const MultiViewImages& x_t, int t,
                                 const Image& context,
                                 std::vector<ToyNet::Cache>& caches) const;
  void backward(std::vector<ToyNet::Cache>& caches,
                const MultiViewImages& grad_out);
};

// Decoupled weight decay Adam with global-norm gradient clipping and cosine
// annealing of the learning rate to zero.
struct AdamW {
  double lr = 5e-4;
  double beta1 = 0.9, beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double clip_norm = 1.0;
  int total_steps = 0;  // 0 disables the cosine schedule
  int step_count = 0;
  std::vector<double> m, v;

  double current_lr() const;
  void step(const std::vector<double*>& params, const std::vector<double*>& grads);
};

// Rendering loss: w_mse * MSE + w_percep * Sobel-edge L1 (full + half
// resolution) + w_reg * (anisotropy hinge + opacity entropy proxy).
struct RenderLossWeights {
  double w_mse = 1.0;
  double w_percep = 1.0;
  double w_reg = 100.0;
};

struct RenderLossResult {
  double total = 0.0;
  double mse = 0.0;
  double percep = 0.0;
  double reg = 0.0;
  MultiViewImages image_grads;  // d total / d rendered pixel
};

RenderLossResult render_loss(const MultiViewImages& rendered,
                             const MultiViewImages& reference,
                             const GaussianCloud& cloud,
                             const RenderLossWeights& weights,
                             CloudGrads* cloud_grads);

// Flat binary tensor archive next to a JSON manifest listing name, shape,
// dtype and byte offset for every tensor.
struct NamedTensor {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<double> values;
};

void save_tensor_archive(const std::filesystem::path& base_path,
                         const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensor_archive(const std::filesystem::path& base_path);

void save_checkpoint(const std::filesystem::path& base_path,
                     const ToyReconstructorNet& rec, const ToyDenoiserNet& den,
                     const AdamW& opt);
void load_checkpoint(const std::filesystem::path& base_path,
                     ToyReconstructorNet& rec, ToyDenoiserNet& den, AdamW* opt);

}  // namespace gen3d

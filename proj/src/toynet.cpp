#include "gen3d/toynet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "gen3d/rng.hpp"

namespace gen3d {

using nlohmann::json;

Tensor tensor_from_image(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

Image image_from_tensor(const Tensor& t) {
  Image img(t.height, t.width, t.channels);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      for (int c = 0; c < t.channels; ++c) img.at(y, x, c) = t.at(c, y, x);
  return img;
}

namespace {

Image resize_bilinear(const Image& img, int height, int width) {
  if (img.height == height && img.width == width) return img;
  Image out(height, width, img.channels);
  const double sy = double(img.height) / height;
  const double sx = double(img.width) / width;
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = std::clamp(int(std::floor(fy)), 0, img.height - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = std::clamp(int(std::floor(fx)), 0, img.width - 1);
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < img.channels; ++c) {
        double top = (1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        double bot = (1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

}  // namespace

ConvLayer::ConvLayer(int in_ch, int out_ch, int k)
    : in_channels(in_ch), out_channels(out_ch), kernel(k),
      weight(size_t(out_ch) * in_ch * k * k, 0.0), bias(out_ch, 0.0),
      grad_weight(weight.size(), 0.0), grad_bias(bias.size(), 0.0) {
  if (k != 1 && k != 3) throw std::invalid_argument("kernel must be 1 or 3");
}

Tensor ConvLayer::forward(const Tensor& x) const {
  if (x.channels != in_channels) throw std::invalid_argument("channel mismatch");
  Tensor y(out_channels, x.height, x.width);
  const int r = kernel / 2;
  for (int oc = 0; oc < out_channels; ++oc) {
    for (int py = 0; py < x.height; ++py) {
      for (int px = 0; px < x.width; ++px) {
        double acc = bias[oc];
        for (int ic = 0; ic < in_channels; ++ic) {
          for (int ky = -r; ky <= r; ++ky) {
            int sy = py + ky;
            if (sy < 0 || sy >= x.height) continue;
            for (int kx = -r; kx <= r; ++kx) {
              int sx = px + kx;
              if (sx < 0 || sx >= x.width) continue;
              size_t wi = ((size_t(oc) * in_channels + ic) * kernel + (ky + r)) *
                              kernel + (kx + r);
              acc += weight[wi] * x.at(ic, sy, sx);
            }
          }
        }
        y.at(oc, py, px) = acc;
      }
    }
  }
  return y;
}

Tensor ConvLayer::backward(const Tensor& x, const Tensor& grad_out) {
  Tensor gx(in_channels, x.height, x.width);
  const int r = kernel / 2;
  for (int oc = 0; oc < out_channels; ++oc) {
    for (int py = 0; py < x.height; ++py) {
      for (int px = 0; px < x.width; ++px) {
        const double g = grad_out.at(oc, py, px);
        if (g == 0.0) continue;
        grad_bias[oc] += g;
        for (int ic = 0; ic < in_channels; ++ic) {
          for (int ky = -r; ky <= r; ++ky) {
            int sy = py + ky;
            if (sy < 0 || sy >= x.height) continue;
            for (int kx = -r; kx <= r; ++kx) {
              int sx = px + kx;
              if (sx < 0 || sx >= x.width) continue;
              size_t wi = ((size_t(oc) * in_channels + ic) * kernel + (ky + r)) *
                              kernel + (kx + r);
              grad_weight[wi] += g * x.at(ic, sy, sx);
              gx.at(ic, sy, sx) += g * weight[wi];
            }
          }
        }
      }
    }
  }
  return gx;
}

namespace {

void he_init(ConvLayer& layer, uint64_t seed, const std::string& name) {
  Rng rng = Rng::substream(seed, name);
  const double fan_in = double(layer.in_channels) * layer.kernel * layer.kernel;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (double& w : layer.weight) w = stddev * rng.normal();
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::max(v, 0.0);
  return y;
}

Tensor relu_backward(const Tensor& activated, const Tensor& grad_out) {
  Tensor gx = grad_out;
  for (size_t i = 0; i < gx.data.size(); ++i)
    if (activated.data[i] <= 0.0) gx.data[i] = 0.0;
  return gx;
}

}  // namespace

ToyNet::ToyNet(int in_channels, int out_channels, uint64_t seed)
    : conv1(in_channels, 32, 3), conv2(32, 32, 3), head(32, out_channels, 1) {
  he_init(conv1, seed, "conv1");
  he_init(conv2, seed, "conv2");
  he_init(head, seed, "head");
}

Tensor ToyNet::forward(const Tensor& x) const {
  return head.forward(relu(conv2.forward(relu(conv1.forward(x)))));
}

Tensor ToyNet::forward_cached(const Tensor& x, Cache& cache) const {
  cache.input = x;
  cache.a1 = relu(conv1.forward(x));
  cache.a2 = relu(conv2.forward(cache.a1));
  return head.forward(cache.a2);
}

Tensor ToyNet::backward(const Cache& cache, const Tensor& grad_out) {
  Tensor g2 = relu_backward(cache.a2, head.backward(cache.a2, grad_out));
  Tensor g1 = relu_backward(cache.a1, conv2.backward(cache.a1, g2));
  return conv1.backward(cache.input, g1);
}

void ToyNet::zero_grads() {
  for (ConvLayer* l : {&conv1, &conv2, &head}) {
    std::fill(l->grad_weight.begin(), l->grad_weight.end(), 0.0);
    std::fill(l->grad_bias.begin(), l->grad_bias.end(), 0.0);
  }
}

void ToyNet::collect(std::vector<double*>& params, std::vector<double*>& grads) {
  for (ConvLayer* l : {&conv1, &conv2, &head}) {
    for (size_t i = 0; i < l->weight.size(); ++i) {
      params.push_back(&l->weight[i]);
      grads.push_back(&l->grad_weight[i]);
    }
    for (size_t i = 0; i < l->bias.size(); ++i) {
      params.push_back(&l->bias[i]);
      grads.push_back(&l->grad_bias[i]);
    }
  }
}

size_t ToyNet::parameter_count() const {
  size_t n = 0;
  for (const ConvLayer* l : {&conv1, &conv2, &head})
    n += l->weight.size() + l->bias.size();
  return n;
}

ToyReconstructorNet::ToyReconstructorNet(uint64_t seed)
    : net(9, RawFeatureMap::kChannels, Rng::derive_seed(seed, "reconstructor")) {
  // Start splats faint and base-sized so the untrained model renders close to
  // the background instead of a wall of opaque blobs.
  net.head.bias[10] = std::log(0.1 / 0.9);  // opacity 0.1
}

namespace {

Tensor stack_reconstructor_input(const Image& x_t, const Image& prior,
                                 const Image& context, int grid_h, int grid_w) {
  Image xt = resize_bilinear(x_t, grid_h, grid_w);
  Image pr = resize_bilinear(prior, grid_h, grid_w);
  Image ctx = resize_bilinear(context, grid_h, grid_w);
  Tensor in(9, grid_h, grid_w);
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x)
      for (int c = 0; c < 3; ++c) {
        in.at(c, y, x) = xt.at(y, x, c);
        in.at(3 + c, y, x) = pr.at(y, x, c);
        in.at(6 + c, y, x) = ctx.at(y, x, c);
      }
  return in;
}

// Adjoint of resize_bilinear from (height, width) down to grad's size:
// scatter each grid gradient back through the same sampling weights.
Tensor resize_bilinear_adjoint(const Tensor& grad, int height, int width) {
  Tensor out(grad.channels, height, width);
  const double sy = double(height) / grad.height;
  const double sx = double(width) / grad.width;
  for (int y = 0; y < grad.height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = std::clamp(int(std::floor(fy)), 0, height - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < grad.width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = std::clamp(int(std::floor(fx)), 0, width - 1);
      int x1 = std::min(x0 + 1, width - 1);
      double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < grad.channels; ++c) {
        const double g = grad.at(c, y, x);
        out.at(c, y0, x0) += (1 - wy) * (1 - wx) * g;
        out.at(c, y0, x1) += (1 - wy) * wx * g;
        out.at(c, y1, x0) += wy * (1 - wx) * g;
        out.at(c, y1, x1) += wy * wx * g;
      }
    }
  }
  return out;
}

}  // namespace

RawFeatureMap ToyReconstructorNet::forward(const MultiViewImages& x_t,
                                           const MultiViewImages& prior,
                                           const Image& context) const {
  std::vector<ToyNet::Cache> caches;
  return forward_cached(x_t, prior, context, caches);
}

RawFeatureMap ToyReconstructorNet::forward_cached(
    const MultiViewImages& x_t, const MultiViewImages& prior,
    const Image& context, std::vector<ToyNet::Cache>& caches) const {
  if (x_t.empty() || x_t.size() != prior.size())
    throw std::invalid_argument("view count mismatch");
  if (feature_scale < 1) throw std::invalid_argument("feature_scale must be >= 1");
  const int views = int(x_t.size());
  const int grid_h = std::max(1, x_t[0].height / feature_scale);
  const int grid_w = std::max(1, x_t[0].width / feature_scale);
  RawFeatureMap out(views, grid_h, grid_w);
  caches.resize(views);
  for (int v = 0; v < views; ++v) {
    Tensor in =
        stack_reconstructor_input(x_t[v], prior[v], context, grid_h, grid_w);
    Tensor y = net.forward_cached(in, caches[v]);
    for (int py = 0; py < out.height; ++py)
      for (int px = 0; px < out.width; ++px)
        for (int c = 0; c < RawFeatureMap::kChannels; ++c)
          out.at(v, py, px, c) = y.at(c, py, px);
  }
  return out;
}

std::vector<Tensor> ToyReconstructorNet::backward(
    std::vector<ToyNet::Cache>& caches, const RawFeatureMap& grad_out) {
  std::vector<Tensor> input_grads;
  input_grads.reserve(caches.size());
  for (size_t v = 0; v < caches.size(); ++v) {
    Tensor g(RawFeatureMap::kChannels, grad_out.height, grad_out.width);
    for (int py = 0; py < grad_out.height; ++py)
      for (int px = 0; px < grad_out.width; ++px)
        for (int c = 0; c < RawFeatureMap::kChannels; ++c)
          g.at(c, py, px) = grad_out.at(int(v), py, px, c);
    Tensor gin = net.backward(caches[v], g);
    const int img_h = grad_out.height * feature_scale;
    const int img_w = grad_out.width * feature_scale;
    input_grads.push_back(feature_scale == 1
                              ? std::move(gin)
                              : resize_bilinear_adjoint(gin, img_h, img_w));
  }
  return input_grads;
}

ToyDenoiserNet::ToyDenoiserNet(uint64_t seed, int total_timesteps)
    : net(7, 3, Rng::derive_seed(seed, "denoiser")),
      total_timesteps(total_timesteps) {}

namespace {

Tensor stack_denoiser_input(const Image& x_t, const Image& context,
                            double t_frac) {
  Image ctx = resize_bilinear(context, x_t.height, x_t.width);
  Tensor in(7, x_t.height, x_t.width);
  for (int y = 0; y < x_t.height; ++y)
    for (int x = 0; x < x_t.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        in.at(c, y, x) = x_t.at(y, x, c);
        in.at(3 + c, y, x) = ctx.at(y, x, c);
      }
      in.at(6, y, x) = t_frac;
    }
  return in;
}

}  // namespace

MultiViewImages ToyDenoiserNet::forward(const MultiViewImages& x_t, int t,
                                        const Image& context) const {
  std::vector<ToyNet::Cache> caches;
  return forward_cached(x_t, t, context, caches);
}

MultiViewImages ToyDenoiserNet::forward_cached(
    const MultiViewImages& x_t, int t, const Image& context,
    std::vector<ToyNet::Cache>& caches) const {
  MultiViewImages out;
  out.reserve(x_t.size());
  caches.resize(x_t.size());
  const double t_frac = double(t) / double(total_timesteps);
  for (size_t v = 0; v < x_t.size(); ++v) {
    Tensor in = stack_denoiser_input(x_t[v], context, t_frac);
    out.push_back(image_from_tensor(net.forward_cached(in, caches[v])));
  }
  return out;
}

void ToyDenoiserNet::backward(std::vector<ToyNet::Cache>& caches,
                              const MultiViewImages& grad_out) {
  if (caches.size() != grad_out.size())
    throw std::invalid_argument("cache/grad view mismatch");
  for (size_t v = 0; v < caches.size(); ++v)
    net.backward(caches[v], tensor_from_image(grad_out[v]));
}

double AdamW::current_lr() const {
  if (total_steps <= 0) return lr;
  double frac = std::min(1.0, double(step_count) / double(total_steps));
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void AdamW::step(const std::vector<double*>& params,
                 const std::vector<double*>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("param/grad count mismatch");
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  double sq = 0.0;
  for (double* g : grads) sq += (*g) * (*g);
  const double norm = std::sqrt(sq);
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

  const double step_lr = current_lr();
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, step_count);
  const double bc2 = 1.0 - std::pow(beta2, step_count);
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = *grads[i] * scale;
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    *params[i] -= step_lr * (mhat / (std::sqrt(vhat) + eps) +
                             weight_decay * *params[i]);
  }
}

namespace {

// 3x3 Sobel taps; gy is the transpose of gx.
constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

void sobel_edges(const Image& img, Image& gx, Image& gy) {
  gx = Image(img.height, img.width, img.channels);
  gy = Image(img.height, img.width, img.channels);
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double ax = 0.0, ay = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const double p = img.at(y + dy, x + dx, c);
            ax += kSobelX[dy + 1][dx + 1] * p;
            ay += kSobelY[dy + 1][dx + 1] * p;
          }
        gx.at(y, x, c) = ax;
        gy.at(y, x, c) = ay;
      }
}

// L1 between Sobel edge maps of pred and ref over the interior; scatters the
// pred gradient (scaled by coeff) into grad if non-null.
double sobel_l1(const Image& pred, const Image& ref, double coeff, Image* grad) {
  if (pred.height < 3 || pred.width < 3) return 0.0;
  Image pgx, pgy, rgx, rgy;
  sobel_edges(pred, pgx, pgy);
  sobel_edges(ref, rgx, rgy);
  const double count =
      double(pred.height - 2) * (pred.width - 2) * pred.channels;
  double total = 0.0;
  for (int y = 1; y + 1 < pred.height; ++y)
    for (int x = 1; x + 1 < pred.width; ++x)
      for (int c = 0; c < pred.channels; ++c) {
        const double ex = pgx.at(y, x, c) - rgx.at(y, x, c);
        const double ey = pgy.at(y, x, c) - rgy.at(y, x, c);
        total += std::abs(ex) + std::abs(ey);
        if (grad) {
          const double sx = coeff * ((ex > 0) - (ex < 0)) / count;
          const double sy = coeff * ((ey > 0) - (ey < 0)) / count;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              grad->at(y + dy, x + dx, c) +=
                  sx * kSobelX[dy + 1][dx + 1] + sy * kSobelY[dy + 1][dx + 1];
        }
      }
  return total / count;
}

// Adjoint of the 2x2 box downsample: each coarse gradient spread evenly over
// the fine pixels that fed it.
void upsample_grad(const Image& coarse_grad, Image& fine_grad) {
  for (int Y = 0; Y < coarse_grad.height; ++Y)
    for (int X = 0; X < coarse_grad.width; ++X) {
      int y0 = 2 * Y, x0 = 2 * X;
      int y1 = std::min(y0 + 1, fine_grad.height - 1);
      int x1 = std::min(x0 + 1, fine_grad.width - 1);
      int ny = (y1 > y0) ? 2 : 1, nx = (x1 > x0) ? 2 : 1;
      for (int c = 0; c < fine_grad.channels; ++c) {
        const double g = coarse_grad.at(Y, X, c) / (ny * nx);
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) fine_grad.at(y, x, c) += g;
      }
    }
}

}  // namespace

RenderLossResult render_loss(const MultiViewImages& rendered,
                             const MultiViewImages& reference,
                             const GaussianCloud& cloud,
                             const RenderLossWeights& weights,
                             CloudGrads* cloud_grads) {
  if (rendered.size() != reference.size() || rendered.empty())
    throw std::invalid_argument("view count mismatch");
  RenderLossResult res;
  res.image_grads.clear();
  const int views = int(rendered.size());

  size_t pixel_total = 0;
  for (const Image& img : rendered) pixel_total += img.data.size();

  for (int v = 0; v < views; ++v) {
    const Image& p = rendered[v];
    const Image& r = reference[v];
    if (p.height != r.height || p.width != r.width || p.channels != r.channels)
      throw std::invalid_argument("render/reference shape mismatch");
    Image grad(p.height, p.width, p.channels);

    for (size_t i = 0; i < p.data.size(); ++i) {
      const double e = p.data[i] - r.data[i];
      res.mse += e * e / double(pixel_total);
      grad.data[i] += weights.w_mse * 2.0 * e / double(pixel_total);
    }

    // Two-level edge loss; each view weighted equally, scales averaged.
    const double vc = 0.5 / views;
    res.percep += sobel_l1(p, r, weights.w_percep * vc, &grad) / (2.0 * views);
    Image p2 = downsample2x(p);
    Image r2 = downsample2x(r);
    Image g2(p2.height, p2.width, p2.channels);
    res.percep += sobel_l1(p2, r2, weights.w_percep * vc, &g2) / (2.0 * views);
    upsample_grad(g2, grad);

    res.image_grads.push_back(std::move(grad));
  }

  // Shape regularizer: penalize extreme anisotropy and half-transparent
  // splats; these show up as view-dependent streaks.
  const size_t n = cloud.size();
  if (n > 0) {
    if (cloud_grads && cloud_grads->scale.size() != n) {
      cloud_grads->resize(n);
      cloud_grads->setZero();
    }
    for (size_t i = 0; i < n; ++i) {
      const Gaussian& g = cloud.gaussians[i];
      int a_min = 0, a_max = 0;
      for (int k = 1; k < 3; ++k) {
        if (g.scale[k] < g.scale[a_min]) a_min = k;
        if (g.scale[k] > g.scale[a_max]) a_max = k;
      }
      const double smin = g.scale[a_min], smax = g.scale[a_max];
      const double ratio = smin / smax;
      if (ratio < 0.1) {
        res.reg += (0.1 - ratio) / double(n);
        if (cloud_grads && a_min != a_max) {
          cloud_grads->scale[i][a_min] += weights.w_reg * (-1.0 / smax) / double(n);
          cloud_grads->scale[i][a_max] += weights.w_reg * (smin / (smax * smax)) / double(n);
        }
      }
      res.reg += g.opacity * (1.0 - g.opacity) / double(n);
      if (cloud_grads)
        cloud_grads->opacity[i] += weights.w_reg * (1.0 - 2.0 * g.opacity) / double(n);
    }
  }

  res.total = weights.w_mse * res.mse + weights.w_percep * res.percep +
              weights.w_reg * res.reg;
  return res;
}

void save_tensor_archive(const std::filesystem::path& base_path,
                         const std::vector<NamedTensor>& tensors) {
  std::filesystem::path bin = base_path;
  bin += ".bin";
  std::filesystem::path man = base_path;
  man += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + bin.string());
  json manifest;
  manifest["tensors"] = json::array();
  int64_t offset = 0;
  for (const NamedTensor& t : tensors) {
    int64_t count = 1;
    for (int64_t d : t.shape) count *= d;
    if (count != int64_t(t.values.size()))
      throw std::runtime_error("tensor shape/value mismatch: " + t.name);
    out.write(reinterpret_cast<const char*>(t.values.data()),
              std::streamsize(t.values.size() * sizeof(double)));
    manifest["tensors"].push_back({{"name", t.name},
                                   {"shape", t.shape},
                                   {"dtype", "float64"},
                                   {"offset", offset}});
    offset += int64_t(t.values.size() * sizeof(double));
  }
  std::ofstream mf(man);
  mf << manifest.dump(2) << "\n";
}

std::vector<NamedTensor> load_tensor_archive(
    const std::filesystem::path& base_path) {
  std::filesystem::path bin = base_path;
  bin += ".bin";
  std::filesystem::path man = base_path;
  man += ".json";
  std::ifstream mf(man);
  if (!mf) throw std::runtime_error("cannot open " + man.string());
  json manifest = json::parse(mf);
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin.string());
  std::vector<NamedTensor> tensors;
  for (const auto& e : manifest.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<int64_t>>();
    if (e.at("dtype").get<std::string>() != "float64")
      throw std::runtime_error("unsupported dtype in " + man.string());
    int64_t count = 1;
    for (int64_t d : t.shape) count *= d;
    t.values.resize(size_t(count));
    in.seekg(e.at("offset").get<int64_t>());
    in.read(reinterpret_cast<char*>(t.values.data()),
            std::streamsize(t.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated tensor archive " + bin.string());
    tensors.push_back(std::move(t));
  }
  return tensors;
}

namespace {

void append_net_tensors(const std::string& prefix, const ToyNet& net,
                        std::vector<NamedTensor>& out) {
  const std::pair<std::string, const ConvLayer*> layers[] = {
      {"conv1", &net.conv1}, {"conv2", &net.conv2}, {"head", &net.head}};
  for (const auto& [name, l] : layers) {
    out.push_back({prefix + "." + name + ".weight",
                   {l->out_channels, l->in_channels, l->kernel, l->kernel},
                   l->weight});
    out.push_back({prefix + "." + name + ".bias", {l->out_channels}, l->bias});
  }
}

void read_net_tensors(const std::string& prefix,
                      const std::vector<NamedTensor>& tensors, ToyNet& net) {
  auto find = [&](const std::string& name) -> const NamedTensor& {
    for (const NamedTensor& t : tensors)
      if (t.name == name) return t;
    throw std::runtime_error("checkpoint missing tensor " + name);
  };
  const std::pair<std::string, ConvLayer*> layers[] = {
      {"conv1", &net.conv1}, {"conv2", &net.conv2}, {"head", &net.head}};
  for (const auto& [name, l] : layers) {
    const NamedTensor& w = find(prefix + "." + name + ".weight");
    const NamedTensor& b = find(prefix + "." + name + ".bias");
    if (w.values.size() != l->weight.size() || b.values.size() != l->bias.size())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    l->weight = w.values;
    l->bias = b.values;
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& base_path,
                     const ToyReconstructorNet& rec, const ToyDenoiserNet& den,
                     const AdamW& opt) {
  std::vector<NamedTensor> tensors;
  append_net_tensors("reconstructor", rec.net, tensors);
  append_net_tensors("denoiser", den.net, tensors);
  tensors.push_back({"optimizer.m", {int64_t(opt.m.size())}, opt.m});
  tensors.push_back({"optimizer.v", {int64_t(opt.v.size())}, opt.v});
  tensors.push_back({"optimizer.state", {2},
                     {double(opt.step_count), double(opt.total_steps)}});
  save_tensor_archive(base_path, tensors);
}

void load_checkpoint(const std::filesystem::path& base_path,
                     ToyReconstructorNet& rec, ToyDenoiserNet& den, AdamW* opt) {
  std::vector<NamedTensor> tensors = load_tensor_archive(base_path);
  read_net_tensors("reconstructor", tensors, rec.net);
  read_net_tensors("denoiser", tensors, den.net);
  if (!opt) return;
  for (const NamedTensor& t : tensors) {
    if (t.name == "optimizer.m") opt->m = t.values;
    if (t.name == "optimizer.v") opt->v = t.values;
    if (t.name == "optimizer.state" && t.values.size() == 2) {
      opt->step_count = int(t.values[0]);
      opt->total_steps = int(t.values[1]);
    }
  }
}

}  // namespace gen3d

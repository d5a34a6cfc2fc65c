#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace gen3d {

// One anisotropic 3D Gaussian splat. Scale components are per-axis standard
// deviations in scene units; opacity and color live in [0, 1].
struct Gaussian {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  double opacity = 1.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

// Ordered splat container; element order is a stable identity used for
// depth tie-breaking in the rasterizer.
struct GaussianCloud {
  std::vector<Gaussian> gaussians;

  size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

// Raw, unactivated 14-channel network output, view-major then row-major.
// Channels: [0..3) center, [3..6) scale, [6..10) rotation (w,x,y,z),
// [10] opacity, [11..14) color.
struct RawFeatureMap {
  int views = 0, height = 0, width = 0;
  static constexpr int kChannels = 14;
  std::vector<double> data;

  RawFeatureMap() = default;
  RawFeatureMap(int v, int h, int w)
      : views(v), height(h), width(w),
        data(static_cast<size_t>(v) * h * w * kChannels, 0.0) {}

  double& at(int v, int y, int x, int c) {
    return data[((static_cast<size_t>(v) * height + y) * width + x) * kChannels + c];
  }
  double at(int v, int y, int x, int c) const {
    return data[((static_cast<size_t>(v) * height + y) * width + x) * kChannels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(views) * height * width; }
};

// Untrained outputs tile the prediction box: one base-scale splat per pixel.
inline double base_scale_for(double box_half_extent, int height) {
  return 2.0 * box_half_extent / height;
}

// Per-pixel activation map: center = box_half_extent * tanh(raw);
// scale = exp(clamp(raw, -10, 1)) * base_scale; rotation = normalized raw
// quaternion (identity fallback below norm 1e-8); opacity/color = logistic.
// Throws on non-finite input.
GaussianCloud decode_feature_map(const RawFeatureMap& raw, double box_half_extent);

// Gradients of a scalar loss w.r.t. cloud parameters, one entry per splat.
struct CloudGrads {
  std::vector<Eigen::Vector3d> center, scale, color;
  std::vector<Eigen::Vector4d> rotation;  // (w, x, y, z)
  std::vector<double> opacity;

  void resize(size_t n);
  void setZero();
  void accumulate(const CloudGrads& other);
};

// Reverse-mode pass through decode_feature_map's activations.
RawFeatureMap decode_feature_map_backward(const RawFeatureMap& raw,
                                          double box_half_extent,
                                          const CloudGrads& grads);

// Sigma = R(q) diag(s^2) R(q)^T; q is normalized before use.
Eigen::Matrix3d covariance3d(const Gaussian& g);

// Binary little-endian PLY with float32 vertex properties
// x y z opacity_logit scale_log_{0,1,2} rot_{0..3} red green blue.
void ply_write(const GaussianCloud& cloud, const std::filesystem::path& path);
GaussianCloud ply_read(const std::filesystem::path& path);

}  // namespace gen3d

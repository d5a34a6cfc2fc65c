#include "gen3d/gsplat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gen3d {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(q / (1.0 - q));
}

}  // namespace

GaussianCloud decode_feature_map(const RawFeatureMap& raw, double box_half_extent) {
  if (!(box_half_extent > 0.0))
    throw std::invalid_argument("box_half_extent must be positive");
  for (double v : raw.data)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite raw feature map");
  const double base_scale = base_scale_for(box_half_extent, raw.height);
  GaussianCloud cloud;
  cloud.gaussians.resize(raw.pixel_count());
  for (int v = 0; v < raw.views; ++v)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x) {
        Gaussian& g =
            cloud.gaussians[(static_cast<size_t>(v) * raw.height + y) * raw.width + x];
        for (int k = 0; k < 3; ++k)
          g.center[k] = box_half_extent * std::tanh(raw.at(v, y, x, k));
        for (int k = 0; k < 3; ++k)
          g.scale[k] = std::exp(std::clamp(raw.at(v, y, x, 3 + k), -10.0, 1.0)) * base_scale;
        const Eigen::Vector4d q(raw.at(v, y, x, 6), raw.at(v, y, x, 7),
                                raw.at(v, y, x, 8), raw.at(v, y, x, 9));
        const double n = q.norm();
        if (n < 1e-8) {
          g.rotation = Eigen::Quaterniond::Identity();
        } else {
          g.rotation = Eigen::Quaterniond(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        }
        g.opacity = logistic(raw.at(v, y, x, 10));
        for (int k = 0; k < 3; ++k) g.color[k] = logistic(raw.at(v, y, x, 11 + k));
      }
  return cloud;
}

void CloudGrads::resize(size_t n) {
  center.assign(n, Eigen::Vector3d::Zero());
  scale.assign(n, Eigen::Vector3d::Zero());
  color.assign(n, Eigen::Vector3d::Zero());
  rotation.assign(n, Eigen::Vector4d::Zero());
  opacity.assign(n, 0.0);
}

void CloudGrads::setZero() {
  std::fill(center.begin(), center.end(), Eigen::Vector3d::Zero());
  std::fill(scale.begin(), scale.end(), Eigen::Vector3d::Zero());
  std::fill(color.begin(), color.end(), Eigen::Vector3d::Zero());
  std::fill(rotation.begin(), rotation.end(), Eigen::Vector4d::Zero());
  std::fill(opacity.begin(), opacity.end(), 0.0);
}

void CloudGrads::accumulate(const CloudGrads& other) {
  for (size_t i = 0; i < center.size(); ++i) {
    center[i] += other.center[i];
    scale[i] += other.scale[i];
    color[i] += other.color[i];
    rotation[i] += other.rotation[i];
    opacity[i] += other.opacity[i];
  }
}

RawFeatureMap decode_feature_map_backward(const RawFeatureMap& raw,
                                          double box_half_extent,
                                          const CloudGrads& grads) {
  const double base_scale = base_scale_for(box_half_extent, raw.height);
  RawFeatureMap out(raw.views, raw.height, raw.width);
  for (int v = 0; v < raw.views; ++v)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x) {
        const size_t i = (static_cast<size_t>(v) * raw.height + y) * raw.width + x;
        for (int k = 0; k < 3; ++k) {
          const double th = std::tanh(raw.at(v, y, x, k));
          out.at(v, y, x, k) = grads.center[i][k] * box_half_extent * (1.0 - th * th);
        }
        for (int k = 0; k < 3; ++k) {
          const double r = raw.at(v, y, x, 3 + k);
          // clamp gates the gradient outside (-10, 1)
          const double s = std::exp(std::clamp(r, -10.0, 1.0)) * base_scale;
          out.at(v, y, x, 3 + k) =
              (r > -10.0 && r < 1.0) ? grads.scale[i][k] * s : 0.0;
        }
        const Eigen::Vector4d q(raw.at(v, y, x, 6), raw.at(v, y, x, 7),
                                raw.at(v, y, x, 8), raw.at(v, y, x, 9));
        const double n = q.norm();
        if (n >= 1e-8) {
          const Eigen::Vector4d qn = q / n;
          const Eigen::Vector4d g = grads.rotation[i];
          const Eigen::Vector4d dq = (g - qn * qn.dot(g)) / n;
          for (int k = 0; k < 4; ++k) out.at(v, y, x, 6 + k) = dq[k];
        }
        const double a = logistic(raw.at(v, y, x, 10));
        out.at(v, y, x, 10) = grads.opacity[i] * a * (1.0 - a);
        for (int k = 0; k < 3; ++k) {
          const double c = logistic(raw.at(v, y, x, 11 + k));
          out.at(v, y, x, 11 + k) = grads.color[i][k] * c * (1.0 - c);
        }
      }
  return out;
}

Eigen::Matrix3d covariance3d(const Gaussian& g) {
  const Eigen::Matrix3d r = g.rotation.normalized().toRotationMatrix();
  return r * g.scale.array().square().matrix().asDiagonal() * r.transpose();
}

namespace {

const char* kPlyProps[] = {"x",         "y",           "z",           "opacity_logit",
                           "scale_log_0", "scale_log_1", "scale_log_2", "rot_0",
                           "rot_1",     "rot_2",       "rot_3",       "red",
                           "green",     "blue"};
constexpr int kPlyPropCount = 14;

}  // namespace

void ply_write(const GaussianCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\n";
  for (const char* p : kPlyProps) out << "property float " << p << "\n";
  out << "end_header\n";
  std::vector<float> rec(kPlyPropCount);
  for (const Gaussian& g : cloud.gaussians) {
    rec[0] = static_cast<float>(g.center.x());
    rec[1] = static_cast<float>(g.center.y());
    rec[2] = static_cast<float>(g.center.z());
    rec[3] = static_cast<float>(logit(g.opacity));
    for (int k = 0; k < 3; ++k) rec[4 + k] = static_cast<float>(std::log(g.scale[k]));
    rec[7] = static_cast<float>(g.rotation.w());
    rec[8] = static_cast<float>(g.rotation.x());
    rec[9] = static_cast<float>(g.rotation.y());
    rec[10] = static_cast<float>(g.rotation.z());
    for (int k = 0; k < 3; ++k) rec[11 + k] = static_cast<float>(g.color[k]);
    out.write(reinterpret_cast<const char*>(rec.data()), kPlyPropCount * sizeof(float));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GaussianCloud ply_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw std::runtime_error("not a PLY file: " + path.string());
  if (!std::getline(in, line) || line != "format binary_little_endian 1.0")
    throw std::runtime_error("unsupported PLY format line: " + line);
  size_t count = 0;
  bool have_vertex = false;
  int prop_index = 0;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment") continue;
    if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex")
        throw std::runtime_error("unexpected PLY element: " + name);
      have_vertex = true;
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (prop_index >= kPlyPropCount)
        throw std::runtime_error("unknown extra PLY property: " + name);
      if (type != "float" || name != kPlyProps[prop_index])
        throw std::runtime_error("unexpected PLY property '" + name + "', expected '" +
                                 kPlyProps[prop_index] + "'");
      ++prop_index;
    } else {
      throw std::runtime_error("malformed PLY header line: " + line);
    }
  }
  if (!have_vertex) throw std::runtime_error("PLY header missing vertex element");
  if (prop_index != kPlyPropCount)
    throw std::runtime_error("PLY header missing property '" +
                             std::string(kPlyProps[prop_index]) + "'");
  GaussianCloud cloud;
  cloud.gaussians.resize(count);
  std::vector<float> rec(kPlyPropCount);
  for (size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(rec.data()), kPlyPropCount * sizeof(float));
    if (!in) throw std::runtime_error("truncated PLY payload at vertex " +
                                      std::to_string(i));
    Gaussian& g = cloud.gaussians[i];
    g.center = Eigen::Vector3d(rec[0], rec[1], rec[2]);
    g.opacity = logistic(rec[3]);
    for (int k = 0; k < 3; ++k) g.scale[k] = std::exp(static_cast<double>(rec[4 + k]));
    g.rotation = Eigen::Quaterniond(rec[7], rec[8], rec[9], rec[10]);
    g.color = Eigen::Vector3d(rec[11], rec[12], rec[13]);
  }
  return cloud;
}

}  // namespace gen3d

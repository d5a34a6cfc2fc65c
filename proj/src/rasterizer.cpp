#include "gen3d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gen3d/parallel.hpp"

namespace gen3d {

namespace {

constexpr double kNearPlane = 0.01;
constexpr double kDilation = 0.3;       // px^2 added to the 2D covariance
constexpr double kAlphaCap = 0.99;
constexpr double kAlphaCutoff = 1.0 / 255.0;
constexpr double kTransmittanceFloor = 1e-4;
constexpr int kTile = 16;

struct ProjSplat {
  int index = 0;  // position in the cloud, carried for tie-breaking
  double z = 0.0;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  double opacity = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

Eigen::Vector4d normalized_quat(const Eigen::Quaterniond& q) {
  Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
  return v / v.norm();
}

Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Projection Jacobian at the camera-frame center.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& intr,
                                                const Eigen::Vector3d& pc) {
  Eigen::Matrix<double, 2, 3> j;
  const double inv_z = 1.0 / pc.z();
  j << intr.fx * inv_z, 0.0, -intr.fx * pc.x() * inv_z * inv_z,
      0.0, intr.fy * inv_z, -intr.fy * pc.y() * inv_z * inv_z;
  return j;
}

bool project_splat(const Gaussian& g, const Camera& cam, int index, ProjSplat* out) {
  const Eigen::Vector3d pc = cam.to_camera(g.center);
  if (pc.z() < kNearPlane) return false;
  const CameraIntrinsics& intr = cam.intrinsics;

  out->index = index;
  out->z = pc.z();
  out->uv = Eigen::Vector2d(intr.fx * pc.x() / pc.z() + intr.cx,
                            intr.fy * pc.y() / pc.z() + intr.cy);

  const Eigen::Matrix3d rq = quat_to_matrix(normalized_quat(g.rotation));
  const Eigen::Matrix3d sigma =
      rq * g.scale.array().square().matrix().asDiagonal() * rq.transpose();
  const Eigen::Matrix3d w = cam.rotation.toRotationMatrix();
  const Eigen::Matrix3d v_cam = w * sigma * w.transpose();
  const Eigen::Matrix<double, 2, 3> j = projection_jacobian(intr, pc);
  out->cov2 = j * v_cam * j.transpose() + kDilation * Eigen::Matrix2d::Identity();

  const double mid = 0.5 * (out->cov2(0, 0) + out->cov2(1, 1));
  const double det = out->cov2.determinant();
  const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = 3.0 * std::sqrt(lam_max);

  // Pixel samples sit at integer + 0.5.
  out->x0 = std::max(0, static_cast<int>(std::ceil(out->uv.x() - radius - 0.5)));
  out->x1 = std::min(intr.width - 1,
                     static_cast<int>(std::floor(out->uv.x() + radius - 0.5)));
  out->y0 = std::max(0, static_cast<int>(std::ceil(out->uv.y() - radius - 0.5)));
  out->y1 = std::min(intr.height - 1,
                     static_cast<int>(std::floor(out->uv.y() + radius - 0.5)));
  if (out->x0 > out->x1 || out->y0 > out->y1) return false;

  out->conic = out->cov2.inverse();
  out->opacity = g.opacity;
  out->color = g.color;
  return true;
}

struct Frame {
  std::vector<ProjSplat> splats;            // front-to-back order
  std::vector<std::vector<int>> tile_lists; // indices into splats, in order
  int tiles_x = 0, tiles_y = 0;
};

Frame prepare_frame(const GaussianCloud& cloud, const Camera& cam) {
  Frame f;
  f.splats.reserve(cloud.size());
  ProjSplat ps;
  for (size_t i = 0; i < cloud.size(); ++i)
    if (project_splat(cloud.gaussians[i], cam, static_cast<int>(i), &ps))
      f.splats.push_back(ps);
  std::sort(f.splats.begin(), f.splats.end(), [](const ProjSplat& a, const ProjSplat& b) {
    return a.z != b.z ? a.z < b.z : a.index < b.index;
  });
  f.tiles_x = (cam.intrinsics.width + kTile - 1) / kTile;
  f.tiles_y = (cam.intrinsics.height + kTile - 1) / kTile;
  f.tile_lists.resize(static_cast<size_t>(f.tiles_x) * f.tiles_y);
  for (size_t s = 0; s < f.splats.size(); ++s) {
    const ProjSplat& p = f.splats[s];
    for (int ty = p.y0 / kTile; ty <= p.y1 / kTile; ++ty)
      for (int tx = p.x0 / kTile; tx <= p.x1 / kTile; ++tx)
        f.tile_lists[static_cast<size_t>(ty) * f.tiles_x + tx].push_back(
            static_cast<int>(s));
  }
  return f;
}

// Effective alpha at a pixel; returns 0 when below the contribution cutoff.
// *capped reports whether the 0.99 cap clipped the value.
double effective_alpha(const ProjSplat& p, const Eigen::Vector2d& d, double* gauss,
                       bool* capped) {
  const double e = 0.5 * d.dot(p.conic * d);
  if (e > 12.0) return 0.0;  // exp(-12) is below the cutoff for any opacity
  const double g = std::exp(-e);
  double a = p.opacity * g;
  *capped = a > kAlphaCap;
  if (*capped) a = kAlphaCap;
  if (a < kAlphaCutoff) return 0.0;
  *gauss = g;
  return a;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& cam,
                    const Eigen::Vector3d& background) {
  const int h = cam.intrinsics.height, w = cam.intrinsics.width;
  RenderOutput out;
  out.color = Image(h, w, 3);
  out.alpha = Image(h, w, 1);
  out.depth = Image(h, w, 1);

  const Frame frame = prepare_frame(cloud, cam);

  parallel_for_chunks(frame.tiles_x * frame.tiles_y, [&](int tile) {
    const int tx = tile % frame.tiles_x, ty = tile / frame.tiles_x;
    const auto& list = frame.tile_lists[tile];
    for (int y = ty * kTile; y < std::min(h, (ty + 1) * kTile); ++y)
      for (int x = tx * kTile; x < std::min(w, (tx + 1) * kTile); ++x) {
        const Eigen::Vector2d px(x + 0.5, y + 0.5);
        double t = 1.0;
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        double depth_sum = 0.0;
        for (int s : list) {
          const ProjSplat& p = frame.splats[s];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          double g = 0.0;
          bool capped = false;
          const double a = effective_alpha(p, px - p.uv, &g, &capped);
          if (a == 0.0) continue;
          c += p.color * (a * t);
          depth_sum += p.z * a * t;
          t *= 1.0 - a;
          if (t < kTransmittanceFloor) break;
        }
        c += background * t;
        const double alpha = 1.0 - t;
        for (int k = 0; k < 3; ++k) out.color.at(y, x, k) = c[k];
        out.alpha.at(y, x, 0) = alpha;
        out.depth.at(y, x, 0) = depth_sum / std::max(alpha, 1e-8);
      }
  });
  return out;
}

Image render_depth_only(const GaussianCloud& cloud, const Camera& cam) {
  return render(cloud, cam, Eigen::Vector3d::Zero()).depth;
}

namespace {

struct PixelGrad {
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
  double opacity = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  void operator+=(const PixelGrad& o) {
    uv += o.uv;
    conic += o.conic;
    opacity += o.opacity;
    color += o.color;
  }
};

struct Contributor {
  int slot = 0;  // index into the tile list
  double a = 0.0, g = 0.0, t_before = 1.0;
  bool capped = false;
};

// Per-splat geometric chain: pixel-space gradients back to cloud parameters.
void splat_chain(const Gaussian& g, const Camera& cam, const ProjSplat& p,
                 const PixelGrad& acc, size_t cloud_index, CloudGrads* grads) {
  const CameraIntrinsics& intr = cam.intrinsics;
  const Eigen::Matrix3d w = cam.rotation.toRotationMatrix();
  const Eigen::Vector3d pc = cam.to_camera(g.center);
  const double x = pc.x(), y = pc.y(), z = pc.z();
  const double inv_z = 1.0 / z, inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;

  const Eigen::Vector4d qn = normalized_quat(g.rotation);
  const Eigen::Matrix3d rq = quat_to_matrix(qn);
  const Eigen::Matrix3d d_scale = g.scale.array().square().matrix().asDiagonal();
  const Eigen::Matrix3d sigma = rq * d_scale * rq.transpose();
  const Eigen::Matrix3d v_cam = w * sigma * w.transpose();
  const Eigen::Matrix<double, 2, 3> j = projection_jacobian(intr, pc);

  // conic = cov2^{-1}
  const Eigen::Matrix2d d_cov2 = -p.conic * acc.conic * p.conic;
  const Eigen::Matrix2d d_cov2_sym = 0.5 * (d_cov2 + d_cov2.transpose());
  const Eigen::Matrix3d d_vcam = j.transpose() * d_cov2_sym * j;
  const Eigen::Matrix<double, 2, 3> d_j = 2.0 * d_cov2_sym * j * v_cam;
  const Eigen::Matrix3d d_sigma = w.transpose() * d_vcam * w;

  // Sigma = Rq diag(s^2) Rq^T
  const Eigen::Matrix3d d_rq = 2.0 * d_sigma * rq * d_scale;
  const Eigen::Matrix3d rt_ds_r = rq.transpose() * d_sigma * rq;
  for (int k = 0; k < 3; ++k)
    grads->scale[cloud_index][k] += 2.0 * g.scale[k] * rt_ds_r(k, k);

  // Rotation via dR/dq at the normalized quaternion, then through the norm.
  const double qw = qn[0], qx = qn[1], qy = qn[2], qz = qn[3];
  Eigen::Matrix3d dr[4];
  dr[0] << 0, -qz, qy, qz, 0, -qx, -qy, qx, 0;
  dr[1] << 0, qy, qz, qy, -2 * qx, -qw, qz, qw, -2 * qx;
  dr[2] << -2 * qy, qx, qw, qx, 0, qz, -qw, qz, -2 * qy;
  dr[3] << -2 * qz, -qw, qx, qw, -2 * qz, qy, qx, qy, 0;
  Eigen::Vector4d d_qn;
  for (int k = 0; k < 4; ++k)
    d_qn[k] = 2.0 * (d_rq.array() * dr[k].array()).sum();
  const Eigen::Vector4d q_raw(g.rotation.w(), g.rotation.x(), g.rotation.y(),
                              g.rotation.z());
  grads->rotation[cloud_index] += (d_qn - qn * qn.dot(d_qn)) / q_raw.norm();

  // uv and J back to the camera-frame center.
  Eigen::Vector3d d_pc = Eigen::Vector3d::Zero();
  d_pc.x() += acc.uv.x() * intr.fx * inv_z;
  d_pc.y() += acc.uv.y() * intr.fy * inv_z;
  d_pc.z() += -acc.uv.x() * intr.fx * x * inv_z2 - acc.uv.y() * intr.fy * y * inv_z2;
  d_pc.z() += d_j(0, 0) * (-intr.fx * inv_z2) + d_j(1, 1) * (-intr.fy * inv_z2);
  d_pc.x() += d_j(0, 2) * (-intr.fx * inv_z2);
  d_pc.y() += d_j(1, 2) * (-intr.fy * inv_z2);
  d_pc.z() += d_j(0, 2) * (2.0 * intr.fx * x * inv_z3) +
              d_j(1, 2) * (2.0 * intr.fy * y * inv_z3);
  grads->center[cloud_index] += w.transpose() * d_pc;

  grads->opacity[cloud_index] += acc.opacity;
  grads->color[cloud_index] += acc.color;
}

}  // namespace

CloudGrads render_backward(const GaussianCloud& cloud, const Camera& cam,
                           const Eigen::Vector3d& background,
                           const Image& upstream_color, const Image* upstream_alpha) {
  const int h = cam.intrinsics.height, w = cam.intrinsics.width;
  const Frame frame = prepare_frame(cloud, cam);
  const int tile_count = frame.tiles_x * frame.tiles_y;

  // Tile-local accumulators, reduced in tile order afterwards so the result
  // is bitwise independent of the worker schedule.
  std::vector<std::vector<PixelGrad>> tile_acc(tile_count);
  for (int tile = 0; tile < tile_count; ++tile)
    tile_acc[tile].resize(frame.tile_lists[tile].size());

  parallel_for_chunks(tile_count, [&](int tile) {
    const int tx = tile % frame.tiles_x, ty = tile / frame.tiles_x;
    const auto& list = frame.tile_lists[tile];
    auto& acc = tile_acc[tile];
    std::vector<Contributor> contrib;
    for (int y = ty * kTile; y < std::min(h, (ty + 1) * kTile); ++y)
      for (int x = tx * kTile; x < std::min(w, (tx + 1) * kTile); ++x) {
        const Eigen::Vector2d px(x + 0.5, y + 0.5);
        contrib.clear();
        double t = 1.0;
        for (size_t slot = 0; slot < list.size(); ++slot) {
          const ProjSplat& p = frame.splats[list[slot]];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          double g = 0.0;
          bool capped = false;
          const double a = effective_alpha(p, px - p.uv, &g, &capped);
          if (a == 0.0) continue;
          contrib.push_back({static_cast<int>(slot), a, g, t, capped});
          t *= 1.0 - a;
          if (t < kTransmittanceFloor) break;
        }
        const double t_final = t;
        const Eigen::Vector3d g_color(upstream_color.at(y, x, 0),
                                      upstream_color.at(y, x, 1),
                                      upstream_color.at(y, x, 2));
        const double g_alpha = upstream_alpha ? upstream_alpha->at(y, x, 0) : 0.0;
        Eigen::Vector3d suffix = Eigen::Vector3d::Zero();  // sum_{j>i} c_j a_j T_j
        for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
          const ProjSplat& p = frame.splats[list[it->slot]];
          PixelGrad& pg = acc[it->slot];
          pg.color += g_color * (it->a * it->t_before);
          const double one_minus_a = 1.0 - it->a;
          const double da =
              g_color.dot(p.color * it->t_before - (suffix + background * t_final) / one_minus_a) +
              g_alpha * t_final / one_minus_a;
          suffix += p.color * (it->a * it->t_before);
          if (it->capped) continue;  // gate frozen at the forward value
          pg.opacity += it->g * da;
          const double de = -it->g * (p.opacity * da);
          const Eigen::Vector2d d = px - p.uv;
          const Eigen::Vector2d qd = p.conic * d;
          pg.uv -= de * qd;
          pg.conic += de * 0.5 * d * d.transpose();
        }
      }
  });

  // Fixed-order reduction into per-splat totals.
  std::vector<PixelGrad> splat_acc(frame.splats.size());
  for (int tile = 0; tile < tile_count; ++tile) {
    const auto& list = frame.tile_lists[tile];
    for (size_t k = 0; k < list.size(); ++k) splat_acc[list[k]] += tile_acc[tile][k];
  }

  CloudGrads grads;
  grads.resize(cloud.size());
  parallel_for_chunks(static_cast<int>(frame.splats.size()), [&](int s) {
    const ProjSplat& p = frame.splats[s];
    splat_chain(cloud.gaussians[p.index], cam, p, splat_acc[s],
                static_cast<size_t>(p.index), &grads);
  });
  return grads;
}

}  // namespace gen3d

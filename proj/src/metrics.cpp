#include "gen3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gen3d/rng.hpp"

namespace gen3d {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr shape mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

// Luminance plane (channel mean) for SSIM.
std::vector<double> luminance(const Image& img) {
  std::vector<double> out(static_cast<size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
      out[static_cast<size_t>(y) * img.width + x] = s / img.channels;
    }
  return out;
}

double ssim_single(const Image& ia, const Image& ib, int window) {
  const int h = ia.height, w = ia.width;
  const std::vector<double> a = luminance(ia), b = luminance(ib);
  const int half = window / 2;
  std::vector<double> kernel(window);
  double ksum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - half;
    kernel[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  // Valid region only, so every window is fully supported.
  for (int y = half; y < h - half; ++y)
    for (int x = half; x < w - half; ++x) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          const double wgt = kernel[dy + half] * kernel[dx + half];
          const double va = a[static_cast<size_t>(y + dy) * w + (x + dx)];
          const double vb = b[static_cast<size_t>(y + dy) * w + (x + dx)];
          mu_a += wgt * va;
          mu_b += wgt * vb;
          aa += wgt * va * va;
          bb += wgt * vb * vb;
          ab += wgt * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

double ssim(const Image& a, const Image& b, int window, bool multi_scale) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim shape mismatch");
  const int scales = multi_scale ? 3 : 1;
  const int min_dim = window << (scales - 1);
  if (a.height < min_dim || a.width < min_dim)
    throw std::invalid_argument("image too small for ssim window");
  if (!multi_scale) return ssim_single(a, b, window);
  Image ca = a, cb = b;
  double product = 1.0;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      ca = downsample2x(ca);
      cb = downsample2x(cb);
    }
    product *= ssim_single(ca, cb, window);
  }
  const double sign = product < 0.0 ? -1.0 : 1.0;
  return sign * std::pow(std::abs(product), 1.0 / scales);
}

size_t NearestNeighborIndex::cell_index(int ix, int iy, int iz) const {
  return (static_cast<size_t>(iz) * ny_ + iy) * nx_ + ix;
}

NearestNeighborIndex::NearestNeighborIndex(const std::vector<Eigen::Vector3d>& points)
    : points_(points) {
  if (points_.empty()) throw std::invalid_argument("empty point set");
  Eigen::Vector3d lo = points_[0], hi = points_[0];
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  const Eigen::Vector3d extent = hi - lo;
  const double diag = std::max(extent.maxCoeff(), 1e-12);
  const double target = diag / std::max(1.0, std::cbrt(static_cast<double>(points_.size())));
  cell_ = std::max(target, 1e-12);
  nx_ = std::max(1, static_cast<int>(extent.x() / cell_) + 1);
  ny_ = std::max(1, static_cast<int>(extent.y() / cell_) + 1);
  nz_ = std::max(1, static_cast<int>(extent.z() / cell_) + 1);
  cells_.resize(static_cast<size_t>(nx_) * ny_ * nz_);
  for (size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Vector3d rel = (points_[i] - origin_) / cell_;
    const int ix = std::clamp(static_cast<int>(rel.x()), 0, nx_ - 1);
    const int iy = std::clamp(static_cast<int>(rel.y()), 0, ny_ - 1);
    const int iz = std::clamp(static_cast<int>(rel.z()), 0, nz_ - 1);
    cells_[cell_index(ix, iy, iz)].push_back(static_cast<int>(i));
  }
}

std::pair<int, double> NearestNeighborIndex::query(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d rel = (p - origin_) / cell_;
  const int cx = std::clamp(static_cast<int>(std::floor(rel.x())), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(rel.y())), 0, ny_ - 1);
  const int cz = std::clamp(static_cast<int>(std::floor(rel.z())), 0, nz_ - 1);
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  const int max_ring = std::max({nx_, ny_, nz_});
  for (int ring = 0; ring <= max_ring; ++ring) {
    // Once a candidate is closer than anything a farther ring can hold, stop.
    if (best >= 0) {
      const double safe = static_cast<double>(ring - 1) * cell_;
      if (safe > 0.0 && best_d2 <= safe * safe) break;
    }
    bool any_cell = false;
    for (int iz = cz - ring; iz <= cz + ring; ++iz) {
      if (iz < 0 || iz >= nz_) continue;
      for (int iy = cy - ring; iy <= cy + ring; ++iy) {
        if (iy < 0 || iy >= ny_) continue;
        for (int ix = cx - ring; ix <= cx + ring; ++ix) {
          if (ix < 0 || ix >= nx_) continue;
          // Shell only: skip interior cells already visited.
          if (std::max({std::abs(ix - cx), std::abs(iy - cy), std::abs(iz - cz)}) != ring)
            continue;
          any_cell = true;
          for (int idx : cells_[cell_index(ix, iy, iz)]) {
            const double d2 = (points_[idx] - p).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    if (!any_cell && best >= 0) break;
  }
  return {best, std::sqrt(best_d2)};
}

namespace {

std::vector<Eigen::Vector3d> positions_of(const std::vector<PointSample>& s) {
  std::vector<Eigen::Vector3d> p(s.size());
  for (size_t i = 0; i < s.size(); ++i) p[i] = s[i].position;
  return p;
}

void require_nonempty(const std::vector<PointSample>& a,
                      const std::vector<PointSample>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty point set");
}

}  // namespace

double chamfer(const std::vector<PointSample>& a, const std::vector<PointSample>& b) {
  require_nonempty(a, b);
  const NearestNeighborIndex ia(positions_of(a)), ib(positions_of(b));
  double sum_ab = 0.0, sum_ba = 0.0;
  for (const auto& s : a) sum_ab += ib.query(s.position).second;
  for (const auto& s : b) sum_ba += ia.query(s.position).second;
  return 0.5 * (sum_ab / a.size() + sum_ba / b.size());
}

double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Ericson, Real-Time Collision Detection: closest point on triangle.
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
    return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
    return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + (c - b) * t)).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

double p2s(const std::vector<PointSample>& points, const TriangleMesh& mesh) {
  if (points.empty() || mesh.empty()) throw std::invalid_argument("empty p2s input");
  // Grid over triangle centroids narrows the candidate set; distances to the
  // candidates stay exact and the search widens until provably optimal.
  std::vector<Eigen::Vector3d> centroids(mesh.faces.size());
  double max_half_diag = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    const Eigen::Vector3d &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]],
                          &c = mesh.vertices[tri[2]];
    centroids[f] = (a + b + c) / 3.0;
    max_half_diag = std::max(
        {max_half_diag, (a - centroids[f]).norm(), (b - centroids[f]).norm(),
         (c - centroids[f]).norm()});
  }
  const NearestNeighborIndex index(centroids);
  double sum = 0.0;
  for (const auto& s : points) {
    // Exact pass over triangles whose centroid is within the proven bound.
    const double centroid_d = index.query(s.position).second;
    const double bound = centroid_d + 2.0 * max_half_diag;
    double best = std::numeric_limits<double>::infinity();
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
      if ((centroids[f] - s.position).norm() > bound + max_half_diag) continue;
      const auto& tri = mesh.faces[f];
      best = std::min(best, point_triangle_distance(s.position, mesh.vertices[tri[0]],
                                                    mesh.vertices[tri[1]],
                                                    mesh.vertices[tri[2]]));
    }
    sum += best;
  }
  return sum / points.size();
}

double f_score(const std::vector<PointSample>& a, const std::vector<PointSample>& b,
               double tau) {
  require_nonempty(a, b);
  const NearestNeighborIndex ia(positions_of(a)), ib(positions_of(b));
  auto fraction_within = [tau](const std::vector<PointSample>& from,
                               const NearestNeighborIndex& to) {
    size_t n = 0;
    for (const auto& s : from)
      if (to.query(s.position).second <= tau) ++n;
    return static_cast<double>(n) / from.size();
  };
  const double precision = fraction_within(a, ib);
  const double recall = fraction_within(b, ia);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double normal_consistency(const std::vector<PointSample>& a,
                          const std::vector<PointSample>& b) {
  require_nonempty(a, b);
  const NearestNeighborIndex ia(positions_of(a)), ib(positions_of(b));
  auto direction = [](const std::vector<PointSample>& from,
                      const std::vector<PointSample>& to,
                      const NearestNeighborIndex& index) {
    double sum = 0.0;
    for (const auto& s : from)
      sum += std::abs(s.normal.dot(to[index.query(s.position).first].normal));
    return sum / from.size();
  };
  return 0.5 * (direction(a, b, ib) + direction(b, a, ia));
}

namespace {

// Center by the bbox midpoint, scale uniformly so the longest axis spans [-1,1].
std::vector<PointSample> normalize_unit_box(const std::vector<PointSample>& pts) {
  Eigen::Vector3d lo = pts[0].position, hi = pts[0].position;
  for (const auto& s : pts) {
    lo = lo.cwiseMin(s.position);
    hi = hi.cwiseMax(s.position);
  }
  const Eigen::Vector3d mid = 0.5 * (lo + hi);
  const double scale = 2.0 / std::max((hi - lo).maxCoeff(), 1e-12);
  std::vector<PointSample> out = pts;
  for (auto& s : out) s.position = (s.position - mid) * scale;
  return out;
}

struct Similarity {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Least-squares similarity (rotation, uniform scale, translation) for given
// point correspondences: Kabsch rotation, then scale and translation.
Similarity solve_similarity(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst) {
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_t = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_t += dst[i];
  }
  mu_s /= static_cast<double>(src.size());
  mu_t /= static_cast<double>(src.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < src.size(); ++i)
    h += (src[i] - mu_s) * (dst[i] - mu_t).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Similarity out;
  out.rotation = svd.matrixV() * svd.matrixU().transpose();
  if (out.rotation.determinant() < 0.0) {
    Eigen::Matrix3d v = svd.matrixV();
    v.col(2) *= -1.0;
    out.rotation = v * svd.matrixU().transpose();
  }
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d d = src[i] - mu_s;
    num += (dst[i] - mu_t).dot(out.rotation * d);
    den += d.squaredNorm();
  }
  out.scale = den > 0.0 ? num / den : 1.0;
  out.translation = mu_t - out.scale * (out.rotation * mu_s);
  return out;
}

// One ICP run from a given initial similarity of the normalized source.
IcpResult icp_run(const std::vector<PointSample>& norm_source,
                  const std::vector<PointSample>& norm_target,
                  const NearestNeighborIndex& index, const Similarity& init) {
  IcpResult res;
  res.aligned_source = norm_source;
  res.normalized_target = norm_target;
  for (auto& s : res.aligned_source) {
    s.position = init.scale * (init.rotation * s.position) + init.translation;
    s.normal = init.rotation * s.normal;
  }

  Eigen::Matrix3d r_total = init.rotation;
  Eigen::Vector3d t_total = init.translation;
  double s_total = init.scale;
  double prev_rms = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < 50; ++iter) {
    // Correspondences.
    std::vector<Eigen::Vector3d> matched(res.aligned_source.size());
    double sq = 0.0;
    for (size_t i = 0; i < res.aligned_source.size(); ++i) {
      const auto [idx, dist] = index.query(res.aligned_source[i].position);
      matched[i] = res.normalized_target[idx].position;
      sq += dist * dist;
    }
    const double rms = std::sqrt(sq / res.aligned_source.size());
    res.rms = rms;
    res.iterations = iter;
    if (prev_rms - rms < 1e-6) break;
    prev_rms = rms;

    // Similarity update on current correspondences.
    std::vector<Eigen::Vector3d> cur(res.aligned_source.size());
    for (size_t i = 0; i < cur.size(); ++i)
      cur[i] = res.aligned_source[i].position;
    const Similarity step = solve_similarity(cur, matched);
    for (auto& s : res.aligned_source) {
      s.position = step.scale * (step.rotation * s.position) + step.translation;
      s.normal = step.rotation * s.normal;
    }
    r_total = step.rotation * r_total;
    t_total = step.scale * (step.rotation * t_total) + step.translation;
    s_total *= step.scale;
  }
  res.rotation = r_total;
  res.translation = t_total;
  res.scale = s_total;
  return res;
}

}  // namespace

IcpResult icp_align(const std::vector<PointSample>& source,
                    const std::vector<PointSample>& target) {
  if (source.size() < 3 || target.size() < 3)
    throw std::invalid_argument("icp needs at least 3 points per set");
  const std::vector<PointSample> norm_source = normalize_unit_box(source);
  const std::vector<PointSample> norm_target = normalize_unit_box(target);
  const NearestNeighborIndex index(positions_of(norm_target));

  // Point-to-point ICP has a narrow convergence basin. Build a global
  // initialization by matching points on their distance-to-centroid
  // signature — a similarity invariant once signatures are normalized by
  // their mean — and solving the full similarity from those matches. Keep
  // the best of that run, an identity-start run, and seeded restarts.
  std::vector<Similarity> inits;
  {
    Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_t = Eigen::Vector3d::Zero();
    for (const auto& s : norm_source) mu_s += s.position;
    for (const auto& s : norm_target) mu_t += s.position;
    mu_s /= double(norm_source.size());
    mu_t /= double(norm_target.size());
    std::vector<std::pair<double, int>> sig(norm_target.size());
    double mean_t = 0.0, mean_s = 0.0;
    for (size_t j = 0; j < norm_target.size(); ++j)
      mean_t += (norm_target[j].position - mu_t).norm();
    mean_t /= double(norm_target.size());
    for (const auto& s : norm_source) mean_s += (s.position - mu_s).norm();
    mean_s /= double(norm_source.size());
    for (size_t j = 0; j < norm_target.size(); ++j)
      sig[j] = {(norm_target[j].position - mu_t).norm() / mean_t, int(j)};
    std::sort(sig.begin(), sig.end());
    std::vector<Eigen::Vector3d> src, dst;
    for (const auto& s : norm_source) {
      const double d = (s.position - mu_s).norm() / mean_s;
      auto it = std::lower_bound(sig.begin(), sig.end(), std::make_pair(d, -1));
      if (it == sig.end()) --it;
      if (it != sig.begin() && d - std::prev(it)->first < it->first - d) --it;
      src.push_back(s.position);
      dst.push_back(norm_target[size_t(it->second)].position);
    }
    inits.push_back(solve_similarity(src, dst));
  }
  inits.push_back(Similarity{});
  Rng rng = Rng::substream(0x1c9, "icp-restarts");
  for (int k = 0; k < 22; ++k) {
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    Similarity s;
    s.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    inits.push_back(s);
  }

  IcpResult best;
  best.rms = std::numeric_limits<double>::infinity();
  for (const Similarity& init : inits) {
    IcpResult run = icp_run(norm_source, norm_target, index, init);
    if (run.rms < best.rms) best = run;
    if (best.rms < 1e-9) break;
  }
  return best;
}

std::vector<PointSample> sample_mesh_points(const TriangleMesh& mesh, int count,
                                            uint64_t seed) {
  if (mesh.empty() || count <= 0) throw std::invalid_argument("empty mesh sample request");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    const Eigen::Vector3d e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Eigen::Vector3d e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    total += 0.5 * e1.cross(e2).norm();
    cumulative[f] = total;
  }
  Rng rng = Rng::substream(seed, "mesh-sampling");
  std::vector<PointSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    const size_t f = std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
                     cumulative.begin();
    const auto& tri = mesh.faces[std::min(f, mesh.faces.size() - 1)];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    PointSample s;
    s.position = mesh.vertices[tri[0]] +
                 u * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]) +
                 v * (mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    const Eigen::Vector3d n =
        (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
            .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    s.normal = n.norm() > 1e-15 ? n.normalized() : Eigen::Vector3d::UnitZ();
    out.push_back(s);
  }
  return out;
}

}  // namespace gen3d

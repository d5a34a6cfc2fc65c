#include "gen3d/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "gen3d/parallel.hpp"
#include "gen3d/rasterizer.hpp"

namespace gen3d {

namespace {

#include "mc_table.inc"

// Cube corner offsets and the edges joining them, matching kTriTable.
const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                           {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
const int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {6, 5},
                          {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

void integrate(TsdfVolume& vol, const Image& depth, const Image* color,
               const Camera& cam, const Image* pixel_weight) {
  const int n = vol.resolution;
  const double trunc = vol.truncation();
  // Views are fused in caller order; within a view each sample's update is
  // independent, so slices can run in parallel without changing the result.
  parallel_for_chunks(n, [&](int k) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d pc = cam.to_camera(vol.point(i, j, k));
        if (pc.z() <= 1e-8) continue;
        const int u = static_cast<int>(std::floor(
            cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx));
        const int v = static_cast<int>(std::floor(
            cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy));
        if (u < 0 || u >= depth.width || v < 0 || v >= depth.height) continue;
        const double d = depth.at(v, u, 0);
        if (d <= 0.0) continue;
        const double sd = d - pc.z();
        if (sd < -trunc) continue;
        const double obs = std::clamp(sd, -trunc, trunc) / trunc;
        const double pw = pixel_weight != nullptr ? pixel_weight->at(v, u, 0) : 1.0;
        if (pw <= 0.0) continue;
        const size_t idx = vol.index(i, j, k);
        const double w = vol.weight[idx];
        vol.tsdf[idx] = (vol.tsdf[idx] * w + obs * pw) / (w + pw);
        if (color != nullptr) {
          const Eigen::Vector3d c(color->at(v, u, 0), color->at(v, u, 1),
                                  color->at(v, u, 2));
          vol.color[idx] = (vol.color[idx] * w + c * pw) / (w + pw);
        }
        vol.weight[idx] = w + pw;
      }
  });
}

namespace {

// Central-difference tsdf gradient at a lattice point, one-sided at borders.
Eigen::Vector3d tsdf_gradient(const TsdfVolume& vol, int i, int j, int k) {
  auto value = [&](int a, int b, int c) {
    a = std::clamp(a, 0, vol.resolution - 1);
    b = std::clamp(b, 0, vol.resolution - 1);
    c = std::clamp(c, 0, vol.resolution - 1);
    return vol.tsdf[vol.index(a, b, c)];
  };
  return Eigen::Vector3d(value(i + 1, j, k) - value(i - 1, j, k),
                         value(i, j + 1, k) - value(i, j - 1, k),
                         value(i, j, k + 1) - value(i, j, k - 1));
}

}  // namespace

TriangleMesh marching_cubes(const TsdfVolume& vol, double iso) {
  TriangleMesh mesh;
  const int n = vol.resolution;
  // Shared vertices are keyed by (lattice edge) so neighbouring cells reuse
  // them exactly; that keeps closed surfaces watertight.
  std::map<std::pair<size_t, size_t>, int> edge_vertex;

  auto vertex_on_edge = [&](int i0, int j0, int k0, int i1, int j1, int k1) {
    const size_t a = vol.index(i0, j0, k0), b = vol.index(i1, j1, k1);
    const auto key = std::minmax(a, b);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double va = vol.tsdf[a], vb = vol.tsdf[b];
    const double denom = vb - va;
    const double t = std::clamp(denom != 0.0 ? (iso - va) / denom : 0.5, 0.0, 1.0);
    const Eigen::Vector3d pa = vol.point(i0, j0, k0), pb = vol.point(i1, j1, k1);
    mesh.vertices.push_back(pa + t * (pb - pa));
    mesh.colors.push_back(vol.color[a] + t * (vol.color[b] - vol.color[a]));
    Eigen::Vector3d g = tsdf_gradient(vol, i0, j0, k0) +
                        t * (tsdf_gradient(vol, i1, j1, k1) -
                             tsdf_gradient(vol, i0, j0, k0));
    if (g.norm() < 1e-12) g = Eigen::Vector3d::UnitZ();
    mesh.normals.push_back(g.normalized());
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < n; ++k)
    for (int j = 0; j + 1 < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        int index = 0;
        bool observed = true;
        double values[8];
        for (int c = 0; c < 8; ++c) {
          const size_t idx =
              vol.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (vol.weight[idx] <= 0.0) {
            observed = false;
            break;
          }
          values[c] = vol.tsdf[idx];
          if (values[c] <= iso) index |= 1 << c;
        }
        if (!observed || index == 0 || index == 255) continue;
        for (int t = 0; kTriTable[index][t] != -1; t += 3) {
          int tri[3];
          for (int e = 0; e < 3; ++e) {
            const int edge = kTriTable[index][t + e];
            const int* c0 = kCorner[kEdge[edge][0]];
            const int* c1 = kCorner[kEdge[edge][1]];
            tri[e] = vertex_on_edge(i + c0[0], j + c0[1], k + c0[2], i + c1[0],
                                    j + c1[1], k + c1[2]);
          }
          if (tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2])
            mesh.faces.push_back({tri[0], tri[1], tri[2]});
        }
      }
  return mesh;
}

TriangleMesh extract_mesh(const GaussianCloud& cloud, const MeshExtractConfig& cfg) {
  if (cloud.empty()) throw std::invalid_argument("extract_mesh: empty cloud");

  Eigen::Vector3d lo = cloud.gaussians[0].center, hi = lo;
  for (const Gaussian& g : cloud.gaussians) {
    lo = lo.cwiseMin(g.center - 3.0 * g.scale);
    hi = hi.cwiseMax(g.center + 3.0 * g.scale);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double extent = (hi - lo).maxCoeff();
  const double half = 0.5 * extent * (1.0 + cfg.margin);
  const double vox = 2.0 * half / (cfg.volume_resolution - 1);
  TsdfVolume vol(cfg.volume_resolution, vox, center - Eigen::Vector3d::Constant(half));

  const double radius =
      cfg.orbit_radius > 0.0 ? cfg.orbit_radius : 2.5 * std::max(extent, 1e-6);
  const CameraIntrinsics intr = CameraIntrinsics::standard(cfg.image_size, cfg.image_size);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int v = 0; v < cfg.view_count; ++v) {
    // Fibonacci-sphere directions: every surface patch gets a near-frontal
    // view, which the incidence weighting below relies on.
    const double dy = 1.0 - 2.0 * (v + 0.5) / cfg.view_count;
    const double dr = std::sqrt(std::max(0.0, 1.0 - dy * dy));
    const double th = golden * v;
    const Eigen::Vector3d dir(dr * std::cos(th), dy, dr * std::sin(th));
    const double el = std::asin(dir.y()) * 180.0 / M_PI;
    const double az = std::atan2(dir.x(), dir.z()) * 180.0 / M_PI;
    Camera cam = make_orbit_camera(az, el, radius, center, intr);
    RenderOutput out = render(cloud, cam, Eigen::Vector3d::Zero());
    // Halo splats bleed depth into free space; mask them out.
    for (int y = 0; y < out.depth.height; ++y)
      for (int x = 0; x < out.depth.width; ++x)
        if (out.alpha.at(y, x, 0) < cfg.alpha_mask) out.depth.at(y, x, 0) = 0.0;
    // Compositing through a fuzzy splat shell under-estimates depth by about
    // one splat scale times the sine of the incidence angle: splats slightly
    // up-ray project onto the same pixel and are blended in first. Face-on
    // observations are unbiased, so weight each vote by a high power of the
    // cosine between the viewing ray and the local depth-map normal. A small
    // floor keeps coverage where no view is frontal (e.g. deep concavities).
    Image weights(out.depth.height, out.depth.width, 1);
    auto back_project = [&](int y, int x) {
      const double d = out.depth.at(y, x, 0);
      return Eigen::Vector3d((x + 0.5 - intr.cx) / intr.fx * d,
                             (y + 0.5 - intr.cy) / intr.fy * d, d);
    };
    for (int y = 0; y < weights.height; ++y)
      for (int x = 0; x < weights.width; ++x) {
        if (out.depth.at(y, x, 0) <= 0.0) continue;
        const int xm = std::max(0, x - 1), xp = std::min(weights.width - 1, x + 1);
        const int ym = std::max(0, y - 1), yp = std::min(weights.height - 1, y + 1);
        if (out.depth.at(y, xm, 0) <= 0.0 || out.depth.at(y, xp, 0) <= 0.0 ||
            out.depth.at(ym, x, 0) <= 0.0 || out.depth.at(yp, x, 0) <= 0.0) {
          weights.at(y, x, 0) = 0.02;  // silhouette; treat as grazing
          continue;
        }
        const Eigen::Vector3d du = back_project(y, xp) - back_project(y, xm);
        const Eigen::Vector3d dv = back_project(yp, x) - back_project(ym, x);
        const Eigen::Vector3d normal = du.cross(dv).normalized();
        const double c = std::abs(normal.dot(back_project(y, x).normalized()));
        weights.at(y, x, 0) = std::max(0.02, std::pow(c, 16.0));
      }
    integrate(vol, out.depth, &out.color, cam, &weights);
  }
  return marching_cubes(vol, 0.0);
}

void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out.precision(12);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const Eigen::Vector3d c =
        i < mesh.colors.size() ? mesh.colors[i] : Eigen::Vector3d::Zero();
    out << "v " << v.x() << " " << v.y() << " " << v.z() << " " << c.x() << " "
        << c.y() << " " << c.z() << "\n";
  }
  for (const auto& n : mesh.normals)
    out << "vn " << n.x() << " " << n.y() << " " << n.z() << "\n";
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << "//" << f[0] + 1 << " " << f[1] + 1 << "//"
        << f[1] + 1 << " " << f[2] + 1 << "//" << f[2] + 1 << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace gen3d

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "gen3d/geometry.hpp"
#include "gen3d/meshing.hpp"
#include "gen3d/scenes.hpp"

using namespace gen3d;

namespace {

bool watertight(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  for (const auto& [e, count] : edges)
    if (count != 2) return false;
  return !mesh.faces.empty();
}

}  // namespace

TEST_CASE("integrate: sign convention and idempotent averaging") {
  const int res = 32;
  const double vox = 0.05;
  TsdfVolume vol(res, vox, Eigen::Vector3d(-0.8, -0.8, -0.8));

  // All-zero depth map (no hits) leaves the volume unobserved.
  CameraIntrinsics intr = CameraIntrinsics::standard(32, 32);
  Camera cam = make_orbit_camera(0, 0, 2.0, Eigen::Vector3d::Zero(), intr);
  Image empty_depth(32, 32, 1);
  integrate(vol, empty_depth, nullptr, cam);
  for (double w : vol.weight) CHECK(w == 0.0);

  // A plane at camera depth 2 (through the origin, facing the camera).
  Image plane(32, 32, 1, 2.0);
  integrate(vol, plane, nullptr, cam);
  double trunc = vol.truncation();
  int front = 0, behind = 0;
  for (int k = 0; k < res; ++k)
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i) {
        size_t idx = vol.index(i, j, k);
        if (vol.weight[idx] == 0.0) continue;
        double z_cam = cam.to_camera(vol.point(i, j, k)).z();
        double sd = 2.0 - z_cam;  // positive in front of the plane
        if (sd > 0.5 * trunc) {
          CHECK(vol.tsdf[idx] > 0.0);
          ++front;
        } else if (sd < -0.5 * trunc && sd > -trunc) {
          CHECK(vol.tsdf[idx] < 0.0);
          ++behind;
        }
        CHECK(vol.tsdf[idx] >= -1.0);
        CHECK(vol.tsdf[idx] <= 1.0);
      }
  CHECK(front > 100);
  CHECK(behind > 100);

  // Integrating the same observation again doubles weights, keeps tsdf.
  TsdfVolume twice = vol;
  integrate(twice, plane, nullptr, cam);
  for (size_t i = 0; i < vol.tsdf.size(); ++i) {
    CHECK(twice.weight[i] == doctest::Approx(2.0 * vol.weight[i]));
    if (vol.weight[i] > 0) CHECK(twice.tsdf[i] == doctest::Approx(vol.tsdf[i]));
  }
}

TEST_CASE("marching cubes: empty, analytic sphere, interpolation") {
  // Uniformly positive volume has no crossings.
  TsdfVolume pos(16, 0.1, Eigen::Vector3d::Zero());
  std::fill(pos.tsdf.begin(), pos.tsdf.end(), 0.5);
  std::fill(pos.weight.begin(), pos.weight.end(), 1.0);
  CHECK(marching_cubes(pos).empty());

  // Analytic sphere distance, computed directly rather than fused.
  const int res = 64;
  const double vox = 2.2 / (res - 1);
  const double radius = 0.8;
  TsdfVolume vol(res, vox, Eigen::Vector3d(-1.1, -1.1, -1.1));
  for (int k = 0; k < res; ++k)
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i) {
        size_t idx = vol.index(i, j, k);
        // Positive outside the surface, matching the fusion convention.
        double sd = vol.point(i, j, k).norm() - radius;
        vol.tsdf[idx] = std::clamp(sd / vol.truncation(), -1.0, 1.0);
        vol.weight[idx] = 1.0;
      }
  TriangleMesh mesh = marching_cubes(vol);
  REQUIRE(!mesh.empty());
  double err = 0;
  for (const Eigen::Vector3d& v : mesh.vertices) err += std::abs(v.norm() - radius);
  err /= double(mesh.vertices.size());
  CHECK(err <= 0.5 * vox);
  CHECK(watertight(mesh));
  for (const Eigen::Vector3d& n : mesh.normals)
    CHECK(std::abs(n.norm() - 1.0) < 1e-6);

  // Two-sample sign flip: vertex at the interpolated fraction along the edge.
  TsdfVolume tiny(2, 1.0, Eigen::Vector3d::Zero());
  std::fill(tiny.tsdf.begin(), tiny.tsdf.end(), 0.25);
  std::fill(tiny.weight.begin(), tiny.weight.end(), 1.0);
  tiny.tsdf[tiny.index(0, 0, 0)] = -0.75;  // crossing at 0.75 along each edge
  TriangleMesh corner = marching_cubes(tiny);
  REQUIRE(corner.faces.size() == 1);
  bool found = false;
  for (const Eigen::Vector3d& v : corner.vertices)
    if ((v - Eigen::Vector3d(0.75, 0, 0)).norm() < 1e-12) found = true;
  CHECK(found);
}

TEST_CASE("extract_mesh: sphere cloud fixture") {
  SceneSpec spec;
  spec.kind = SceneKind::sphere;
  spec.splat_count = 65536;
  spec.seed = 42;
  spec.extent = 1.0;
  SceneData scene = make_scene(spec);

  MeshExtractConfig cfg;  // 36 views, 128^3, 128 px
  TriangleMesh mesh = extract_mesh(scene.cloud, cfg);
  REQUIRE(!mesh.empty());
  CHECK(watertight(mesh));

  double bbox = 0;
  for (const Eigen::Vector3d& v : mesh.vertices) bbox = std::max(bbox, v.cwiseAbs().maxCoeff());
  double vox = 2.0 * bbox / (cfg.volume_resolution - 1);
  double err = 0;
  for (const Eigen::Vector3d& v : mesh.vertices) err += std::abs(v.norm() - 1.0);
  err /= double(mesh.vertices.size());
  CHECK(err <= 1.5 * vox);
}

TEST_CASE("extract_mesh: box bbox and transparent cloud") {
  SceneSpec spec;
  spec.kind = SceneKind::box;
  spec.splat_count = 32768;
  spec.seed = 43;
  spec.extent = 0.9;
  SceneData scene = make_scene(spec);

  MeshExtractConfig cfg;
  cfg.view_count = 24;
  cfg.volume_resolution = 64;
  cfg.image_size = 96;
  TriangleMesh mesh = extract_mesh(scene.cloud, cfg);
  REQUIRE(!mesh.empty());

  Eigen::Vector3d lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Eigen::Vector3d& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  double span = (hi - lo).maxCoeff();
  double vox = (span * (1 + cfg.margin)) / (cfg.volume_resolution - 1);
  // Splat centers span +-extent; allow the fuzzy shell plus interpolation.
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(lo[k] + 0.9) <= 4 * vox);
    CHECK(std::abs(hi[k] - 0.9) <= 4 * vox);
  }

  GaussianCloud clear = scene.cloud;
  for (Gaussian& g : clear.gaussians) g.opacity = 0.0;
  CHECK(extract_mesh(clear, cfg).empty());
}

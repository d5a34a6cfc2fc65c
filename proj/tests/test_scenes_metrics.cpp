#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "gen3d/metrics.hpp"
#include "gen3d/meshing_types.hpp"
#include "gen3d/rng.hpp"
#include "gen3d/scenes.hpp"

using namespace gen3d;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, int c, uint64_t seed) {
  Image img(h, w, c);
  Rng rng(seed);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

std::vector<PointSample> random_points(int n, uint64_t seed) {
  std::vector<PointSample> out(n);
  Rng rng(seed);
  for (PointSample& p : out) {
    p.position = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                 rng.uniform(-1, 1));
    p.normal = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
  }
  return out;
}

}  // namespace

TEST_CASE("psnr basics and scalar oracle") {
  Image a = random_image(16, 16, 3, 1);
  CHECK(std::isinf(psnr(a, a)));

  Image b = a;
  for (double& v : b.data) v += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));

  Image c = random_image(16, 16, 3, 2);
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - c.data[i];
    mse += d * d;
  }
  mse /= double(a.data.size());
  CHECK(psnr(a, c) == doctest::Approx(10 * std::log10(1.0 / mse)).epsilon(1e-9));
}

TEST_CASE("ssim identity and sign") {
  Image a = random_image(32, 32, 1, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ssim(a, a, 11, true) == doctest::Approx(1.0).epsilon(1e-9));

  // Negating structure around mid-gray flips every local covariance.
  Image b = a;
  for (double& v : b.data) v = 1.0 - v;
  CHECK(ssim(a, b) < 0.0);

  Image c = random_image(32, 32, 1, 4);
  double s = ssim(a, c);
  CHECK(s > -1.0);
  CHECK(s < 1.0);
}

TEST_CASE("chamfer distance against brute force") {
  std::vector<PointSample> a = random_points(500, 10);
  CHECK(chamfer(a, a) == doctest::Approx(0.0));

  std::vector<PointSample> p{PointSample{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ()}};
  std::vector<PointSample> q{PointSample{Eigen::Vector3d(0, 0, 0.7), Eigen::Vector3d::UnitZ()}};
  CHECK(chamfer(p, q) == doctest::Approx(0.7).epsilon(1e-12));

  std::vector<PointSample> b = random_points(400, 11);
  auto brute_side = [](const std::vector<PointSample>& from,
                       const std::vector<PointSample>& to) {
    double total = 0;
    for (const PointSample& f : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const PointSample& t : to)
        best = std::min(best, (f.position - t.position).norm());
      total += best;
    }
    return total / double(from.size());
  };
  double want = 0.5 * (brute_side(a, b) + brute_side(b, a));
  CHECK(chamfer(a, b) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("nearest neighbor index equals brute force") {
  std::vector<PointSample> pts = random_points(300, 12);
  std::vector<Eigen::Vector3d> raw;
  for (const PointSample& p : pts) raw.push_back(p.position);
  NearestNeighborIndex index(raw);
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d q(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                      rng.uniform(-1.5, 1.5));
    auto [idx, dist] = index.query(q);
    double best = std::numeric_limits<double>::infinity();
    for (const Eigen::Vector3d& p : raw) best = std::min(best, (q - p).norm());
    CHECK(dist == doctest::Approx(best).epsilon(1e-12));
    CHECK((q - raw[idx]).norm() == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("f-score thresholding") {
  std::vector<PointSample> a = random_points(200, 14);
  CHECK(f_score(a, a, 0.01) == doctest::Approx(1.0));

  std::vector<PointSample> far = a;
  for (PointSample& p : far) p.position += Eigen::Vector3d(10, 0, 0);
  CHECK(f_score(a, far, 0.01) == 0.0);

  // Half of each set matched, half far away on opposite sides:
  // precision = recall = 0.5, harmonic mean 0.5.
  std::vector<PointSample> near_far_a, near_far_b;
  for (int i = 0; i < 100; ++i) {
    PointSample p;
    p.position = Eigen::Vector3d(i * 0.1, 0, 0);
    near_far_a.push_back(p);
    near_far_b.push_back(p);
  }
  for (int i = 0; i < 100; ++i) {
    PointSample p;
    p.position = Eigen::Vector3d(i * 0.1, 100, 0);
    near_far_a.push_back(p);
    p.position = Eigen::Vector3d(i * 0.1, -100, 0);
    near_far_b.push_back(p);
  }
  CHECK(f_score(near_far_a, near_far_b, 0.01) == doctest::Approx(0.5));
}

TEST_CASE("normal consistency") {
  std::vector<PointSample> a = random_points(200, 15);
  CHECK(normal_consistency(a, a) == doctest::Approx(1.0));

  std::vector<PointSample> rot = a;
  for (PointSample& p : rot) {
    // Rotate every normal 90 degrees about an axis orthogonal to it.
    Eigen::Vector3d axis = p.normal.unitOrthogonal();
    p.normal = Eigen::AngleAxisd(M_PI / 2, axis) * p.normal;
  }
  CHECK(normal_consistency(a, rot) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("point-to-triangle distance") {
  Eigen::Vector3d a(0, 0, 0), b(4, 0, 0), c(0, 4, 0);
  CHECK(point_triangle_distance(Eigen::Vector3d(1, 1, 0), a, b, c) ==
        doctest::Approx(0.0));
  CHECK(point_triangle_distance(Eigen::Vector3d(1, 1, 2.5), a, b, c) ==
        doctest::Approx(2.5));
  // Closest feature is an edge / a vertex.
  CHECK(point_triangle_distance(Eigen::Vector3d(-3, 0, 0), a, b, c) ==
        doctest::Approx(3.0));
  CHECK(point_triangle_distance(Eigen::Vector3d(2, -1, 0), a, b, c) ==
        doctest::Approx(1.0));

  TriangleMesh mesh;
  mesh.vertices = {a, b, c};
  mesh.faces = {{0, 1, 2}};
  std::vector<PointSample> on{PointSample{Eigen::Vector3d(0.5, 0.5, 0),
                                           Eigen::Vector3d::UnitZ()}};
  CHECK(p2s(on, mesh) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("icp recovers a similarity transform") {
  std::vector<PointSample> target = random_points(400, 16);
  IcpResult self = icp_align(target, target);
  CHECK(self.rms < 1e-9);
  CHECK((self.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-6);

  Eigen::Matrix3d R(Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()));
  std::vector<PointSample> source = target;
  for (PointSample& p : source) {
    p.position = R * p.position + Eigen::Vector3d(0.2, -0.1, 0.3);
    p.normal = R * p.normal;
  }
  IcpResult res = icp_align(source, target);
  CHECK(res.rms < 1e-6);

  Rng noise(17);
  const double sigma = 0.01;
  for (PointSample& p : source)
    p.position += sigma * Eigen::Vector3d(noise.normal(), noise.normal(), noise.normal());
  IcpResult noisy = icp_align(source, target);
  CHECK(noisy.rms <= 2 * sigma);
}

TEST_CASE("mesh surface sampling is area weighted and seeded") {
  // Two triangles, one with 9x the area of the other.
  TriangleMesh mesh;
  mesh.vertices = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0),
                   Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(10, 10, 0),
                   Eigen::Vector3d(13, 10, 0), Eigen::Vector3d(10, 13, 0)};
  mesh.faces = {{0, 1, 2}, {3, 4, 5}};
  std::vector<PointSample> s = sample_mesh_points(mesh, 5000, 1);
  REQUIRE(s.size() == 5000);
  int big = 0;
  for (const PointSample& p : s)
    if (p.position.x() > 5) ++big;
  CHECK(double(big) / 5000 == doctest::Approx(0.9).epsilon(0.05));

  std::vector<PointSample> again = sample_mesh_points(mesh, 5000, 1);
  for (size_t i = 0; i < s.size(); ++i)
    CHECK((s[i].position - again[i].position).norm() == 0.0);
}

TEST_CASE("sphere scene: centers on the surface, isotropic scales") {
  SceneSpec spec;
  spec.kind = SceneKind::sphere;
  spec.splat_count = 512;
  spec.seed = 5;
  spec.extent = 0.8;
  SceneData scene = make_scene(spec);
  REQUIRE(scene.cloud.size() == 512);
  for (const Gaussian& g : scene.cloud.gaussians) {
    CHECK(std::abs(g.center.norm() - 0.8) < 1e-9);
    CHECK(g.scale.x() == g.scale.y());
    CHECK(g.scale.y() == g.scale.z());
    CHECK(g.opacity == doctest::Approx(0.95));
  }
  CHECK(scene.surface.sdf(Eigen::Vector3d(0.8, 0, 0)) == doctest::Approx(0.0));
  CHECK(scene.surface.sdf(Eigen::Vector3d::Zero()) == doctest::Approx(-0.8));
}

TEST_CASE("box scene: centers on the box faces") {
  SceneSpec spec;
  spec.kind = SceneKind::box;
  spec.splat_count = 600;
  spec.seed = 6;
  spec.extent = 1.0;
  SceneData scene = make_scene(spec);
  for (const Gaussian& g : scene.cloud.gaussians) {
    double m = g.center.cwiseAbs().maxCoeff();
    CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("two-blob descriptor sdf is the union") {
  SceneSpec spec;
  spec.kind = SceneKind::two_blob;
  spec.splat_count = 256;
  spec.seed = 7;
  spec.extent = 1.0;
  SceneData scene = make_scene(spec);
  const SurfaceDescriptor& surf = scene.surface;
  // Union sdf = min of the two sphere sdfs; probe the midpoint by hand.
  Eigen::Vector3d mid = 0.5 * (surf.blob_a + surf.blob_b);
  double want = std::min((mid - surf.blob_a).norm(), (mid - surf.blob_b).norm()) -
                surf.blob_radius;
  CHECK(surf.sdf(mid) == doctest::Approx(want).epsilon(1e-12));

  // Surface samples sit on the zero level set.
  for (const PointSample& p : surf.sample(200, 8))
    CHECK(std::abs(surf.sdf(p.position)) < 1e-6);
}

TEST_CASE("dataset round trip") {
  SceneSpec spec;
  spec.kind = SceneKind::sphere;
  spec.splat_count = 128;
  spec.seed = 9;
  DatasetConfig cfg;
  cfg.resolution = 16;
  cfg.novel_count = 12;
  cfg.seed = 9;
  fs::path dir = fs::temp_directory_path() / "gen3d_test_dataset";
  fs::remove_all(dir);

  std::vector<DatasetRecord> recs = make_dataset({spec}, cfg, dir);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].targets.size() == 4);
  CHECK(recs[0].novels.size() == 12);
  CHECK(recs[0].context.height == 16);

  std::vector<DatasetRecord> loaded = load_dataset(dir);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].targets.size() == 4);
  for (int v = 0; v < 4; ++v) {
    REQUIRE(loaded[0].targets[v].same_shape(recs[0].targets[v]));
    for (size_t i = 0; i < loaded[0].targets[v].data.size(); ++i)
      CHECK(std::abs(loaded[0].targets[v].data[i] - recs[0].targets[v].data[i]) < 1e-6);
  }
  CHECK(loaded[0].gt_cloud.size() == 128);

  // Same seed twice: bitwise-equal rendered images.
  fs::path dir2 = fs::temp_directory_path() / "gen3d_test_dataset2";
  fs::remove_all(dir2);
  std::vector<DatasetRecord> recs2 = make_dataset({spec}, cfg, dir2);
  CHECK(recs2[0].context.data == recs[0].context.data);
  for (int v = 0; v < 4; ++v) CHECK(recs2[0].targets[v].data == recs[0].targets[v].data);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

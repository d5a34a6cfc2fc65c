#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/rasterizer.hpp"
#include "gen3d/rng.hpp"
#include "gen3d/scenes.hpp"

using namespace gen3d;

namespace {

const Eigen::Vector3d kBg(1.0, 1.0, 1.0);

Camera front_camera(int size = 32) {
  return make_orbit_camera(0, 0, 2.0, Eigen::Vector3d::Zero(),
                           CameraIntrinsics::standard(size, size));
}

Gaussian make_splat(const Eigen::Vector3d& center, double scale, double opacity,
                    const Eigen::Vector3d& color) {
  Gaussian g;
  g.center = center;
  g.scale = Eigen::Vector3d::Constant(scale);
  g.opacity = opacity;
  g.color = color;
  return g;
}

GaussianCloud random_cloud(int count, uint64_t seed) {
  GaussianCloud cloud;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Gaussian g;
    g.center = Eigen::Vector3d(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                               rng.uniform(-0.4, 0.4));
    g.scale = Eigen::Vector3d(rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.25),
                              rng.uniform(0.05, 0.25));
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    g.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    g.opacity = rng.uniform(0.2, 0.9);
    g.color = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

double image_diff(const Image& a, const Image& b) {
  double worst = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

TEST_CASE("empty cloud renders background") {
  Camera cam = front_camera();
  RenderOutput out = render(GaussianCloud{}, cam, Eigen::Vector3d(0.2, 0.4, 0.6));
  for (int y = 0; y < out.color.height; ++y)
    for (int x = 0; x < out.color.width; ++x) {
      CHECK(out.color.at(y, x, 0) == 0.2);
      CHECK(out.color.at(y, x, 1) == 0.4);
      CHECK(out.color.at(y, x, 2) == 0.6);
      CHECK(out.alpha.at(y, x, 0) == 0.0);
      CHECK(out.depth.at(y, x, 0) == 0.0);
    }
}

TEST_CASE("single opaque splat composites with the alpha cap") {
  Camera cam = front_camera(33);  // odd size: principal point on a pixel center
  GaussianCloud cloud;
  cloud.gaussians.push_back(
      make_splat(Eigen::Vector3d::Zero(), 0.3, 1.0, Eigen::Vector3d(1, 0, 0)));
  RenderOutput out = render(cloud, cam, Eigen::Vector3d(0, 0, 1));
  int cyx = 16;
  CHECK(out.alpha.at(cyx, cyx, 0) == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(out.color.at(cyx, cyx, 0) == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(out.color.at(cyx, cyx, 2) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("front splat occludes back splat") {
  Camera cam = front_camera(33);
  GaussianCloud both;
  both.gaussians.push_back(
      make_splat(Eigen::Vector3d(0, 0, 0.5), 0.2, 1.0, Eigen::Vector3d(1, 0, 0)));
  both.gaussians.push_back(
      make_splat(Eigen::Vector3d(0, 0, -0.5), 0.2, 1.0, Eigen::Vector3d(0, 1, 0)));
  RenderOutput out = render(both, cam, kBg);
  CHECK(std::abs(out.color.at(16, 16, 0) - 1.0) < 1e-2);
  CHECK(out.color.at(16, 16, 1) < 0.05);

  GaussianCloud back_only;
  back_only.gaussians.push_back(both.gaussians[1]);
  RenderOutput out2 = render(back_only, cam, kBg);
  CHECK(std::abs(out2.color.at(16, 16, 1) - 0.99) < 1e-2);
}

TEST_CASE("order invariance and transparency neutrality") {
  Camera cam = front_camera();
  GaussianCloud cloud = random_cloud(20, 5);
  RenderOutput base = render(cloud, cam, kBg);

  GaussianCloud rotated = cloud;
  std::rotate(rotated.gaussians.begin(), rotated.gaussians.begin() + 7,
              rotated.gaussians.end());
  RenderOutput perm = render(rotated, cam, kBg);
  // Same multiset of splats, same image (depth ties broken by index only
  // matter for exact coincidence, which the random cloud avoids).
  CHECK(image_diff(base.color, perm.color) < 1e-12);

  GaussianCloud padded = cloud;
  padded.gaussians.push_back(
      make_splat(Eigen::Vector3d(0.1, 0.1, 0.1), 0.3, 0.0, Eigen::Vector3d(1, 0, 0)));
  RenderOutput pad = render(padded, cam, kBg);
  CHECK(image_diff(base.color, pad.color) == 0.0);
  CHECK(image_diff(base.alpha, pad.alpha) == 0.0);
}

TEST_CASE("depth-only pipeline") {
  Camera cam = front_camera(33);
  CHECK(render_depth_only(GaussianCloud{}, cam).data ==
        Image(33, 33, 1).data);

  GaussianCloud cloud;
  cloud.gaussians.push_back(
      make_splat(Eigen::Vector3d::Zero(), 0.15, 1.0, Eigen::Vector3d(1, 1, 1)));
  Image depth = render_depth_only(cloud, cam);
  CHECK(depth.at(16, 16, 0) == doctest::Approx(2.0).epsilon(0.01));

  RenderOutput full = render(cloud, cam, kBg);
  CHECK(image_diff(full.depth, depth) == 0.0);
}

TEST_CASE("sphere depth matches the analytic ray-sphere intersection") {
  const double radius = 1.0;
  SceneSpec spec;
  spec.kind = SceneKind::sphere;
  spec.splat_count = 4096;
  spec.seed = 3;
  spec.extent = radius;
  SceneData scene = make_scene(spec);

  double mean_scale = 0;
  for (const Gaussian& g : scene.cloud.gaussians) mean_scale += g.scale.x();
  mean_scale /= double(scene.cloud.size());

  Camera cam = make_orbit_camera(25, 10, 3.0, Eigen::Vector3d::Zero(),
                                 CameraIntrinsics::standard(64, 64));
  RenderOutput out = render(scene.cloud, cam, kBg);

  Eigen::Vector3d origin = cam.position();
  int checked = 0;
  double worst = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (out.alpha.at(y, x, 0) < 0.95) continue;  // silhouette interior only
      Eigen::Vector3d dir =
          (cam.to_world(Eigen::Vector3d((x + 0.5 - cam.intrinsics.cx) / cam.intrinsics.fx,
                                        (y + 0.5 - cam.intrinsics.cy) / cam.intrinsics.fy,
                                        1.0)) -
           origin)
              .normalized();
      double b = origin.dot(dir);
      double disc = b * b - (origin.squaredNorm() - radius * radius);
      if (disc <= 0) continue;
      double t_hit = -b - std::sqrt(disc);
      double z_analytic = cam.to_camera(origin + t_hit * dir).z();
      worst = std::max(worst, std::abs(out.depth.at(y, x, 0) - z_analytic));
      ++checked;
    }
  CHECK(checked > 200);
  CHECK(worst < 2.0 * mean_scale);
}

TEST_CASE("backward: zero upstream gives zero grads") {
  Camera cam = front_camera();
  GaussianCloud cloud = random_cloud(8, 9);
  Image up(32, 32, 3);
  CloudGrads grads = render_backward(cloud, cam, kBg, up, nullptr);
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(grads.center[i].norm() == 0.0);
    CHECK(grads.scale[i].norm() == 0.0);
    CHECK(grads.rotation[i].norm() == 0.0);
    CHECK(grads.color[i].norm() == 0.0);
    CHECK(grads.opacity[i] == 0.0);
  }
}

TEST_CASE("backward: single-splat color gradient closed form") {
  Camera cam = front_camera(33);
  GaussianCloud cloud;
  cloud.gaussians.push_back(
      make_splat(Eigen::Vector3d::Zero(), 0.3, 0.7, Eigen::Vector3d(0.2, 0.5, 0.8)));
  RenderOutput out = render(cloud, cam, kBg);

  Image up(33, 33, 3);
  Rng rng(17);
  for (double& v : up.data) v = rng.uniform(-1, 1);
  CloudGrads grads = render_backward(cloud, cam, kBg, up, nullptr);

  // d color_pixel / d c = a (alpha already holds a*T for the only splat).
  Eigen::Vector3d want = Eigen::Vector3d::Zero();
  for (int y = 0; y < 33; ++y)
    for (int x = 0; x < 33; ++x)
      for (int c = 0; c < 3; ++c)
        want[c] += out.alpha.at(y, x, 0) * up.at(y, x, c);
  CHECK((grads.color[0] - want).norm() < 1e-9 * (1.0 + want.norm()));
}

TEST_CASE("backward matches central finite differences") {
  Camera cam = front_camera();
  GaussianCloud cloud = random_cloud(6, 31);
  Image up_color(32, 32, 3);
  Image up_alpha(32, 32, 1);
  Rng rng(77);
  for (double& v : up_color.data) v = rng.uniform(-1, 1);
  for (double& v : up_alpha.data) v = rng.uniform(-1, 1);

  auto loss = [&](const GaussianCloud& c) {
    RenderOutput out = render(c, cam, kBg);
    double l = 0;
    for (size_t i = 0; i < out.color.data.size(); ++i)
      l += out.color.data[i] * up_color.data[i];
    for (size_t i = 0; i < out.alpha.data.size(); ++i)
      l += out.alpha.data[i] * up_alpha.data[i];
    return l;
  };

  CloudGrads grads = render_backward(cloud, cam, kBg, up_color, &up_alpha);
  const double h = 1e-4;
  auto check_partial = [&](double* param, double analytic) {
    double saved = *param;
    *param = saved + h;
    double up_l = loss(cloud);
    *param = saved - h;
    double down_l = loss(cloud);
    *param = saved;
    double fd = (up_l - down_l) / (2 * h);
    double tol = 1e-3 * std::max(std::abs(fd), std::abs(analytic)) + 1e-6;
    CHECK(std::abs(fd - analytic) < tol);
  };

  for (size_t i = 0; i < cloud.size(); ++i) {
    Gaussian& g = cloud.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      check_partial(&g.center[k], grads.center[i][k]);
      check_partial(&g.scale[k], grads.scale[i][k]);
      check_partial(&g.color[k], grads.color[i][k]);
    }
    check_partial(&g.opacity, grads.opacity[i]);
    double* q = g.rotation.coeffs().data();  // (x, y, z, w) storage
    check_partial(&q[3], grads.rotation[i][0]);
    for (int k = 0; k < 3; ++k) check_partial(&q[k], grads.rotation[i][k + 1]);
  }
}

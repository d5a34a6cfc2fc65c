#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gen3d/config.hpp"
#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"
#include "gen3d/rng.hpp"
#include "gen3d/scheduler.hpp"

using namespace gen3d;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

Image random_image(int h, int w, int c, uint64_t seed) {
  Image img(h, w, c);
  Rng rng(seed);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
    int k = r.uniform_int(1, 6);
    CHECK(k >= 1);
    CHECK(k <= 6);
  }

  // Named substreams decorrelate: same base seed, different names.
  Rng s1 = Rng::substream(5, "alpha");
  Rng s2 = Rng::substream(5, "beta");
  CHECK(Rng::derive_seed(5, "alpha") != Rng::derive_seed(5, "beta"));
  CHECK(s1.uniform() != s2.uniform());

  // Normal moments over a large draw.
  Rng n(11);
  double sum = 0, sum2 = 0;
  const int count = 20000;
  for (int i = 0; i < count; ++i) {
    double v = n.normal();
    sum += v;
    sum2 += v * v;
  }
  CHECK(std::abs(sum / count) < 0.03);
  CHECK(std::abs(sum2 / count - 1.0) < 0.05);
}

TEST_CASE("image f32 round trip and stack") {
  Image img = random_image(5, 7, 3, 1);
  // f32 storage quantizes to float; round-trip of float-representable data
  // is exact.
  for (double& v : img.data) v = static_cast<float>(v);
  fs::path p = temp_file("gen3d_test_img.f32");
  save_f32(p, img);
  Image back = load_f32(p);
  REQUIRE(back.same_shape(img));
  CHECK(back.data == img.data);

  MultiViewImages views{random_image(4, 6, 3, 2), random_image(4, 6, 3, 3)};
  for (Image& v : views)
    for (double& x : v.data) x = static_cast<float>(x);
  fs::path ps = temp_file("gen3d_test_stack.f32");
  save_f32_stack(ps, views);
  MultiViewImages back_views = load_f32_stack(ps);
  REQUIRE(back_views.size() == 2);
  CHECK(back_views[0].data == views[0].data);
  CHECK(back_views[1].data == views[1].data);
  fs::remove(p);
  fs::remove(ps);
}

TEST_CASE("image downsample2x averages quads") {
  Image img(2, 2, 1);
  img.at(0, 0, 0) = 1.0;
  img.at(0, 1, 0) = 2.0;
  img.at(1, 0, 0) = 3.0;
  img.at(1, 1, 0) = 4.0;
  Image half = downsample2x(img);
  REQUIRE(half.height == 1);
  REQUIRE(half.width == 1);
  CHECK(half.at(0, 0, 0) == doctest::Approx(2.5));
}

TEST_CASE("config parsing, overrides, unknown keys") {
  Config cfg({{"alpha", "1.5"}, {"name", "x"}, {"count", "3"}, {"flag", "false"}});
  CHECK(cfg.get_double("alpha") == doctest::Approx(1.5));
  CHECK(cfg.get_int("count") == 3);
  CHECK(cfg.get_bool("flag") == false);

  cfg.apply_override("count=9");
  CHECK(cfg.get_int("count") == 9);
  CHECK_THROWS(cfg.apply_override("bogus=1"));

  fs::path p = temp_file("gen3d_test_cfg.txt");
  std::ofstream(p) << "alpha = 2.25\nname = hello\n";
  cfg.load_file(p.string());
  CHECK(cfg.get_double("alpha") == doctest::Approx(2.25));
  CHECK(cfg.get_string("name") == "hello");
  fs::remove(p);
}

TEST_CASE("orbit camera positions") {
  CameraIntrinsics intr = CameraIntrinsics::standard(64, 64);
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();

  Camera c0 = make_orbit_camera(0, 0, 2, origin, intr);
  CHECK((c0.position() - Eigen::Vector3d(0, 0, 2)).norm() < 1e-12);

  Camera c90 = make_orbit_camera(90, 0, 2, origin, intr);
  CHECK((c90.position() - Eigen::Vector3d(2, 0, 0)).norm() < 1e-12);

  // Hand-evaluated trig for an off-axis pose.
  double a = 30 * M_PI / 180, e = 15 * M_PI / 180, r = 1.5;
  Eigen::Vector3d expect(r * std::cos(e) * std::sin(a), r * std::sin(e),
                         r * std::cos(e) * std::cos(a));
  Camera c = make_orbit_camera(30, 15, 1.5, origin, intr);
  CHECK((c.position() - expect).norm() < 1e-12);

  CHECK_THROWS_AS(make_orbit_camera(0, 90, 2, origin, intr), std::invalid_argument);

  // Look-at: the target projects to the principal point.
  Projection pr = project_point(c, origin);
  CHECK(pr.uv.x() == doctest::Approx(intr.cx).epsilon(1e-9));
  CHECK(pr.uv.y() == doctest::Approx(intr.cy).epsilon(1e-9));
}

TEST_CASE("projection depth, errors and round trip") {
  CameraIntrinsics intr = CameraIntrinsics::standard(64, 48);
  Camera cam = make_orbit_camera(40, -10, 2.5, Eigen::Vector3d(0.1, 0.2, -0.3), intr);

  // One unit along the optical axis has depth exactly 1.
  Eigen::Vector3d p_axis = cam.to_world(Eigen::Vector3d(0, 0, 1));
  CHECK(project_point(cam, p_axis).depth == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(project_point(cam, cam.position()), std::domain_error);

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (cam.to_camera(p).z() <= 1e-6) continue;
    Projection pr = project_point(cam, p);
    Eigen::Vector3d back = unproject_point(cam, pr.uv, pr.depth);
    CHECK((back - p).norm() < 1e-9 * (1.0 + p.norm()));
  }
}

TEST_CASE("rig layout and determinism") {
  CameraIntrinsics intr = CameraIntrinsics::standard(32, 32);
  ViewRig rig = build_rig(45, 2.5, intr, 12, 9);
  REQUIRE(rig.novels.size() == 12);

  auto azimuth_of = [](const Camera& cam) {
    Eigen::Vector3d p = cam.position();
    return std::atan2(p.x(), p.z()) * 180 / M_PI;
  };
  double ctx = azimuth_of(rig.context);
  for (int i = 0; i < 4; ++i) {
    double rel = std::fmod(azimuth_of(rig.targets[i]) - ctx + 720.0, 360.0);
    CHECK(rel == doctest::Approx(90.0 * i).epsilon(1e-9));
    CHECK(std::abs(rig.targets[i].position().y()) < 1e-12);  // elevation 0
  }
  for (const Camera& n : rig.novels) {
    double el = std::asin(n.position().normalized().y()) * 180 / M_PI;
    CHECK(el >= -30.0);
    CHECK(el <= 30.0);
  }

  ViewRig again = build_rig(45, 2.5, intr, 12, 9);
  for (size_t i = 0; i < rig.novels.size(); ++i)
    CHECK((rig.novels[i].position() - again.novels[i].position()).norm() == 0.0);
}

TEST_CASE("camera text record round trip") {
  CameraIntrinsics intr = CameraIntrinsics::standard(128, 96);
  Camera cam = make_orbit_camera(123, 17, 3.0, Eigen::Vector3d(0.2, -0.1, 0.4), intr);
  Camera back = camera_from_record(camera_to_record(cam));
  CHECK((back.position() - cam.position()).norm() < 1e-12);
  CHECK(back.intrinsics.fx == doctest::Approx(cam.intrinsics.fx));
  CHECK(back.intrinsics.width == cam.intrinsics.width);
  Projection a = project_point(cam, Eigen::Vector3d(0.3, 0.1, -0.2));
  Projection b = project_point(back, Eigen::Vector3d(0.3, 0.1, -0.2));
  CHECK((a.uv - b.uv).norm() < 1e-9);
}

TEST_CASE("feature map decode activations") {
  const double bhe = 1.3;
  RawFeatureMap raw;
  raw.views = 1;
  raw.height = 2;
  raw.width = 2;
  raw.data.assign(1 * 2 * 2 * 14, 0.0);

  GaussianCloud cloud = decode_feature_map(raw, bhe);
  REQUIRE(cloud.size() == 4);
  const double base = base_scale_for(bhe, 2);
  for (const Gaussian& g : cloud.gaussians) {
    CHECK(g.center.norm() == 0.0);                       // tanh(0)
    CHECK((g.scale - Eigen::Vector3d::Constant(base)).norm() < 1e-12);
    CHECK(std::abs(g.rotation.w() - 1.0) < 1e-12);       // identity fallback
    CHECK(g.opacity == doctest::Approx(0.5));            // logistic(0)
    CHECK((g.color - Eigen::Vector3d::Constant(0.5)).norm() < 1e-12);
  }

  // Saturated opacity channel.
  for (int i = 0; i < 4; ++i) raw.data[i * 14 + 10] = 20.0;
  cloud = decode_feature_map(raw, bhe);
  for (const Gaussian& g : cloud.gaussians) CHECK(g.opacity > 1.0 - 1e-6);

  // Non-finite input rejected.
  raw.data[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(decode_feature_map(raw, bhe));
}

TEST_CASE("decode count: 4 views at 128x128") {
  RawFeatureMap raw;
  raw.views = 4;
  raw.height = 128;
  raw.width = 128;
  raw.data.assign(size_t(4) * 128 * 128 * 14, 0.0);
  CHECK(decode_feature_map(raw, 1.3).size() == 65536);
}

TEST_CASE("covariance construction") {
  Gaussian g;
  g.scale = Eigen::Vector3d(1, 1, 1);
  CHECK((covariance3d(g) - Eigen::Matrix3d::Identity()).norm() < 1e-12);

  g.scale = Eigen::Vector3d(2, 1, 1);
  g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));
  Eigen::Matrix3d expect = Eigen::Vector3d(1, 4, 1).asDiagonal();
  CHECK((covariance3d(g) - expect).norm() < 1e-9);

  // Eigenvalues equal squared scales up to permutation.
  Rng rng(21);
  g.scale = Eigen::Vector3d(0.3, 0.7, 1.9);
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  g.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(covariance3d(g));
  Eigen::Vector3d want = g.scale.array().square();
  std::sort(want.data(), want.data() + 3);
  CHECK((es.eigenvalues() - want).norm() < 1e-9);
}

TEST_CASE("ply round trip") {
  GaussianCloud cloud;
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    Gaussian g;
    g.center = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    g.scale = Eigen::Vector3d(rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5),
                              rng.uniform(0.01, 0.5));
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    g.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    g.opacity = rng.uniform(0.05, 0.95);
    g.color = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
    cloud.gaussians.push_back(g);
  }
  fs::path p = temp_file("gen3d_test_cloud.ply");
  ply_write(cloud, p);
  GaussianCloud back = ply_read(p);
  REQUIRE(back.size() == cloud.size());
  // Storage is float32, so compare after one write-read-write cycle instead
  // of against the doubles.
  fs::path p2 = temp_file("gen3d_test_cloud2.ply");
  ply_write(back, p2);
  GaussianCloud back2 = ply_read(p2);
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back2.gaussians[i].center == back.gaussians[i].center);
    CHECK(back2.gaussians[i].scale == back.gaussians[i].scale);
    CHECK(back2.gaussians[i].opacity == back.gaussians[i].opacity);
    CHECK(back2.gaussians[i].color == back.gaussians[i].color);
  }
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK((back.gaussians[i].center - cloud.gaussians[i].center).norm() < 1e-6);
    CHECK(std::abs(back.gaussians[i].opacity - cloud.gaussians[i].opacity) < 1e-6);
  }

  GaussianCloud empty;
  ply_write(empty, p);
  CHECK(ply_read(p).size() == 0);
  fs::remove(p);
  fs::remove(p2);
}

TEST_CASE("noise schedule values") {
  // A single step with beta 0.5.
  NoiseSchedule s = linear_schedule(1, 0.5, 0.5);
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));

  NoiseSchedule full = linear_schedule(1000);
  CHECK(full.alpha_bar_at(0) == 1.0);
  // Independent direct product in long double.
  long double prod = 1.0L;
  for (int t = 1; t <= 1000; ++t) {
    long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
    prod *= 1.0L - beta;
    if (t == 1000) {
      double rel = std::abs(double(prod) - full.alpha_bar_at(1000)) / double(prod);
      CHECK(rel < 1e-12);
    }
  }
  CHECK(full.alpha_bar_at(1000) == doctest::Approx(4e-5).epsilon(0.5));
  for (int t = 1; t <= 1000; ++t) {
    CHECK(full.beta_at(t) > 0.0);
    CHECK(full.beta_at(t) < 1.0);
    CHECK(full.alpha_bar_at(t) < full.alpha_bar_at(t - 1));
    double ratio = full.alpha_bar_at(t) / full.alpha_bar_at(t - 1);
    CHECK(std::abs(ratio - full.alpha_at(t)) < 1e-14);
  }
}

TEST_CASE("forward diffusion and clean-estimate inversion") {
  NoiseSchedule s = linear_schedule(1000);
  MultiViewImages x0{random_image(4, 4, 3, 101), random_image(4, 4, 3, 102)};
  MultiViewImages eps{random_image(4, 4, 3, 201), random_image(4, 4, 3, 202)};
  for (Image& e : eps)
    for (double& v : e.data) v = 2.0 * v - 1.0;

  MultiViewImages zero = eps;
  for (Image& e : zero)
    for (double& v : e.data) v = 0.0;

  for (int t : {1, 57, 500, 1000}) {
    MultiViewImages xt0 = forward_diffuse(x0, t, zero, s);
    double root = std::sqrt(s.alpha_bar_at(t));
    for (size_t v = 0; v < x0.size(); ++v)
      for (size_t i = 0; i < x0[v].data.size(); ++i)
        CHECK(xt0[v].data[i] == doctest::Approx(root * x0[v].data[i]).epsilon(1e-12));

    MultiViewImages xt = forward_diffuse(x0, t, eps, s);
    // Scalar re-evaluation.
    double r1 = std::sqrt(1.0 - s.alpha_bar_at(t));
    for (size_t v = 0; v < x0.size(); ++v)
      for (size_t i = 0; i < x0[v].data.size(); ++i) {
        double want = root * x0[v].data[i] + r1 * eps[v].data[i];
        CHECK(std::abs(xt[v].data[i] - want) < 1e-12);
      }

    MultiViewImages rec = predict_x0(xt, eps, t, s);
    for (size_t v = 0; v < x0.size(); ++v)
      for (size_t i = 0; i < x0[v].data.size(); ++i)
        CHECK(rec[v].data[i] == doctest::Approx(x0[v].data[i]).epsilon(1e-6));
  }
}

TEST_CASE("posterior mean and variance") {
  NoiseSchedule s = linear_schedule(1000);
  MultiViewImages xt{random_image(3, 3, 3, 301)};
  MultiViewImages x0{random_image(3, 3, 3, 302)};

  // t = 1 collapses onto the clean estimate.
  Posterior p1 = posterior_mean(xt, x0, 1, s);
  CHECK(p1.var == 0.0);
  for (size_t i = 0; i < x0[0].data.size(); ++i)
    CHECK(p1.mean[0].data[i] == x0[0].data[i]);

  for (int t : {2, 100, 999}) {
    Posterior p = posterior_mean(xt, x0, t, s);
    double ab = s.alpha_bar_at(t), abp = s.alpha_bar_at(t - 1), beta = s.beta_at(t);
    double c_xt = std::sqrt(s.alpha_at(t)) * (1 - abp) / (1 - ab);
    double c_x0 = std::sqrt(abp) * beta / (1 - ab);
    CHECK(std::abs(c_xt + c_x0 * 1.0 -
                   (std::sqrt(s.alpha_at(t)) * (1 - abp) + std::sqrt(abp) * beta) / (1 - ab)) <
          1e-15);
    for (size_t i = 0; i < x0[0].data.size(); ++i) {
      double want = c_xt * xt[0].data[i] + c_x0 * x0[0].data[i];
      CHECK(std::abs(p.mean[0].data[i] - want) < 1e-12);
    }
    CHECK(p.var == doctest::Approx((1 - abp) / (1 - ab) * beta).epsilon(1e-12));
  }
}

TEST_CASE("ddpm step reduces to the mean without noise") {
  NoiseSchedule s = linear_schedule(1000);
  MultiViewImages xt{random_image(3, 3, 3, 401)};
  MultiViewImages x0{random_image(3, 3, 3, 402)};
  MultiViewImages zero = xt;
  for (double& v : zero[0].data) v = 0.0;

  MultiViewImages stepped = ddpm_step(xt, x0, 500, s, zero);
  Posterior p = posterior_mean(xt, x0, 500, s);
  for (size_t i = 0; i < xt[0].data.size(); ++i)
    CHECK(stepped[0].data[i] == doctest::Approx(p.mean[0].data[i]).epsilon(1e-12));

  // At t = 1 the noise argument is ignored.
  MultiViewImages loud = xt;
  for (double& v : loud[0].data) v = 100.0;
  MultiViewImages a = ddpm_step(xt, x0, 1, s, zero);
  MultiViewImages b = ddpm_step(xt, x0, 1, s, loud);
  CHECK(a[0].data == b[0].data);
}

TEST_CASE("ddim deterministic transitions") {
  NoiseSchedule s = linear_schedule(1000);
  MultiViewImages xt{random_image(3, 3, 3, 501)};
  MultiViewImages x0{random_image(3, 3, 3, 502)};

  // t_prev = 0 lands exactly on the clean estimate.
  MultiViewImages end = ddim_step(xt, x0, 40, 0, s, 0.0, nullptr);
  CHECK(end[0].data == x0[0].data);

  // Two eta = 0 hops with a fixed clean estimate equal the direct hop.
  MultiViewImages mid = ddim_step(xt, x0, 800, 400, s, 0.0, nullptr);
  MultiViewImages two = ddim_step(mid, x0, 400, 100, s, 0.0, nullptr);
  MultiViewImages one = ddim_step(xt, x0, 800, 100, s, 0.0, nullptr);
  for (size_t i = 0; i < one[0].data.size(); ++i)
    CHECK(two[0].data[i] == doctest::Approx(one[0].data[i]).epsilon(1e-12));

  // eta = 1 single-step variance matches the posterior variance.
  int t = 500, tp = 499;
  double ab = s.alpha_bar_at(t), abp = s.alpha_bar_at(tp);
  double sigma = std::sqrt((1 - abp) / (1 - ab) * (1 - ab / abp));
  MultiViewImages unit = xt;
  for (double& v : unit[0].data) v = 1.0;
  MultiViewImages with = ddim_step(xt, x0, t, tp, s, 1.0, &unit);
  // The deterministic part also depends on eta; isolate the noise coefficient
  // by differencing two noise magnitudes.
  MultiViewImages twice = unit;
  for (double& v : twice[0].data) v = 2.0;
  MultiViewImages with2 = ddim_step(xt, x0, t, tp, s, 1.0, &twice);
  double coeff = with2[0].data[0] - with[0].data[0];
  CHECK(coeff == doctest::Approx(sigma).epsilon(1e-9));
}

TEST_CASE("timestep subsequences") {
  std::vector<int> a = timestep_subsequence(1000, 50);
  REQUIRE(a.size() == 50);
  CHECK(a.front() == 1000);
  for (size_t i = 1; i < a.size(); ++i) CHECK(a[i] < a[i - 1]);
  CHECK(a.back() >= 1);

  std::vector<int> b = timestep_subsequence(10, 10);
  std::vector<int> want{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(b == want);

  std::vector<int> c = timestep_subsequence(1000, 1);
  CHECK(c == std::vector<int>{1000});
}

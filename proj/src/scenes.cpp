#include "gen3d/scenes.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "gen3d/rasterizer.hpp"
#include "gen3d/rng.hpp"

namespace gen3d {

namespace fs = std::filesystem;
using nlohmann::json;

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "sphere") return SceneKind::sphere;
  if (name == "box") return SceneKind::box;
  if (name == "two_blob") return SceneKind::two_blob;
  throw std::invalid_argument("unknown scene kind: " + name);
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::sphere: return "sphere";
    case SceneKind::box: return "box";
    case SceneKind::two_blob: return "two_blob";
  }
  throw std::logic_error("bad scene kind");
}

double SurfaceDescriptor::sdf(const Eigen::Vector3d& p) const {
  switch (kind) {
    case SceneKind::sphere:
      return p.norm() - extent;
    case SceneKind::box: {
      Eigen::Vector3d q = p.cwiseAbs() - Eigen::Vector3d::Constant(extent);
      double outside = q.cwiseMax(0.0).norm();
      double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
    case SceneKind::two_blob: {
      double da = (p - blob_a).norm() - blob_radius;
      double db = (p - blob_b).norm() - blob_radius;
      return std::min(da, db);
    }
  }
  throw std::logic_error("bad scene kind");
}

namespace {

Eigen::Vector3d gradient_color(const Eigen::Vector3d& p, double extent) {
  // Position-based gradient keeps views distinguishable without textures.
  Eigen::Vector3d c = p / (2.0 * extent) + Eigen::Vector3d::Constant(0.5);
  return c.cwiseMax(0.05).cwiseMin(0.95);
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int count, double radius) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(count);
  const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double y = 1.0 - 2.0 * (i + 0.5) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    double phi = ga * i;
    pts.emplace_back(radius * r * std::cos(phi), radius * y,
                     radius * r * std::sin(phi));
  }
  return pts;
}

std::vector<Eigen::Vector3d> box_face_grid(int count, double half) {
  // Six faces, each an n x n grid; n chosen so 6 n^2 >= count.
  int n = 1;
  while (6 * n * n < count) ++n;
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(6 * n * n);
  for (int face = 0; face < 6; ++face) {
    int axis = face / 2;
    double sign = (face % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double u = half * (2.0 * (i + 0.5) / n - 1.0);
        double v = half * (2.0 * (j + 0.5) / n - 1.0);
        Eigen::Vector3d p;
        p[axis] = sign * half;
        p[(axis + 1) % 3] = u;
        p[(axis + 2) % 3] = v;
        pts.push_back(p);
      }
    }
  }
  pts.resize(count);
  return pts;
}

double nearest_neighbor_spacing(const std::vector<Eigen::Vector3d>& pts) {
  if (pts.size() < 2) return 1.0;
  double total = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      best = std::min(best, (pts[i] - pts[j]).squaredNorm());
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(pts.size());
}

GaussianCloud cloud_from_points(const std::vector<Eigen::Vector3d>& pts,
                                double extent) {
  double spacing = nearest_neighbor_spacing(pts);
  GaussianCloud cloud;
  cloud.gaussians.reserve(pts.size());
  for (const auto& p : pts) {
    Gaussian g;
    g.center = p;
    g.scale = Eigen::Vector3d::Constant(2.0 * spacing);
    g.opacity = 0.95;
    g.color = gradient_color(p, extent);
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

}  // namespace

std::vector<PointSample> SurfaceDescriptor::sample(int count,
                                                   uint64_t seed) const {
  Rng rng = Rng::substream(seed, "surface-samples");
  std::vector<PointSample> out;
  out.reserve(count);
  auto sphere_point = [&rng]() {
    // Marsaglia rejection keeps the draw exactly uniform on the sphere.
    while (true) {
      double a = rng.uniform(-1.0, 1.0);
      double b = rng.uniform(-1.0, 1.0);
      double s = a * a + b * b;
      if (s >= 1.0 || s == 0.0) continue;
      double m = 2.0 * std::sqrt(1.0 - s);
      return Eigen::Vector3d(a * m, b * m, 1.0 - 2.0 * s);
    }
  };
  switch (kind) {
    case SceneKind::sphere:
      for (int i = 0; i < count; ++i) {
        Eigen::Vector3d n = sphere_point();
        out.push_back({extent * n, n});
      }
      break;
    case SceneKind::box:
      for (int i = 0; i < count; ++i) {
        int face = rng.uniform_int(0, 5);
        int axis = face / 2;
        double sign = (face % 2 == 0) ? 1.0 : -1.0;
        Eigen::Vector3d p;
        p[axis] = sign * extent;
        p[(axis + 1) % 3] = rng.uniform(-extent, extent);
        p[(axis + 2) % 3] = rng.uniform(-extent, extent);
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n[axis] = sign;
        out.push_back({p, n});
      }
      break;
    case SceneKind::two_blob:
      while (static_cast<int>(out.size()) < count) {
        Eigen::Vector3d n = sphere_point();
        const Eigen::Vector3d& c = rng.uniform() < 0.5 ? blob_a : blob_b;
        Eigen::Vector3d p = c + blob_radius * n;
        // Reject the cap swallowed by the other blob so samples stay on the
        // union surface.
        if (sdf(p) < -1e-9) continue;
        out.push_back({p, n});
      }
      break;
  }
  return out;
}

SceneData make_scene(const SceneSpec& spec) {
  if (spec.splat_count <= 0) throw std::invalid_argument("splat_count <= 0");
  if (spec.extent <= 0.0) throw std::invalid_argument("extent <= 0");
  SceneData data;
  data.surface.kind = spec.kind;
  data.surface.extent = spec.extent;
  switch (spec.kind) {
    case SceneKind::sphere:
      data.cloud = cloud_from_points(
          fibonacci_sphere(spec.splat_count, spec.extent), spec.extent);
      break;
    case SceneKind::box:
      data.cloud = cloud_from_points(
          box_face_grid(spec.splat_count, spec.extent), spec.extent);
      break;
    case SceneKind::two_blob: {
      double r = 0.55 * spec.extent;
      Eigen::Vector3d a(-0.45 * spec.extent, 0.0, 0.0);
      Eigen::Vector3d b(0.45 * spec.extent, 0.15 * spec.extent, 0.0);
      data.surface.blob_radius = r;
      data.surface.blob_a = a;
      data.surface.blob_b = b;
      auto pa = fibonacci_sphere((spec.splat_count + 1) / 2, r);
      auto pb = fibonacci_sphere(spec.splat_count / 2, r);
      std::vector<Eigen::Vector3d> pts;
      pts.reserve(spec.splat_count);
      for (const auto& p : pa)
        if (data.surface.sdf(a + p) > -1e-9) pts.push_back(a + p);
      for (const auto& p : pb)
        if (data.surface.sdf(b + p) > -1e-9) pts.push_back(b + p);
      data.cloud = cloud_from_points(pts, spec.extent);
      break;
    }
  }
  return data;
}

namespace {

Image render_view(const GaussianCloud& cloud, const Camera& cam) {
  RenderOutput r = render(cloud, cam, Eigen::Vector3d(1, 1, 1));
  return std::move(r.color);
}

json spec_to_json(const SceneSpec& spec, const DatasetConfig& cfg) {
  return json{{"kind", to_string(spec.kind)},
              {"splat_count", spec.splat_count},
              {"seed", spec.seed},
              {"extent", spec.extent},
              {"box_half_extent", cfg.box_half_extent}};
}

SceneSpec spec_from_json(const json& j) {
  SceneSpec spec;
  spec.kind = scene_kind_from_string(j.at("kind").get<std::string>());
  spec.splat_count = j.at("splat_count").get<int>();
  spec.seed = j.at("seed").get<uint64_t>();
  spec.extent = j.at("extent").get<double>();
  return spec;
}

std::string scene_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", index);
  return buf;
}

std::string novel_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "novel_%02d.f32", index);
  return buf;
}

}  // namespace

std::vector<DatasetRecord> make_dataset(const std::vector<SceneSpec>& specs,
                                        const DatasetConfig& cfg,
                                        const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<DatasetRecord> records;
  records.reserve(specs.size());
  json manifest;
  manifest["resolution"] = cfg.resolution;
  manifest["novel_count"] = cfg.novel_count;
  manifest["camera_radius"] = cfg.camera_radius;
  manifest["box_half_extent"] = cfg.box_half_extent;
  manifest["seed"] = cfg.seed;
  manifest["scenes"] = json::array();

  for (size_t i = 0; i < specs.size(); ++i) {
    const SceneSpec& spec = specs[i];
    DatasetRecord rec;
    rec.spec = spec;
    SceneData scene = make_scene(spec);
    rec.gt_cloud = scene.cloud;

    uint64_t rig_seed = Rng::derive_seed(cfg.seed, scene_dir_name(int(i)));
    Rng rig_rng = Rng::substream(rig_seed, "context-azimuth");
    double ctx_az = rig_rng.uniform(0.0, 360.0);
    rec.rig = build_rig(ctx_az, cfg.camera_radius,
                        CameraIntrinsics::standard(cfg.resolution, cfg.resolution),
                        cfg.novel_count, rig_seed);

    rec.context = render_view(scene.cloud, rec.rig.context);
    for (const auto& cam : rec.rig.targets)
      rec.targets.push_back(render_view(scene.cloud, cam));
    for (const auto& cam : rec.rig.novels)
      rec.novels.push_back(render_view(scene.cloud, cam));

    fs::path dir = out_dir / scene_dir_name(int(i));
    fs::create_directories(dir);
    save_f32(dir / "context.f32", rec.context);
    for (size_t t = 0; t < rec.targets.size(); ++t)
      save_f32(dir / ("target_" + std::to_string(t) + ".f32"), rec.targets[t]);
    for (size_t n = 0; n < rec.novels.size(); ++n)
      save_f32(dir / novel_file_name(int(n)), rec.novels[n]);

    std::vector<Camera> cams;
    cams.push_back(rec.rig.context);
    cams.insert(cams.end(), rec.rig.targets.begin(), rec.rig.targets.end());
    cams.insert(cams.end(), rec.rig.novels.begin(), rec.rig.novels.end());
    save_cameras(dir / "cameras.txt", cams);

    ply_write(scene.cloud, dir / "gt.ply");

    std::ofstream sf(dir / "spec.json");
    sf << spec_to_json(spec, cfg).dump(2) << "\n";

    manifest["scenes"].push_back(scene_dir_name(int(i)));
    records.push_back(std::move(rec));
  }

  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  return records;
}

DatasetConfig load_dataset_config(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + dir.string());
  json manifest = json::parse(mf);
  DatasetConfig cfg;
  cfg.resolution = manifest.at("resolution").get<int>();
  cfg.novel_count = manifest.at("novel_count").get<int>();
  cfg.camera_radius = manifest.at("camera_radius").get<double>();
  cfg.box_half_extent = manifest.at("box_half_extent").get<double>();
  cfg.seed = manifest.at("seed").get<uint64_t>();
  return cfg;
}

std::vector<DatasetRecord> load_dataset(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + dir.string());
  json manifest = json::parse(mf);
  int novel_count = manifest.at("novel_count").get<int>();
  double radius = manifest.at("camera_radius").get<double>();

  std::vector<DatasetRecord> records;
  for (const auto& name : manifest.at("scenes")) {
    fs::path sdir = dir / name.get<std::string>();
    DatasetRecord rec;
    std::ifstream sf(sdir / "spec.json");
    rec.spec = spec_from_json(json::parse(sf));

    rec.context = load_f32(sdir / "context.f32");
    for (int t = 0; t < 4; ++t)
      rec.targets.push_back(
          load_f32(sdir / ("target_" + std::to_string(t) + ".f32")));
    for (int n = 0; n < novel_count; ++n)
      rec.novels.push_back(load_f32(sdir / novel_file_name(n)));

    std::vector<Camera> cams = load_cameras(sdir / "cameras.txt");
    if (cams.size() != size_t(5 + novel_count))
      throw std::runtime_error("unexpected camera count in " + sdir.string());
    rec.rig.context = cams[0];
    for (int t = 0; t < 4; ++t) rec.rig.targets[t] = cams[1 + t];
    rec.rig.novels.assign(cams.begin() + 5, cams.end());
    rec.rig.target_point = Eigen::Vector3d::Zero();
    rec.rig.radius = radius;

    rec.gt_cloud = ply_read(sdir / "gt.ply");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace gen3d

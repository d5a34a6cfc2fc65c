#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"
#include "gen3d/metrics.hpp"

namespace gen3d {

enum class SceneKind { sphere, box, two_blob };

SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

struct SceneSpec {
  SceneKind kind = SceneKind::sphere;
  int splat_count = 1024;
  uint64_t seed = 0;
  double extent = 1.0;
};

// Analytic surface the splats were placed on: exact signed distance and
// seeded uniform surface samples for geometry metrics.
struct SurfaceDescriptor {
  SceneKind kind = SceneKind::sphere;
  double extent = 1.0;
  double blob_radius = 0.0;                       // two_blob only
  Eigen::Vector3d blob_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d blob_b = Eigen::Vector3d::Zero();

  double sdf(const Eigen::Vector3d& p) const;
  std::vector<PointSample> sample(int count, uint64_t seed) const;
};

struct SceneData {
  GaussianCloud cloud;
  SurfaceDescriptor surface;
};

// Splats on the analytic surface (Fibonacci sphere / box-face grid / union of
// two offset spheres), isotropic scales = 2 x nearest-neighbor spacing,
// opacity 0.95, colors from the position gradient.
SceneData make_scene(const SceneSpec& spec);

struct DatasetConfig {
  int resolution = 64;
  int novel_count = 12;
  double camera_radius = 2.5;
  double box_half_extent = 1.3;  // prediction box, also echoed in spec.json
  uint64_t seed = 0;
};

struct DatasetRecord {
  SceneSpec spec;
  ViewRig rig;
  Image context;
  MultiViewImages targets;  // 4
  MultiViewImages novels;
  GaussianCloud gt_cloud;
};

// Renders context/target/novel views over a white background and writes
// scene_%03d/{context.f32, target_%d.f32, novel_%02d.f32, cameras.txt,
// gt.ply, spec.json} plus a top-level manifest.json.
std::vector<DatasetRecord> make_dataset(const std::vector<SceneSpec>& specs,
                                        const DatasetConfig& cfg,
                                        const std::filesystem::path& out_dir);

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir);

DatasetConfig load_dataset_config(const std::filesystem::path& dir);

}  // namespace gen3d

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gen3d {

// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  // 50 degree vertical field of view, square pixels, centered principal point.
  static CameraIntrinsics standard(int width, int height);
};

// World-to-camera rigid transform; camera frame is +x right, +y down,
// +z forward (points in front of the camera have positive z).
struct Camera {
  CameraIntrinsics intrinsics;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation * p_world + translation;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const {
    return rotation.conjugate() * (p_cam - translation);
  }
  Eigen::Vector3d position() const { return to_world(Eigen::Vector3d::Zero()); }
};

// Context camera plus 4 target views at relative azimuths {0,90,180,270} and
// zero elevation, plus optional novel views.
struct ViewRig {
  Camera context;
  std::array<Camera, 4> targets;
  std::vector<Camera> novels;
  Eigen::Vector3d target_point = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

// World convention: right handed, +Y up, azimuth 0 places the camera on +Z.
// position = target + radius * (cos e * sin a, sin e, cos e * cos a).
// Throws std::invalid_argument for |elevation| >= 89.9 (up vector degenerate).
Camera make_orbit_camera(double azimuth_deg, double elevation_deg, double radius,
                         const Eigen::Vector3d& target, const CameraIntrinsics& intr);

// Targets at context_azimuth + {0,90,180,270}, elevation 0; novel views drawn
// with seeded uniform azimuth in [0,360) and elevation in [-30,30].
ViewRig build_rig(double context_azimuth_deg, double radius,
                  const CameraIntrinsics& intr, int novel_count, uint64_t seed);

struct Projection {
  Eigen::Vector2d uv;
  double depth = 0.0;
};

// Throws std::domain_error for points with camera-frame z <= 1e-8.
Projection project_point(const Camera& cam, const Eigen::Vector3d& p);

Eigen::Vector3d unproject_point(const Camera& cam, const Eigen::Vector2d& uv,
                                double depth);

// Plain-text camera record: fx fy cx cy width height qw qx qy qz tx ty tz.
std::string camera_to_record(const Camera& cam);
Camera camera_from_record(const std::string& line);
void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

}  // namespace gen3d

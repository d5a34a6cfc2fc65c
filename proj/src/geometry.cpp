#include "gen3d/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gen3d/rng.hpp"

namespace gen3d {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

CameraIntrinsics CameraIntrinsics::standard(int width, int height) {
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  const double f = 0.5 * height / std::tan(0.5 * 50.0 * kDegToRad);
  intr.fx = f;
  intr.fy = f;
  intr.cx = 0.5 * width;
  intr.cy = 0.5 * height;
  return intr;
}

Camera make_orbit_camera(double azimuth_deg, double elevation_deg, double radius,
                         const Eigen::Vector3d& target, const CameraIntrinsics& intr) {
  if (!(radius > 0.0)) throw std::invalid_argument("orbit radius must be positive");
  if (std::abs(elevation_deg) >= 89.9)
    throw std::invalid_argument("orbit elevation too close to the pole, up vector degenerate");
  const double a = azimuth_deg * kDegToRad;
  const double e = elevation_deg * kDegToRad;
  const Eigen::Vector3d position =
      target + radius * Eigen::Vector3d(std::cos(e) * std::sin(a), std::sin(e),
                                        std::cos(e) * std::cos(a));

  const Eigen::Vector3d forward = (target - position).normalized();
  const Eigen::Vector3d up(0.0, 1.0, 0.0);
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);  // unit by construction

  Eigen::Matrix3d r_world_to_cam;
  r_world_to_cam.row(0) = right;
  r_world_to_cam.row(1) = down;
  r_world_to_cam.row(2) = forward;

  Camera cam;
  cam.intrinsics = intr;
  cam.rotation = Eigen::Quaterniond(r_world_to_cam).normalized();
  cam.translation = -(r_world_to_cam * position);
  return cam;
}

ViewRig build_rig(double context_azimuth_deg, double radius,
                  const CameraIntrinsics& intr, int novel_count, uint64_t seed) {
  if (novel_count < 0) throw std::invalid_argument("novel_count must be >= 0");
  ViewRig rig;
  rig.target_point = Eigen::Vector3d::Zero();
  rig.radius = radius;
  rig.context = make_orbit_camera(context_azimuth_deg, 0.0, radius, rig.target_point, intr);
  for (int i = 0; i < 4; ++i)
    rig.targets[i] = make_orbit_camera(context_azimuth_deg + 90.0 * i, 0.0, radius,
                                       rig.target_point, intr);
  Rng rng = Rng::substream(seed, "rig-novels");
  rig.novels.reserve(novel_count);
  for (int i = 0; i < novel_count; ++i) {
    const double az = rng.uniform(0.0, 360.0);
    const double el = rng.uniform(-30.0, 30.0);
    rig.novels.push_back(make_orbit_camera(az, el, radius, rig.target_point, intr));
  }
  return rig;
}

Projection project_point(const Camera& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d pc = cam.to_camera(p);
  if (pc.z() <= 1e-8) throw std::domain_error("point behind camera");
  Projection out;
  out.uv.x() = cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx;
  out.uv.y() = cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy;
  out.depth = pc.z();
  return out;
}

Eigen::Vector3d unproject_point(const Camera& cam, const Eigen::Vector2d& uv,
                                double depth) {
  const Eigen::Vector3d pc(depth * (uv.x() - cam.intrinsics.cx) / cam.intrinsics.fx,
                           depth * (uv.y() - cam.intrinsics.cy) / cam.intrinsics.fy,
                           depth);
  return cam.to_world(pc);
}

std::string camera_to_record(const Camera& cam) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << cam.intrinsics.fx << " " << cam.intrinsics.fy << " " << cam.intrinsics.cx
     << " " << cam.intrinsics.cy << " " << cam.intrinsics.width << " "
     << cam.intrinsics.height << " " << cam.rotation.w() << " " << cam.rotation.x()
     << " " << cam.rotation.y() << " " << cam.rotation.z() << " "
     << cam.translation.x() << " " << cam.translation.y() << " "
     << cam.translation.z();
  return os.str();
}

Camera camera_from_record(const std::string& line) {
  std::istringstream is(line);
  Camera cam;
  double qw, qx, qy, qz;
  if (!(is >> cam.intrinsics.fx >> cam.intrinsics.fy >> cam.intrinsics.cx >>
        cam.intrinsics.cy >> cam.intrinsics.width >> cam.intrinsics.height >> qw >>
        qx >> qy >> qz >> cam.translation.x() >> cam.translation.y() >>
        cam.translation.z()))
    throw std::runtime_error("malformed camera record: " + line);
  cam.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
  return cam;
}

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  for (const Camera& c : cams) out << camera_to_record(c) << "\n";
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<Camera> cams;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    cams.push_back(camera_from_record(line));
  }
  return cams;
}

}  // namespace gen3d

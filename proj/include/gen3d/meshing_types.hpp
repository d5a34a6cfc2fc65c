#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <vector>

namespace gen3d {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector3d> colors;   // per vertex, [0,1]
  std::vector<Eigen::Vector3d> normals;  // per vertex, unit

  bool empty() const { return faces.empty(); }
};

// ASCII OBJ with vertex-color extended `v x y z r g b` lines plus vn/f records.
void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace gen3d

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"
#include "gen3d/meshing_types.hpp"

namespace gen3d {

// Truncated signed distance volume sampled on an N^3 lattice. Sample point
// (i,j,k) sits at origin + (i,j,k) * voxel_size; truncation is 4 voxels;
// weight 0 marks an unobserved sample.
struct TsdfVolume {
  int resolution = 0;
  double voxel_size = 0.0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<double> tsdf;    // in [-1, 1], normalized by truncation
  std::vector<double> weight;  // >= 0
  std::vector<Eigen::Vector3d> color;

  TsdfVolume(int res, double vox, const Eigen::Vector3d& orig)
      : resolution(res), voxel_size(vox), origin(orig),
        tsdf(static_cast<size_t>(res) * res * res, 0.0),
        weight(tsdf.size(), 0.0),
        color(tsdf.size(), Eigen::Vector3d::Zero()) {}

  double truncation() const { return 4.0 * voxel_size; }
  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(k) * resolution + j) * resolution + i;
  }
  Eigen::Vector3d point(int i, int j, int k) const {
    return origin + voxel_size * Eigen::Vector3d(i, j, k);
  }
};

// Weighted-average fusion of one depth (+ optional color) observation.
// depth 0 means no hit; samples more than one truncation behind the surface
// are left untouched. pixel_weight (1-channel, optional) scales each pixel's
// vote, e.g. to down-weight grazing observations.
void integrate(TsdfVolume& vol, const Image& depth, const Image* color,
               const Camera& cam, const Image* pixel_weight = nullptr);

// Zero-crossing extraction between observed samples; vertex colors are
// interpolated from the accumulators, normals from the tsdf gradient.
TriangleMesh marching_cubes(const TsdfVolume& vol, double iso = 0.0);

struct MeshExtractConfig {
  int view_count = 36;
  int volume_resolution = 128;
  int image_size = 128;
  double orbit_radius = 0.0;   // 0 = auto from the cloud bounds
  double margin = 0.1;         // volume padding, fraction of the bbox extent
  double alpha_mask = 0.5;     // depth suppressed where alpha < this
};

// Renders depth + color from cameras on Fibonacci-sphere directions around
// the cloud, fuses with incidence-weighted votes and extracts. Deterministic.
TriangleMesh extract_mesh(const GaussianCloud& cloud, const MeshExtractConfig& cfg);

}  // namespace gen3d

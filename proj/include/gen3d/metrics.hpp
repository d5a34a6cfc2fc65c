#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gen3d/image.hpp"
#include "gen3d/meshing_types.hpp"

namespace gen3d {

struct PointSample {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// 10 log10(1 / MSE); identical images return +infinity.
double psnr(const Image& a, const Image& b);

// Gaussian-window SSIM (11 taps, sigma 1.5, C1=0.01^2, C2=0.03^2). The
// multi-scale variant is a 3-level dyadic geometric mean.
double ssim(const Image& a, const Image& b, int window = 11, bool multi_scale = false);

// Exact nearest-neighbor queries over a point set; uniform grid with an
// expanding-shell search, equivalent to brute force.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(const std::vector<Eigen::Vector3d>& points);
  // Returns the index of the closest point and its distance.
  std::pair<int, double> query(const Eigen::Vector3d& p) const;

 private:
  std::vector<Eigen::Vector3d> points_;
  Eigen::Vector3d origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::vector<int>> cells_;
  size_t cell_index(int ix, int iy, int iz) const;
};

// 1/2 (mean_a min_b + mean_b min_a) of Euclidean distances.
double chamfer(const std::vector<PointSample>& a, const std::vector<PointSample>& b);

// Mean exact point-to-triangle distance.
double p2s(const std::vector<PointSample>& points, const TriangleMesh& mesh);

// Harmonic mean of distance-thresholded precision and recall.
double f_score(const std::vector<PointSample>& a, const std::vector<PointSample>& b,
               double tau = 0.01);

// Mean |cos| between each point's normal and its nearest neighbor's, both ways.
double normal_consistency(const std::vector<PointSample>& a,
                          const std::vector<PointSample>& b);

struct IcpResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;
  double rms = 0.0;
  int iterations = 0;
  std::vector<PointSample> aligned_source;  // normalized + transformed
  std::vector<PointSample> normalized_target;
};

// Both sets are normalized to [-1,1] by their own bounding boxes (uniform
// scale), then point-to-point ICP with a similarity (rotation + uniform scale
// + translation) solve per iteration — the scale term absorbs the residual
// bbox-extent mismatch the per-set normalization leaves behind. Max 50
// iterations, stop when the RMS improvement drops below 1e-6.
IcpResult icp_align(const std::vector<PointSample>& source,
                    const std::vector<PointSample>& target);

// Area-weighted uniform surface sampling, seeded.
std::vector<PointSample> sample_mesh_points(const TriangleMesh& mesh, int count,
                                            uint64_t seed);

double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b, const Eigen::Vector3d& c);

}  // namespace gen3d

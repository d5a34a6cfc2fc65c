#pragma once

#include <Eigen/Dense>

#include "gen3d/geometry.hpp"
#include "gen3d/gsplat.hpp"
#include "gen3d/image.hpp"

namespace gen3d {

struct RenderOutput {
  Image color;  // H x W x 3
  Image alpha;  // H x W x 1
  Image depth;  // H x W x 1, alpha-weighted expected camera-frame depth
};

// Forward EWA splatting: project centers, dilate the 2D covariance by
// 0.3 px^2, cull behind z = 0.01 or with the 3-sigma footprint off screen,
// sort front to back (ties by cloud index) and alpha-composite per pixel with
// a 0.99 alpha cap, 1/255 contribution cutoff and 1e-4 transmittance early
// out. Pixel samples sit at (x + 0.5, y + 0.5).
RenderOutput render(const GaussianCloud& cloud, const Camera& cam,
                    const Eigen::Vector3d& background);

// Same pipeline with color compositing skipped.
Image render_depth_only(const GaussianCloud& cloud, const Camera& cam);

// Exact reverse-mode gradients of the forward compositing w.r.t. every splat
// parameter. Sorting, culling and the cap/cutoff gates are frozen at their
// forward values; depth is not differentiated. upstream_alpha may be null.
CloudGrads render_backward(const GaussianCloud& cloud, const Camera& cam,
                           const Eigen::Vector3d& background,
                           const Image& upstream_color, const Image* upstream_alpha);

}  // namespace gen3d

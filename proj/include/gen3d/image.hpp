#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace gen3d {

// Dense row-major H x W x C grid of doubles. Values are unconstrained during
// diffusion; renders and dataset images live in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

using MultiViewImages = std::vector<Image>;

bool same_shape(const MultiViewImages& a, const MultiViewImages& b);

// Raw float32 grid interchange: text header line "H W C\n" followed by
// H*W*C little-endian floats.
void save_f32(const std::filesystem::path& path, const Image& img);
Image load_f32(const std::filesystem::path& path);

// Multi-view stacks are stored as one grid with the views concatenated
// vertically (H_total = views * H).
void save_f32_stack(const std::filesystem::path& path, const MultiViewImages& views);
MultiViewImages load_f32_stack(const std::filesystem::path& path, int views);

// 8-bit PNG for inspection, values clamped to [0, 1]. 1 or 3 channels.
void save_png(const std::filesystem::path& path, const Image& img);

// 2x2 box downsample (odd trailing row/col averaged over what exists).
Image downsample2x(const Image& img);

}  // namespace gen3d

#include "gen3d/image.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gen3d {

bool same_shape(const MultiViewImages& a, const MultiViewImages& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_shape(b[i])) return false;
  return true;
}

void save_f32(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << img.height << " " << img.width << " " << img.channels << "\n";
  std::vector<float> buf(img.data.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(img.data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Image load_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  int h = 0, w = 0, c = 0;
  if (!(hs >> h >> w >> c) || h <= 0 || w <= 0 || c <= 0)
    throw std::runtime_error("bad .f32 header in " + path.string());
  Image img(h, w, c);
  std::vector<float> buf(img.data.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated .f32 payload in " + path.string());
  for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i];
  return img;
}

void save_f32_stack(const std::filesystem::path& path, const MultiViewImages& views) {
  if (views.empty()) throw std::runtime_error("empty view stack");
  Image stacked(static_cast<int>(views.size()) * views[0].height, views[0].width,
                views[0].channels);
  size_t off = 0;
  for (const Image& v : views) {
    if (!v.same_shape(views[0])) throw std::runtime_error("view shape mismatch");
    std::copy(v.data.begin(), v.data.end(), stacked.data.begin() + off);
    off += v.data.size();
  }
  save_f32(path, stacked);
}

MultiViewImages load_f32_stack(const std::filesystem::path& path, int views) {
  Image stacked = load_f32(path);
  if (views <= 0 || stacked.height % views != 0)
    throw std::runtime_error("stack height not divisible by view count: " + path.string());
  const int h = stacked.height / views;
  MultiViewImages out;
  out.reserve(views);
  size_t off = 0;
  for (int v = 0; v < views; ++v) {
    Image img(h, stacked.width, stacked.channels);
    std::copy_n(stacked.data.begin() + off, img.data.size(), img.data.begin());
    off += img.data.size();
    out.push_back(std::move(img));
  }
  return out;
}

namespace {

uint32_t crc32_update(uint32_t crc, const uint8_t* data, size_t n) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void put_be32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> head;
  put_be32(head, static_cast<uint32_t>(payload.size()));
  out.write(reinterpret_cast<const char*>(head.data()), 4);
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size()));
  std::vector<uint8_t> crc;
  put_be32(crc, crc32_update(0, body.data(), body.size()));
  out.write(reinterpret_cast<const char*>(crc.data()), 4);
}

// zlib stream with stored (uncompressed) deflate blocks; inspection images
// are small so compression is not worth a dependency.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> z{0x78, 0x01};
  size_t pos = 0;
  do {
    const size_t n = std::min<size_t>(raw.size() - pos, 65535);
    const bool last = pos + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<uint8_t>(n & 0xff));
    z.push_back(static_cast<uint8_t>(n >> 8));
    z.push_back(static_cast<uint8_t>(~n & 0xff));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  uint32_t a = 1, b = 0;
  for (uint8_t byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  put_be32(z, (b << 16) | a);
  return z;
}

}  // namespace

void save_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::runtime_error("save_png expects 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(img.width));
  put_be32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);           // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (1 + img.width * img.channels));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // no filter
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        raw.push_back(static_cast<uint8_t>(v * 255.0 + 0.5));
      }
  }
  write_chunk(out, "IDAT", zlib_store(raw));
  write_chunk(out, "IEND", {});
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Image downsample2x(const Image& img) {
  const int h = (img.height + 1) / 2, w = (img.width + 1) / 2;
  Image out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int yy = 2 * y + dy, xx = 2 * x + dx;
            if (yy < img.height && xx < img.width) {
              sum += img.at(yy, xx, c);
              ++n;
            }
          }
        out.at(y, x, c) = sum / n;
      }
  return out;
}

}  // namespace gen3d

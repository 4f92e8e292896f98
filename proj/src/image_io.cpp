#include "mvgen/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mvgen {

void write_ppm(const std::string& path, const std::vector<float>& chw, int height, int width) {
  size_t plane = static_cast<size_t>(height) * width;
  if (chw.size() != 3 * plane) throw std::invalid_argument("write_ppm: expected 3*H*W floats");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P6\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = (chw[c * plane + static_cast<size_t>(y) * width + x] + 1.f) * 0.5f;
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
      }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

std::vector<float> read_ppm(const std::string& path, int& height, int& width) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (magic != "P6" || maxval != 255 || width <= 0 || height <= 0)
    throw std::runtime_error(path + ": unsupported ppm");
  is.get();  // single whitespace after header
  size_t plane = static_cast<size_t>(height) * width;
  std::vector<unsigned char> raw(plane * 3);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw std::runtime_error(path + ": truncated pixel data");
  std::vector<float> chw(plane * 3);
  for (size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      chw[c * plane + i] = static_cast<float>(raw[i * 3 + c]) / 255.f * 2.f - 1.f;
  return chw;
}

std::vector<float> tile_grid(const std::vector<std::vector<float>>& images, int cell_h, int cell_w,
                             int cols, int& out_h, int& out_w) {
  if (images.empty()) throw std::invalid_argument("tile_grid: no images");
  size_t plane = static_cast<size_t>(cell_h) * cell_w;
  for (const auto& im : images)
    if (im.size() != 3 * plane) throw std::invalid_argument("tile_grid: inconsistent image size");
  constexpr int gutter = 2;
  int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
  out_h = rows * cell_h + (rows - 1) * gutter;
  out_w = cols * cell_w + (cols - 1) * gutter;
  size_t out_plane = static_cast<size_t>(out_h) * out_w;
  std::vector<float> out(3 * out_plane, 0.f);  // gutter at mid-gray
  for (size_t i = 0; i < images.size(); ++i) {
    int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    int oy = r * (cell_h + gutter), ox = c * (cell_w + gutter);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < cell_h; ++y)
        for (int x = 0; x < cell_w; ++x)
          out[ch * out_plane + static_cast<size_t>(oy + y) * out_w + ox + x] =
              images[i][ch * plane + static_cast<size_t>(y) * cell_w + x];
  }
  return out;
}

}  // namespace mvgen

#pragma once

// Minimal PPM (P6) output for eyeballing samples, plus grid tiling.
// Images here are channel-major float planes (3, H, W) with values in [-1,1].

#include <string>
#include <vector>

namespace mvgen {

void write_ppm(const std::string& path, const std::vector<float>& chw, int height, int width);

// Reads a P6 file back into [-1,1] planes; used by tests and the CLI.
std::vector<float> read_ppm(const std::string& path, int& height, int& width);

// Tiles equally sized images into a grid (row-major cell order) with a 2px
// mid-gray gutter. Returns the combined planes and its extent.
std::vector<float> tile_grid(const std::vector<std::vector<float>>& images, int cell_h, int cell_w,
                             int cols, int& out_h, int& out_w);

}  // namespace mvgen

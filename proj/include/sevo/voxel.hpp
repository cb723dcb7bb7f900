#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sevo/event_io.hpp"

namespace sevo {

inline constexpr int kVoxelBins = 5;

// H x W x B signed event accumulation over one time window. Bin centers sit
// at integer normalized times 0..B-1, so events at the window edges deposit
// their full temporal mass into the terminal bins.
struct VoxelGrid {
  int height = 0, width = 0, bins = kVoxelBins;
  uint64_t t_start = 0, t_end = 0;  // microseconds
  std::vector<double> data;         // [y][x][b], row-major
  double clipped_mass = 0;          // |mass| lost to the spatial border
  bool empty = false;
  bool normalized = false;

  double at(int y, int x, int b) const {
    return data[(static_cast<size_t>(y) * width + x) * bins + b];
  }
  double& at(int y, int x, int b) {
    return data[(static_cast<size_t>(y) * width + x) * bins + b];
  }
};

// Tri-linear deposit of polarity-signed unit mass per event: bilinear over
// the four surrounding pixels, linear over the two surrounding temporal
// bins. Spatial mass falling outside the grid is dropped (and counted),
// never re-normalized.
VoxelGrid build_voxel_grid(const std::vector<RectifiedEvent>& events, uint64_t t_start,
                           uint64_t t_end, int height, int width);

// Shifts/scales the nonzero cells to zero mean and unit population standard
// deviation; zero cells stay zero. If the nonzero std collapses (< 1e-12)
// only the mean is subtracted. All-zero grids pass through unchanged.
VoxelGrid normalize_voxel_grid(VoxelGrid grid);

// Debug tensor dump: "EVXL" magic, u32 H, W, B, then f32 data, little-endian.
void write_voxel_dump(const std::string& path, const VoxelGrid& grid);
VoxelGrid read_voxel_dump(const std::string& path);

}  // namespace sevo

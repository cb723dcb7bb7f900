#include "sevo/voxel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace sevo {

VoxelGrid build_voxel_grid(const std::vector<RectifiedEvent>& events, uint64_t t_start,
                           uint64_t t_end, int height, int width) {
  if (t_end <= t_start) {
    throw Error(ErrorCode::InvalidConfig, "voxel window must have positive duration");
  }
  VoxelGrid grid;
  grid.height = height;
  grid.width = width;
  grid.t_start = t_start;
  grid.t_end = t_end;
  grid.data.assign(static_cast<size_t>(height) * width * grid.bins, 0.0);
  grid.empty = events.empty();

  const double t_scale = static_cast<double>(grid.bins - 1) / static_cast<double>(t_end - t_start);
  const int B = grid.bins;

  for (const RectifiedEvent& e : events) {
    const double ts = static_cast<double>(e.t - t_start) * t_scale;
    const double x = e.x;
    const double y = e.y;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int b0 = static_cast<int>(std::floor(ts));
    const double fx = x - x0;
    const double fy = y - y0;
    const double ft = ts - b0;
    const double pol = e.polarity;

    for (int dy = 0; dy < 2; ++dy) {
      const int yy = y0 + dy;
      const double wy = dy ? fy : 1.0 - fy;
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const int xx = x0 + dx;
        const double wx = dx ? fx : 1.0 - fx;
        if (wx == 0.0) continue;
        const double w_spatial = wx * wy;
        if (xx < 0 || xx >= width || yy < 0 || yy >= height) {
          grid.clipped_mass += w_spatial;
          continue;
        }
        double* cell = &grid.at(yy, xx, 0);
        for (int db = 0; db < 2; ++db) {
          const int bb = b0 + db;
          const double wt = db ? ft : 1.0 - ft;
          if (wt == 0.0 || bb < 0 || bb >= B) continue;
          cell[bb] += pol * w_spatial * wt;
        }
      }
    }
  }
  return grid;
}

VoxelGrid normalize_voxel_grid(VoxelGrid grid) {
  double sum = 0, sum_sq = 0;
  size_t n = 0;
  for (double v : grid.data) {
    if (v != 0.0) {
      sum += v;
      sum_sq += v * v;
      ++n;
    }
  }
  grid.normalized = true;
  if (n == 0) return grid;
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  const double stddev = var > 0 ? std::sqrt(var) : 0.0;
  const double scale = stddev < 1e-12 ? 1.0 : 1.0 / stddev;
  for (double& v : grid.data) {
    if (v != 0.0) v = (v - mean) * scale;
  }
  return grid;
}

void write_voxel_dump(const std::string& path, const VoxelGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  out.write("EVXL", 4);
  const uint32_t dims[3] = {static_cast<uint32_t>(grid.height), static_cast<uint32_t>(grid.width),
                            static_cast<uint32_t>(grid.bins)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> f(grid.data.size());
  for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(grid.data[i]);
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

VoxelGrid read_voxel_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  char magic[4];
  uint32_t dims[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, "EVXL", 4) != 0) {
    throw Error(ErrorCode::MalformedRecord, path + ": missing EVXL header");
  }
  VoxelGrid grid;
  grid.height = static_cast<int>(dims[0]);
  grid.width = static_cast<int>(dims[1]);
  grid.bins = static_cast<int>(dims[2]);
  const size_t n = static_cast<size_t>(grid.height) * grid.width * grid.bins;
  std::vector<float> f(n);
  in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * 4));
  if (!in) {
    throw Error(ErrorCode::MalformedRecord, path + ": truncated voxel dump");
  }
  grid.data.resize(n);
  for (size_t i = 0; i < n; ++i) grid.data[i] = f[i];
  return grid;
}

}  // namespace sevo

#include "sevo/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sevo {

namespace {

// 53-bit uniform draw in [0, 1); pinned to the mt19937_64 bit stream so
// selection is reproducible across platforms.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Per-pixel absolute event mass plus its spatial gradient (central
// differences, clamped at the borders).
struct MassImage {
  int rows = 0, cols = 0;
  std::vector<double> mass, gx, gy, gmag;

  explicit MassImage(const VoxelGrid& grid) {
    rows = grid.height;
    cols = grid.width;
    const size_t n = static_cast<size_t>(rows) * cols;
    mass.resize(n);
    const int B = grid.bins;
    const double* src = grid.data.data();
    for (size_t i = 0; i < n; ++i, src += B) {
      double m = 0;
      for (int b = 0; b < B; ++b) m += std::abs(src[b]);
      mass[i] = m;
    }
    gx.resize(n);
    gy.resize(n);
    gmag.resize(n);
    for (int y = 0; y < rows; ++y) {
      const int ym = y > 0 ? y - 1 : 0;
      const int yp = y < rows - 1 ? y + 1 : rows - 1;
      for (int x = 0; x < cols; ++x) {
        const int xm = x > 0 ? x - 1 : 0;
        const int xp = x < cols - 1 ? x + 1 : cols - 1;
        const size_t i = static_cast<size_t>(y) * cols + x;
        const double dx = 0.5 * (mass[static_cast<size_t>(y) * cols + xp] -
                                 mass[static_cast<size_t>(y) * cols + xm]);
        const double dy = 0.5 * (mass[static_cast<size_t>(yp) * cols + x] -
                                 mass[static_cast<size_t>(ym) * cols + x]);
        gx[i] = dx;
        gy[i] = dy;
        gmag[i] = std::sqrt(dx * dx + dy * dy);
      }
    }
  }
};

void l2_normalize(double* v, int n) {
  double sq = 0;
  for (int i = 0; i < n; ++i) sq += v[i] * v[i];
  if (sq < 1e-24) return;  // zero vector stays zero
  const double inv = 1.0 / std::sqrt(sq);
  for (int i = 0; i < n; ++i) v[i] *= inv;
}

}  // namespace

const char* measure_status_name(MeasureStatus s) {
  switch (s) {
    case MeasureStatus::Ok: return "Ok";
    case MeasureStatus::LowScore: return "LowScore";
    case MeasureStatus::FlatBlock: return "FlatBlock";
    case MeasureStatus::Diverged: return "Diverged";
    case MeasureStatus::OutOfBounds: return "OutOfBounds";
  }
  return "Unknown";
}

Patch make_patch(double center_x, double center_y) {
  Patch p;
  int k = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx, ++k) {
      p.u[k] = center_x + dx;
      p.v[k] = center_y + dy;
    }
  }
  return p;
}

ScoreMap compute_score_map(const VoxelGrid& grid, int stride) {
  MassImage img(grid);
  ScoreMap map;
  map.stride = stride;
  map.rows = grid.height / stride;
  map.cols = grid.width / stride;
  map.data.assign(static_cast<size_t>(map.rows) * map.cols, 0.0);
  const double inv_area = 1.0 / (stride * stride);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      double sum = 0;
      for (int y = r * stride; y < (r + 1) * stride; ++y) {
        const double* row = &img.gmag[static_cast<size_t>(y) * img.cols];
        for (int x = c * stride; x < (c + 1) * stride; ++x) sum += row[x];
      }
      map.at(r, c) = sum * inv_area;
    }
  }
  return map;
}

SelectionResult select_patches(const ScoreMap& scores, int count, uint64_t seed,
                               int selection_cell) {
  if (count < 1) {
    throw Error(ErrorCode::InvalidConfig, "patch count must be >= 1");
  }
  const int rows = scores.rows, cols = scores.cols;
  const int rows1 = rows / 2, cols1 = cols / 2;

  // A pixel is usable when the 3x3 feature blocks around it stay inside
  // both pyramid levels.
  auto eligible = [&](int r, int c) {
    if (r < 1 || r > rows - 2 || c < 1 || c > cols - 2) return false;
    const int r1 = static_cast<int>(std::lround(r * 0.5));
    const int c1 = static_cast<int>(std::lround(c * 0.5));
    return r1 >= 1 && r1 <= rows1 - 2 && c1 >= 1 && c1 <= cols1 - 2;
  };

  struct Tile {
    int argmax_r = -1, argmax_c = -1;
    double weight = 0;
  };
  std::vector<Tile> tiles;
  const int tiles_r = (rows + selection_cell - 1) / selection_cell;
  const int tiles_c = (cols + selection_cell - 1) / selection_cell;
  for (int tr = 0; tr < tiles_r; ++tr) {
    for (int tc = 0; tc < tiles_c; ++tc) {
      Tile tile;
      double best = -1;
      for (int r = tr * selection_cell; r < std::min((tr + 1) * selection_cell, rows); ++r) {
        for (int c = tc * selection_cell; c < std::min((tc + 1) * selection_cell, cols); ++c) {
          if (!eligible(r, c)) continue;
          if (scores.at(r, c) > best) {  // strict: first (row, col) wins ties
            best = scores.at(r, c);
            tile.argmax_r = r;
            tile.argmax_c = c;
          }
        }
      }
      if (tile.argmax_r >= 0) {
        tile.weight = best;
        tiles.push_back(tile);
      }
    }
  }

  SelectionResult result;
  auto emit = [&](const Tile& t) {
    const double fx = scores.stride * t.argmax_c + (scores.stride - 1) / 2.0;
    const double fy = scores.stride * t.argmax_r + (scores.stride - 1) / 2.0;
    result.patches.push_back(make_patch(fx, fy));
  };

  if (static_cast<int>(tiles.size()) < count) {
    for (const Tile& t : tiles) emit(t);
    result.short_count = true;
    return result;
  }

  std::mt19937_64 rng(seed);
  std::vector<int> alive(tiles.size());
  for (size_t i = 0; i < tiles.size(); ++i) alive[i] = static_cast<int>(i);
  double total = 0;
  for (const Tile& t : tiles) total += t.weight;

  for (int drawn = 0; drawn < count; ++drawn) {
    size_t pick = 0;
    if (total > 0) {
      const double u = uniform01(rng) * total;
      double acc = 0;
      pick = alive.size() - 1;
      for (size_t i = 0; i < alive.size(); ++i) {
        acc += tiles[alive[i]].weight;
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining weight is zero: fall back to a uniform draw.
      pick = std::min(static_cast<size_t>(uniform01(rng) * alive.size()), alive.size() - 1);
    }
    emit(tiles[alive[pick]]);
    total -= tiles[alive[pick]].weight;
    alive.erase(alive.begin() + static_cast<long>(pick));
  }
  return result;
}

FeaturePyramid encode_features(const VoxelGrid& grid, int stride, bool with_context) {
  FeaturePyramid pyr;
  pyr.stride = stride;
  pyr.channels = kFeatureChannels;
  pyr.rows0 = grid.height / stride;
  pyr.cols0 = grid.width / stride;
  pyr.rows1 = pyr.rows0 / 2;
  pyr.cols1 = pyr.cols0 / 2;
  const int F = pyr.channels;
  pyr.level0.assign(static_cast<size_t>(pyr.rows0) * pyr.cols0 * F, 0.0);
  pyr.level1.assign(static_cast<size_t>(pyr.rows1) * pyr.cols1 * F, 0.0);
  if (with_context) pyr.context.assign(pyr.level0.size(), 0.0);

  MassImage img(grid);
  const int B = grid.bins;
  const double inv_area = 1.0 / (stride * stride);
  const double inv_tarea = 1.0 / (stride * stride * (B - 1));

  for (int r = 0; r < pyr.rows0; ++r) {
    for (int c = 0; c < pyr.cols0; ++c) {
      double bin_sum[kVoxelBins] = {0};
      double bin_abs[kVoxelBins] = {0};
      double sgx = 0, sgy = 0, sgm = 0;
      double td = 0, td_abs = 0, td_sq = 0;
      for (int y = r * stride; y < (r + 1) * stride; ++y) {
        for (int x = c * stride; x < (c + 1) * stride; ++x) {
          const size_t pi = static_cast<size_t>(y) * grid.width + x;
          const double* v = &grid.data[pi * B];
          for (int b = 0; b < B; ++b) {
            bin_sum[b] += v[b];
            bin_abs[b] += std::abs(v[b]);
          }
          for (int b = 0; b + 1 < B; ++b) {
            const double d = v[b + 1] - v[b];
            td += d;
            td_abs += std::abs(d);
            td_sq += d * d;
          }
          sgx += img.gx[pi];
          sgy += img.gy[pi];
          sgm += img.gmag[pi];
        }
      }
      double desc[kFeatureChannels];
      for (int b = 0; b < B; ++b) {
        desc[b] = bin_sum[b] * inv_area;
        desc[5 + b] = bin_abs[b] * inv_area;
      }
      desc[10] = sgx * inv_area;
      desc[11] = sgy * inv_area;
      desc[12] = sgm * inv_area;
      desc[13] = td * inv_tarea;
      desc[14] = td_abs * inv_tarea;
      desc[15] = std::sqrt(td_sq * inv_tarea);

      double* out = &pyr.level0[(static_cast<size_t>(r) * pyr.cols0 + c) * F];
      std::copy(desc, desc + F, out);
      if (with_context) {
        std::copy(desc, desc + F,
                  &pyr.context[(static_cast<size_t>(r) * pyr.cols0 + c) * F]);
      }
      l2_normalize(out, F);
    }
  }

  for (int r = 0; r < pyr.rows1; ++r) {
    for (int c = 0; c < pyr.cols1; ++c) {
      double* out = &pyr.level1[(static_cast<size_t>(r) * pyr.cols1 + c) * F];
      for (int dr = 0; dr < 2; ++dr) {
        for (int dc = 0; dc < 2; ++dc) {
          const double* in = pyr.cell(0, 2 * r + dr, 2 * c + dc);
          for (int k = 0; k < F; ++k) out[k] += 0.25 * in[k];
        }
      }
      l2_normalize(out, F);
    }
  }
  return pyr;
}

void sample_feature(const FeaturePyramid& pyr, int level, double x, double y, double* out,
                    double* grad_x, double* grad_y) {
  const int rows = pyr.rows(level), cols = pyr.cols(level);
  const int F = pyr.channels;
  x = std::clamp(x, 0.0, static_cast<double>(cols - 1));
  y = std::clamp(y, 0.0, static_cast<double>(rows - 1));
  const int x0 = std::min(static_cast<int>(x), cols - 2);
  const int y0 = std::min(static_cast<int>(y), rows - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const double* f00 = pyr.cell(level, y0, x0);
  const double* f01 = pyr.cell(level, y0, x0 + 1);
  const double* f10 = pyr.cell(level, y0 + 1, x0);
  const double* f11 = pyr.cell(level, y0 + 1, x0 + 1);
  const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
  const double w10 = (1 - fx) * fy, w11 = fx * fy;
  for (int k = 0; k < F; ++k) {
    out[k] = w00 * f00[k] + w01 * f01[k] + w10 * f10[k] + w11 * f11[k];
    if (grad_x) grad_x[k] = (1 - fy) * (f01[k] - f00[k]) + fy * (f11[k] - f10[k]);
    if (grad_y) grad_y[k] = (1 - fx) * (f10[k] - f00[k]) + fx * (f11[k] - f01[k]);
  }
}

double alignment_ssd(const FeaturePyramid& host, const FeaturePyramid& target, int level,
                     int host_row, int host_col, const Vec2& flow) {
  const int F = host.channels;
  double sampled[kFeatureChannels];
  double ssd = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const double* h = host.cell(level, host_row + dr, host_col + dc);
      sample_feature(target, level, host_col + dc + flow.x(), host_row + dr + flow.y(), sampled);
      for (int k = 0; k < F; ++k) {
        const double e = sampled[k] - h[k];
        ssd += e * e;
      }
    }
  }
  return ssd;
}

Vec2 alignment_gradient(const FeaturePyramid& host, const FeaturePyramid& target, int level,
                        int host_row, int host_col, const Vec2& flow) {
  const int F = host.channels;
  double sampled[kFeatureChannels], gx[kFeatureChannels], gy[kFeatureChannels];
  Vec2 grad = Vec2::Zero();
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const double* h = host.cell(level, host_row + dr, host_col + dc);
      sample_feature(target, level, host_col + dc + flow.x(), host_row + dr + flow.y(), sampled,
                     gx, gy);
      for (int k = 0; k < F; ++k) {
        const double e = sampled[k] - h[k];
        grad.x() += 2.0 * e * gx[k];
        grad.y() += 2.0 * e * gy[k];
      }
    }
  }
  return grad;
}

namespace {

// One refinement pass at a fixed pyramid level: an integer-offset scan
// seeds Gauss-Newton, which then polishes inside the winning cell. The SSD
// surface over bilinear samples is only piecewise smooth, so pure descent
// from the init parks on sub-cell kinks; the scan keeps it in the right
// basin. Returns false when the block leaves the search radius or loses
// conditioning.
bool refine_level(const FeaturePyramid& host, const FeaturePyramid& target, int level,
                  int host_row, int host_col, Vec2& flow, const FrontendConfig& cfg) {
  const int F = host.channels;
  const Vec2 start = flow;

  Vec2 best_flow = flow;
  double best_ssd = alignment_ssd(host, target, level, host_row, host_col, flow);
  // The coarse level resolves the basin over the full radius; the fine
  // level only re-checks the immediate neighbors, otherwise it would
  // reintroduce the ambiguity the coarse level just settled.
  const int scan = level == 0 ? std::min(1, static_cast<int>(cfg.search_radius))
                              : static_cast<int>(cfg.search_radius);
  for (int dy = -scan; dy <= scan; ++dy) {
    for (int dx = -scan; dx <= scan; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const Vec2 candidate = start + Vec2(dx, dy);
      if ((candidate - start).norm() > cfg.search_radius) continue;
      const double ssd = alignment_ssd(host, target, level, host_row, host_col, candidate);
      if (ssd < best_ssd) {
        best_ssd = ssd;
        best_flow = candidate;
      }
    }
  }
  flow = best_flow;

  double sampled[kFeatureChannels], gx[kFeatureChannels], gy[kFeatureChannels];
  for (int iter = 0; iter < cfg.max_track_iterations; ++iter) {
    double a00 = 0, a01 = 0, a11 = 0, b0 = 0, b1 = 0;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const double* h = host.cell(level, host_row + dr, host_col + dc);
        sample_feature(target, level, host_col + dc + flow.x(), host_row + dr + flow.y(),
                       sampled, gx, gy);
        for (int k = 0; k < F; ++k) {
          const double e = sampled[k] - h[k];
          a00 += gx[k] * gx[k];
          a01 += gx[k] * gy[k];
          a11 += gy[k] * gy[k];
          b0 += gx[k] * e;
          b1 += gy[k] * e;
        }
      }
    }
    const double det = a00 * a11 - a01 * a01;
    if (!(det > 1e-14)) return false;
    const Vec2 step((a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det);
    flow -= step;
    if ((flow - start).norm() > cfg.search_radius) return false;
    const double ssd = alignment_ssd(host, target, level, host_row, host_col, flow);
    if (ssd < best_ssd) {
      best_ssd = ssd;
      best_flow = flow;
    }
    if (step.norm() < cfg.track_tolerance) break;
  }
  flow = best_flow;
  return true;
}

}  // namespace

FlowMeasurement track_patch(const Patch& patch, const FeaturePyramid& host,
                            const FeaturePyramid& target, const Vec2& init_fullres,
                            const FrontendConfig& cfg) {
  FlowMeasurement m;
  m.host_frame = patch.host_frame;

  const double cfx = host.feat_from_full(patch.center_x());
  const double cfy = host.feat_from_full(patch.center_y());
  const int hc = static_cast<int>(std::lround(cfx));
  const int hr = static_cast<int>(std::lround(cfy));
  const int hc1 = static_cast<int>(std::lround(cfx * 0.5));
  const int hr1 = static_cast<int>(std::lround(cfy * 0.5));
  const bool host_ok = hc >= 1 && hc <= host.cols0 - 2 && hr >= 1 && hr <= host.rows0 - 2 &&
                       hc1 >= 1 && hc1 <= host.cols1 - 2 && hr1 >= 1 && hr1 <= host.rows1 - 2;
  if (!host_ok) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  Vec2 flow = (init_fullres - Vec2(patch.center_x(), patch.center_y())) / host.stride;
  const double tx = hc + flow.x(), ty = hr + flow.y();
  // Negated form so non-finite inits are rejected too.
  if (!(tx >= 0 && tx <= target.cols0 - 1 && ty >= 0 && ty <= target.rows0 - 1)) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  Vec2 flow1 = 0.5 * flow;
  if (!refine_level(host, target, 1, hr1, hc1, flow1, cfg)) {
    m.status = MeasureStatus::Diverged;
    return m;
  }
  flow = 2.0 * flow1;
  if (!refine_level(host, target, 0, hr, hc, flow, cfg)) {
    m.status = MeasureStatus::Diverged;
    return m;
  }

  m.residual = alignment_ssd(host, target, 0, hr, hc, flow);
  m.z_hat = Vec2(patch.center_x(), patch.center_y()) + host.stride * flow;
  m.status = MeasureStatus::Ok;
  m.valid = true;
  return m;
}

void assign_flow_confidences(const std::vector<FlowMeasurement*>& frame_measurements) {
  std::vector<double> residuals;
  residuals.reserve(frame_measurements.size());
  for (const FlowMeasurement* m : frame_measurements) {
    if (m->valid) residuals.push_back(m->residual);
  }
  if (residuals.empty()) return;
  std::nth_element(residuals.begin(), residuals.begin() + residuals.size() / 2, residuals.end());
  const double sigma = std::max(residuals[residuals.size() / 2], 1e-6);
  for (FlowMeasurement* m : frame_measurements) {
    m->confidence = m->valid ? std::exp(-m->residual / sigma) : 0.0;
  }
}

double parabola_offset(double y1, double y2, double y3) {
  const double denom = 2.0 * (y1 - 2.0 * y2 + y3);
  if (std::abs(denom) < 1e-18) return 0.0;
  return std::clamp((y1 - y3) / denom, -0.5, 0.5);
}

namespace {

double peak_ratio_confidence(double best, double second, bool have_second) {
  double ratio;
  if (!have_second || second <= 0.0) {
    ratio = 10.0;
  } else {
    ratio = std::min(best / second, 10.0);
  }
  return ratio / 10.0;
}

}  // namespace

DisparityMeasurement estimate_disparity(const Patch& patch, const FeaturePyramid& left,
                                        const FeaturePyramid& right,
                                        const FrontendConfig& cfg) {
  DisparityMeasurement m;
  m.host_frame = patch.host_frame;

  const int x = static_cast<int>(std::lround(left.feat_from_full(patch.center_x())));
  const int y = static_cast<int>(std::lround(left.feat_from_full(patch.center_y())));
  if (x < 1 || x > left.cols0 - 2 || y < 1 || y > left.rows0 - 2) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  const int F = left.channels;
  double self = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const double* h = left.cell(0, y + dr, x + dc);
      for (int k = 0; k < F; ++k) self += h[k] * h[k];
    }
  }

  // The whole search window [x-D, x] must fit in the right feature map;
  // patches too close to the left border have no evaluable window.
  const int delta_hi = cfg.max_disparity;
  if (x - delta_hi - 1 < 0) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  std::vector<double> scores(static_cast<size_t>(delta_hi), 0.0);  // scores[d-1]
  for (int delta = 1; delta <= delta_hi; ++delta) {
    double s = 0;
    for (int dr = -1; dr <= 1; ++dr) {
      const double* lrow = left.cell(0, y + dr, x - 1);
      const double* rrow = right.cell(0, y + dr, x - delta - 1);
      for (int k = 0; k < 3 * F; ++k) s += lrow[k] * rrow[k];
    }
    scores[static_cast<size_t>(delta - 1)] = s;
  }

  int best_delta = 1;
  double best = scores[0];
  for (int delta = 2; delta <= delta_hi; ++delta) {
    if (scores[static_cast<size_t>(delta - 1)] > best) {
      best = scores[static_cast<size_t>(delta - 1)];
      best_delta = delta;
    }
  }
  double second = -std::numeric_limits<double>::infinity();
  for (int delta = 1; delta <= delta_hi; ++delta) {
    if (delta != best_delta) second = std::max(second, scores[static_cast<size_t>(delta - 1)]);
  }

  double offset = 0;
  if (best_delta - 1 >= 1 && best_delta + 1 <= delta_hi) {
    offset = parabola_offset(scores[static_cast<size_t>(best_delta - 2)], best,
                             scores[static_cast<size_t>(best_delta)]);
  }

  m.disparity_fullres = left.stride * (best_delta + offset);
  m.score = best;
  m.confidence = peak_ratio_confidence(best, second, delta_hi > 1);
  if (best < cfg.tau_match * self) {
    m.status = MeasureStatus::LowScore;
    return m;
  }
  m.status = MeasureStatus::Ok;
  m.valid = true;
  return m;
}

DisparityMeasurement estimate_disparity_zncc(const Patch& patch, const VoxelGrid& left_grid,
                                             const VoxelGrid& right_grid,
                                             const FrontendConfig& cfg) {
  DisparityMeasurement m;
  m.host_frame = patch.host_frame;

  const int w = cfg.zncc_window;
  const int half = w / 2;
  const int x0 = static_cast<int>(std::lround(patch.center_x()));
  const int y0 = static_cast<int>(std::lround(patch.center_y()));
  const int W = left_grid.width, H = left_grid.height;
  const int mid = left_grid.bins / 2;
  if (x0 - half < 0 || x0 + half >= W || y0 - half < 0 || y0 + half >= H) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  std::vector<double> block(static_cast<size_t>(w) * w);
  double mean_l = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const double v = left_grid.at(y0 + dy, x0 + dx, mid);
      block[static_cast<size_t>(dy + half) * w + (dx + half)] = v;
      mean_l += v;
    }
  }
  mean_l /= w * w;
  double var_l = 0;
  for (double& v : block) {
    v -= mean_l;
    var_l += v * v;
  }
  var_l /= w * w;
  if (var_l < 1e-15) {
    m.status = MeasureStatus::FlatBlock;
    return m;
  }
  const double sig_l = std::sqrt(var_l);

  const int delta_hi = cfg.max_disparity * cfg.stride;  // full-resolution pixels
  if (x0 - delta_hi - half < 0) {
    m.status = MeasureStatus::OutOfBounds;
    return m;
  }

  std::vector<double> scores(static_cast<size_t>(delta_hi), -2.0);
  for (int delta = 1; delta <= delta_hi; ++delta) {
    double mean_r = 0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        mean_r += right_grid.at(y0 + dy, x0 + dx - delta, mid);
      }
    }
    mean_r /= w * w;
    double var_r = 0, cross = 0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        const double r = right_grid.at(y0 + dy, x0 + dx - delta, mid) - mean_r;
        var_r += r * r;
        cross += r * block[static_cast<size_t>(dy + half) * w + (dx + half)];
      }
    }
    var_r /= w * w;
    if (var_r < 1e-15) continue;  // flat candidate: left below any true zncc
    scores[static_cast<size_t>(delta - 1)] = cross / (w * w * sig_l * std::sqrt(var_r));
  }

  int best_delta = 1;
  double best = scores[0];
  for (int delta = 2; delta <= delta_hi; ++delta) {
    if (scores[static_cast<size_t>(delta - 1)] > best) {
      best = scores[static_cast<size_t>(delta - 1)];
      best_delta = delta;
    }
  }
  double second = -std::numeric_limits<double>::infinity();
  for (int delta = 1; delta <= delta_hi; ++delta) {
    if (delta != best_delta) second = std::max(second, scores[static_cast<size_t>(delta - 1)]);
  }

  double offset = 0;
  if (best_delta - 1 >= 1 && best_delta + 1 <= delta_hi) {
    offset = parabola_offset(scores[static_cast<size_t>(best_delta - 2)], best,
                             scores[static_cast<size_t>(best_delta)]);
  }

  m.disparity_fullres = best_delta + offset;
  m.score = best;
  m.confidence = peak_ratio_confidence(best, second, delta_hi > 1);
  if (best < cfg.tau_match) {  // zncc self-similarity is 1
    m.status = MeasureStatus::LowScore;
    return m;
  }
  m.status = MeasureStatus::Ok;
  m.valid = true;
  return m;
}

}  // namespace sevo

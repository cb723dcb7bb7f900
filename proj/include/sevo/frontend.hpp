#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sevo/geometry.hpp"
#include "sevo/voxel.hpp"

namespace sevo {

inline constexpr int kPatchSize = 3;          // p: patch edge length, pixels
inline constexpr int kFeatureChannels = 16;   // F: descriptor length per cell

// Per-measurement outcome for the hot per-patch paths.
enum class MeasureStatus : uint8_t {
  Ok,
  LowScore,     // best similarity under the acceptance threshold
  FlatBlock,    // zero-variance block (zncc backend)
  Diverged,     // alignment left the search radius or lost conditioning
  OutOfBounds,  // block or init outside the usable feature area
};

const char* measure_status_name(MeasureStatus s);

// Non-negative saliency at feature resolution (stride s).
struct ScoreMap {
  int rows = 0, cols = 0;
  int stride = 4;
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
};

// Two-level matching feature pyramid plus (left frames only) a context map.
// level1 is a 2x average pool of level0, re-normalized. Feature vectors are
// unit L2 norm or exactly zero where the grid carries no events.
struct FeaturePyramid {
  int stride = 4;
  int channels = kFeatureChannels;
  int rows0 = 0, cols0 = 0;
  int rows1 = 0, cols1 = 0;
  std::vector<double> level0;   // rows0*cols0*channels
  std::vector<double> level1;   // rows1*cols1*channels
  std::vector<double> context;  // rows0*cols0*channels, may be empty

  const double* cell(int level, int r, int c) const {
    return level == 0 ? &level0[(static_cast<size_t>(r) * cols0 + c) * channels]
                      : &level1[(static_cast<size_t>(r) * cols1 + c) * channels];
  }
  int rows(int level) const { return level == 0 ? rows0 : rows1; }
  int cols(int level) const { return level == 0 ? cols0 : cols1; }

  // Full-resolution pixel position of the center of feature cell c.
  double full_from_feat(double c) const { return stride * c + (stride - 1) / 2.0; }
  double feat_from_full(double x) const { return (x - (stride - 1) / 2.0) / stride; }
};

// A p x p pixel block sharing one inverse depth, hosted in a left keyframe.
// Coordinates are full-resolution pixels, row-major over the block; the
// center lives at index 4. A patch becomes valid once triangulation
// assigned it a positive inverse depth.
struct Patch {
  int host_frame = -1;
  std::array<double, kPatchSize * kPatchSize> u{};
  std::array<double, kPatchSize * kPatchSize> v{};
  double inverse_depth = 0;
  bool valid = false;

  double center_x() const { return u[4]; }
  double center_y() const { return v[4]; }
};

Patch make_patch(double center_x, double center_y);

// Tracked position of a patch center in another left frame.
struct FlowMeasurement {
  int host_frame = -1;
  int patch_slot = -1;
  int target_frame = -1;
  Vec2 z_hat = Vec2::Zero();  // full-resolution pixels
  double residual = 0;        // final block SSD
  double confidence = 0;      // exp(-residual/sigma), sigma = frame median
  MeasureStatus status = MeasureStatus::Ok;
  bool valid = false;
};

// Epipolar match of a patch against its host's right frame.
struct DisparityMeasurement {
  int host_frame = -1;
  int patch_slot = -1;
  double disparity_fullres = 0;  // pixels
  double score = 0;              // attained similarity maximum
  double confidence = 0;         // peak ratio mapped to (0, 1]
  MeasureStatus status = MeasureStatus::Ok;
  bool valid = false;
};

struct FrontendConfig {
  int stride = 4;
  int feature_dim = kFeatureChannels;
  int selection_cell = 8;      // cells of the score-map partition
  int max_disparity = 64;      // level0 cells
  double tau_match = 0.3;      // fraction of self-similarity
  double search_radius = 2.0;  // cells per pyramid level
  int max_track_iterations = 12;
  double track_tolerance = 0.01;  // cells
  int zncc_window = 7;
};

// Gradient-magnitude saliency of the per-pixel absolute event mass,
// average-pooled to feature resolution.
ScoreMap compute_score_map(const VoxelGrid& normalized_grid, int stride = 4);

struct SelectionResult {
  std::vector<Patch> patches;
  bool short_count = false;  // fewer usable cells than requested patches
};

// Pooled multinomial sampling: the score map is partitioned into
// selection_cell^2 tiles, tiles are drawn without replacement with
// probability proportional to their max score (uniformly when the map is
// all zero), and each drawn tile contributes its argmax pixel mapped to
// full resolution. Ties break toward the smallest (row, col).
SelectionResult select_patches(const ScoreMap& scores, int count, uint64_t seed,
                               int selection_cell = 8);

// Deterministic 16-dim descriptor per stride x stride block: 5 bin means,
// 5 bin-wise absolute means, 3 spatial-gradient statistics of the mass
// image, 3 temporal-difference statistics; L2-normalized per cell. The
// context map keeps the pre-normalization descriptors.
FeaturePyramid encode_features(const VoxelGrid& normalized_grid, int stride = 4,
                               bool with_context = true);

// Bilinear feature sample with border clamp; grad (optional) receives
// d(feature)/d(x,y) per channel.
void sample_feature(const FeaturePyramid& pyr, int level, double x, double y, double* out,
                    double* grad_x = nullptr, double* grad_y = nullptr);

// Sum of squared differences between the 3x3 host block centered on cell
// (host_row, host_col) and the target sampled at that block displaced by
// `flow` (cells of `level`), plus its analytic flow gradient. These are the
// alignment objective and normal-equation gradient used by track_patch.
double alignment_ssd(const FeaturePyramid& host, const FeaturePyramid& target, int level,
                     int host_row, int host_col, const Vec2& flow);
Vec2 alignment_gradient(const FeaturePyramid& host, const FeaturePyramid& target, int level,
                        int host_row, int host_col, const Vec2& flow);

// Coarse-to-fine Gauss-Newton alignment of the host feature block in the
// target pyramid over a 2-DoF translation (level1 then level0, at most
// max_track_iterations each, convergence below track_tolerance cells).
// Leaving the per-level search radius marks the measurement Diverged.
FlowMeasurement track_patch(const Patch& patch, const FeaturePyramid& host,
                            const FeaturePyramid& target, const Vec2& init_fullres,
                            const FrontendConfig& cfg = {});

// confidence = exp(-residual / sigma) with sigma the median residual of the
// frame's valid measurements (floored at 1e-6).
void assign_flow_confidences(const std::vector<FlowMeasurement*>& frame_measurements);

// Vertex of the parabola through (-1, y1), (0, y2), (1, y3), clamped to
// [-0.5, 0.5]; the sub-cell refinement used by both disparity backends.
double parabola_offset(double y1, double y2, double y3);

// Epipolar dot-product search on level0 only: maximizes the similarity of
// the host 3x3 feature block against the right block displaced by integer
// delta in [1, D], then refines by a parabola fit over the neighboring
// scores (offset clamped to +-0.5 cell).
DisparityMeasurement estimate_disparity(const Patch& patch, const FeaturePyramid& left,
                                        const FeaturePyramid& right,
                                        const FrontendConfig& cfg = {});

// Ablation backend: zero-mean normalized cross-correlation block matching
// on the middle temporal bin at full resolution.
DisparityMeasurement estimate_disparity_zncc(const Patch& patch, const VoxelGrid& left_grid,
                                             const VoxelGrid& right_grid,
                                             const FrontendConfig& cfg = {});

}  // namespace sevo

#include "sevo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

namespace sevo {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_value(int64_t xi, int64_t yi, uint64_t seed) {
  const uint64_t h = splitmix64(static_cast<uint64_t>(xi) * 0x8da6b343ULL ^
                                static_cast<uint64_t>(yi) * 0xd8163841ULL ^ seed);
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double gauss(std::mt19937_64& rng) {
  const double u1 =
      std::max(static_cast<double>(rng() >> 11) * 0x1.0p-53, 1e-12);
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Orthonormal in-plane tangent frame, deterministic from the normal.
void plane_tangents(const PlaneSpec& plane, Vec3* e1, Vec3* e2) {
  const Vec3 n = plane.normal.normalized();
  const Vec3 up = std::abs(n.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
  *e1 = up.cross(n).normalized();
  *e2 = n.cross(*e1);
}

}  // namespace

double value_noise(double u, double v, uint64_t seed) {
  const double fu = std::floor(u), fv = std::floor(v);
  const int64_t xi = static_cast<int64_t>(fu), yi = static_cast<int64_t>(fv);
  const double tu = smoothstep(u - fu), tv = smoothstep(v - fv);
  const double v00 = lattice_value(xi, yi, seed);
  const double v01 = lattice_value(xi + 1, yi, seed);
  const double v10 = lattice_value(xi, yi + 1, seed);
  const double v11 = lattice_value(xi + 1, yi + 1, seed);
  return (1 - tv) * ((1 - tu) * v00 + tu * v01) + tv * ((1 - tu) * v10 + tu * v11);
}

double plane_texture(const PlaneSpec& plane, double u, double v) {
  double sum = 0, weight_sum = 0, w = 1.0, f = plane.feature_scale;
  for (int o = 0; o < plane.octaves; ++o) {
    sum += w * value_noise(u * f, v * f, plane.texture_seed + 0x51ed270bULL * o);
    weight_sum += w;
    w *= 0.5;
    f *= 2.0;
  }
  return plane.base_log_intensity + plane.amplitude * sum / weight_sum;
}

namespace {

// Per-frame, per-plane constants so the pixel loop stays cheap.
struct PlaneFrame {
  const PlaneSpec* plane;
  Vec3 m;        // R^T n
  Vec3 a1, a2;   // R^T e1, R^T e2
  double c;      // n . (P0 - p)
  double b1, b2; // e1/e2 . (p - P0)
};

std::vector<PlaneFrame> frame_planes(const SyntheticScene& scene, const SE3Pose& pose) {
  std::vector<PlaneFrame> out;
  out.reserve(scene.planes.size());
  for (const PlaneSpec& plane : scene.planes) {
    Vec3 e1, e2;
    plane_tangents(plane, &e1, &e2);
    const Vec3 n = plane.normal.normalized();
    PlaneFrame pf;
    pf.plane = &plane;
    pf.m = pose.R.transpose() * n;
    pf.a1 = pose.R.transpose() * e1;
    pf.a2 = pose.R.transpose() * e2;
    pf.c = n.dot(plane.point - pose.p);
    pf.b1 = e1.dot(pose.p - plane.point);
    pf.b2 = e2.dot(pose.p - plane.point);
    out.push_back(pf);
  }
  return out;
}

constexpr double kMinRayRange = 1e-3;

}  // namespace

void render_log_intensity(const SyntheticScene& scene, const SE3Pose& pose,
                          const PinholeIntrinsics& K, double t, std::vector<double>* out) {
  const int W = K.width, H = K.height;
  out->resize(static_cast<size_t>(W) * H);
  const std::vector<PlaneFrame> planes = frame_planes(scene, pose);
  const double ramp = scene.illumination_ramp * t;

  std::vector<double> dxs(W);
  for (int x = 0; x < W; ++x) dxs[x] = (x - K.cx) / K.fx;

  double* row_out = out->data();
  for (int y = 0; y < H; ++y) {
    const double dy = (y - K.cy) / K.fy;
    for (int x = 0; x < W; ++x, ++row_out) {
      const double dx = dxs[x];
      double best_range = std::numeric_limits<double>::infinity();
      double value = scene.background_log_intensity;
      for (const PlaneFrame& pf : planes) {
        const double denom = pf.m.x() * dx + pf.m.y() * dy + pf.m.z();
        if (std::abs(denom) < 1e-12) continue;
        const double range = pf.c / denom;
        if (range <= kMinRayRange || range >= best_range) continue;
        best_range = range;
        const double u = pf.b1 + range * (pf.a1.x() * dx + pf.a1.y() * dy + pf.a1.z());
        const double v = pf.b2 + range * (pf.a2.x() * dx + pf.a2.y() * dy + pf.a2.z());
        value = plane_texture(*pf.plane, u, v);
      }
      *row_out = value + ramp;
    }
  }
}

double scene_depth(const SyntheticScene& scene, const SE3Pose& pose,
                   const PinholeIntrinsics& K, const Vec2& pixel) {
  const std::vector<PlaneFrame> planes = frame_planes(scene, pose);
  const double dx = (pixel.x() - K.cx) / K.fx;
  const double dy = (pixel.y() - K.cy) / K.fy;
  double best = std::numeric_limits<double>::infinity();
  for (const PlaneFrame& pf : planes) {
    const double denom = pf.m.x() * dx + pf.m.y() * dy + pf.m.z();
    if (std::abs(denom) < 1e-12) continue;
    const double range = pf.c / denom;
    if (range > kMinRayRange && range < best) best = range;
  }
  return std::isfinite(best) ? best : -1.0;  // camera z: rays have unit z component
}

namespace {

// Contrast-threshold event extraction for one camera.
std::vector<Event> camera_events(const SyntheticScene& scene, const TrajectoryFn& pose_fn,
                                 double duration_s, const PinholeIntrinsics& K,
                                 const EventGenConfig& cfg, uint64_t noise_seed) {
  const int W = cfg.width, H = cfg.height;
  const size_t n_px = static_cast<size_t>(W) * H;
  const double dt = 1.0 / cfg.supersample_hz;
  const int steps = static_cast<int>(std::ceil(duration_s * cfg.supersample_hz));

  constexpr uint64_t kNoEventYet = ~0ULL;
  std::vector<double> prev, cur, ref(n_px);
  std::vector<uint64_t> last_us(n_px, kNoEventYet);
  std::vector<Event> events;
  std::mt19937_64 noise_rng(noise_seed);

  render_log_intensity(scene, pose_fn(0.0), K, 0.0, &prev);
  ref = prev;

  for (int step = 1; step <= steps; ++step) {
    const double t1 = std::min(step * dt, duration_s);
    const double t0 = (step - 1) * dt;
    render_log_intensity(scene, pose_fn(t1), K, t1, &cur);

    for (size_t i = 0; i < n_px; ++i) {
      const double it = prev[i];
      const double itdt = cur[i];
      if (it == itdt) continue;
      const double pol = itdt > it ? 1.0 : -1.0;
      double threshold = cfg.contrast;
      if (cfg.contrast_sigma > 0) {
        threshold = std::max(0.01, cfg.contrast + cfg.contrast_sigma * gauss(noise_rng));
      }
      double cross = ref[i];
      while (true) {
        cross += pol * threshold;
        const bool hit = pol > 0 ? (cross > it && cross <= itdt) : (cross < it && cross >= itdt);
        if (!hit) break;
        double te = t0 + (cross - it) / (itdt - it) * (t1 - t0);
        if (cfg.timestamp_jitter_us > 0) {
          te += cfg.timestamp_jitter_us * 1e-6 * gauss(noise_rng);
        }
        uint64_t us = static_cast<uint64_t>(std::llround(std::max(te, 0.0) * 1e6));
        if (last_us[i] != kNoEventYet && us <= last_us[i]) us = last_us[i] + 1;
        last_us[i] = us;
        events.push_back(Event{us, static_cast<uint16_t>(i % W),
                               static_cast<uint16_t>(i / W),
                               pol > 0 ? int8_t{1} : int8_t{-1}});
        ref[i] = cross;
      }
    }
    prev.swap(cur);
  }

  if (cfg.background_rate > 0) {
    const double lam = cfg.background_rate * duration_s;
    for (size_t i = 0; i < n_px; ++i) {
      // Knuth sampling is fine at the small rates used here.
      int count = 0;
      double l = std::exp(-lam), p = uniform01(noise_rng);
      while (p > l) {
        ++count;
        p *= uniform01(noise_rng);
      }
      for (int k = 0; k < count; ++k) {
        const uint64_t us = static_cast<uint64_t>(uniform01(noise_rng) * duration_s * 1e6);
        events.push_back(Event{us, static_cast<uint16_t>(i % W), static_cast<uint16_t>(i / W),
                               (noise_rng() & 1) ? int8_t{1} : int8_t{-1}});
      }
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return events;
}

}  // namespace

StereoEventStreams generate_events(const SyntheticScene& scene, const TrajectoryFn& pose_fn,
                                   double duration_s, const StereoRig& rig,
                                   const EventGenConfig& cfg, GroundTruth* gt) {
  if (duration_s <= 0) {
    throw Error(ErrorCode::InvalidConfig, "simulation duration must be positive");
  }
  PinholeIntrinsics K = rig.intrinsics;
  K.width = cfg.width;
  K.height = cfg.height;

  const SE3Pose left_to_right(Mat3::Identity(), Vec3(rig.baseline, 0, 0));
  const TrajectoryFn right_fn = [&pose_fn, left_to_right](double t) {
    return pose_fn(t) * left_to_right;
  };

  StereoEventStreams streams;
  streams.left =
      camera_events(scene, pose_fn, duration_s, K, cfg, splitmix64(cfg.seed ^ 0x1ef7ULL));
  streams.right =
      camera_events(scene, right_fn, duration_s, K, cfg, splitmix64(cfg.seed ^ 0x2137ULL));

  if (gt) {
    gt->scene = scene;
    gt->intrinsics = K;
    gt->pose_fn = pose_fn;
    gt->trajectory.clear();
    const double gt_dt = 0.01;
    for (double t = 0; t <= duration_s + 1e-9; t += gt_dt) {
      const double tq = std::round(t * 1e6) / 1e6;
      gt->trajectory.push_back(TrajectorySample{tq, pose_fn(tq)});
    }
  }
  return streams;
}

Preset parse_preset(const std::string& name) {
  if (name == "lateral") return Preset::Lateral;
  if (name == "forward") return Preset::Forward;
  if (name == "orbit") return Preset::Orbit;
  if (name == "hdr_ramp") return Preset::HdrRamp;
  throw Error(ErrorCode::InvalidConfig, "unknown preset '" + name + "'");
}

const char* preset_name(Preset preset) {
  switch (preset) {
    case Preset::Lateral: return "lateral";
    case Preset::Forward: return "forward";
    case Preset::Orbit: return "orbit";
    case Preset::HdrRamp: return "hdr_ramp";
  }
  return "unknown";
}

PresetSpec make_preset(Preset preset, uint64_t seed, int width, int height, double duration_s,
                       double supersample_hz) {
  PresetSpec spec;
  spec.duration_s = duration_s;

  spec.rig.intrinsics.width = width;
  spec.rig.intrinsics.height = height;
  spec.rig.intrinsics.fx = 0.8 * width;
  spec.rig.intrinsics.fy = 0.8 * width;
  spec.rig.intrinsics.cx = width / 2.0;
  spec.rig.intrinsics.cy = height / 2.0;
  spec.rig.baseline = 0.6;

  spec.gen.width = width;
  spec.gen.height = height;
  spec.gen.supersample_hz = supersample_hz;
  spec.gen.seed = seed;

  spec.gen.contrast = 0.15;

  PlaneSpec plane;
  plane.texture_seed = splitmix64(seed ^ 0x7ab1e5ULL);
  plane.normal = Vec3(0, 0, 1);
  plane.amplitude = 0.55;
  plane.feature_scale = 3.5;
  plane.octaves = 2;

  switch (preset) {
    case Preset::Lateral: {
      plane.point = Vec3(0, 0, 3.5);
      spec.scene.planes = {plane};
      spec.pose_fn = [](double t) {
        return SE3Pose(Mat3::Identity(),
                       Vec3(0.3 * t, 0.05 * std::sin(2.0 * M_PI * t / 5.0), 0.0));
      };
      break;
    }
    case Preset::Forward: {
      plane.point = Vec3(0, 0, 5.5);
      spec.scene.planes = {plane};
      spec.pose_fn = [](double t) {
        return SE3Pose(Mat3::Identity(), Vec3(0.03 * std::sin(1.1 * t),
                                              0.03 * std::sin(0.9 * t + 1.0), 0.18 * t));
      };
      break;
    }
    case Preset::Orbit: {
      plane.point = Vec3(0, 0, 4.0);
      spec.scene.planes = {plane};
      spec.pose_fn = [](double t) {
        Vec6 xi;
        xi << 0.15 * std::sin(0.5 * t), 0.10 * std::sin(0.4 * t),
            0.05 * (1.0 - std::cos(0.3 * t)), 0.06 * std::sin(0.9 * t),
            0.10 * std::sin(0.6 * t), 0.04 * std::sin(0.5 * t);
        return se3_exp(xi);
      };
      break;
    }
    case Preset::HdrRamp: {
      plane.point = Vec3(0, 0, 3.5);
      spec.scene.planes = {plane};
      spec.scene.illumination_ramp = 0.25;
      spec.pose_fn = [](double t) {
        return SE3Pose(Mat3::Identity(), Vec3(0.25 * t, 0.0, 0.0));
      };
      break;
    }
  }
  return spec;
}

BenchmarkFiles make_benchmark_sequence(Preset preset, uint64_t seed, const std::string& out_dir,
                                       int width, int height, double duration_s,
                                       double supersample_hz) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::DiskWrite, "cannot create " + out_dir + ": " + ec.message());
  }

  const PresetSpec spec = make_preset(preset, seed, width, height, duration_s, supersample_hz);
  GroundTruth gt;
  const StereoEventStreams streams =
      generate_events(spec.scene, spec.pose_fn, spec.duration_s, spec.rig, spec.gen, &gt);

  BenchmarkFiles files;
  files.events_left = (fs::path(out_dir) / "events_left.evb").string();
  files.events_right = (fs::path(out_dir) / "events_right.evb").string();
  files.calibration = (fs::path(out_dir) / "calib.txt").string();
  files.gt_trajectory = (fs::path(out_dir) / "groundtruth.tum").string();

  write_event_file(files.events_left, streams.left, EventFileFormat::Binary);
  write_event_file(files.events_right, streams.right, EventFileFormat::Binary);

  CalibrationFile calib;
  calib.intrinsics = spec.rig.intrinsics;
  calib.baseline = spec.rig.baseline;
  write_calibration(files.calibration, calib);
  write_trajectory(gt.trajectory, files.gt_trajectory);
  return files;
}

}  // namespace sevo

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "sevo/sim.hpp"
#include "test_util.hpp"

using namespace sevo;
namespace fs = std::filesystem;

namespace {

PinholeIntrinsics small_K() { return PinholeIntrinsics{51.2, 51.2, 32.0, 24.0, 64, 48}; }

EventGenConfig small_cfg() {
  EventGenConfig cfg;
  cfg.width = 64;
  cfg.height = 48;
  cfg.supersample_hz = 400;
  return cfg;
}

SyntheticScene one_plane_scene(double z, double amplitude, uint64_t seed = 3) {
  PlaneSpec plane;
  plane.point = Vec3(0, 0, z);
  plane.normal = Vec3(0, 0, 1);
  plane.amplitude = amplitude;
  plane.texture_seed = seed;
  SyntheticScene scene;
  scene.planes = {plane};
  return scene;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("rendering a constant-texture plane gives a constant image") {
  SyntheticScene scene = one_plane_scene(4.0, 0.0);
  std::vector<double> img;
  render_log_intensity(scene, SE3Pose(), small_K(), 0.0, &img);
  for (double v : img) CHECK(v == doctest::Approx(scene.planes[0].base_log_intensity));
}

TEST_CASE("lateral motion samples the texture at shifted plane coordinates") {
  SyntheticScene scene = one_plane_scene(4.0, 0.5);
  const PinholeIntrinsics K = small_K();
  const PlaneSpec& plane = scene.planes[0];

  for (const Vec3& cam : {Vec3(0, 0, 0), Vec3(0.7, -0.3, 0)}) {
    std::vector<double> img;
    render_log_intensity(scene, SE3Pose(Mat3::Identity(), cam), K, 0.0, &img);
    // Direct lookup oracle: the ray from pixel (x, y) hits the plane at
    // in-plane coordinates (cam + Z*dir - P0) projected on the tangents.
    const double Z = plane.point.z() - cam.z();
    for (int y = 5; y < K.height; y += 13) {
      for (int x = 3; x < K.width; x += 11) {
        const double u = cam.x() + Z * (x - K.cx) / K.fx - plane.point.x();
        const double v = cam.y() + Z * (y - K.cy) / K.fy - plane.point.y();
        CHECK(img[static_cast<size_t>(y) * K.width + x] ==
              doctest::Approx(plane_texture(plane, u, v)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("rays that miss every plane see the background") {
  SyntheticScene scene = one_plane_scene(-5.0, 0.5);  // behind the camera
  scene.background_log_intensity = 0.125;
  std::vector<double> img;
  render_log_intensity(scene, SE3Pose(), small_K(), 0.0, &img);
  for (double v : img) CHECK(v == 0.125);
}

TEST_CASE("static scene and camera emit no events") {
  StereoRig rig;
  rig.intrinsics = small_K();
  rig.baseline = 0.3;
  auto streams = generate_events(one_plane_scene(4.0, 0.5), [](double) { return SE3Pose(); },
                                 1.0, rig, small_cfg());
  CHECK(streams.left.empty());
  CHECK(streams.right.empty());
}

TEST_CASE("linear ramp crossing five thresholds emits exactly five events per pixel") {
  SyntheticScene scene = one_plane_scene(4.0, 0.0);
  scene.illumination_ramp = 1.0;  // 5 contrast steps of 0.2 per second
  StereoRig rig;
  rig.intrinsics = small_K();
  rig.baseline = 0.3;
  EventGenConfig cfg = small_cfg();
  const double duration = 1.05;

  auto streams =
      generate_events(scene, [](double) { return SE3Pose(); }, duration, rig, cfg);
  const size_t n_px = static_cast<size_t>(cfg.width) * cfg.height;
  REQUIRE(streams.left.size() == 5 * n_px);

  std::map<std::pair<int, int>, std::vector<uint64_t>> per_pixel;
  for (const Event& e : streams.left) {
    CHECK(e.polarity == 1);
    per_pixel[{e.x, e.y}].push_back(e.t);
  }
  const double half_period_us = 0.5 / cfg.supersample_hz * 1e6;
  for (const auto& [px, times] : per_pixel) {
    REQUIRE(times.size() == 5);
    for (size_t k = 0; k < 5; ++k) {
      CHECK(std::abs(static_cast<double>(times[k]) - 0.2e6 * (k + 1)) <= half_period_us);
    }
  }

  SUBCASE("flipping the ramp flips all polarities") {
    scene.illumination_ramp = -1.0;
    auto neg = generate_events(scene, [](double) { return SE3Pose(); }, duration, rig, cfg);
    REQUIRE(neg.left.size() == 5 * n_px);
    for (const Event& e : neg.left) CHECK(e.polarity == -1);
  }
}

TEST_CASE("sub-threshold change emits nothing") {
  SyntheticScene scene = one_plane_scene(4.0, 0.0);
  scene.illumination_ramp = 0.05;  // total 0.05 < contrast 0.2
  StereoRig rig;
  rig.intrinsics = small_K();
  rig.baseline = 0.3;
  auto streams = generate_events(scene, [](double) { return SE3Pose(); }, 1.0, rig, small_cfg());
  CHECK(streams.left.empty());
}

TEST_CASE("per-pixel timestamps strictly increase and the merge is sorted") {
  PresetSpec spec = make_preset(Preset::Lateral, 5, 64, 48, 1.0, 300);
  auto streams = generate_events(spec.scene, spec.pose_fn, 1.0, spec.rig, spec.gen);
  REQUIRE(streams.left.size() > 100);
  std::map<std::pair<int, int>, uint64_t> last;
  uint64_t prev = 0;
  for (const Event& e : streams.left) {
    CHECK(e.t >= prev);
    prev = e.t;
    auto key = std::make_pair<int, int>(e.x, e.y);
    auto it = last.find(key);
    if (it != last.end()) CHECK(e.t > it->second);
    last[key] = e.t;
  }
}

TEST_CASE("stereo streams are geometrically consistent") {
  PresetSpec spec = make_preset(Preset::Lateral, 11, 64, 48, 1.0, 300);
  GroundTruth gt;
  generate_events(spec.scene, spec.pose_fn, 1.0, spec.rig, spec.gen, &gt);
  const PinholeIntrinsics& K = gt.intrinsics;
  const double fxB = K.fx * spec.rig.baseline;
  for (double t : {0.1, 0.55, 0.9}) {
    const SE3Pose left_pose = gt.pose_fn(t);
    const SE3Pose right_pose = left_pose * SE3Pose(Mat3::Identity(), Vec3(spec.rig.baseline, 0, 0));
    for (double x : {12.0, 32.0, 50.0}) {
      for (double y : {10.0, 24.0, 40.0}) {
        const double depth = gt.depth_at(t, Vec2(x, y));
        REQUIRE(depth > 0);
        const Vec3 pt_left = backproject(Vec2(x, y), 1.0 / depth, K);
        const Vec3 pt_world = left_pose * pt_left;
        const Vec2 uv_right = project(right_pose.inverse() * pt_world, K);
        CHECK(std::abs((x - uv_right.x()) - fxB / depth) < 1e-9);
        CHECK(std::abs(y - uv_right.y()) < 1e-9);
      }
    }
  }
}

TEST_CASE("event count scales linearly with traversal speed") {
  SyntheticScene scene = one_plane_scene(3.5, 0.5, 17);
  StereoRig rig;
  rig.intrinsics = small_K();
  rig.baseline = 0.3;
  EventGenConfig cfg = small_cfg();
  auto count_at = [&](double speed) {
    auto fn = [speed](double t) {
      return SE3Pose(Mat3::Identity(), Vec3(speed * t, 0, 0));
    };
    return static_cast<double>(generate_events(scene, fn, 2.0, rig, cfg).left.size());
  };
  const double slow = count_at(0.2), fast = count_at(0.4);
  CHECK(fast / slow > 1.8);
  CHECK(fast / slow < 2.2);
}

TEST_CASE("benchmark sequences are byte-identical across runs") {
  const fs::path dir_a = fs::temp_directory_path() / "sevo_sim_det_a";
  const fs::path dir_b = fs::temp_directory_path() / "sevo_sim_det_b";
  auto files_a = make_benchmark_sequence(Preset::Lateral, 7, dir_a.string(), 64, 48, 1.0, 300);
  auto files_b = make_benchmark_sequence(Preset::Lateral, 7, dir_b.string(), 64, 48, 1.0, 300);
  CHECK(slurp(files_a.events_left) == slurp(files_b.events_left));
  CHECK(slurp(files_a.events_right) == slurp(files_b.events_right));
  CHECK(slurp(files_a.calibration) == slurp(files_b.calibration));
  CHECK(slurp(files_a.gt_trajectory) == slurp(files_b.gt_trajectory));
  CHECK(!slurp(files_a.events_left).empty());
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("forward preset climbs in z") {
  PresetSpec spec = make_preset(Preset::Forward, 3, 64, 48, 2.0, 200);
  double prev = -1;
  for (double t = 0; t <= 2.0; t += 0.1) {
    const double z = spec.pose_fn(t).p.z();
    CHECK(z > prev);
    prev = z;
  }
}

TEST_CASE("preset parsing round-trips") {
  for (Preset p : {Preset::Lateral, Preset::Forward, Preset::Orbit, Preset::HdrRamp}) {
    CHECK(parse_preset(preset_name(p)) == p);
  }
  CHECK_THROWS_AS(parse_preset("spiral"), Error);
}

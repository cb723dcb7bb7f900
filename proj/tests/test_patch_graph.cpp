#include <doctest.h>

#include "sevo/patch_graph.hpp"
#include "sevo/voxel.hpp"
#include "test_util.hpp"

using namespace sevo;

namespace {

StereoRig small_rig() {
  StereoRig rig;
  rig.intrinsics = PinholeIntrinsics{100.0, 100.0, 32.0, 32.0, 64, 64};
  rig.baseline = 0.2;
  return rig;
}

FeaturePyramid random_pyramid(std::mt19937_64& rng) {
  VoxelGrid g;
  g.height = g.width = 64;
  g.data.assign(static_cast<size_t>(64) * 64 * g.bins, 0.0);
  for (int i = 0; i < 2000; ++i) {
    g.at(testutil::uniform_int(rng, 0, 63), testutil::uniform_int(rng, 0, 63),
         testutil::uniform_int(rng, 0, 4)) += testutil::uniform(rng, -1, 1);
  }
  return encode_features(normalize_voxel_grid(std::move(g)), 4);
}

std::vector<Patch> valid_patches(int count) {
  // Cell-aligned interior centers (stride 4, eligible cells start at 2).
  std::vector<Patch> patches;
  for (int i = 0; i < count; ++i) {
    Patch p = make_patch(4 * (2 + i % 10) + 1.5, 4 * (2 + i / 10) + 1.5);
    p.inverse_depth = 0.25;
    p.valid = true;
    patches.push_back(p);
  }
  return patches;
}

std::vector<DisparityMeasurement> valid_statics(int count) {
  std::vector<DisparityMeasurement> ms(count);
  for (auto& m : ms) {
    m.disparity_fullres = 5.0;
    m.confidence = 1.0;
    m.valid = true;
    m.status = MeasureStatus::Ok;
  }
  return ms;
}

// Window of bare keyframes with handcrafted edges, bypassing tracking.
PatchGraph scripted_graph(int frames, int patches_per_frame) {
  PatchGraph graph;
  graph.rig = small_rig();
  graph.config.patches_per_frame = patches_per_frame;
  for (int f = 0; f < frames; ++f) {
    Keyframe kf;
    kf.id = graph.next_frame_id++;
    kf.timestamp = 0.05 * f;
    kf.patches = valid_patches(patches_per_frame);
    for (Patch& p : kf.patches) p.host_frame = kf.id;
    graph.window.push_back(std::move(kf));
  }
  return graph;
}

void add_scripted_flow(PatchGraph& graph, int host_pos, int target_pos, const Vec2& offset) {
  const Keyframe& host = graph.window[host_pos];
  const Keyframe& target = graph.window[target_pos];
  for (size_t s = 0; s < host.patches.size(); ++s) {
    Edge e;
    e.kind = EdgeKind::Temporal;
    e.host_frame = host.id;
    e.patch_slot = static_cast<int>(s);
    e.target_frame = target.id;
    e.flow.host_frame = host.id;
    e.flow.patch_slot = static_cast<int>(s);
    e.flow.target_frame = target.id;
    e.flow.z_hat =
        Vec2(host.patches[s].center_x(), host.patches[s].center_y()) + offset;
    e.flow.valid = true;
    e.flow.status = MeasureStatus::Ok;
    e.flow.confidence = 1.0;
    graph.edges.push_back(e);
  }
}

}  // namespace

TEST_CASE("motion model prediction") {
  PatchGraph graph;
  graph.rig = small_rig();

  SUBCASE("empty graph predicts identity") {
    const SE3Pose p = motion_model_predict(graph);
    CHECK(p.p.norm() == 0.0);
  }
  SUBCASE("one keyframe copies the last pose") {
    Keyframe kf;
    kf.pose = SE3Pose(Mat3::Identity(), Vec3(3, 1, 2));
    graph.window.push_back(kf);
    const SE3Pose p = motion_model_predict(graph);
    CHECK((p.p - Vec3(3, 1, 2)).norm() < 1e-15);
  }
  SUBCASE("constant velocity translation") {
    Keyframe a, b;
    a.pose = SE3Pose();
    b.pose = SE3Pose(Mat3::Identity(), Vec3(1, 0, 0));
    graph.window.push_back(a);
    graph.window.push_back(b);
    const SE3Pose p = motion_model_predict(graph);
    CHECK((p.p - Vec3(2, 0, 0)).norm() < 1e-12);
  }
  SUBCASE("rotational velocity composes the same increment") {
    Vec6 xi0, step;
    xi0 << 0.3, -0.1, 0.2, 0.1, 0.05, -0.2;
    step << 0.05, 0.02, -0.01, 0.04, -0.03, 0.06;
    Keyframe a, b;
    a.pose = se3_exp(xi0);
    b.pose = a.pose * se3_exp(step);
    graph.window.push_back(a);
    graph.window.push_back(b);
    const SE3Pose expected = b.pose * se3_exp(step);
    const SE3Pose p = motion_model_predict(graph);
    CHECK((p.R - expected.R).norm() < 1e-12);
    CHECK((p.p - expected.p).norm() < 1e-12);
  }
}

TEST_CASE("add_frame builds the expected edge topology") {
  std::mt19937_64 rng(42);
  PatchGraph graph;
  graph.rig = small_rig();
  graph.config.patches_per_frame = 6;
  graph.config.edge_radius = 3;
  FrontendConfig fcfg;

  SUBCASE("first frame: no temporal edges, one static per valid patch") {
    add_frame(graph, 0.0, random_pyramid(rng), random_pyramid(rng), valid_patches(6),
              valid_statics(6), fcfg);
    CHECK(graph.window.size() == 1);
    int statics = 0, temporal = 0;
    for (const Edge& e : graph.edges) {
      (e.kind == EdgeKind::Static ? statics : temporal)++;
    }
    CHECK(statics == 6);
    CHECK(temporal == 0);
  }

  SUBCASE("two frames: bidirectional temporal edges, 2m of them") {
    add_frame(graph, 0.0, random_pyramid(rng), random_pyramid(rng), valid_patches(6),
              valid_statics(6), fcfg);
    add_frame(graph, 0.05, random_pyramid(rng), random_pyramid(rng), valid_patches(6),
              valid_statics(6), fcfg);
    int statics = 0, temporal = 0;
    for (const Edge& e : graph.edges) {
      (e.kind == EdgeKind::Static ? statics : temporal)++;
    }
    CHECK(temporal == 2 * 6);
    CHECK(statics == 2 * 6);
    check_graph_integrity(graph);
  }

  SUBCASE("invalid patches get no edges") {
    auto patches = valid_patches(6);
    patches[2].valid = false;
    patches[5].valid = false;
    add_frame(graph, 0.0, random_pyramid(rng), random_pyramid(rng), patches, valid_statics(6),
              fcfg);
    int statics = 0;
    for (const Edge& e : graph.edges) statics += e.kind == EdgeKind::Static ? 1 : 0;
    CHECK(statics == 4);
  }

  SUBCASE("edge radius limits temporal span") {
    graph.config.edge_radius = 1;
    for (int f = 0; f < 4; ++f) {
      add_frame(graph, 0.05 * f, random_pyramid(rng), random_pyramid(rng), valid_patches(2),
                valid_statics(2), fcfg);
    }
    for (const Edge& e : graph.edges) {
      if (e.kind != EdgeKind::Temporal) continue;
      const int gap =
          std::abs(graph.window_position(e.host_frame) - graph.window_position(e.target_frame));
      CHECK(gap <= 1);
    }
  }
}

TEST_CASE("window flow magnitude") {
  PatchGraph graph = scripted_graph(8, 4);

  SUBCASE("zero motion gives zero flow") {
    add_scripted_flow(graph, 2, 4, Vec2(0, 0));
    CHECK(window_flow_magnitude(graph, 5, 3) == doctest::Approx(0.0));
  }
  SUBCASE("uniform 3-4-5 offset") {
    add_scripted_flow(graph, 2, 4, Vec2(3, 4));
    CHECK(window_flow_magnitude(graph, 5, 3) == doctest::Approx(5.0));
  }
  SUBCASE("mixed offsets average the magnitudes") {
    const Keyframe& host = graph.window[2];
    const Keyframe& target = graph.window[4];
    const Vec2 offsets[2] = {Vec2(1, 0), Vec2(0, 2)};
    for (size_t s = 0; s < 2; ++s) {
      Edge e;
      e.kind = EdgeKind::Temporal;
      e.host_frame = host.id;
      e.patch_slot = static_cast<int>(s);
      e.target_frame = target.id;
      e.flow.z_hat =
          Vec2(host.patches[s].center_x(), host.patches[s].center_y()) + offsets[s];
      e.flow.valid = true;
      e.flow.confidence = 1.0;
      graph.edges.push_back(e);
    }
    CHECK(window_flow_magnitude(graph, 5, 3) == doctest::Approx(1.5));
  }
  SUBCASE("no shared measurements throws") {
    CHECK_THROWS_WITH_AS(window_flow_magnitude(graph, 5, 3),
                         doctest::Contains("NoSharedMeasurements"), Error);
  }
}

TEST_CASE("keyframe management rule") {
  SUBCASE("small flow removes the n-4 frame") {
    PatchGraph graph = scripted_graph(11, 4);  // n = 10, just exceeded
    graph.config.window_size = 10;
    graph.config.tau_flow = 12.0;
    add_scripted_flow(graph, 5, 7, Vec2(1, 0));  // n-5 -> n-3, flow 1.0
    const RemovalEvent event = manage_keyframes(graph);
    REQUIRE(event.removed);
    CHECK_FALSE(event.removed_oldest);
    CHECK(event.window_pos == 6);  // n-4, 0-indexed from the oldest
    CHECK(event.frame_id == 6);
    CHECK(graph.window.size() == 10);
    CHECK(graph.window_position(6) == -1);
    check_graph_integrity(graph);
  }
  SUBCASE("large flow removes the oldest frame") {
    PatchGraph graph = scripted_graph(11, 4);
    graph.config.window_size = 10;
    graph.config.tau_flow = 12.0;
    add_scripted_flow(graph, 5, 7, Vec2(18, 24));  // flow 30
    const RemovalEvent event = manage_keyframes(graph);
    REQUIRE(event.removed);
    CHECK(event.removed_oldest);
    CHECK(event.frame_id == 0);
    CHECK(graph.window.size() == 10);
    check_graph_integrity(graph);
  }
  SUBCASE("no shared measurements is treated as above threshold") {
    PatchGraph graph = scripted_graph(11, 4);
    graph.config.window_size = 10;
    const RemovalEvent event = manage_keyframes(graph);
    REQUIRE(event.removed);
    CHECK(event.removed_oldest);
  }
  SUBCASE("window at size n is a no-op") {
    PatchGraph graph = scripted_graph(10, 4);
    graph.config.window_size = 10;
    const RemovalEvent event = manage_keyframes(graph);
    CHECK_FALSE(event.removed);
    CHECK(graph.window.size() == 10);
  }
  SUBCASE("edges incident to the removed frame are deleted") {
    PatchGraph graph = scripted_graph(11, 4);
    graph.config.window_size = 10;
    add_scripted_flow(graph, 5, 7, Vec2(1, 0));
    add_scripted_flow(graph, 6, 7, Vec2(1, 1));  // edges hosted in the doomed frame
    add_scripted_flow(graph, 3, 6, Vec2(2, 0));  // edges targeting it
    const size_t before = graph.edges.size();
    const RemovalEvent event = manage_keyframes(graph);
    CHECK(event.frame_id == 6);
    CHECK(graph.edges.size() == before - 8);
    for (const Edge& e : graph.edges) {
      CHECK(e.host_frame != 6);
      CHECK(e.target_frame != 6);
    }
    check_graph_integrity(graph);
  }
}

TEST_CASE("graph snapshot lists frames and edge statistics") {
  PatchGraph graph = scripted_graph(3, 2);
  add_scripted_flow(graph, 0, 1, Vec2(1, 0));
  const std::string snap = graph_snapshot(graph);
  CHECK(snap.find("window=3") != std::string::npos);
  CHECK(snap.find("frame 0") != std::string::npos);
  CHECK(snap.find("valid_flows=2") != std::string::npos);
}

#include <doctest.h>

#include "ba_testkit.hpp"
#include "sevo/ba.hpp"

using namespace sevo;
using batestkit::build_problem;
using batestkit::ProblemOptions;

namespace {

const Edge* first_edge(const PatchGraph& g, EdgeKind kind) {
  for (const Edge& e : g.edges) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("temporal residual vanishes at the generating state") {
  std::mt19937_64 rng(1);
  PatchGraph graph = build_problem(rng, ProblemOptions{});
  WindowState state = extract_window_state(graph);
  for (const Edge& e : graph.edges) {
    if (e.kind != EdgeKind::Temporal) continue;
    const ResidualBlock block = temporal_residual(state, graph, e);
    REQUIRE(block.valid);
    CHECK(block.r.norm() < 1e-10);
  }
}

TEST_CASE("temporal residual rejects host == target") {
  std::mt19937_64 rng(2);
  PatchGraph graph = build_problem(rng, ProblemOptions{});
  WindowState state = extract_window_state(graph);
  Edge bogus = *first_edge(graph, EdgeKind::Temporal);
  bogus.target_frame = bogus.host_frame;
  CHECK_THROWS_AS(temporal_residual(state, graph, bogus), Error);
}

TEST_CASE("analytic jacobians match central finite differences") {
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ProblemOptions opt;
    opt.num_frames = 3;
    opt.patches_per_frame = 4;
    opt.pixel_noise = 0.5;  // keep residuals nonzero
    PatchGraph graph = build_problem(rng, opt);
    WindowState state = extract_window_state(graph);
    // Random state so the jacobians are evaluated away from the optimum.
    for (size_t f = 0; f < state.poses.size(); ++f) {
      Vec6 xi;
      for (int i = 0; i < 6; ++i) xi[i] = 0.01 * batestkit::gauss(rng);
      state.poses[f] = se3_exp(xi) * state.poses[f];
    }

    for (const Edge& e : graph.edges) {
      if (checked >= 25) break;
      if (e.kind != EdgeKind::Temporal) continue;
      const int hi = state.frame_index(e.host_frame);
      const int ti = state.frame_index(e.target_frame);
      const ResidualBlock block = temporal_residual(state, graph, e);
      if (!block.valid) continue;
      ++checked;

      auto fd_pose = [&](int frame_idx) {
        Mat26 J;
        for (int i = 0; i < 6; ++i) {
          Vec6 step = Vec6::Zero();
          step[i] = h;
          WindowState plus = state, minus = state;
          plus.poses[frame_idx] = se3_exp(step) * state.poses[frame_idx];
          minus.poses[frame_idx] = se3_exp(Vec6(-step)) * state.poses[frame_idx];
          const Vec2 rp = temporal_residual(plus, graph, e).r;
          const Vec2 rm = temporal_residual(minus, graph, e).r;
          J.col(i) = (rp - rm) / (2 * h);
        }
        return J;
      };
      const Mat26 fd_host = fd_pose(hi);
      const Mat26 fd_target = fd_pose(ti);
      CHECK((block.J_host - fd_host).norm() < 1e-4 * std::max(1.0, fd_host.norm()));
      CHECK((block.J_target - fd_target).norm() < 1e-4 * std::max(1.0, fd_target.norm()));

      WindowState plus = state, minus = state;
      plus.inverse_depths[hi][e.patch_slot] += h;
      minus.inverse_depths[hi][e.patch_slot] -= h;
      const Vec2 fd_depth =
          (temporal_residual(plus, graph, e).r - temporal_residual(minus, graph, e).r) / (2 * h);
      CHECK((block.J_depth - fd_depth).norm() < 1e-4 * std::max(1.0, fd_depth.norm()));
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("static residual closed form") {
  std::mt19937_64 rng(4);
  PatchGraph graph = build_problem(rng, ProblemOptions{});
  WindowState state = extract_window_state(graph);
  const double fxB = graph.rig.intrinsics.fx * graph.rig.baseline;

  SUBCASE("vanishes at triangulation consistency") {
    for (const Edge& e : graph.edges) {
      if (e.kind != EdgeKind::Static) continue;
      const ResidualBlock block = static_residual(state, graph, e);
      REQUIRE(block.valid);
      CHECK(block.r.norm() < 1e-10);
      CHECK(block.J_host.norm() == 0.0);
      CHECK(block.J_target.norm() == 0.0);
    }
  }
  SUBCASE("doubling the inverse depth flips the disparity residual") {
    const Edge* e = first_edge(graph, EdgeKind::Static);
    const int hi = state.frame_index(e->host_frame);
    WindowState doubled = state;
    doubled.inverse_depths[hi][e->patch_slot] *= 2.0;
    const ResidualBlock block = static_residual(doubled, graph, *e);
    CHECK(block.r.x() == doctest::Approx(-e->disp.disparity_fullres).epsilon(1e-12));
    CHECK(block.r.y() == 0.0);
  }
  SUBCASE("r_x = disparity - fx*B*lambda exactly, any lambda") {
    const Edge* e = first_edge(graph, EdgeKind::Static);
    const int hi = state.frame_index(e->host_frame);
    for (double lambda : {0.05, 0.21, 0.48, 1.3}) {
      WindowState s = state;
      s.inverse_depths[hi][e->patch_slot] = lambda;
      const ResidualBlock block = static_residual(s, graph, *e);
      CHECK(block.r.x() == e->disp.disparity_fullres - fxB * lambda);
    }
  }
  SUBCASE("depth jacobian matches finite differences") {
    const double h = 1e-7;
    int checked = 0;
    for (const Edge& e : graph.edges) {
      if (e.kind != EdgeKind::Static || checked >= 20) continue;
      ++checked;
      const int hi = state.frame_index(e.host_frame);
      WindowState plus = state, minus = state;
      plus.inverse_depths[hi][e.patch_slot] += h;
      minus.inverse_depths[hi][e.patch_slot] -= h;
      const Vec2 fd =
          (static_residual(plus, graph, e).r - static_residual(minus, graph, e).r) / (2 * h);
      const ResidualBlock block = static_residual(state, graph, e);
      CHECK((block.J_depth - fd).norm() < 1e-6 * std::max(1.0, fd.norm()));
    }
    CHECK(checked == 20);
  }
}

TEST_CASE("robust weight") {
  CHECK(robust_weight(Vec2(0, 0), 1.0) == 1.0);
  CHECK(robust_weight(Vec2(8, 0), 1.0) == doctest::Approx(0.5));
  CHECK(robust_weight(Vec2(0.5, 0.5), 0.25) == doctest::Approx(0.25));
}

TEST_CASE("solve_window is a fixed point at the generating state") {
  std::mt19937_64 rng(5);
  PatchGraph graph = build_problem(rng, ProblemOptions{});
  WindowState gt = extract_window_state(graph);
  SolveReport report;
  WindowState out = solve_window(graph, gt, BaConfig{}, &report);
  CHECK(report.initial_cost < 1e-16);
  for (size_t f = 0; f < gt.poses.size(); ++f) {
    CHECK(batestkit::pose_distance(gt.poses[f], out.poses[f]) < 1e-10);
  }
  for (size_t f = 0; f < gt.inverse_depths.size(); ++f) {
    for (size_t s = 0; s < gt.inverse_depths[f].size(); ++s) {
      CHECK(std::abs(gt.inverse_depths[f][s] - out.inverse_depths[f][s]) < 1e-10);
    }
  }
}

TEST_CASE("solve_window recovers a perturbed pose in two iterations") {
  std::mt19937_64 rng(6);
  ProblemOptions opt;
  opt.num_frames = 3;
  opt.patches_per_frame = 32;
  PatchGraph graph = build_problem(rng, opt);
  WindowState gt = extract_window_state(graph);

  WindowState init = gt;
  Vec6 xi;
  xi << 0.004, -0.003, 0.005, 0.003, -0.004, 0.004;
  xi *= 0.01 / xi.norm();
  init.poses[2] = se3_exp(xi) * gt.poses[2];

  SolveReport report;
  WindowState out = solve_window(graph, init, BaConfig{}, &report);
  CHECK(batestkit::pose_distance(out.poses[2], gt.poses[2]) < 1e-6);
  CHECK(report.iteration_cost.back() <= report.initial_cost);
}

TEST_CASE("schur step equals the dense normal-equation solve") {
  std::mt19937_64 rng(7);
  BaConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    ProblemOptions opt;
    opt.num_frames = testutil::uniform_int(rng, 2, 5);
    opt.patches_per_frame = testutil::uniform_int(rng, 2, 10);  // <= 50 depths
    opt.pixel_noise = 0.5;
    opt.disparity_noise = 0.5;
    opt.random_confidence = true;
    PatchGraph graph = build_problem(rng, opt);
    WindowState state = extract_window_state(graph);
    for (size_t f = 0; f < state.poses.size(); ++f) {
      Vec6 xi;
      for (int i = 0; i < 6; ++i) xi[i] = 0.005 * batestkit::gauss(rng);
      state.poses[f] = se3_exp(xi) * state.poses[f];
    }

    const NormalEquations eq = assemble_normal_equations(graph, state, cfg);
    Eigen::VectorXd dp_s, dd_s, dp_f, dd_f;
    REQUIRE(solve_schur(eq, cfg.damping, &dp_s, &dd_s));
    REQUIRE(batestkit::dense_full_solve(eq, cfg.damping, &dp_f, &dd_f));
    const double denom = std::max(1e-12, std::sqrt(dp_f.squaredNorm() + dd_f.squaredNorm()));
    const double err = std::sqrt((dp_s - dp_f).squaredNorm() + (dd_s - dd_f).squaredNorm());
    CHECK(err / denom < 1e-8);
  }
}

TEST_CASE("gauge invariance of relative poses") {
  std::mt19937_64 rng(8);
  ProblemOptions opt;
  opt.num_frames = 4;
  opt.patches_per_frame = 16;
  opt.pixel_noise = 0.3;
  PatchGraph graph = build_problem(rng, opt);

  WindowState init = extract_window_state(graph);
  std::mt19937_64 perturb_rng(99);
  for (size_t f = 1; f < init.poses.size(); ++f) {
    Vec6 xi;
    for (int i = 0; i < 6; ++i) xi[i] = 0.002 * batestkit::gauss(perturb_rng);
    init.poses[f] = se3_exp(xi) * init.poses[f];
  }

  Vec6 shift;
  shift << 1.5, -2.0, 0.7, 0.3, -0.2, 0.4;
  const SE3Pose T = se3_exp(shift);
  WindowState shifted = init;
  for (SE3Pose& pose : shifted.poses) pose = T * pose;

  WindowState out_a = solve_window(graph, init, BaConfig{});
  WindowState out_b = solve_window(graph, shifted, BaConfig{});
  for (size_t i = 0; i + 1 < out_a.poses.size(); ++i) {
    const SE3Pose rel_a = out_a.poses[i].inverse() * out_a.poses[i + 1];
    const SE3Pose rel_b = out_b.poses[i].inverse() * out_b.poses[i + 1];
    CHECK(batestkit::pose_distance(rel_a, rel_b) < 1e-9);
  }
}

TEST_CASE("accepted steps never increase the robustified cost") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    ProblemOptions opt;
    opt.num_frames = testutil::uniform_int(rng, 3, 5);
    opt.patches_per_frame = 12;
    opt.pixel_noise = 1.5;
    opt.disparity_noise = 1.0;
    opt.random_confidence = true;
    PatchGraph graph = build_problem(rng, opt);
    WindowState init = extract_window_state(graph);
    for (size_t f = 1; f < init.poses.size(); ++f) {
      Vec6 xi;
      for (int i = 0; i < 6; ++i) xi[i] = 0.01 * batestkit::gauss(rng);
      init.poses[f] = se3_exp(xi) * init.poses[f];
    }
    SolveReport report;
    BaConfig cfg;
    cfg.iterations = 4;
    solve_window(graph, init, cfg, &report);
    double prev = report.initial_cost;
    for (double c : report.iteration_cost) {
      CHECK(c <= prev + 1e-9);
      prev = c;
    }
  }
}

TEST_CASE("solve_window requires two keyframes") {
  std::mt19937_64 rng(10);
  ProblemOptions opt;
  opt.num_frames = 1;
  PatchGraph graph = build_problem(rng, opt);
  CHECK_THROWS_AS(solve_window(graph, extract_window_state(graph), BaConfig{}), Error);
}

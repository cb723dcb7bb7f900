#include "sevo/config.hpp"

#include <fstream>

#include "sevo/keyvalue.hpp"

namespace sevo {

FrontendConfig PipelineConfig::frontend() const {
  FrontendConfig cfg;
  cfg.stride = stride;
  cfg.feature_dim = feature_dim;
  cfg.max_disparity = max_disparity;
  cfg.tau_match = tau_match;
  cfg.search_radius = search_radius;
  cfg.zncc_window = zncc_window;
  return cfg;
}

GraphConfig PipelineConfig::graph() const {
  GraphConfig cfg;
  cfg.window_size = n;
  cfg.patches_per_frame = m;
  cfg.edge_radius = r_edge;
  cfg.tau_flow = tau_flow;
  return cfg;
}

BaConfig PipelineConfig::ba() const {
  BaConfig cfg;
  cfg.iterations = ba_iterations;
  cfg.damping = damping;
  cfg.huber_px = huber_px;
  cfg.sigma_px = sigma_px;
  return cfg;
}

void PipelineConfig::validate() const {
  if (p != kPatchSize) {
    throw Error(ErrorCode::InvalidConfig, "patch size p must be 3");
  }
  if (feature_dim != kFeatureChannels) {
    throw Error(ErrorCode::InvalidConfig, "feature_dim must be 16");
  }
  if (stride < 1 || delta_t_ms <= 0 || n < 2 || m < 1 || r_edge < 1 || max_disparity < 1) {
    throw Error(ErrorCode::InvalidConfig, "out-of-range pipeline parameter");
  }
  if (backend != "feature_dot" && backend != "zncc") {
    throw Error(ErrorCode::InvalidConfig, "backend must be feature_dot or zncc");
  }
  if (window_mode != "duration" && window_mode != "count") {
    throw Error(ErrorCode::InvalidConfig, "window_mode must be duration or count");
  }
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const auto kv = read_key_value_file(path);
  PipelineConfig cfg;
  cfg.delta_t_ms = kv_double(kv, "delta_t_ms", cfg.delta_t_ms);
  cfg.window_mode = kv_string(kv, "window_mode", cfg.window_mode);
  cfg.window_count = static_cast<int>(kv_double(kv, "window_count", cfg.window_count));
  cfg.stride = static_cast<int>(kv_double(kv, "stride", cfg.stride));
  cfg.feature_dim = static_cast<int>(kv_double(kv, "feature_dim", cfg.feature_dim));
  cfg.max_disparity = static_cast<int>(kv_double(kv, "max_disparity", cfg.max_disparity));
  cfg.tau_match = kv_double(kv, "tau_match", cfg.tau_match);
  cfg.search_radius = kv_double(kv, "search_radius", cfg.search_radius);
  cfg.zncc_window = static_cast<int>(kv_double(kv, "zncc_window", cfg.zncc_window));
  cfg.backend = kv_string(kv, "backend", cfg.backend);
  cfg.n = static_cast<int>(kv_double(kv, "n", cfg.n));
  cfg.m = static_cast<int>(kv_double(kv, "m", cfg.m));
  cfg.p = static_cast<int>(kv_double(kv, "p", cfg.p));
  cfg.r_edge = static_cast<int>(kv_double(kv, "r_edge", cfg.r_edge));
  cfg.tau_flow = kv_double(kv, "tau_flow", cfg.tau_flow);
  cfg.huber_px = kv_double(kv, "huber_px", cfg.huber_px);
  cfg.sigma_px = kv_double(kv, "sigma_px", cfg.sigma_px);
  cfg.damping = kv_double(kv, "damping", cfg.damping);
  cfg.ba_iterations = static_cast<int>(kv_double(kv, "ba_iterations", cfg.ba_iterations));
  cfg.seed = static_cast<uint64_t>(kv_double(kv, "seed", static_cast<double>(cfg.seed)));
  cfg.validate();
  return cfg;
}

void write_pipeline_config(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  out.precision(12);
  out << "delta_t_ms " << cfg.delta_t_ms << "\n"
      << "window_mode " << cfg.window_mode << "\n"
      << "window_count " << cfg.window_count << "\n"
      << "stride " << cfg.stride << "\n"
      << "feature_dim " << cfg.feature_dim << "\n"
      << "max_disparity " << cfg.max_disparity << "\n"
      << "tau_match " << cfg.tau_match << "\n"
      << "search_radius " << cfg.search_radius << "\n"
      << "zncc_window " << cfg.zncc_window << "\n"
      << "backend " << cfg.backend << "\n"
      << "n " << cfg.n << "\n"
      << "m " << cfg.m << "\n"
      << "p " << cfg.p << "\n"
      << "r_edge " << cfg.r_edge << "\n"
      << "tau_flow " << cfg.tau_flow << "\n"
      << "huber_px " << cfg.huber_px << "\n"
      << "sigma_px " << cfg.sigma_px << "\n"
      << "damping " << cfg.damping << "\n"
      << "ba_iterations " << cfg.ba_iterations << "\n"
      << "seed " << cfg.seed << "\n";
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

}  // namespace sevo

#include "sevo/event_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sevo/keyvalue.hpp"

namespace sevo {

namespace {

constexpr size_t kBinaryRecordSize = 13;  // u64 + u16 + u16 + i8, packed

std::vector<char> read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  in.seekg(0, std::ios::end);
  std::vector<char> buf(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!in) {
    throw Error(ErrorCode::IoError, "short read on " + path);
  }
  return buf;
}

const char* skip_ws(const char* p, const char* end) {
  while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  return p;
}

template <typename T>
const char* parse_field(const char* p, const char* end, T& out, const std::string& path,
                        size_t line_no) {
  p = skip_ws(p, end);
  auto [next, ec] = std::from_chars(p, end, out);
  if (ec != std::errc()) {
    throw Error(ErrorCode::MalformedRecord,
                path + ": line " + std::to_string(line_no) + " is not a valid event record");
  }
  return next;
}

std::vector<Event> parse_text_events(const std::vector<char>& buf, const std::string& path) {
  std::vector<Event> events;
  events.reserve(buf.size() / 16);
  const char* p = buf.data();
  const char* end = buf.data() + buf.size();
  size_t line_no = 0;
  while (p < end) {
    ++line_no;
    const char* eol = static_cast<const char*>(memchr(p, '\n', static_cast<size_t>(end - p)));
    const char* line_end = eol ? eol : end;
    const char* q = skip_ws(p, line_end);
    if (q < line_end) {
      Event e;
      uint64_t t;
      uint32_t x, y, pol;
      q = parse_field(q, line_end, t, path, line_no);
      q = parse_field(q, line_end, x, path, line_no);
      q = parse_field(q, line_end, y, path, line_no);
      q = parse_field(q, line_end, pol, path, line_no);
      q = skip_ws(q, line_end);
      if (q != line_end || pol > 1 || x > 0xffff || y > 0xffff) {
        throw Error(ErrorCode::MalformedRecord,
                    path + ": line " + std::to_string(line_no) + " is not a valid event record");
      }
      e.t = t;
      e.x = static_cast<uint16_t>(x);
      e.y = static_cast<uint16_t>(y);
      e.polarity = pol == 1 ? int8_t{1} : int8_t{-1};
      events.push_back(e);
    }
    p = eol ? eol + 1 : end;
  }
  return events;
}

std::vector<Event> parse_binary_events(const std::vector<char>& buf, const std::string& path) {
  if (buf.size() % kBinaryRecordSize != 0) {
    throw Error(ErrorCode::MalformedRecord,
                path + ": size " + std::to_string(buf.size()) + " is not a multiple of " +
                    std::to_string(kBinaryRecordSize) + "-byte records");
  }
  const size_t n = buf.size() / kBinaryRecordSize;
  std::vector<Event> events(n);
  const char* p = buf.data();
  for (size_t i = 0; i < n; ++i, p += kBinaryRecordSize) {
    Event& e = events[i];
    std::memcpy(&e.t, p, 8);
    std::memcpy(&e.x, p + 8, 2);
    std::memcpy(&e.y, p + 10, 2);
    std::memcpy(&e.polarity, p + 12, 1);
    if (e.polarity != 1 && e.polarity != -1) {
      throw Error(ErrorCode::MalformedRecord,
                  path + ": record at offset " + std::to_string(i * kBinaryRecordSize) +
                      " has polarity " + std::to_string(e.polarity));
    }
  }
  return events;
}

void enforce_time_order(std::vector<Event>& events, uint64_t slack_us, const std::string& path) {
  uint64_t worst = 0;
  size_t worst_at = 0;
  for (size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) {
      const uint64_t back = events[i - 1].t - events[i].t;
      if (back > worst) {
        worst = back;
        worst_at = i;
      }
    }
  }
  if (worst == 0) return;
  if (worst > slack_us) {
    throw Error(ErrorCode::NonMonotonicTimestamp,
                path + ": timestamp jumps back " + std::to_string(worst) + " us at record " +
                    std::to_string(worst_at) + " (slack " + std::to_string(slack_us) + " us)");
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

}  // namespace

std::vector<Event> parse_event_file(const std::string& path, EventFileFormat format,
                                    uint64_t sort_slack_us) {
  const std::vector<char> buf = read_whole_file(path);
  std::vector<Event> events = format == EventFileFormat::Text ? parse_text_events(buf, path)
                                                              : parse_binary_events(buf, path);
  enforce_time_order(events, sort_slack_us, path);
  return events;
}

void write_event_file(const std::string& path, const std::vector<Event>& events,
                      EventFileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  if (format == EventFileFormat::Text) {
    char line[64];
    for (const Event& e : events) {
      int n = std::snprintf(line, sizeof(line), "%llu %u %u %u\n",
                            static_cast<unsigned long long>(e.t), e.x, e.y,
                            e.polarity > 0 ? 1u : 0u);
      out.write(line, n);
    }
  } else {
    std::vector<char> buf(events.size() * kBinaryRecordSize);
    char* p = buf.data();
    for (const Event& e : events) {
      std::memcpy(p, &e.t, 8);
      std::memcpy(p + 8, &e.x, 2);
      std::memcpy(p + 10, &e.y, 2);
      std::memcpy(p + 12, &e.polarity, 1);
      p += kBinaryRecordSize;
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

RectificationLut RectificationLut::identity(int width, int height) {
  RectificationLut lut;
  lut.width = width;
  lut.height = height;
  lut.x_map.resize(static_cast<size_t>(width) * height);
  lut.y_map.resize(static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      lut.x_map[static_cast<size_t>(y) * width + x] = static_cast<float>(x);
      lut.y_map[static_cast<size_t>(y) * width + x] = static_cast<float>(y);
    }
  }
  return lut;
}

RectificationLut read_lut_file(const std::string& path) {
  const std::vector<char> buf = read_whole_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "ELUT", 4) != 0) {
    throw Error(ErrorCode::MalformedRecord, path + ": missing ELUT header");
  }
  uint32_t w, h;
  std::memcpy(&w, buf.data() + 4, 4);
  std::memcpy(&h, buf.data() + 8, 4);
  const size_t n = static_cast<size_t>(w) * h;
  if (buf.size() != 12 + n * 8) {
    throw Error(ErrorCode::MalformedRecord, path + ": size does not match header dimensions");
  }
  RectificationLut lut;
  lut.width = static_cast<int>(w);
  lut.height = static_cast<int>(h);
  lut.x_map.resize(n);
  lut.y_map.resize(n);
  const char* p = buf.data() + 12;
  for (size_t i = 0; i < n; ++i, p += 8) {
    std::memcpy(&lut.x_map[i], p, 4);
    std::memcpy(&lut.y_map[i], p + 4, 4);
  }
  return lut;
}

void write_lut_file(const std::string& path, const RectificationLut& lut) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  out.write("ELUT", 4);
  const uint32_t w = static_cast<uint32_t>(lut.width), h = static_cast<uint32_t>(lut.height);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  const size_t n = static_cast<size_t>(lut.width) * lut.height;
  for (size_t i = 0; i < n; ++i) {
    out.write(reinterpret_cast<const char*>(&lut.x_map[i]), 4);
    out.write(reinterpret_cast<const char*>(&lut.y_map[i]), 4);
  }
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

std::vector<RectifiedEvent> rectify_events(const std::vector<Event>& events,
                                           const RectificationLut& lut, RectifyStats* stats) {
  std::vector<RectifiedEvent> out;
  out.reserve(events.size());
  const float x_max = static_cast<float>(lut.width - 1);
  const float y_max = static_cast<float>(lut.height - 1);
  size_t dropped = 0;
  for (const Event& e : events) {
    if (e.x >= lut.width || e.y >= lut.height) {
      throw Error(ErrorCode::LutSizeMismatch,
                  "event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                      ") exceeds lut size " + std::to_string(lut.width) + "x" +
                      std::to_string(lut.height));
    }
    const float rx = lut.x_at(e.x, e.y);
    const float ry = lut.y_at(e.x, e.y);
    if (rx < 0.f || rx > x_max || ry < 0.f || ry > y_max || !std::isfinite(rx) ||
        !std::isfinite(ry)) {
      ++dropped;
      continue;
    }
    out.push_back(RectifiedEvent{e.t, rx, ry, e.polarity});
  }
  if (stats) stats->dropped_out_of_bounds = dropped;
  return out;
}

WindowCursor::WindowCursor(const std::vector<RectifiedEvent>& left,
                           const std::vector<RectifiedEvent>& right, uint64_t dt_us,
                           uint64_t t0_us)
    : left_(left), right_(right), dt_(dt_us), t0_(t0_us) {
  if (dt_ == 0) {
    throw Error(ErrorCode::InvalidConfig, "window length must be positive");
  }
  uint64_t t_max = 0;
  bool any = false;
  if (!left_.empty()) {
    t_max = std::max(t_max, left_.back().t);
    any = true;
  }
  if (!right_.empty()) {
    t_max = std::max(t_max, right_.back().t);
    any = true;
  }
  t_last_ = any && t_max >= t0_ ? t_max + 1 : t0_;
  // Events before t0 are out of range for every window; skip them up front.
  while (li_ < left_.size() && left_[li_].t < t0_) ++li_;
  while (ri_ < right_.size() && right_[ri_].t < t0_) ++ri_;
}

std::optional<EventWindow> WindowCursor::next() {
  const uint64_t start = t0_ + k_ * dt_;
  if (start >= t_last_) return std::nullopt;
  ++k_;
  EventWindow w;
  w.t_start = start;
  w.t_end = start + dt_;
  while (li_ < left_.size() && left_[li_].t < w.t_end) w.left.push_back(left_[li_++]);
  while (ri_ < right_.size() && right_[ri_].t < w.t_end) w.right.push_back(right_[ri_++]);
  return w;
}

std::vector<EventWindow> window_events(const std::vector<RectifiedEvent>& left,
                                       const std::vector<RectifiedEvent>& right, uint64_t dt_us,
                                       uint64_t t0_us) {
  WindowCursor cursor(left, right, dt_us, t0_us);
  std::vector<EventWindow> windows;
  while (auto w = cursor.next()) windows.push_back(std::move(*w));
  return windows;
}

namespace {

// %.9f keeps round trips below 1e-9 per field; trailing zeros are trimmed
// so exact values print compactly ("0", "1", "0.5").
void append_trimmed(std::string& s, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  std::string field(buf);
  if (field.find('.') != std::string::npos) {
    size_t last = field.find_last_not_of('0');
    if (field[last] == '.') --last;
    field.erase(last + 1);
  }
  if (field == "-0") field = "0";
  s += field;
}

}  // namespace

std::string format_trajectory_line(const TrajectorySample& sample) {
  Eigen::Quaterniond q(sample.pose.R);
  char head[32];
  std::snprintf(head, sizeof(head), "%.6f", sample.t);
  std::string line(head);
  const double fields[7] = {sample.pose.p.x(), sample.pose.p.y(), sample.pose.p.z(),
                            q.x(), q.y(), q.z(), q.w()};
  for (double f : fields) {
    line += ' ';
    append_trimmed(line, f);
  }
  return line;
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  for (const TrajectorySample& s : traj) {
    out << format_trajectory_line(s) << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  Trajectory traj;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t)) continue;  // blank or comment-only line
    if (!(ss >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw Error(ErrorCode::MalformedRecord,
                  path + ": line " + std::to_string(line_no) + " is not a valid pose record");
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (std::abs(q.norm() - 1.0) > 1e-3) {
      throw Error(ErrorCode::MalformedRecord,
                  path + ": line " + std::to_string(line_no) + " quaternion norm " +
                      std::to_string(q.norm()) + " is not unit");
    }
    q.normalize();
    if (!traj.empty() && t <= traj.back().t) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  path + ": line " + std::to_string(line_no) + " timestamp not increasing");
    }
    traj.push_back(TrajectorySample{t, SE3Pose(q.toRotationMatrix(), Vec3(tx, ty, tz))});
  }
  return traj;
}

CalibrationFile read_calibration(const std::string& path) {
  const auto kv = read_key_value_file(path);
  CalibrationFile calib;
  calib.intrinsics.fx = kv_required_double(kv, "fx", path);
  calib.intrinsics.fy = kv_required_double(kv, "fy", path);
  calib.intrinsics.cx = kv_required_double(kv, "cx", path);
  calib.intrinsics.cy = kv_required_double(kv, "cy", path);
  calib.intrinsics.width = static_cast<int>(kv_required_double(kv, "width", path));
  calib.intrinsics.height = static_cast<int>(kv_required_double(kv, "height", path));
  calib.baseline = kv_required_double(kv, "baseline_m", path);
  calib.lut_left_path = kv_string(kv, "lut_left", "");
  calib.lut_right_path = kv_string(kv, "lut_right", "");
  calib.rig().validate();
  return calib;
}

void write_calibration(const std::string& path, const CalibrationFile& calib) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "cannot open " + path + " for writing");
  }
  out.precision(12);
  out << "fx " << calib.intrinsics.fx << "\n"
      << "fy " << calib.intrinsics.fy << "\n"
      << "cx " << calib.intrinsics.cx << "\n"
      << "cy " << calib.intrinsics.cy << "\n"
      << "width " << calib.intrinsics.width << "\n"
      << "height " << calib.intrinsics.height << "\n"
      << "baseline_m " << calib.baseline << "\n";
  if (!calib.lut_left_path.empty()) out << "lut_left " << calib.lut_left_path << "\n";
  if (!calib.lut_right_path.empty()) out << "lut_right " << calib.lut_right_path << "\n";
  if (!out) {
    throw Error(ErrorCode::DiskWrite, "write failed on " + path);
  }
}

}  // namespace sevo

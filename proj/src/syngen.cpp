/* Copyright 2026 The Crossgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "crossgate/syngen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "crossgate/tensor.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace crossgate::syngen {

namespace {

constexpr char kRasterMagic[8] = {'C', 'G', 'R', 'A', 'S', '0', '0', '1'};
// Not-crossing paths keep at least this distance from the road centerline.
constexpr double kCenterMargin = 0.05;

uint64_t clip_seed(const SceneSpec& spec, Domain domain, CrossLabel label, int index) {
  uint64_t h = mix64(spec.seed);
  h = mix64(h ^ (0x10ull + static_cast<uint64_t>(domain)));
  h = mix64(h ^ (0x20ull + static_cast<uint64_t>(label)));
  h = mix64(h ^ static_cast<uint64_t>(index));
  return h;
}

std::string clip_id(Domain domain, CrossLabel label, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%s_%04d", domain == Domain::kSynthetic ? "syn" : "real",
                label == CrossLabel::kCrossing ? "c" : "nc", index);
  return buf;
}

struct Trajectory {
  std::vector<double> xs, ys;  // clean centers, length T+P
  double ped_w = 0, ped_h = 0;
  int ttc = 0;
};

// Samples a clean center path realizing `label`; throws when the spec's
// trajectory parameters cannot realize it within T+P frames.
Trajectory sample_trajectory(const SceneSpec& spec, const DomainStyle& style, CrossLabel label,
                             Rng& rng) {
  const int total = spec.t_obs + spec.p_horizon;
  const double yc = spec.road_center();
  const double vmin = spec.speed_min * style.speed_scale;
  const double vmax = spec.speed_max * style.speed_scale;

  Trajectory tr;
  const double wpx = std::max(2.0, std::round(rng.uniform(spec.ped_w_min, spec.ped_w_max) *
                                              spec.frame_w));
  const double hpx = std::max(2.0, std::round(rng.uniform(spec.ped_h_min, spec.ped_h_max) *
                                              spec.frame_h));
  tr.ped_w = wpx / spec.frame_w;
  tr.ped_h = hpx / spec.frame_h;
  const double hh = tr.ped_h / 2.0;

  if (label == CrossLabel::kCrossing) {
    // Feasibility: some (speed, ttc, side) must place the start point outside
    // the road band and inside the frame.
    const double top_lo = yc - spec.road_top + 0.01;
    const double top_hi = yc - hh - 0.005;
    const double bot_lo = spec.road_bottom - yc + 0.01;
    const double bot_hi = 1.0 - hh - 0.005 - yc;
    const double tmin = spec.t_obs - 1 + spec.ttc_min - 0.4;
    const double tmax = spec.t_obs - 1 + spec.ttc_max - 0.4;
    const double dmin = vmin * tmin, dmax = vmax * tmax;
    const bool top_ok = dmax >= top_lo && dmin <= top_hi && top_lo <= top_hi;
    const bool bot_ok = dmax >= bot_lo && dmin <= bot_hi && bot_lo <= bot_hi;
    if (!top_ok && !bot_ok)
      throw std::invalid_argument(
          "SceneSpec: trajectory params cannot realize a crossing label within T+P frames");

    for (int attempt = 0; attempt < 400; ++attempt) {
      const bool from_top = top_ok && (!bot_ok || rng.uniform() < 0.5);
      const double dir = from_top ? 1.0 : -1.0;
      const double v = rng.uniform(vmin, vmax);
      const int ttc = spec.ttc_min + static_cast<int>(rng.index(spec.ttc_max - spec.ttc_min + 1));
      // 0.4 frames short of the crossing moment: the path sits strictly past
      // the centerline at frame T-1+ttc, even when that is the last frame.
      const double dist = v * (spec.t_obs - 1 + ttc - 0.4);
      const double lo = from_top ? top_lo : bot_lo;
      const double hi = from_top ? top_hi : bot_hi;
      if (dist < lo || dist > hi) continue;
      tr.ttc = ttc;
      const double y0 = yc - dir * dist;
      double x = rng.uniform(0.2, 0.8);
      double vx = rng.uniform(-spec.lateral_frac, spec.lateral_frac) * v;
      tr.xs.resize(total);
      tr.ys.resize(total);
      for (int t = 0; t < total; ++t) {
        tr.xs[t] = x;
        tr.ys[t] = y0 + dir * v * t;
        x += vx * (1.0 + spec.heading_jitter * rng.normal());
        if (x < 0.08 || x > 0.92) vx = -vx;
        x = std::clamp(x, 0.05, 0.95);
      }
      return tr;
    }
    throw std::invalid_argument("SceneSpec: crossing trajectory sampling exhausted retries");
  }

  // Not-crossing: parallel walker, approach-and-stop, or walk-away. None may
  // come within kCenterMargin of the centerline.
  tr.ttc = 0;
  const double pick = rng.uniform();
  const bool from_top = rng.uniform() < 0.5;
  const double dir = from_top ? 1.0 : -1.0;
  const double v = rng.uniform(vmin, vmax);
  const double edge = from_top ? spec.road_top : spec.road_bottom;
  const double hh2 = hh + 0.005;
  tr.xs.resize(total);
  tr.ys.resize(total);

  double x = rng.uniform(0.2, 0.8);
  double vx = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0) * v;

  if (pick < 0.40) {
    // Parallel walker near the road edge; bounded vertical drift.
    const double y0 = from_top ? rng.uniform(hh2, std::max(hh2, edge - 0.02))
                               : rng.uniform(std::min(1.0 - hh2, edge + 0.02), 1.0 - hh2);
    const double gap = std::abs(yc - y0) - kCenterMargin;
    const double drift_total = rng.uniform(-1.0, 1.0) * std::min(0.03, std::max(0.0, gap));
    for (int t = 0; t < total; ++t) {
      tr.xs[t] = x;
      tr.ys[t] = y0 + drift_total * static_cast<double>(t) / total;
      x += vx * (1.0 + spec.heading_jitter * rng.normal());
      if (x < 0.08 || x > 0.92) vx = -vx;
      x = std::clamp(x, 0.05, 0.95);
    }
  } else if (pick < 0.75) {
    // Walks toward the road and stops short of the centerline.
    const double stop_near = yc - dir * kCenterMargin;
    const double stop_far = from_top ? std::max(hh2, edge - 0.06) : std::min(1.0 - hh2, edge + 0.06);
    const double y_stop = stop_far + rng.uniform(0.0, 1.0) * (stop_near - stop_far);
    const double travel = rng.uniform(0.08, 0.25);
    const double y0raw = y_stop - dir * travel;
    const double y0 = from_top ? std::clamp(y0raw, hh2, y_stop) : std::clamp(y0raw, y_stop, 1.0 - hh2);
    double y = y0;
    for (int t = 0; t < total; ++t) {
      tr.xs[t] = x;
      tr.ys[t] = y;
      const double remaining = dir * (y_stop - y);
      const double step = std::min(v, std::max(0.0, remaining));
      y += dir * step;
      x += 0.3 * vx * (1.0 + spec.heading_jitter * rng.normal());
      if (x < 0.08 || x > 0.92) vx = -vx;
      x = std::clamp(x, 0.05, 0.95);
    }
  } else {
    // Walks away from the road.
    const double y0 = from_top ? rng.uniform(hh2, std::max(hh2, edge - 0.03))
                               : rng.uniform(std::min(1.0 - hh2, edge + 0.03), 1.0 - hh2);
    double y = y0;
    for (int t = 0; t < total; ++t) {
      tr.xs[t] = x;
      tr.ys[t] = y;
      const double limit = from_top ? hh2 : 1.0 - hh2;
      y -= dir * 0.6 * v;
      y = from_top ? std::max(y, limit) : std::min(y, limit);
      x += 0.5 * vx * (1.0 + spec.heading_jitter * rng.normal());
      if (x < 0.08 || x > 0.92) vx = -vx;
      x = std::clamp(x, 0.05, 0.95);
    }
  }
  return tr;
}

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
};

PixelRect box_to_rect(const BoundingBox& b, int W, int H) {
  const int wpx = std::max(1, static_cast<int>(std::lround(b.w() * W)));
  const int hpx = std::max(1, static_cast<int>(std::lround(b.h() * H)));
  int x0 = static_cast<int>(std::lround(b.x() * W - wpx / 2.0));
  int y0 = static_cast<int>(std::lround(b.y() * H - hpx / 2.0));
  x0 = std::clamp(x0, 0, W - wpx);
  y0 = std::clamp(y0, 0, H - hpx);
  return {x0, y0, x0 + wpx, y0 + hpx};
}

void box_blur3(std::vector<float>& img, int H, int W) {
  std::vector<float> src = img;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float s = 0.f;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
          s += src[static_cast<size_t>(yy) * W + xx];
          ++n;
        }
      img[static_cast<size_t>(y) * W + x] = s / static_cast<float>(n);
    }
}

void render_frame(const SceneSpec& spec, const DomainStyle& style, const BoundingBox& box,
                  Rng& noise_rng, RasterStack& rgb, RasterStack* depth, RasterStack* semantic,
                  int t) {
  const int H = spec.frame_h, W = spec.frame_w;
  const int road_y0 = static_cast<int>(std::lround(spec.road_top * H));
  const int road_y1 = static_cast<int>(std::lround(spec.road_bottom * H));
  const PixelRect pr = box_to_rect(box, W, H);

  for (int c = 0; c < 3; ++c) {
    std::vector<float> plane(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
      const bool road = y >= road_y0 && y < road_y1;
      const float base = static_cast<float>(road ? style.road[c] : style.background[c]);
      for (int x = 0; x < W; ++x) plane[static_cast<size_t>(y) * W + x] = base;
    }
    const int head_rows = std::max(1, (pr.y1 - pr.y0) / 4);
    for (int y = pr.y0; y < pr.y1; ++y) {
      const bool head = y < pr.y0 + head_rows;
      const float v = static_cast<float>(head ? style.ped_head[c] : style.ped_body[c]);
      for (int x = pr.x0; x < pr.x1; ++x) plane[static_cast<size_t>(y) * W + x] = v;
    }
    for (int p = 0; p < style.blur_passes; ++p) box_blur3(plane, H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float v = plane[static_cast<size_t>(y) * W + x];
        if (style.noise_std > 0.0)
          v += static_cast<float>(style.noise_std * noise_rng.normal());
        rgb.at(t, c, y, x) = std::clamp(v, 0.f, 1.f);
      }
  }

  if (depth != nullptr) {
    // Ground-plane inverse-distance proxy: nearer rows (larger y) get larger
    // values; a pedestrian block takes the value at its foot row.
    auto ground = [&](int y) {
      const double dist = static_cast<double>(H - 1 - y) / static_cast<double>(H - 1);
      return static_cast<float>(1.0 / (1.0 + 3.0 * dist));
    };
    const float ped_depth = ground(pr.y1 - 1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool ped = y >= pr.y0 && y < pr.y1 && x >= pr.x0 && x < pr.x1;
        depth->at(t, 0, y, x) = ped ? ped_depth : ground(y);
      }
  }
  if (semantic != nullptr) {
    for (int y = 0; y < H; ++y) {
      const float road_id = (y >= road_y0 && y < road_y1) ? 1.f : 0.f;
      for (int x = 0; x < W; ++x) semantic->at(t, 0, y, x) = road_id;
    }
    for (int y = pr.y0; y < pr.y1; ++y)
      for (int x = pr.x0; x < pr.x1; ++x) semantic->at(t, 0, y, x) = 2.f;
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ordered_json style_to_json(const DomainStyle& s) {
  return ordered_json{{"background", s.background}, {"road", s.road},
                      {"ped_body", s.ped_body},     {"ped_head", s.ped_head},
                      {"noise_std", s.noise_std},   {"blur_passes", s.blur_passes},
                      {"speed_scale", s.speed_scale}, {"track_noise_std", s.track_noise_std}};
}

DomainStyle style_from_json(const ordered_json& j, DomainStyle base) {
  if (j.contains("background")) j.at("background").get_to(base.background);
  if (j.contains("road")) j.at("road").get_to(base.road);
  if (j.contains("ped_body")) j.at("ped_body").get_to(base.ped_body);
  if (j.contains("ped_head")) j.at("ped_head").get_to(base.ped_head);
  if (j.contains("noise_std")) base.noise_std = j.at("noise_std").get<double>();
  if (j.contains("blur_passes")) base.blur_passes = j.at("blur_passes").get<int>();
  if (j.contains("speed_scale")) base.speed_scale = j.at("speed_scale").get<double>();
  if (j.contains("track_noise_std")) base.track_noise_std = j.at("track_noise_std").get<double>();
  return base;
}

ordered_json spec_to_json_obj(const SceneSpec& s) {
  return ordered_json{{"seed", s.seed},
                      {"frame_h", s.frame_h},
                      {"frame_w", s.frame_w},
                      {"road_top", s.road_top},
                      {"road_bottom", s.road_bottom},
                      {"t_obs", s.t_obs},
                      {"p_horizon", s.p_horizon},
                      {"ttc_min", s.ttc_min},
                      {"ttc_max", s.ttc_max},
                      {"speed_min", s.speed_min},
                      {"speed_max", s.speed_max},
                      {"lateral_frac", s.lateral_frac},
                      {"heading_jitter", s.heading_jitter},
                      {"crossing_probability", s.crossing_probability},
                      {"real_test_fraction", s.real_test_fraction},
                      {"ped_w_min", s.ped_w_min},
                      {"ped_w_max", s.ped_w_max},
                      {"ped_h_min", s.ped_h_min},
                      {"ped_h_max", s.ped_h_max},
                      {"syn_style", style_to_json(s.syn_style)},
                      {"real_style", style_to_json(s.real_style)}};
}

SceneSpec spec_from_json_obj(const ordered_json& j) {
  SceneSpec s;
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) j.at(k).get_to(field);
  };
  get("seed", s.seed);
  get("frame_h", s.frame_h);
  get("frame_w", s.frame_w);
  get("road_top", s.road_top);
  get("road_bottom", s.road_bottom);
  get("t_obs", s.t_obs);
  get("p_horizon", s.p_horizon);
  get("ttc_min", s.ttc_min);
  get("ttc_max", s.ttc_max);
  get("speed_min", s.speed_min);
  get("speed_max", s.speed_max);
  get("lateral_frac", s.lateral_frac);
  get("heading_jitter", s.heading_jitter);
  get("crossing_probability", s.crossing_probability);
  get("real_test_fraction", s.real_test_fraction);
  get("ped_w_min", s.ped_w_min);
  get("ped_w_max", s.ped_w_max);
  get("ped_h_min", s.ped_h_min);
  get("ped_h_max", s.ped_h_max);
  if (j.contains("syn_style")) s.syn_style = style_from_json(j.at("syn_style"), s.syn_style);
  if (j.contains("real_style")) s.real_style = style_from_json(j.at("real_style"), s.real_style);
  s.validate();
  return s;
}

}  // namespace

void SceneSpec::validate() const {
  if (crossing_probability < 0.0 || crossing_probability > 1.0)
    throw std::invalid_argument("SceneSpec: crossing_probability outside [0,1]");
  if (!(road_top > 0.0 && road_bottom < 1.0 && road_top < road_bottom))
    throw std::invalid_argument("SceneSpec: road band must lie strictly inside the frame");
  if (frame_h < 8 || frame_w < 8) throw std::invalid_argument("SceneSpec: frame too small");
  if (t_obs < 1 || p_horizon < 1) throw std::invalid_argument("SceneSpec: T and P must be >= 1");
  if (ttc_min < 0 || ttc_max < ttc_min || ttc_max > p_horizon)
    throw std::invalid_argument("SceneSpec: ttc range must satisfy 0 <= min <= max <= P");
  if (real_test_fraction < 0.0 || real_test_fraction > 1.0)
    throw std::invalid_argument("SceneSpec: real_test_fraction outside [0,1]");
  if (!(speed_min >= 0.0 && speed_max >= speed_min))
    throw std::invalid_argument("SceneSpec: bad speed range");
}

Clip generate_clip(const SceneSpec& spec, Domain domain, CrossLabel label, int index) {
  spec.validate();
  const DomainStyle& style = domain == Domain::kSynthetic ? spec.syn_style : spec.real_style;
  Rng rng(clip_seed(spec, domain, label, index));
  Trajectory tr = sample_trajectory(spec, style, label, rng);

  Clip clip;
  clip.id = clip_id(domain, label, index);
  clip.domain = domain;
  clip.label = label;
  clip.ttc_frames = tr.ttc;

  const int T = spec.t_obs, P = spec.p_horizon;
  std::vector<BoundingBox> obs, fut;
  obs.reserve(T);
  fut.reserve(P);
  for (int t = 0; t < T; ++t) {
    double x = tr.xs[t], y = tr.ys[t];
    if (style.track_noise_std > 0.0) {
      x += style.track_noise_std * rng.normal();
      y += style.track_noise_std * rng.normal();
    }
    obs.emplace_back(x, y, tr.ped_w, tr.ped_h);
  }
  for (int t = T; t < T + P; ++t) fut.emplace_back(tr.xs[t], tr.ys[t], tr.ped_w, tr.ped_h);
  clip.track = BoxTrack(std::move(obs));
  clip.future_track = BoxTrack(std::move(fut));

  const bool syn = domain == Domain::kSynthetic;
  clip.frames = RasterStack(T, 3, spec.frame_h, spec.frame_w);
  if (syn) {
    clip.depth = RasterStack(T, 1, spec.frame_h, spec.frame_w);
    clip.semantic = RasterStack(T, 1, spec.frame_h, spec.frame_w);
  }
  for (int t = 0; t < T; ++t)
    render_frame(spec, style, clip.track[t], rng, clip.frames,
                 syn ? &clip.depth.value() : nullptr, syn ? &clip.semantic.value() : nullptr, t);
  return clip;
}

bool crossing_predicate(const SceneSpec& spec, const Clip& clip) {
  const double yc = spec.road_center();
  const double side0 = clip.track[0].y() - yc;
  if (side0 == 0.0) return true;
  for (size_t t = 0; t < clip.future_track.size(); ++t) {
    const double side = clip.future_track[t].y() - yc;
    if (side * side0 < 0.0) return true;
  }
  return false;
}

CountsMap default_counts(const SceneSpec& spec, int syn_total, int real_total) {
  CountsMap m;
  const double p = spec.crossing_probability;
  const int syn_c = static_cast<int>(std::lround(syn_total * p));
  const int real_c = static_cast<int>(std::lround(real_total * p));
  m[{Domain::kSynthetic, CrossLabel::kCrossing}] = syn_c;
  m[{Domain::kSynthetic, CrossLabel::kNotCrossing}] = syn_total - syn_c;
  m[{Domain::kReal, CrossLabel::kCrossing}] = real_c;
  m[{Domain::kReal, CrossLabel::kNotCrossing}] = real_total - real_c;
  return m;
}

void write_raster_file(const std::string& path, const RasterFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kRasterMagic, 8);
  const uint32_t nblocks = static_cast<uint32_t>(f.blocks.size());
  out.write(reinterpret_cast<const char*>(&nblocks), 4);
  for (const auto& [name, r] : f.blocks) {
    char nm[16] = {0};
    std::strncpy(nm, name.c_str(), 15);
    out.write(nm, 16);
    const uint32_t ndim = 4;
    out.write(reinterpret_cast<const char*>(&ndim), 4);
    const uint32_t dims[4] = {static_cast<uint32_t>(r.t), static_cast<uint32_t>(r.c),
                              static_cast<uint32_t>(r.h), static_cast<uint32_t>(r.w)};
    out.write(reinterpret_cast<const char*>(dims), 16);
    out.write(reinterpret_cast<const char*>(r.data.data()),
              static_cast<std::streamsize>(r.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RasterFile read_raster_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRasterMagic, 8) != 0)
    throw std::runtime_error("bad raster magic in " + path);
  uint32_t nblocks = 0;
  in.read(reinterpret_cast<char*>(&nblocks), 4);
  RasterFile f;
  for (uint32_t b = 0; b < nblocks; ++b) {
    char nm[17] = {0};
    in.read(nm, 16);
    uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), 4);
    if (ndim != 4) throw std::runtime_error("unsupported raster rank in " + path);
    uint32_t dims[4];
    in.read(reinterpret_cast<char*>(dims), 16);
    RasterStack r(dims[0], dims[1], dims[2], dims[3]);
    in.read(reinterpret_cast<char*>(r.data.data()),
            static_cast<std::streamsize>(r.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated raster file " + path);
    f.blocks.emplace_back(nm, std::move(r));
  }
  return f;
}

void write_clip(const Clip& clip, const std::string& dir) {
  fs::create_directories(dir);
  RasterFile rf;
  rf.blocks.emplace_back("rgb", clip.frames);
  if (clip.depth) rf.blocks.emplace_back("depth", *clip.depth);
  if (clip.semantic) rf.blocks.emplace_back("semantic", *clip.semantic);
  write_raster_file(dir + "/frames.bin", rf);

  std::ostringstream csv;
  csv << "frame_idx,x,y,w,h\n";
  csv.precision(17);
  auto emit = [&](size_t i, const BoundingBox& b) {
    csv << i << ',' << b.x() << ',' << b.y() << ',' << b.w() << ',' << b.h() << '\n';
  };
  for (size_t i = 0; i < clip.track.size(); ++i) emit(i, clip.track[i]);
  for (size_t i = 0; i < clip.future_track.size(); ++i)
    emit(clip.track.size() + i, clip.future_track[i]);
  write_text_file(dir + "/track.csv", csv.str());

  ordered_json meta{{"id", clip.id},
                    {"domain", to_string(clip.domain)},
                    {"label", to_string(clip.label)},
                    {"ttc", clip.ttc_frames},
                    {"t_obs", clip.frames.t},
                    {"p_horizon", static_cast<int64_t>(clip.future_track.size())},
                    {"frame_h", clip.frames.h},
                    {"frame_w", clip.frames.w},
                    {"modalities", [&] {
                       std::vector<std::string> m{"rgb"};
                       if (clip.depth) m.push_back("depth");
                       if (clip.semantic) m.push_back("semantic");
                       return m;
                     }()}};
  write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
}

Clip load_clip(const std::string& dir) {
  Clip clip;
  const ordered_json meta = ordered_json::parse(read_text_file(dir + "/meta.json"));
  clip.id = meta.at("id").get<std::string>();
  clip.domain = meta.at("domain").get<std::string>() == "synthetic" ? Domain::kSynthetic
                                                                    : Domain::kReal;
  clip.label = meta.at("label").get<std::string>() == "crossing" ? CrossLabel::kCrossing
                                                                 : CrossLabel::kNotCrossing;
  clip.ttc_frames = meta.at("ttc").get<int>();

  RasterFile rf = read_raster_file(dir + "/frames.bin");
  for (auto& [name, r] : rf.blocks) {
    if (name == "rgb") clip.frames = std::move(r);
    else if (name == "depth") clip.depth = std::move(r);
    else if (name == "semantic") clip.semantic = std::move(r);
  }

  std::istringstream csv(read_text_file(dir + "/track.csv"));
  std::string line;
  std::getline(csv, line);  // header
  std::vector<BoundingBox> boxes;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    double vals[5];
    for (double& val : vals) {
      if (!std::getline(ls, tok, ',')) throw std::runtime_error("bad track.csv row in " + dir);
      val = std::stod(tok);
    }
    boxes.emplace_back(vals[1], vals[2], vals[3], vals[4]);
  }
  const auto t_obs = meta.at("t_obs").get<size_t>();
  if (boxes.size() < t_obs) throw std::runtime_error("track.csv shorter than t_obs in " + dir);
  clip.track = BoxTrack({boxes.begin(), boxes.begin() + static_cast<long>(t_obs)});
  clip.future_track = BoxTrack({boxes.begin() + static_cast<long>(t_obs), boxes.end()});
  return clip;
}

DatasetManifest generate_dataset(const SceneSpec& spec, const CountsMap& counts,
                                 const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.spec = spec;
  m.root = out_dir;

  for (const auto& [key, n] : counts) {
    const auto [domain, label] = key;
    const std::string ckey = std::string(to_string(domain)) + "/" + to_string(label);
    m.counts[ckey] = n;
    const int test_count =
        domain == Domain::kReal
            ? static_cast<int>(std::lround(n * spec.real_test_fraction))
            : 0;
    for (int i = 0; i < n; ++i) {
      Clip clip = generate_clip(spec, domain, label, i);
      const std::string rel = std::string(to_string(domain)) + "/" + clip.id;
      write_clip(clip, out_dir + "/" + rel);
      ClipRecord rec;
      rec.id = clip.id;
      rec.domain = domain;
      rec.label = label;
      rec.split = (domain == Domain::kReal && i >= n - test_count) ? "test" : "train";
      rec.ttc = clip.ttc_frames;
      rec.path = rel;
      m.clips.push_back(std::move(rec));
    }
  }
  write_text_file(out_dir + "/manifest.json", manifest_to_json(m));
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["spec"] = spec_to_json_obj(m.spec);
  j["counts"] = m.counts;
  ordered_json clips = ordered_json::array();
  for (const auto& c : m.clips) {
    clips.push_back(ordered_json{{"id", c.id},
                                 {"domain", to_string(c.domain)},
                                 {"label", to_string(c.label)},
                                 {"split", c.split},
                                 {"ttc", c.ttc},
                                 {"path", c.path}});
  }
  j["clips"] = std::move(clips);
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  m.spec = spec_from_json_obj(j.at("spec"));
  for (const auto& [k, v] : j.at("counts").items()) m.counts[k] = v.get<int>();
  for (const auto& c : j.at("clips")) {
    ClipRecord rec;
    rec.id = c.at("id").get<std::string>();
    rec.domain = c.at("domain").get<std::string>() == "synthetic" ? Domain::kSynthetic
                                                                  : Domain::kReal;
    rec.label = c.at("label").get<std::string>() == "crossing" ? CrossLabel::kCrossing
                                                               : CrossLabel::kNotCrossing;
    rec.split = c.at("split").get<std::string>();
    rec.ttc = c.at("ttc").get<int>();
    rec.path = c.at("path").get<std::string>();
    m.clips.push_back(std::move(rec));
  }
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  DatasetManifest m = manifest_from_json(read_text_file(path));
  m.root = fs::path(path).parent_path().string();
  return m;
}

std::string scene_spec_to_json(const SceneSpec& spec) { return spec_to_json_obj(spec).dump(2) + "\n"; }

SceneSpec scene_spec_from_json(const std::string& text) {
  return spec_from_json_obj(ordered_json::parse(text));
}

}  // namespace crossgate::syngen

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

#ifndef CROSSGATE_SYNGEN_HPP_
#define CROSSGATE_SYNGEN_HPP_

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crossgate/datamodel.hpp"

namespace crossgate::syngen {

// Per-domain rendering and behavior parameters. The two domains share scene
// geometry but differ in palette, degradation, and walking-speed scale, so
// both an appearance gap and a behavior gap exist between them.
struct DomainStyle {
  std::array<double, 3> background{0.32, 0.72, 0.36};
  std::array<double, 3> road{0.30, 0.30, 0.34};
  std::array<double, 3> ped_body{0.85, 0.15, 0.15};
  std::array<double, 3> ped_head{0.95, 0.80, 0.25};
  double noise_std = 0.01;
  int blur_passes = 0;
  double speed_scale = 1.3;
  double track_noise_std = 0.0;  // jitter on observed boxes, not on ground truth
};

struct SceneSpec {
  uint64_t seed = 7;
  int frame_h = 64, frame_w = 64;
  double road_top = 0.40, road_bottom = 0.70;  // fractions of frame height
  int t_obs = 16, p_horizon = 16;
  int ttc_min = 8, ttc_max = 16;
  double speed_min = 0.006, speed_max = 0.014;  // fraction of height per frame
  double lateral_frac = 0.5;
  double heading_jitter = 0.15;
  double crossing_probability = 1226.0 / 3181.0;
  double real_test_fraction = 2.0 / 3.0;
  double ped_w_min = 0.14, ped_w_max = 0.20;
  double ped_h_min = 0.22, ped_h_max = 0.30;
  DomainStyle syn_style;
  DomainStyle real_style{{0.50, 0.48, 0.52},
                         {0.36, 0.33, 0.30},
                         {0.20, 0.25, 0.60},
                         {0.70, 0.60, 0.50},
                         0.04,
                         1,
                         1.0,
                         0.006};

  double road_center() const { return 0.5 * (road_top + road_bottom); }
  // Throws std::invalid_argument when any invariant is violated.
  void validate() const;
};

struct ClipRecord {
  std::string id;
  Domain domain = Domain::kSynthetic;
  CrossLabel label = CrossLabel::kNotCrossing;
  std::string split;  // "train" | "test"
  int ttc = 0;
  std::string path;  // relative to the dataset root
};

struct DatasetManifest {
  int format_version = 1;
  SceneSpec spec;
  std::map<std::string, int> counts;  // "<domain>/<label>" -> n
  std::vector<ClipRecord> clips;
  std::string root;  // dataset root directory (set when loaded/written)
};

using CountsMap = std::map<std::pair<Domain, CrossLabel>, int>;

// Deterministic function of (spec.seed, domain, label, index).
Clip generate_clip(const SceneSpec& spec, Domain domain, CrossLabel label, int index);

// Writes clips + manifest.json under out_dir; per-class counts honored exactly.
DatasetManifest generate_dataset(const SceneSpec& spec, const CountsMap& counts,
                                 const std::string& out_dir);

// Recomputes the crossing predicate from the ground-truth future track.
bool crossing_predicate(const SceneSpec& spec, const Clip& clip);

// Counts scaled to the reference crossing:not-crossing proportion.
CountsMap default_counts(const SceneSpec& spec, int syn_total, int real_total);

void write_clip(const Clip& clip, const std::string& dir);
Clip load_clip(const std::string& dir);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
DatasetManifest load_manifest(const std::string& path);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

// Raw raster block container for frames.bin (8-byte magic + shape headers).
struct RasterFile {
  std::vector<std::pair<std::string, RasterStack>> blocks;
};
void write_raster_file(const std::string& path, const RasterFile& f);
RasterFile read_raster_file(const std::string& path);

}  // namespace crossgate::syngen

#endif  // CROSSGATE_SYNGEN_HPP_

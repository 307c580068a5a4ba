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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crossgate/syngen.hpp"
#include "support/test_util.hpp"

using namespace crossgate;
using namespace crossgate::syngen;

namespace {

SceneSpec small_spec() {
  SceneSpec s;
  s.seed = 99;
  s.frame_h = 32;
  s.frame_w = 32;
  return s;
}

}  // namespace

TEST_CASE("generate_clip is bit-identical for the same tuple") {
  const SceneSpec spec = small_spec();
  const Clip a = generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 3);
  const Clip b = generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 3);
  CHECK(a.frames.data == b.frames.data);
  CHECK(a.depth->data == b.depth->data);
  CHECK(a.semantic->data == b.semantic->data);
  REQUIRE(a.track.size() == b.track.size());
  for (size_t i = 0; i < a.track.size(); ++i) CHECK(a.track[i] == b.track[i]);
  CHECK(a.ttc_frames == b.ttc_frames);

  const Clip c = generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 4);
  CHECK(a.frames.data != c.frames.data);
}

TEST_CASE("label is a pure function of the future-track geometry") {
  const SceneSpec spec = small_spec();
  for (Domain d : {Domain::kSynthetic, Domain::kReal}) {
    for (CrossLabel l : {CrossLabel::kCrossing, CrossLabel::kNotCrossing}) {
      for (int i = 0; i < 40; ++i) {
        const Clip c = generate_clip(spec, d, l, i);
        CHECK(crossing_predicate(spec, c) == (l == CrossLabel::kCrossing));
        CHECK(validate_clip(c, spec.t_obs).empty());
        if (l == CrossLabel::kCrossing) {
          CHECK(c.ttc_frames >= spec.ttc_min);
          CHECK(c.ttc_frames <= spec.ttc_max);
        }
      }
    }
  }
}

TEST_CASE("semantic raster pedestrian area matches box geometry") {
  const SceneSpec spec = small_spec();
  for (int i = 0; i < 12; ++i) {
    const Clip c = generate_clip(spec, Domain::kSynthetic,
                                 i % 2 ? CrossLabel::kCrossing : CrossLabel::kNotCrossing, i);
    for (int64_t t = 0; t < c.semantic->t; ++t) {
      int64_t ped_pixels = 0;
      for (int64_t y = 0; y < c.semantic->h; ++y)
        for (int64_t x = 0; x < c.semantic->w; ++x)
          if (c.semantic->at(t, 0, y, x) == 2.f) ++ped_pixels;
      const double box_area =
          c.track[static_cast<size_t>(t)].area() * spec.frame_h * spec.frame_w;
      CHECK(std::abs(ped_pixels - box_area) <= 0.10 * box_area);
    }
  }
}

TEST_CASE("depth raster is monotone per column under the ground-plane model") {
  const SceneSpec spec = small_spec();
  const Clip c = generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 7);
  for (int64_t t = 0; t < c.depth->t; ++t)
    for (int64_t x = 0; x < c.depth->w; ++x)
      for (int64_t y = 0; y + 1 < c.depth->h; ++y)
        CHECK(c.depth->at(t, 0, y + 1, x) >= c.depth->at(t, 0, y, x) - 1e-9f);
}

TEST_CASE("domain shift is measurable in per-channel color statistics") {
  const SceneSpec spec = small_spec();
  double syn_mean[3] = {0, 0, 0}, real_mean[3] = {0, 0, 0};
  int64_t n = 0;
  for (int i = 0; i < 10; ++i) {
    const Clip s = generate_clip(spec, Domain::kSynthetic, CrossLabel::kNotCrossing, i);
    const Clip r = generate_clip(spec, Domain::kReal, CrossLabel::kNotCrossing, i);
    const int64_t per_chan = s.frames.t * s.frames.h * s.frames.w;
    for (int ch = 0; ch < 3; ++ch)
      for (int64_t j = 0; j < per_chan; ++j) {
        syn_mean[ch] += s.frames.data[static_cast<size_t>(ch * per_chan + j)];
        real_mean[ch] += r.frames.data[static_cast<size_t>(ch * per_chan + j)];
      }
    n += per_chan;
  }
  double max_gap = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    max_gap = std::max(max_gap, std::abs(syn_mean[ch] - real_mean[ch]) / n);
  // far above the noise floor (noise_std / sqrt(npix) ~ 1e-4)
  CHECK(max_gap > 0.03);
}

TEST_CASE("infeasible trajectory parameters are rejected") {
  SceneSpec spec = small_spec();
  spec.speed_min = 0.0;
  spec.speed_max = 0.0;
  CHECK_THROWS_AS(generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 0),
                  std::invalid_argument);
  // not-crossing remains realizable (standing still is allowed)
  CHECK_NOTHROW(generate_clip(spec, Domain::kSynthetic, CrossLabel::kNotCrossing, 0));
}

TEST_CASE("scene spec invariants") {
  SceneSpec bad = small_spec();
  bad.crossing_probability = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SceneSpec bad2 = small_spec();
  bad2.road_top = -0.1;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
  // spec json round trip
  const SceneSpec s = small_spec();
  const SceneSpec back = scene_spec_from_json(scene_spec_to_json(s));
  CHECK(back.seed == s.seed);
  CHECK(back.frame_h == s.frame_h);
  CHECK(back.real_style.noise_std == s.real_style.noise_std);
}

TEST_CASE("generate_dataset honors counts exactly and round-trips clips") {
  testutil::TempDir tmp("syngen");
  const SceneSpec spec = small_spec();
  CountsMap counts;
  counts[{Domain::kSynthetic, CrossLabel::kCrossing}] = 4;
  counts[{Domain::kSynthetic, CrossLabel::kNotCrossing}] = 6;
  counts[{Domain::kReal, CrossLabel::kCrossing}] = 2;
  counts[{Domain::kReal, CrossLabel::kNotCrossing}] = 3;
  const DatasetManifest m = generate_dataset(spec, counts, tmp.path());

  CHECK(m.counts.at("synthetic/crossing") == 4);
  CHECK(m.counts.at("synthetic/not_crossing") == 6);
  CHECK(m.counts.at("real/crossing") == 2);
  CHECK(m.counts.at("real/not_crossing") == 3);
  CHECK(m.clips.size() == 15);
  for (const auto& rec : m.clips)
    CHECK(std::filesystem::exists(tmp.path() + "/" + rec.path + "/frames.bin"));

  // loaded clip matches the generated one
  const Clip gen = generate_clip(spec, Domain::kSynthetic, CrossLabel::kCrossing, 1);
  const Clip loaded = load_clip(tmp.path() + "/synthetic/" + gen.id);
  CHECK(loaded.frames.data == gen.frames.data);
  CHECK(loaded.depth->data == gen.depth->data);
  CHECK(loaded.label == gen.label);
  CHECK(loaded.ttc_frames == gen.ttc_frames);
  REQUIRE(loaded.track.size() == gen.track.size());
  for (size_t i = 0; i < gen.track.size(); ++i) {
    CHECK(loaded.track[i].x() == doctest::Approx(gen.track[i].x()).epsilon(1e-15));
    CHECK(loaded.track[i].w() == doctest::Approx(gen.track[i].w()).epsilon(1e-15));
  }

  // manifest reload agrees
  const DatasetManifest reloaded = load_manifest(tmp.path() + "/manifest.json");
  CHECK(reloaded.clips.size() == m.clips.size());
  CHECK(reloaded.spec.seed == spec.seed);
}

TEST_CASE("dataset regeneration is byte-identical") {
  testutil::TempDir tmp1("regen1"), tmp2("regen2");
  const SceneSpec spec = small_spec();
  const CountsMap counts = default_counts(spec, 12, 9);
  generate_dataset(spec, counts, tmp1.path());
  generate_dataset(spec, counts, tmp2.path());
  const std::string m1 = testutil::read_file(tmp1.path() + "/manifest.json");
  const std::string m2 = testutil::read_file(tmp2.path() + "/manifest.json");
  REQUIRE(!m1.empty());
  CHECK(m1 == m2);
  CHECK(fnv1a(m1.data(), m1.size()) == fnv1a(m2.data(), m2.size()));
  // a clip payload is byte-identical as well
  const std::string c1 = testutil::read_file(tmp1.path() + "/synthetic/syn_c_0000/frames.bin");
  const std::string c2 = testutil::read_file(tmp2.path() + "/synthetic/syn_c_0000/frames.bin");
  CHECK(c1 == c2);
}

TEST_CASE("default counts scale the reference crossing proportion within one clip") {
  const SceneSpec spec = small_spec();
  const CountsMap counts = default_counts(spec, 400, 300);
  const double ref = 1226.0 / 3181.0;
  const int syn_c = counts.at({Domain::kSynthetic, CrossLabel::kCrossing});
  const int real_c = counts.at({Domain::kReal, CrossLabel::kCrossing});
  CHECK(std::abs(syn_c - 400 * ref) <= 1.0);
  CHECK(std::abs(real_c - 300 * ref) <= 1.0);
  CHECK(counts.at({Domain::kSynthetic, CrossLabel::kNotCrossing}) == 400 - syn_c);
}

TEST_CASE("real split assignment follows real_test_fraction deterministically") {
  testutil::TempDir tmp("split");
  SceneSpec spec = small_spec();
  spec.real_test_fraction = 2.0 / 3.0;
  CountsMap counts;
  counts[{Domain::kReal, CrossLabel::kCrossing}] = 6;
  counts[{Domain::kReal, CrossLabel::kNotCrossing}] = 9;
  counts[{Domain::kSynthetic, CrossLabel::kCrossing}] = 2;
  counts[{Domain::kSynthetic, CrossLabel::kNotCrossing}] = 2;
  const DatasetManifest m = generate_dataset(spec, counts, tmp.path());
  int train = 0, test = 0;
  for (const auto& rec : m.clips) {
    if (rec.domain == Domain::kSynthetic) CHECK(rec.split == "train");
    else (rec.split == "test" ? test : train)++;
  }
  CHECK(train == 5);
  CHECK(test == 10);
}

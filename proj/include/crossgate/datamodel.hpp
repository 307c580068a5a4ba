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

#ifndef CROSSGATE_DATAMODEL_HPP_
#define CROSSGATE_DATAMODEL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crossgate {

enum class Domain : int { kSynthetic = 0, kReal = 1 };
enum class CrossLabel : int { kNotCrossing = 0, kCrossing = 1 };

const char* to_string(Domain d);
const char* to_string(CrossLabel l);

// Axis-aligned pedestrian box, stored as fractions of the frame. Construction
// clamps the center so the full w x h rectangle lies inside [0,1]^2; clamping
// is idempotent and preserves area. Immutable after construction.
class BoundingBox {
 public:
  BoundingBox(double x_center, double y_center, double w, double h);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }

  double left() const { return x_ - w_ / 2.0; }
  double right() const { return x_ + w_ / 2.0; }
  double top() const { return y_ - h_ / 2.0; }
  double bottom() const { return y_ + h_ / 2.0; }
  double area() const { return w_ * h_; }

  bool operator==(const BoundingBox& o) const {
    return x_ == o.x_ && y_ == o.y_ && w_ == o.w_ && h_ == o.h_;
  }

 private:
  double x_, y_, w_, h_;
};

// Ordered per-frame box sequence; length T for observations, P for horizons.
struct BoxTrack {
  std::vector<BoundingBox> boxes;

  BoxTrack() = default;
  explicit BoxTrack(std::vector<BoundingBox> b) : boxes(std::move(b)) {}
  size_t size() const { return boxes.size(); }
  const BoundingBox& operator[](size_t i) const { return boxes[i]; }
};

// Frame stack in (T, c, h, w) layout, float32 like the on-disk format.
struct RasterStack {
  int64_t t = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  RasterStack() = default;
  RasterStack(int64_t t_, int64_t c_, int64_t h_, int64_t w_)
      : t(t_), c(c_), h(h_), w(w_), data(static_cast<size_t>(t_ * c_ * h_ * w_), 0.f) {}
  float& at(int64_t ti, int64_t ci, int64_t y, int64_t x) {
    return data[static_cast<size_t>(((ti * c + ci) * h + y) * w + x)];
  }
  float at(int64_t ti, int64_t ci, int64_t y, int64_t x) const {
    return data[static_cast<size_t>(((ti * c + ci) * h + y) * w + x)];
  }
  bool empty() const { return data.empty(); }
};

// A T-frame observation with modality payloads, its future track, and the
// crossing label defined at frame T+ttc_frames.
struct Clip {
  std::string id;
  Domain domain = Domain::kSynthetic;
  RasterStack frames;                 // RGB, (T,3,h,w), values in [0,1]
  std::optional<RasterStack> depth;   // (T,1,h,w), synthetic only
  std::optional<RasterStack> semantic;// (T,1,h,w) class ids, synthetic only
  BoxTrack track;        // length T
  BoxTrack future_track; // length P
  CrossLabel label = CrossLabel::kNotCrossing;
  int ttc_frames = 0;
};

// Fixed-dimension embedding; the currency between branches and the gate.
struct FeatureEmbedding {
  std::vector<double> values;

  FeatureEmbedding() = default;
  explicit FeatureEmbedding(std::vector<double> v) : values(std::move(v)) {}
  int64_t dim() const { return static_cast<int64_t>(values.size()); }
};

// Intersection-over-union of the rectangles implied by center/size.
// Degenerate zero-area boxes yield 0.
double iou(const BoundingBox& a, const BoundingBox& b);

// Euclidean distance between denormalized centers, in pixels.
double center_distance(const BoundingBox& a, const BoundingBox& b, double frame_w, double frame_h);

// Checks every Clip invariant and reports all violations; never throws.
std::vector<std::string> validate_clip(const Clip& c, int expected_t = 0);

}  // namespace crossgate

#endif  // CROSSGATE_DATAMODEL_HPP_

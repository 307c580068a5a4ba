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

#include "crossgate/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossgate {

const char* to_string(Domain d) {
  return d == Domain::kSynthetic ? "synthetic" : "real";
}

const char* to_string(CrossLabel l) {
  return l == CrossLabel::kCrossing ? "crossing" : "not_crossing";
}

BoundingBox::BoundingBox(double x_center, double y_center, double w, double h) {
  if (!(std::isfinite(x_center) && std::isfinite(y_center) && std::isfinite(w) &&
        std::isfinite(h)))
    throw std::invalid_argument("BoundingBox: non-finite field");
  if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("BoundingBox: w and h must be > 0");
  w_ = std::min(w, 1.0);
  h_ = std::min(h, 1.0);
  x_ = std::clamp(x_center, w_ / 2.0, 1.0 - w_ / 2.0);
  y_ = std::clamp(y_center, h_ / 2.0, 1.0 - h_ / 2.0);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double center_distance(const BoundingBox& a, const BoundingBox& b, double frame_w,
                       double frame_h) {
  if (!(frame_w > 0.0) || !(frame_h > 0.0))
    throw std::invalid_argument("center_distance: frame size must be positive");
  const double dx = (a.x() - b.x()) * frame_w;
  const double dy = (a.y() - b.y()) * frame_h;
  return std::hypot(dx, dy);
}

std::vector<std::string> validate_clip(const Clip& c, int expected_t) {
  std::vector<std::string> out;
  const bool syn = c.domain == Domain::kSynthetic;

  if (c.frames.empty()) out.push_back("frames: RGB stack is empty");
  if (!c.frames.empty() && c.frames.c != 3) out.push_back("frames: RGB stack must have 3 channels");

  const bool has_depth = c.depth.has_value() && !c.depth->empty();
  const bool has_sem = c.semantic.has_value() && !c.semantic->empty();
  if (syn && !(has_depth && has_sem))
    out.push_back("modalities/domain mismatch: synthetic clip must carry depth and semantic");
  if (!syn && (has_depth || has_sem))
    out.push_back("modalities/domain mismatch: real clip must carry RGB only");

  auto check_dims = [&](const RasterStack& r, const char* name) {
    if (r.t != c.frames.t || r.h != c.frames.h || r.w != c.frames.w)
      out.push_back(std::string(name) + ": raster dims differ from RGB stack");
    if (r.c != 1) out.push_back(std::string(name) + ": expected single channel");
  };
  if (has_depth) check_dims(*c.depth, "depth");
  if (has_sem) check_dims(*c.semantic, "semantic");

  if (expected_t > 0 && c.frames.t != expected_t)
    out.push_back("length: clip has " + std::to_string(c.frames.t) + " frames, expected " +
                  std::to_string(expected_t));
  if (c.track.size() != static_cast<size_t>(c.frames.t))
    out.push_back("length: track length differs from frame count");
  if (c.track.size() == 0) out.push_back("track: empty");
  if (c.future_track.size() == 0) out.push_back("future_track: empty");
  if (c.ttc_frames < 0) out.push_back("ttc: negative");

  for (float v : c.frames.data) {
    if (!std::isfinite(v) || v < 0.f || v > 1.f) {
      out.push_back("frames: values outside [0,1]");
      break;
    }
  }
  return out;
}

}  // namespace crossgate

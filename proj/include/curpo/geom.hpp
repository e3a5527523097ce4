/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace curpo {

/// Axis-aligned box on an integer canvas [0, S] x [0, S]. Boxes are closed
/// rectangles; area is (x2 - x1) * (y2 - y1), so x1 == x2 is a legal
/// zero-area box.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  friend bool operator==(const BBox&, const BBox&) = default;

  bool canonical() const noexcept { return x1 <= x2 && y1 <= y2; }

  /// Swap coordinates so that x1 <= x2 and y1 <= y2.
  BBox canonicalized() const noexcept {
    return {std::min(x1, x2), std::min(y1, y2), std::max(x1, x2),
            std::max(y1, y2)};
  }

  BBox clamped(int canvas) const noexcept {
    auto c = [canvas](int v) { return std::clamp(v, 0, canvas); };
    return {c(x1), c(y1), c(x2), c(y2)};
  }

  friend std::ostream& operator<<(std::ostream& os, const BBox& b) {
    return os << '(' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2
              << ')';
  }
};

inline std::int64_t area(const BBox& b) noexcept {
  return static_cast<std::int64_t>(b.x2 - b.x1) *
         static_cast<std::int64_t>(b.y2 - b.y1);
}

inline std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept {
  const std::int64_t w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const std::int64_t h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0 && h > 0) ? w * h : 0;
}

inline std::int64_t union_area(const BBox& a, const BBox& b) noexcept {
  return area(a) + area(b) - intersection_area(a, b);
}

inline BBox enclosing_box(const BBox& a, const BBox& b) noexcept {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

/// Intersection over union. A zero union means both boxes are degenerate:
/// identical ones score 1, anything else 0.
inline double iou(const BBox& a, const BBox& b) noexcept {
  const std::int64_t u = union_area(a, b);
  if (u == 0) return a == b ? 1.0 : 0.0;
  return static_cast<double>(intersection_area(a, b)) / static_cast<double>(u);
}

/// Generalized IoU: IoU minus the fraction of the enclosing box not covered
/// by the union. Range [-1, 1]; -1 is only approached by far-apart boxes.
inline double giou(const BBox& a, const BBox& b) noexcept {
  const std::int64_t c = area(enclosing_box(a, b));
  if (c == 0) return a == b ? 1.0 : 0.0;
  const std::int64_t u = union_area(a, b);
  const double overlap =
      u == 0 ? 0.0
             : static_cast<double>(intersection_area(a, b)) /
                   static_cast<double>(u);
  return overlap - static_cast<double>(c - u) / static_cast<double>(c);
}

inline constexpr double kGiouTolerance = 1e-9;

/// Affine map of gIoU from [-1, 1] onto the visual reward range [0, 2].
inline double scale_giou(double g) {
  if (!(g >= -1.0 - kGiouTolerance && g <= 1.0 + kGiouTolerance))
    throw std::out_of_range("scale_giou: gIoU " + std::to_string(g) +
                            " outside [-1, 1]");
  return std::clamp(g, -1.0, 1.0) + 1.0;
}

}  // namespace curpo

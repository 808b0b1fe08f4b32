#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sir/errors.hpp"

namespace sir {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Ordered set of 2D landmarks. Ordering is semantic: index j always refers to
// the same landmark. Interchangeable with the flat vector
// (x1, y1, x2, y2, ..., xM, yM).
struct LandmarkSet {
  std::vector<Point2> points;

  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Point2> pts) : points(std::move(pts)) {}

  std::size_t count() const { return points.size(); }

  std::vector<double> flat() const {
    std::vector<double> v;
    v.reserve(2 * points.size());
    for (const Point2& p : points) {
      v.push_back(p.x);
      v.push_back(p.y);
    }
    return v;
  }

  static LandmarkSet from_flat(std::span<const double> v) {
    if (v.size() % 2 != 0) throw ShapeError("flat landmark vector has odd length");
    LandmarkSet s;
    s.points.reserve(v.size() / 2);
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
      s.points.push_back({v[i], v[i + 1]});
    }
    return s;
  }

  Point2 centroid() const {
    Point2 c;
    for (const Point2& p : points) {
      c.x += p.x;
      c.y += p.y;
    }
    if (!points.empty()) {
      c.x /= static_cast<double>(points.size());
      c.y /= static_cast<double>(points.size());
    }
    return c;
  }
};

// Axis-aligned face crop rectangle, detector-style.
struct FaceBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double side() const { return std::max(w, h); }
  Point2 center() const { return {x + w / 2.0, y + h / 2.0}; }
  bool valid() const { return w > 0.0 && h > 0.0; }
};

// Face box synthesized from annotations when no detector box is available:
// the landmark bounding box expanded by `expand` on each side.
inline FaceBox landmark_bounding_box(const LandmarkSet& lms, double expand = 0.20) {
  if (lms.points.empty()) throw DataError("cannot derive a box from zero landmarks");
  double x0 = lms.points[0].x, x1 = x0, y0 = lms.points[0].y, y1 = y0;
  for (const Point2& p : lms.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  double w = x1 - x0, h = y1 - y0;
  return {x0 - expand * w, y0 - expand * h, w * (1 + 2 * expand), h * (1 + 2 * expand)};
}

// Uniform scale followed by translation: p' = scale * p + (tx, ty).
// The only coordinate map used between raw images and normalized face crops,
// so annotation round trips are exact.
struct ScaleTranslate {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(const Point2& p) const { return {scale * p.x + tx, scale * p.y + ty}; }
  ScaleTranslate inverse() const { return {1.0 / scale, -tx / scale, -ty / scale}; }

  LandmarkSet apply(const LandmarkSet& lms) const {
    LandmarkSet out;
    out.points.reserve(lms.points.size());
    for (const Point2& p : lms.points) out.points.push_back(apply(p));
    return out;
  }

  FaceBox apply(const FaceBox& b) const {
    Point2 o = apply(Point2{b.x, b.y});
    return {o.x, o.y, scale * b.w, scale * b.h};
  }
};

}  // namespace sir

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <string>

namespace gpswarm {

using Vec2 = Eigen::Vector2d;

/// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Rect {
  Vec2 lo{-1.0, -1.0};
  Vec2 hi{1.0, 1.0};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double area() const { return width() * height(); }
  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), lo.x(), hi.x()), std::clamp(p.y(), lo.y(), hi.y())};
  }
};

/// Raised when a linear system cannot be factored stably.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpswarm

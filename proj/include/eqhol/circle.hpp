#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>

namespace eqhol {

/// Reduce a real number to its representative in [0, 1).
inline double reduce_mod1(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

/// Representative in [-1/2, 1/2).
inline double centered_mod1(double v) {
  double r = reduce_mod1(v + 0.5) - 0.5;
  return r;
}

inline double circle_distance(double a, double b) {
  double d = std::abs(reduce_mod1(a) - reduce_mod1(b));
  return std::min(d, 1.0 - d);
}

/// An element of R/Z stored by its canonical representative in [0, 1).
class CircleValue {
 public:
  constexpr CircleValue() = default;
  explicit CircleValue(double v) : value_(reduce_mod1(v)) {}

  double value() const noexcept { return value_; }
  double centered() const noexcept { return centered_mod1(value_); }

  CircleValue operator+(CircleValue o) const { return CircleValue(value_ + o.value_); }
  CircleValue operator-(CircleValue o) const { return CircleValue(value_ - o.value_); }
  CircleValue operator-() const { return CircleValue(-value_); }
  CircleValue& operator+=(CircleValue o) { return *this = *this + o; }
  CircleValue& operator-=(CircleValue o) { return *this = *this - o; }
  friend CircleValue operator*(long k, CircleValue c) {
    return CircleValue(static_cast<double>(k) * c.value_);
  }

  double distance(CircleValue o) const { return circle_distance(value_, o.value_); }
  bool approx(CircleValue o, double tol) const { return distance(o) < tol; }

  friend std::ostream& operator<<(std::ostream& os, CircleValue c) {
    return os << c.value_ << " mod 1";
  }

 private:
  double value_ = 0.0;
};

}  // namespace eqhol

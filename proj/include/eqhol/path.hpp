#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eqhol/forms.hpp"

namespace eqhol {

inline constexpr std::size_t kDefaultPathSamples = 512;

/// A piecewise-linear path sampled at strictly increasing parameters t in [0, 1].
/// Consecutive samples are joined by the minimal-image chart segment.
class Path {
 public:
  Path(std::vector<double> t, std::vector<Vec> points) : t_(std::move(t)), points_(std::move(points)) {
    if (t_.size() != points_.size()) fail(ErrorKind::construction, "path parameters and points differ in length");
    if (t_.size() < 2) fail(ErrorKind::construction, "path needs at least 2 samples");
    if (t_.front() != 0.0 || t_.back() != 1.0) fail(ErrorKind::construction, "path parameters must run from 0 to 1");
    for (std::size_t k = 1; k < t_.size(); ++k)
      if (!(t_[k] > t_[k - 1])) fail(ErrorKind::construction, "path parameters must be strictly increasing");
  }

  /// Samples gamma(s) at n+1 equispaced parameters.
  static Path from_function(const std::function<Vec(double)>& gamma, std::size_t n = kDefaultPathSamples) {
    std::vector<double> t(n + 1);
    std::vector<Vec> p(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      t[k] = k == n ? 1.0 : static_cast<double>(k) / static_cast<double>(n);
      p[k] = gamma(t[k]);
    }
    return Path(std::move(t), std::move(p));
  }

  static Path straight(const Vec& a, const Vec& b, std::size_t n = kDefaultPathSamples) {
    return from_function([a, b](double s) -> Vec { return a + s * (b - a); }, n);
  }

  static Path constant(const Vec& a, std::size_t n = 2) {
    return from_function([a](double) -> Vec { return a; }, n);
  }

  std::size_t size() const { return t_.size(); }
  const std::vector<double>& params() const { return t_; }
  const std::vector<Vec>& points() const { return points_; }
  const Vec& start() const { return points_.front(); }
  const Vec& end() const { return points_.back(); }

  /// Linear interpolation in chart coordinates.
  Vec evaluate(const ParameterSpace& s, double t) const {
    if (t <= 0.0) return start();
    if (t >= 1.0) return end();
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - t_.begin()) - 1;
    double w = (t - t_[k]) / (t_[k + 1] - t_[k]);
    return s.reduce(points_[k] + w * s.displacement(points_[k], points_[k + 1]));
  }

  friend bool operator==(const Path& a, const Path& b) {
    if (a.t_ != b.t_) return false;
    for (std::size_t k = 0; k < a.points_.size(); ++k)
      if (a.points_[k] != b.points_[k]) return false;
    return true;
  }

 private:
  std::vector<double> t_;
  std::vector<Vec> points_;
};

/// Composite midpoint quadrature of a 1-form along the piecewise-linear path.
inline double line_integral(const ParameterSpace& s, const OneForm& form, const Path& path) {
  const auto& p = path.points();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    Vec step = s.displacement(p[k], p[k + 1]);
    Vec mid = s.reduce(p[k] + 0.5 * step);
    double v = form(mid, step);
    if (!std::isfinite(v)) fail(ErrorKind::evaluation, "non-finite 1-form value at " + describe_point(mid));
    total += v;
  }
  return total;
}

/// Running integral at every path node, starting from 0.
inline std::vector<double> cumulative_integral(const ParameterSpace& s, const OneForm& form, const Path& path) {
  const auto& p = path.points();
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    Vec step = s.displacement(p[k], p[k + 1]);
    Vec mid = s.reduce(p[k] + 0.5 * step);
    double v = form(mid, step);
    if (!std::isfinite(v)) fail(ErrorKind::evaluation, "non-finite 1-form value at " + describe_point(mid));
    out[k + 1] = out[k] + v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path algebra

inline constexpr double kEndpointTolerance = 1e-8;

inline Path reverse(const Path& g) {
  std::vector<double> t(g.size());
  std::vector<Vec> p(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    std::size_t r = g.size() - 1 - k;
    t[k] = k == 0 ? 0.0 : 1.0 - g.params()[r];
    p[k] = g.points()[r];
  }
  t.back() = 1.0;
  return Path(std::move(t), std::move(p));
}

/// g * h: g on [0, 1/2], h on [1/2, 1]. Requires g(1) = h(0).
inline Path concat(const ParameterSpace& s, const Path& g, const Path& h, double tol = kEndpointTolerance) {
  double gap = s.distance(g.end(), h.start());
  if (gap > tol)
    fail(ErrorKind::composition, "cannot concatenate paths: endpoint gap " + std::to_string(gap) + " at " +
                                     describe_point(g.end()));
  std::vector<double> t;
  std::vector<Vec> p;
  for (std::size_t k = 0; k < g.size(); ++k) {
    t.push_back(0.5 * g.params()[k]);
    p.push_back(g.points()[k]);
  }
  for (std::size_t k = 1; k < h.size(); ++k) {
    t.push_back(0.5 + 0.5 * h.params()[k]);
    p.push_back(h.points()[k]);
  }
  t.back() = 1.0;
  return Path(std::move(t), std::move(p));
}

/// (phi . g)(t) = phi(g(t)).
inline Path act(const ParameterSpace& s, const PointMap& phi, const Path& g) {
  std::vector<Vec> p;
  p.reserve(g.size());
  for (const Vec& x : g.points()) p.push_back(s.reduce(phi(x)));
  return Path(g.params(), std::move(p));
}

/// zeta * gamma * (phi . reverse(zeta)), based at zeta(0). Requires zeta(1) = gamma(0).
inline Path conjugate(const ParameterSpace& s, const Path& zeta, const Path& gamma, const PointMap& phi,
                      double tol = 1e-6) {
  if (s.distance(zeta.end(), gamma.start()) > tol)
    fail(ErrorKind::composition, "conjugating path must end at the base point of gamma");
  return concat(s, concat(s, zeta, gamma, tol), act(s, phi, reverse(zeta)), tol);
}

}  // namespace eqhol

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/error.hpp"

namespace eqhol {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Topology { euclidean_box, torus };

inline std::string topology_name(Topology t) {
  return t == Topology::torus ? "torus" : "euclidean-box";
}

/// Bounds of one chart axis. For a torus axis the interval is one period.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double extent() const { return hi - lo; }
};

inline std::string describe_point(const Vec& x) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

/// Finite-dimensional parameter space: a Euclidean box or a flat torus, with
/// the central-difference stencil size used by every derivative operation.
/// Connectivity and H^1 = 0 are scenario assertions and never checked here.
class ParameterSpace {
 public:
  ParameterSpace(Topology topology, std::vector<Axis> axes, double fd_step = 1e-4)
      : topology_(topology), axes_(std::move(axes)), fd_step_(fd_step) {
    if (axes_.empty()) fail(ErrorKind::construction, "parameter space needs dimension >= 1");
    if (!(fd_step_ > 0.0)) fail(ErrorKind::construction, "fd_step must be positive");
    for (const Axis& a : axes_) {
      if (!(a.extent() > 0.0)) fail(ErrorKind::construction, "axis extent must be positive");
      if (fd_step_ >= a.extent() / 10.0)
        fail(ErrorKind::construction, "fd_step must be smaller than 1/10 of every axis extent");
    }
  }

  static ParameterSpace euclidean(int dim, double lo, double hi, double fd_step = 1e-4) {
    return ParameterSpace(Topology::euclidean_box, std::vector<Axis>(dim, Axis{lo, hi}), fd_step);
  }

  static ParameterSpace torus(int dim, double period, double fd_step = 1e-4) {
    return ParameterSpace(Topology::torus, std::vector<Axis>(dim, Axis{0.0, period}), fd_step);
  }

  int dimension() const { return static_cast<int>(axes_.size()); }
  Topology topology() const { return topology_; }
  const std::vector<Axis>& axes() const { return axes_; }
  double fd_step() const { return fd_step_; }

  ParameterSpace with_fd_step(double h) const { return ParameterSpace(topology_, axes_, h); }

  /// Canonical coordinates: torus coordinates reduced into [lo, hi).
  Vec reduce(const Vec& x) const {
    if (topology_ != Topology::torus) return x;
    Vec r = x;
    for (int i = 0; i < dimension(); ++i) {
      const Axis& a = axes_[i];
      double p = a.extent();
      r[i] = a.lo + (x[i] - a.lo) - p * std::floor((x[i] - a.lo) / p);
    }
    return r;
  }

  /// b - a, using the minimal-image convention on torus axes.
  Vec displacement(const Vec& a, const Vec& b) const {
    Vec d = b - a;
    if (topology_ == Topology::torus) {
      for (int i = 0; i < dimension(); ++i) {
        double p = axes_[i].extent();
        d[i] -= p * std::round(d[i] / p);
      }
    }
    return d;
  }

  double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }

  bool contains(const Vec& x) const {
    if (x.size() != dimension()) return false;
    if (!x.allFinite()) return false;
    if (topology_ == Topology::torus) return true;
    for (int i = 0; i < dimension(); ++i)
      if (x[i] < axes_[i].lo || x[i] > axes_[i].hi) return false;
    return true;
  }

  /// Throws domain-error when a stencil of half-width `reach` around x leaves the box.
  void require_stencil(const Vec& x, double reach) const {
    if (x.size() != dimension())
      fail(ErrorKind::domain, "point " + describe_point(x) + " has wrong dimension");
    if (topology_ == Topology::torus) return;
    for (int i = 0; i < dimension(); ++i) {
      if (x[i] - reach < axes_[i].lo || x[i] + reach > axes_[i].hi)
        fail(ErrorKind::domain, "finite-difference stencil at " + describe_point(x) + " exits the domain box");
    }
  }

  /// Uniform point, keeping `margin` (fraction of each extent) away from box faces.
  template <class Rng>
  Vec sample(Rng& rng, double margin = 0.1) const {
    Vec x(dimension());
    for (int i = 0; i < dimension(); ++i) {
      const Axis& a = axes_[i];
      double m = topology_ == Topology::torus ? 0.0 : margin * a.extent();
      std::uniform_real_distribution<double> u(a.lo + m, a.hi - m);
      x[i] = u(rng);
    }
    return x;
  }

 private:
  Topology topology_;
  std::vector<Axis> axes_;
  double fd_step_;
};

inline Vec unit_vector(int dim, int i) {
  Vec e = Vec::Zero(dim);
  e[i] = 1.0;
  return e;
}

inline Vec make_vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

/// Low-discrepancy probe points (Halton sequence) inside the space.
class HaltonProbes {
 public:
  HaltonProbes(const ParameterSpace& space, std::uint64_t seed, double margin = 0.1)
      : space_(space), offset_(1 + seed * 7919 % 100003), margin_(margin) {}

  Vec operator()(std::size_t k) const {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                     59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
    int d = space_.dimension();
    Vec x(d);
    for (int i = 0; i < d; ++i) {
      double r = radical_inverse(offset_ + k, primes[i % 32]);
      if (i >= 32) r = std::fmod(r + 0.618033988749895 * (i / 32), 1.0);
      const Axis& a = space_.axes()[i];
      double m = space_.topology() == Topology::torus ? 0.0 : margin_ * a.extent();
      x[i] = a.lo + m + r * (a.extent() - 2 * m);
    }
    return x;
  }

  std::vector<Vec> take(std::size_t count, std::size_t start = 0) const {
    std::vector<Vec> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back((*this)(start + k));
    return out;
  }

 private:
  static double radical_inverse(std::uint64_t k, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (k > 0) {
      r += f * static_cast<double>(k % base);
      k /= base;
      f *= inv;
    }
    return r;
  }

  ParameterSpace space_;
  std::uint64_t offset_;
  double margin_;
};

}  // namespace eqhol

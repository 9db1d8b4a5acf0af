#pragma once

// Programmatic scenarios shared by the unit tests.

#include <cmath>

#include "eqhol/eqhol.hpp"

namespace fixtures {

using namespace eqhol;

/// Z acting on R by unit translations with alpha_n(x) = n * a.
inline DiscreteGenerator shift_family(std::string label, double a, int axis = 0, double step = 1.0) {
  DiscreteGenerator g;
  g.label = std::move(label);
  g.power = [axis, step](long n, const Vec& x) {
    Vec y = x;
    y[axis] += static_cast<double>(n) * step;
    return y;
  };
  g.power_inverse = [axis, step](long n, const Vec& x) {
    Vec y = x;
    y[axis] -= static_cast<double>(n) * step;
    return y;
  };
  g.alpha = [a](long n, const Vec&) { return static_cast<double>(n) * a; };
  return g;
}

inline EquivariantBundle z_on_r(double a = 0.5) {
  return EquivariantBundle(ParameterSpace::euclidean(1, -10, 10), GroupAction({shift_family("g", a)}, {}));
}

inline Vec rotate(double t, const Vec& x) {
  double c = std::cos(t), s = std::sin(t);
  return make_vec({c * x[0] - s * x[1], s * x[0] + c * x[1]});
}

inline LieGenerator rotation_generator(double anomaly) {
  LieGenerator R;
  R.label = "R";
  R.field = VectorField([](const Vec& x) -> Vec { return make_vec({-x[1], x[0]}); });
  R.flow = rotate;
  R.alpha = [anomaly](double t, const Vec&) { return anomaly * t; };
  return R;
}

inline LieGenerator translation_generator(std::string label, int axis, std::function<double(double, const Vec&)> alpha) {
  LieGenerator T;
  T.label = std::move(label);
  T.field = VectorField([axis](const Vec&) -> Vec { return unit_vector(2, axis); });
  T.flow = [axis](double t, const Vec& x) -> Vec { return x + t * unit_vector(2, axis); };
  T.alpha = std::move(alpha);
  return T;
}

/// SO(2) on R^2, alpha_{exp tX} = anomaly * t.
inline EquivariantBundle rotation(double anomaly = 0.25) {
  return EquivariantBundle(ParameterSpace::euclidean(2, -3, 3), GroupAction({}, {rotation_generator(anomaly)}));
}

/// c (x dy - y dx).
inline OneForm swirl(double c) {
  return OneForm([c](const Vec& x) -> Vec { return make_vec({-c * x[1], c * x[0]}); });
}

/// SE(2): rotation with constant anomaly plus plain translations.
inline EquivariantBundle se2(double anomaly = 0.25) {
  auto zero = [](double, const Vec&) { return 0.0; };
  return EquivariantBundle(ParameterSpace::euclidean(2, -3, 3),
                           GroupAction({}, {rotation_generator(anomaly), translation_generator("Tx", 0, zero),
                                            translation_generator("Ty", 1, zero)}));
}

/// SE(2) with the coboundary cocycle alpha_phi = P o phi - P.
inline EquivariantBundle se2_coboundary(std::function<double(const Vec&)> P) {
  auto cob = [P](std::function<Vec(double, const Vec&)> flow) {
    return [P, flow](double t, const Vec& x) { return P(flow(t, x)) - P(x); };
  };
  LieGenerator R = rotation_generator(0.0);
  R.alpha = cob(R.flow);
  LieGenerator Tx = translation_generator("Tx", 0, nullptr);
  Tx.alpha = cob(Tx.flow);
  LieGenerator Ty = translation_generator("Ty", 1, nullptr);
  Ty.alpha = cob(Ty.flow);
  return EquivariantBundle(ParameterSpace::euclidean(2, -3, 3), GroupAction({}, {R, Tx, Ty}));
}

inline std::vector<Vec> probes(const ParameterSpace& s, std::size_t n = 64, double margin = 0.25,
                               std::uint64_t seed = 3) {
  return HaltonProbes(s, seed, margin).take(n);
}

inline Path unit_circle(std::size_t n = kDefaultPathSamples) {
  return Path::from_function(
      [](double s) -> Vec { return make_vec({std::cos(2 * M_PI * s), std::sin(2 * M_PI * s)}); }, n);
}

}  // namespace fixtures

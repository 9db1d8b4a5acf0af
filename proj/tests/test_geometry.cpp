#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace eqhol;

namespace {

ParameterSpace plane() { return ParameterSpace::euclidean(2, -3, 3); }

}  // namespace

TEST(CircleValue, ReducesAndWraps) {
  EXPECT_DOUBLE_EQ(CircleValue(1.25).value(), 0.25);
  EXPECT_DOUBLE_EQ(CircleValue(-0.25).value(), 0.75);
  EXPECT_NEAR((CircleValue(0.75) + CircleValue(0.5)).value(), 0.25, 1e-15);
  EXPECT_NEAR((3L * CircleValue(0.5)).value(), 0.5, 1e-15);
  EXPECT_NEAR(CircleValue(0.99).distance(CircleValue(0.01)), 0.02, 1e-12);
  EXPECT_NEAR(CircleValue(0.75).centered(), -0.25, 1e-15);
}

TEST(ParameterSpace, RejectsBadStep) {
  EXPECT_THROW(ParameterSpace::euclidean(1, 0, 1, 0.2), Error);
  EXPECT_THROW(ParameterSpace::euclidean(0, 0, 1), Error);
  EXPECT_THROW(ParameterSpace::euclidean(1, 0, 1, 0.0), Error);
}

TEST(ParameterSpace, TorusMinimalImage) {
  auto t = ParameterSpace::torus(1, 1.0);
  EXPECT_NEAR(t.displacement(make_vec({0.95}), make_vec({0.05}))[0], 0.1, 1e-12);
  EXPECT_NEAR(t.reduce(make_vec({1.3}))[0], 0.3, 1e-12);
}

TEST(LineIntegral, TrivialAndPaperValues) {
  auto s = ParameterSpace::euclidean(1, -10, 10);
  OneForm dt([](const Vec&) -> Vec { return make_vec({1.0}); });
  Path g1 = Path::straight(make_vec({0.0}), make_vec({1.0}));
  EXPECT_NEAR(line_integral(s, dt, g1), 1.0, 1e-14);
  EXPECT_NEAR(line_integral(s, 0.5 * dt, g1), 0.5, 1e-14);
}

TEST(LineIntegral, CircleLoopConvergesToTwoPi) {
  auto s = plane();
  OneForm w = fixtures::swirl(1.0);
  // refine until the value stops moving, then compare with 2 pi
  std::size_t n = kDefaultPathSamples;
  double prev = line_integral(s, w, fixtures::unit_circle(n));
  double cur = prev;
  for (int k = 0; k < 8; ++k) {
    n *= 2;
    cur = line_integral(s, w, fixtures::unit_circle(n));
    if (std::abs(cur - prev) < 1e-7) break;
    prev = cur;
  }
  EXPECT_NEAR(cur, 2 * M_PI, 1e-6);
}

TEST(LineIntegral, NonFiniteValueReportsPoint) {
  auto s = ParameterSpace::euclidean(1, -10, 10);
  OneForm bad([](const Vec& x) -> Vec { return make_vec({1.0 / (x[0] - 0.5)}); });
  Path g = Path::straight(make_vec({0.0}), make_vec({1.0}), 1);
  try {
    line_integral(s, bad, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::evaluation);
  }
}

TEST(ExteriorDerivative, CoordinateFunction) {
  auto s = plane();
  ScalarField x([](const Vec& p) { return p[0]; });
  Vec g = exterior_derivative(s, x).at(make_vec({0.3, -0.2}));
  EXPECT_NEAR(g[0], 1.0, 1e-9);
  EXPECT_NEAR(g[1], 0.0, 1e-9);
}

TEST(ExteriorDerivative, SwirlCurvature) {
  auto s = plane();
  TwoForm w = exterior_derivative(s, fixtures::swirl(0.3));
  for (const Vec& x : fixtures::probes(s, 20)) {
    EXPECT_NEAR(w(x, unit_vector(2, 0), unit_vector(2, 1)), 0.6, 1e-6);
    EXPECT_NEAR(w(x, unit_vector(2, 1), unit_vector(2, 0)), -0.6, 1e-6);
  }
}

TEST(ExteriorDerivative, DSquaredVanishes) {
  auto s = plane();
  ScalarField f([](const Vec& p) { return std::sin(p[0]) * std::cos(p[1]); });
  TwoForm ddf = exterior_derivative(s, exterior_derivative(s, f));
  double worst = 0.0;
  for (const Vec& x : fixtures::probes(s, 100)) worst = std::max(worst, ddf.at(x).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-5);
}

TEST(ExteriorDerivative, StencilOutsideBoxIsDomainError) {
  auto s = plane();
  ScalarField f([](const Vec& p) { return p[0]; });
  try {
    exterior_derivative(s, f).at(make_vec({3.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(ExteriorDerivative, ClosednessOfTwoFormIn3d) {
  auto s = ParameterSpace::euclidean(3, -2, 2);
  OneForm r([](const Vec& x) -> Vec { return make_vec({x[1] * x[2], std::sin(x[0]), x[0] * x[1] * x[1]}); });
  TwoForm w = exterior_derivative(s, r);
  for (const Vec& x : fixtures::probes(s, 20)) EXPECT_LT(closedness_residual(s, w, x), 1e-4);
}

TEST(LieBracket, Examples) {
  auto s = plane();
  VectorField dx([](const Vec&) -> Vec { return unit_vector(2, 0); });
  VectorField dy([](const Vec&) -> Vec { return unit_vector(2, 1); });
  VectorField rot([](const Vec& x) -> Vec { return make_vec({-x[1], x[0]}); });
  Vec p = make_vec({0.4, -0.7});
  EXPECT_LT(lie_bracket(s, dx, dy)(p).norm(), 1e-12);
  Vec b = lie_bracket(s, rot, dx)(p);
  EXPECT_NEAR(b[0], 0.0, 1e-6);
  EXPECT_NEAR(b[1], -1.0, 1e-6);
  EXPECT_LT(lie_bracket(s, rot, rot)(p).norm(), 1e-12);
}

TEST(LieBracket, JacobiIdentityOnPolynomialFields) {
  auto s = plane();
  VectorField X([](const Vec& x) -> Vec { return make_vec({x[0] * x[1], x[1] * x[1]}); });
  VectorField Y([](const Vec& x) -> Vec { return make_vec({1.0 + x[0] * x[0], x[0]}); });
  VectorField Z([](const Vec& x) -> Vec { return make_vec({x[1], -x[0] * x[1]}); });
  VectorField J = lie_bracket(s, X, lie_bracket(s, Y, Z)) + lie_bracket(s, Y, lie_bracket(s, Z, X)) +
                  lie_bracket(s, Z, lie_bracket(s, X, Y));
  for (const Vec& x : fixtures::probes(s, 20, 0.3)) EXPECT_LT(J(x).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PathAlgebra, ReverseTwiceIsIdentity) {
  Path g = Path::from_function([](double t) -> Vec { return make_vec({t * t, std::sin(t)}); }, 37);
  Path rr = reverse(reverse(g));
  ASSERT_EQ(rr.size(), g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_EQ(rr.points()[k], g.points()[k]);
    EXPECT_NEAR(rr.params()[k], g.params()[k], 1e-15);
  }
}

TEST(PathAlgebra, ConcatRejectsGap) {
  auto s = plane();
  Path a = Path::straight(make_vec({0, 0}), make_vec({1, 0}));
  Path b = Path::straight(make_vec({1, 0.1}), make_vec({1, 1}));
  try {
    concat(s, a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::composition);
  }
}

TEST(PathAlgebra, ConjugateByConstantKeepsIntegral) {
  auto s = plane();
  PointMap phi = [](const Vec& x) { return fixtures::rotate(0.7, x); };
  Vec x = make_vec({1.0, 0.5});
  Path gamma = Path::from_function([&](double t) -> Vec { return fixtures::rotate(0.7 * t, x); });
  Path conj = conjugate(s, Path::constant(x), gamma, phi);
  OneForm w = fixtures::swirl(0.3) + OneForm([](const Vec& p) -> Vec { return make_vec({p[1] * p[1], 0.0}); });
  EXPECT_NEAR(line_integral(s, w, conj), line_integral(s, w, gamma), 1e-12);
}

TEST(PathAlgebra, ConjugateLandsInCPhiAtNewBase) {
  auto s = plane();
  PointMap phi = [](const Vec& x) { return fixtures::rotate(0.7, x); };
  Vec x = make_vec({1.0, 0.5}), y = make_vec({-0.5, 1.5});
  Path gamma = Path::from_function([&](double t) -> Vec { return fixtures::rotate(0.7 * t, x); });
  Path conj = conjugate(s, Path::straight(y, x), gamma, phi);
  EXPECT_LT(s.distance(conj.start(), y), 1e-12);
  EXPECT_LT(s.distance(conj.end(), phi(y)), 1e-12);
}

TEST(GroupElement, ForwardInverseRoundTrip) {
  auto b = fixtures::se2();
  std::mt19937_64 rng(5);
  for (auto w : {"R^0.4 Tx^1.5", "Ty^-2 R^-1.1 Tx^0.3"}) {
    GroupElement e = b.action().element(b.action().parse_word(w));
    for (const Vec& x : fixtures::probes(b.space(), 100)) EXPECT_LT((e.inverse(e(x)) - x).norm(), 1e-8);
  }
}

TEST(LieElement, FlowDerivativeMatchesField) {
  auto b = fixtures::se2();
  for (const auto& l : b.action().lie()) {
    for (const Vec& x : fixtures::probes(b.space(), 10)) {
      EXPECT_LT((l.flow(0.0, x) - x).norm(), 1e-15);
      Vec d = (l.flow(1e-5, x) - l.flow(-1e-5, x)) / 2e-5;
      EXPECT_LT((d - l.field(x)).norm(), 1e-6);
    }
  }
}

TEST(LieElement, Rk4FlowMatchesClosedForm) {
  auto f = LieGenerator::rk4_flow(fixtures::rotation_generator(0).field);
  Vec x = make_vec({1.0, 0.3});
  EXPECT_LT((f(1.3, x) - fixtures::rotate(1.3, x)).norm(), 1e-9);
}

TEST(CircleDelta, LinearFieldAndConstant) {
  auto s = ParameterSpace::euclidean(1, -10, 10);
  CircleField a = [](const Vec& x) { return CircleValue(0.3 * x[0]); };
  for (double x : {-5.0, 0.1, 3.3}) EXPECT_NEAR(circle_delta(s, a).at(make_vec({x}))[0], 0.3, 1e-6);
  CircleField c = [](const Vec&) { return CircleValue(0.7); };
  EXPECT_NEAR(circle_delta(s, c).at(make_vec({1.0}))[0], 0.0, 1e-12);
}

TEST(CircleDelta, MatchesExteriorDerivativeOfLift) {
  auto s = plane();
  ScalarField A([](const Vec& x) { return 3.0 * std::sin(x[0]) + x[0] * x[1] * x[1]; });
  CircleField a = [A](const Vec& x) { return CircleValue(A(x)); };
  OneForm dA = exterior_derivative(s, A), da = circle_delta(s, a);
  for (const Vec& x : fixtures::probes(s, 50)) EXPECT_LT((dA.at(x) - da.at(x)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CircleDelta, TorusWindingHasIntegerPeriod) {
  auto s = ParameterSpace::torus(1, 2 * M_PI);
  CircleField a = [](const Vec& x) { return CircleValue(x[0] / (2 * M_PI)); };
  OneForm da = circle_delta(s, a);
  Path loop = Path::from_function([](double t) -> Vec { return make_vec({2 * M_PI * t}); }, 64);
  double period = line_integral(s, da, loop);
  EXPECT_NEAR(period, std::round(period), 1e-6);
  EXPECT_NEAR(period, 1.0, 1e-6);
}

TEST(CircleDelta, JumpIsResolutionError) {
  auto s = ParameterSpace::euclidean(1, -10, 10, 1e-2);
  CircleField a = [](const Vec& x) { return CircleValue(40.0 * x[0]); };
  try {
    circle_delta(s, a).at(make_vec({0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution);
  }
}

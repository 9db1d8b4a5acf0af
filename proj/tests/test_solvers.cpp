#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace eqhol;

namespace {

FormBasis form_basis(const ParameterSpace& s, const std::vector<std::vector<std::string>>& comps, std::string desc) {
  auto ctx = expr::Context::manifold(s.dimension());
  std::vector<std::vector<expr::Expression>> es;
  for (const auto& c : comps) {
    std::vector<expr::Expression> row;
    for (const auto& t : c) row.push_back(expr::Expression::parse(t, ctx));
    es.push_back(std::move(row));
  }
  return FormBasis::from_exprs(std::move(es), std::move(desc));
}

SolverConfig quick() {
  SolverConfig c;
  c.fit_probes = 96;
  c.held_out_probes = 96;
  return c;
}

/// Z on R with the coboundary cocycle alpha_n = theta o phi_n - theta.
EquivariantBundle planted_group(std::function<double(double)> theta) {
  DiscreteGenerator g = fixtures::shift_family("g", 0.0);
  g.alpha = [theta](long n, const Vec& x) { return theta(x[0] + static_cast<double>(n)) - theta(x[0]); };
  return EquivariantBundle(ParameterSpace::euclidean(1, -10, 10), GroupAction({g}, {}));
}

/// Rotation with alpha_t = L o rot_t - L for L = 0.1 x1^2.
EquivariantBundle planted_rotation() {
  LieGenerator R = fixtures::rotation_generator(0.0);
  R.alpha = [](double t, const Vec& x) {
    Vec y = fixtures::rotate(t, x);
    return 0.1 * y[0] * y[0] - 0.1 * x[0] * x[0];
  };
  return EquivariantBundle(ParameterSpace::euclidean(2, -3, 3), GroupAction({}, {R}));
}

}  // namespace

TEST(GroupCoboundary, TrivialCocycleGivesZero) {
  auto b = fixtures::z_on_r(0.0);
  auto basis = default_scalar_basis(b.space(), 2);
  auto cert = solve_group_coboundary(b, Section::reference(), basis, quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.coefficients.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(cert.expression, "0");
}

TEST(GroupCoboundary, RecoversPlantedTheta) {
  auto theta = [](double x) { return 0.2 * std::sin(x); };
  auto b = planted_group(theta);
  auto basis = scalar_basis(b.space(), {"1", "sin(x1)", "cos(x1)"}, "constant plus first harmonics");
  auto cert = solve_group_coboundary(b, Section::reference(), basis);
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.held_out_residual, 1e-6);
  // recovered up to an additive constant
  double c0 = cert.field(make_vec({0.0})) - theta(0.0);
  for (double x : {-5.0, -1.3, 2.2, 7.0}) EXPECT_NEAR(cert.field(make_vec({x})) - theta(x), c0, 1e-8);
}

TEST(GroupCoboundary, HalfCocycleHasNoConstantSolution) {
  auto b = fixtures::z_on_r(0.5);
  auto basis = scalar_basis(b.space(), {"1"}, "constants");
  auto cert = solve_group_coboundary(b, Section::reference(), basis, quick());
  EXPECT_FALSE(cert.found);
  EXPECT_NEAR(cert.fit_residual, 0.5, 1e-12);
  EXPECT_NE(cert.describe().find("constants"), std::string::npos);
  EXPECT_NE(cert.describe().find("not ruled out"), std::string::npos);
}

TEST(GroupCoboundary, IntegerLiftsAreFound) {
  // alpha_n = n + 0.3 (x+n)^2 - 0.3 x^2 - the integer part must be absorbed by a lift
  auto b = planted_group([](double x) { return 0.3 * x * x + x; });
  auto basis = scalar_basis(b.space(), {"1", "x1^2"}, "constant and quadratic");
  auto cert = solve_group_coboundary(b, Section::reference(), basis, quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_NEAR(cert.coefficients[1], 0.3, 1e-9);
}

TEST(GroupCoboundary, DependentBasisIsRejected) {
  auto b = fixtures::z_on_r(0.0);
  auto basis = scalar_basis(b.space(), {"x1", "2*x1"}, "duplicated terms");
  try {
    solve_group_coboundary(b, Section::reference(), basis, quick());
    FAIL() << "expected conditioning-error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::conditioning);
    EXPECT_NE(std::string(e.what()).find("shrink"), std::string::npos);
  }
}

TEST(LieCoboundary, ZeroAnomalyGivesZero) {
  auto b = fixtures::rotation(0.0);
  auto cert = solve_lie_coboundary(b, Section::reference(), default_scalar_basis(b.space(), 2), quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.coefficients.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LieCoboundary, RecoversPlantedLambda) {
  auto b = planted_rotation();
  auto cert = solve_lie_coboundary(b, Section::reference(), default_scalar_basis(b.space(), 4));
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.held_out_residual, 1e-6);
  // the induced section is G0-equivariant
  for (const Vec& x : fixtures::probes(b.space(), 16, 0.3, 11))
    EXPECT_NEAR(anomaly_flow(b, cert.section, 0)(x), 0.0, 1e-5);
}

TEST(LieCoboundary, ConstantAnomalyWithFixedPointHasNoCertificate) {
  auto b = fixtures::rotation(0.25);
  auto basis = default_scalar_basis(b.space(), 4);
  // oracle: X(f) vanishes at the origin for every ansatz member
  Vec origin = Vec::Zero(2);
  for (const auto& f : basis.fields)
    EXPECT_NEAR(directional_derivative(b.space(), f, b.action().lie()[0].field)(origin), 0.0, 1e-9);
  auto cert = solve_lie_coboundary(b, Section::reference(), basis, quick());
  EXPECT_FALSE(cert.found);
  EXPECT_GT(cert.fit_residual, 0.1);
}

TEST(LieCoboundary, NeedsLieGenerators) {
  auto b = fixtures::z_on_r(0.0);
  EXPECT_THROW(solve_lie_coboundary(b, Section::reference(), default_scalar_basis(b.space(), 1), quick()), Error);
}

TEST(LeastSquares, EnlargingTheAnsatzNeverWorsensTheFit) {
  auto b = fixtures::rotation(0.25);
  double prev = std::numeric_limits<double>::infinity();
  for (int deg = 1; deg <= 4; ++deg) {
    auto cert = solve_lie_coboundary(b, Section::reference(), default_scalar_basis(b.space(), deg), quick());
    EXPECT_LE(cert.fit_rms, prev + 1e-12) << "degree " << deg;
    prev = cert.fit_rms;
  }
}

TEST(Primitive, FlatScenarioGivesZero) {
  auto b = fixtures::z_on_r(0.0);
  auto rep = connection_report(b, Connection::flat(1), Section::reference(), fixtures::probes(b.space(), 16));
  auto cert = solve_equivariant_primitive(b, rep.equivariant, default_form_basis(b.space(), 2), quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.coefficients.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Primitive, InvariantRotationConnectionIsItsOwnPrimitive) {
  auto b = fixtures::rotation(0.0);
  Connection c{fixtures::swirl(0.3)};
  auto rep = connection_report(b, c, Section::reference(), fixtures::probes(b.space(), 16));
  auto cert = solve_equivariant_primitive(b, rep.equivariant, default_form_basis(b.space(), 2));
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_LT(cert.fit_residual, 1e-6);
  for (const Vec& x : fixtures::probes(b.space(), 16, 0.3, 5))
    EXPECT_LT((cert.form.at(x) - c.rho_ref.at(x)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Primitive, HolonomyMatchingFindsHalfDt) {
  auto b = fixtures::z_on_r(0.5);
  auto rep = connection_report(b, Connection::flat(1), Section::reference(), fixtures::probes(b.space(), 16));
  PrimitiveOptions opts;
  opts.match_holonomy = Connection::flat(1);
  auto with_dt = solve_equivariant_primitive(b, rep.equivariant, form_basis(b.space(), {{"1"}}, "dx1"), quick(), opts);
  ASSERT_TRUE(with_dt.found) << with_dt.describe();
  EXPECT_NEAR(with_dt.coefficients[0], 0.5, 1e-9);
  EXPECT_EQ(with_dt.expression, "0.5 dx1");

  auto without = solve_equivariant_primitive(b, rep.equivariant, form_basis(b.space(), {{"x1"}}, "x1 dx1 only"), quick(), opts);
  EXPECT_FALSE(without.found);
  EXPECT_NE(without.describe().find("x1 dx1 only"), std::string::npos);
}

TEST(Primitive, RejectsNonClosedCurvature) {
  auto b = fixtures::rotation(0.0);
  EquivariantCurvature eq;
  eq.omega = TwoForm([](const Vec& x) -> Mat {
    Mat m(2, 2);
    m << 0, x[0], -x[0], 0;
    return m;
  });
  eq.moment = {ScalarField::constant(0.0)};
  EXPECT_THROW(solve_equivariant_primitive(b, eq, default_form_basis(b.space(), 1), quick()), Error);
}

TEST(Sigma, InvariantFormNeedsNoCorrection) {
  auto b = fixtures::z_on_r(0.0);
  auto r = sigma_obstruction(b, OneForm([](const Vec&) -> Vec { return make_vec({0.7}); }), make_vec({0.0}),
                             default_scalar_basis(b.space(), 2), quick());
  EXPECT_TRUE(r.already_invariant);
  EXPECT_TRUE(r.rho.found);
}

TEST(Sigma, RemovesPlantedExactPart) {
  // beta0 = dx + d(0.2 x^3): sigma_1 = 0.2 ((x+1)^3 - x^3) up to a constant
  auto b = fixtures::z_on_r(0.0);
  OneForm beta0([](const Vec& x) -> Vec { return make_vec({1.0 + 0.6 * x[0] * x[0]}); });
  auto r = sigma_obstruction(b, beta0, make_vec({0.0}), default_scalar_basis(b.space(), 4), quick());
  ASSERT_FALSE(r.already_invariant);
  ASSERT_TRUE(r.rho.found) << r.rho.describe();
  EXPECT_LT(r.rho.held_out_residual, 1e-6);
  EXPECT_LT(r.spread, 1e-9);
  for (double x : {-4.0, 0.5, 3.3}) {
    Vec v = make_vec({x});
    Vec pb = pullback(b.space(), [](const Vec& y) -> Vec { return make_vec({y[0] + 1}); }, r.beta).at(v);
    EXPECT_NEAR(pb[0], r.beta.at(v)[0], 1e-6);
  }
}

TEST(Sigma, LinearDriftIsNotExactOverAffineAnsatz) {
  // phi_n^* (x dx) - x dx = n dx, so sigma_n = n x; phi^* rho - rho is constant for rho in span{1, x}
  auto b = fixtures::z_on_r(0.0);
  OneForm beta0([](const Vec& x) -> Vec { return make_vec({x[0]}); });
  auto r = sigma_obstruction(b, beta0, make_vec({0.0}), scalar_basis(b.space(), {"1", "x1"}, "affine"), quick());
  EXPECT_FALSE(r.rho.found);
  EXPECT_NEAR(r.sigma[0](make_vec({2.5})), 2.5, 1e-10);
  // a quadratic term makes it exact: rho = x^2 / 2
  auto q = sigma_obstruction(b, beta0, make_vec({0.0}), scalar_basis(b.space(), {"1", "x1", "x1^2"}, "quadratic"), quick());
  EXPECT_TRUE(q.rho.found) << q.rho.describe();
}

TEST(KMembership, ZeroCharacterIsMember) {
  auto b = fixtures::z_on_r(0.0);
  Character k{{"g"}, {CircleValue(0.0)}};
  auto m = k_membership(b, k, {}, {}, quick());
  EXPECT_TRUE(m.member);
}

TEST(KMembership, HalfDtExplainsTheHalfCharacter) {
  auto b = fixtures::z_on_r(0.5);
  Character k{{"g"}, {CircleValue(0.5)}};
  OneForm half([](const Vec&) -> Vec { return make_vec({0.5}); });
  auto m = k_membership(b, k, {half}, {"0.5 dx1"}, quick());
  ASSERT_TRUE(m.member) << m.describe();
  EXPECT_NEAR(m.lambda[0], 1.0, 1e-9);
  EXPECT_EQ(m.slack[0], 0);
}

TEST(KMembership, IntegralPeriodCandidateCannotHelp) {
  auto b = fixtures::z_on_r(0.5);
  Character k{{"g"}, {CircleValue(0.5)}};
  OneForm dt([](const Vec&) -> Vec { return make_vec({1.0}); });
  auto m = k_membership(b, k, {dt}, {"dx1"}, quick());
  EXPECT_FALSE(m.member);
  EXPECT_NEAR(m.residual, 0.5, 1e-9);
  EXPECT_NE(m.describe().find("not ruled out"), std::string::npos);
}

TEST(KMembership, NonClosedCandidateIsRejected) {
  auto b = fixtures::z_on_r(0.5);
  Character k{{"g"}, {CircleValue(0.5)}};
  OneForm drift([](const Vec& x) -> Vec { return make_vec({x[0]}); });
  try {
    k_membership(b, k, {drift}, {"x1 dx1"}, quick());
    FAIL() << "expected precondition-error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace eqhol;

namespace {

Word word(const EquivariantBundle& b, const std::string& w) { return b.action().parse_word(w); }

EquivariantBundle z_on_r_perturbed() {
  auto g = fixtures::shift_family("g", 0.5);
  g.alpha = [](long n, const Vec& x) { return 0.5 * static_cast<double>(n) + 0.1 * x[0]; };
  return EquivariantBundle(ParameterSpace::euclidean(1, -10, 10), GroupAction({g}, {}));
}

double sup(const ScalarField& f, const std::vector<Vec>& pts) { return sup_norm(f, pts); }

}  // namespace

TEST(CheckCocycle, PaperExampleHasZeroResidual) {
  auto r = check_cocycle(fixtures::z_on_r());
  EXPECT_EQ(r.max_residual, 0.0);
  EXPECT_GT(r.checks, 100u);
}

TEST(CheckCocycle, ConstantHomomorphismOnZ2) {
  GroupAction a({fixtures::shift_family("g", 1.0 / 3.0, 0), fixtures::shift_family("h", 0.25, 1)}, {});
  EquivariantBundle b(ParameterSpace::euclidean(2, -10, 10), a);
  EXPECT_LT(check_cocycle(b).max_residual, 1e-12);
}

TEST(CheckCocycle, PerturbedCocycleReportsWitness) {
  auto r = check_cocycle(z_on_r_perturbed());
  EXPECT_GT(r.max_residual, 0.05);
  EXPECT_EQ(r.witness_kind, "cocycle");
  EXPECT_EQ(r.witness_point.size(), 1);
  EXPECT_THROW(EquivariantBundle::build_from_cocycle(ParameterSpace::euclidean(1, -10, 10),
                                                     z_on_r_perturbed().action()),
               Error);
}

TEST(CheckCocycle, LieFlowsAndRelations) {
  EXPECT_LT(check_cocycle(fixtures::se2()).max_residual, 1e-9);
  auto P = [](const Vec& x) { return 0.1 * x[0] * x[0] + 0.05 * x[1]; };
  EXPECT_LT(check_cocycle(fixtures::se2_coboundary(P)).max_residual, 1e-9);

  // Z_4 rotation with a relation g^4 = e and alpha_g = 1/4
  DiscreteGenerator g;
  g.label = "g";
  g.power = [](long n, const Vec& x) { return fixtures::rotate(M_PI / 2 * static_cast<double>(n), x); };
  g.power_inverse = [](long n, const Vec& x) { return fixtures::rotate(-M_PI / 2 * static_cast<double>(n), x); };
  g.alpha = [](long n, const Vec&) { return 0.25 * static_cast<double>(n); };
  GroupAction a({g}, {}, {single(Letter::Kind::discrete, 0, 4)});
  EXPECT_LT(check_cocycle(EquivariantBundle(ParameterSpace::euclidean(2, -3, 3), a)).max_residual, 1e-9);

  g.alpha = [](long n, const Vec&) { return 0.3 * static_cast<double>(n); };
  auto r = check_cocycle(EquivariantBundle(ParameterSpace::euclidean(2, -3, 3), GroupAction({g}, {}, a.relations())));
  EXPECT_EQ(r.witness_kind, "relation");
  EXPECT_NEAR(r.max_residual, 0.2, 1e-9);
}

TEST(CheckCocycle, MissingInverseRejected) {
  auto g = fixtures::shift_family("g", 0.5);
  g.power_inverse = nullptr;
  EXPECT_THROW(GroupAction({g}, {}), Error);
}

TEST(CheckCocycle, WordLengthPrecondition) {
  CocycleConfig c;
  c.word_length = 1;
  EXPECT_THROW(check_cocycle(fixtures::z_on_r(), c), Error);
}

TEST(SectionCocycle, ReferenceConstantAndQuadratic) {
  auto b = fixtures::z_on_r();
  auto s = b.space();
  Word g2 = word(b, "g^2");
  for (const Vec& x : fixtures::probes(s, 20)) {
    EXPECT_NEAR(section_cocycle(b, Section::reference(), g2)(x).value(), 0.0, 1e-15);
    EXPECT_NEAR(section_cocycle(b, Section::from(ScalarField::constant(0.3)), g2)(x).value(), 0.0, 1e-12);
  }
  Section sq = Section::from(ScalarField([](const Vec& x) { return x[0] * x[0]; }));
  for (int n : {1, -1, 3}) {
    Word w = single(Letter::Kind::discrete, 0, n);
    for (const Vec& x : fixtures::probes(s, 20)) {
      double expect = n / 2.0 + x[0] * x[0] - (x[0] + n) * (x[0] + n);
      EXPECT_LT(section_cocycle(b, sq, w)(x).distance(CircleValue(expect)), 1e-9);
    }
  }
}

TEST(SectionCocycle, ChangeLawBetweenTwoSections) {
  auto b = fixtures::se2();
  ScalarField L1([](const Vec& x) { return std::sin(x[0]) * x[1]; });
  ScalarField L2([](const Vec& x) { return 0.2 * x[0] * x[0] - x[1]; });
  Word w = word(b, "R^0.6 Tx^-0.4");
  for (const Vec& x : fixtures::probes(b.space(), 30)) {
    CircleValue diff = section_cocycle(b, Section::from(L2), w)(x) - section_cocycle(b, Section::from(L1), w)(x);
    double dl = (L2(x) - L1(x)) - (L2(b.apply(w, x)) - L1(b.apply(w, x)));
    EXPECT_LT(diff.distance(CircleValue(dl)), 1e-10);
  }
}

TEST(InfinitesimalAnomaly, RotationScenarioIsConstant) {
  auto b = fixtures::rotation(0.25);
  Connection c{fixtures::swirl(0.3)};
  auto pts = fixtures::probes(b.space(), 30);
  auto flow = infinitesimal_anomaly(b, Section::reference(), 0);
  auto mom = infinitesimal_anomaly(b, Section::reference(), 0, AnomalyMethod::moment_formula, c);
  for (const Vec& x : pts) {
    EXPECT_NEAR(flow(x), 0.25, 1e-8);
    EXPECT_NEAR(mom(x), 0.25, 1e-8);
  }
}

TEST(InfinitesimalAnomaly, EquivariantSectionGivesZero) {
  auto b = fixtures::rotation(0.0);
  for (const Vec& x : fixtures::probes(b.space(), 10))
    EXPECT_NEAR(infinitesimal_anomaly(b, Section::reference(), 0)(x), 0.0, 1e-12);
}

TEST(InfinitesimalAnomaly, DiscreteGroupHasNoLieGenerators) {
  EXPECT_THROW(infinitesimal_anomaly(fixtures::z_on_r(), Section::reference(), 0), Error);
}

TEST(InfinitesimalAnomaly, MomentRouteNeedsConnection) {
  EXPECT_THROW(infinitesimal_anomaly(fixtures::rotation(), Section::reference(), 0, AnomalyMethod::moment_formula),
               Error);
}

TEST(InfinitesimalAnomaly, MethodsAgreeWithNonTrivialSection) {
  auto b = fixtures::rotation(0.25);
  Connection c{fixtures::swirl(0.3)};
  Section sec = Section::from(ScalarField([](const Vec& x) { return 0.1 * x[0] * x[0] + 0.05 * x[0] * x[1]; }));
  auto flow = infinitesimal_anomaly(b, sec, 0);
  auto mom = infinitesimal_anomaly(b, sec, 0, AnomalyMethod::moment_formula, c);
  for (const Vec& x : fixtures::probes(b.space(), 40)) EXPECT_NEAR(flow(x), mom(x), 1e-6);
}

TEST(InfinitesimalAnomaly, ShiftUnderSectionChange) {
  auto b = fixtures::se2();
  ScalarField A([](const Vec& x) { return 0.1 * x[0] * x[0] + std::sin(x[1]); });
  Section s0 = Section::reference(), s1 = Section::from(A);
  auto pts = fixtures::probes(b.space(), 40);
  for (std::size_t k = 0; k < 3; ++k) {
    const VectorField& X = b.action().lie()[k].field;
    ScalarField expected = anomaly_flow(b, s0, k) - directional_derivative(b.space(), A, X);
    EXPECT_LT(sup(anomaly_flow(b, s1, k) - expected, pts), 1e-5);
  }
}

TEST(InfinitesimalAnomaly, UnwrapFailureIsResolutionError) {
  LieGenerator R = fixtures::rotation_generator(0.0);
  R.alpha = [](double t, const Vec&) { return t > 0 ? 0.4 : 0.0; };
  EquivariantBundle b(ParameterSpace::euclidean(2, -3, 3), GroupAction({}, {R}));
  try {
    anomaly_flow(b, Section::reference(), 0)(make_vec({0.5, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution);
  }
}

TEST(LieCocycle, AbelianSelfPairVanishes) {
  auto b = fixtures::rotation();
  auto pts = fixtures::probes(b.space(), 20);
  EXPECT_LT(sup(lie_cocycle_residual(b, Section::reference(), 0, 0, pts), pts), 1e-9);
}

TEST(LieCocycle, Se2ClosesForConstantAndCoboundaryCocycles) {
  auto pts = fixtures::probes(ParameterSpace::euclidean(2, -3, 3), 30);
  Section sec = Section::from(ScalarField([](const Vec& x) { return 0.1 * x[0] * x[1]; }));
  auto P = [](const Vec& x) { return 0.1 * x[0] * x[0] + 0.05 * x[1] * x[0]; };
  for (const auto& b : {fixtures::se2(), fixtures::se2_coboundary(P)})
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) EXPECT_LT(sup(lie_cocycle_residual(b, sec, i, j, pts), pts), 1e-4);
}

TEST(LieCocycle, CorruptedAnomalyIsDetected) {
  auto b = fixtures::se2();
  auto pts = fixtures::probes(b.space(), 30);
  std::vector<VectorField> fields;
  std::vector<ScalarField> an;
  for (std::size_t k = 0; k < 3; ++k) {
    fields.push_back(b.action().lie()[k].field);
    an.push_back(anomaly_flow(b, Section::reference(), k));
  }
  an[1] = an[1] + ScalarField([](const Vec& x) { return 0.1 * x[0]; });
  EXPECT_GT(sup(lie_cocycle_residual(b.space(), fields, an, 0, 1, pts), pts), 1e-2);
}

TEST(ConnectionReport, FlatScenario) {
  auto b = fixtures::rotation(0.0);
  auto pts = fixtures::probes(b.space(), 20);
  auto r = connection_report(b, Connection::flat(2), Section::reference(), pts);
  for (const Vec& x : pts) {
    EXPECT_LT(r.curv.at(x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(std::abs(r.moment[0](x)), 1e-12);
  }
}

TEST(ConnectionReport, SwirlCurvatureAndMoment) {
  auto b = fixtures::rotation(0.25);
  auto pts = fixtures::probes(b.space(), 20);
  auto r = connection_report(b, Connection{fixtures::swirl(0.3)}, Section::reference(), pts);
  for (const Vec& x : pts) {
    EXPECT_NEAR(r.curv(x, unit_vector(2, 0), unit_vector(2, 1)), 0.6, 1e-6);
    EXPECT_NEAR(r.moment[0](x), 0.25 - 0.3 * x.squaredNorm(), 1e-6);
  }
  EXPECT_LT(r.moment_residual, 1e-4);
}

TEST(ConnectionReport, IndependentOfSection) {
  auto b = fixtures::rotation(0.25);
  auto pts = fixtures::probes(b.space(), 20);
  Connection c{fixtures::swirl(0.3)};
  Section sec = Section::from(ScalarField([](const Vec& x) { return 0.2 * x[0] * x[1] + 0.1 * x[1]; }));
  auto r0 = connection_report(b, c, Section::reference(), pts);
  auto r1 = connection_report(b, c, sec, pts);
  for (const Vec& x : pts) {
    EXPECT_LT((r0.curv.at(x) - r1.curv.at(x)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r0.moment[0](x), r1.moment[0](x), 1e-6);
  }
}

TEST(ConnectionReport, NonInvariantConnectionIsConsistencyError) {
  auto b = fixtures::rotation(0.25);
  auto pts = fixtures::probes(b.space(), 20);
  Connection c{OneForm([](const Vec& x) -> Vec { return make_vec({0.0, x[0]}); })};
  try {
    connection_report(b, c, Section::reference(), pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::consistency);
  }
}

TEST(Descent, FlatAndInvariantVanish) {
  auto pts = fixtures::probes(ParameterSpace::euclidean(2, -3, 3), 30);
  auto flat = descent_residual(fixtures::rotation(0.0), Connection::flat(2), Section::reference(), 0);
  EXPECT_LT(sup_norm(flat, pts), 1e-10);
  Section sec = Section::from(ScalarField([](const Vec& x) { return 0.1 * x[0] * x[0]; }));
  auto inv = descent_residual(fixtures::rotation(0.25), Connection{fixtures::swirl(0.3)}, sec, 0);
  EXPECT_LT(sup_norm(inv, pts), 1e-4);
}

TEST(Descent, NonInvariantConnectionIsReported) {
  auto pts = fixtures::probes(ParameterSpace::euclidean(2, -3, 3), 30);
  Connection c{OneForm([](const Vec& x) -> Vec { return make_vec({0.0, x[0]}); })};
  EXPECT_GT(sup_norm(descent_residual(fixtures::rotation(0.25), c, Section::reference(), 0), pts), 0.1);
}

TEST(Invariance, MagneticTranslationCocycleMakesSwirlInvariant) {
  // alpha_{Tx(t)} = c t y, alpha_{Ty(t)} = -c t x solve phi^* rho - rho = d alpha for rho = c(x dy - y dx)
  const double c = 0.3;
  LieGenerator Tx = fixtures::translation_generator("Tx", 0, [c](double t, const Vec& x) { return c * t * x[1]; });
  LieGenerator Ty = fixtures::translation_generator("Ty", 1, [c](double t, const Vec& x) { return -c * t * x[0]; });
  EquivariantBundle b(ParameterSpace::euclidean(2, -3, 3), GroupAction({}, {Tx, Ty}));
  auto pts = fixtures::probes(b.space(), 20);
  for (auto w : {"Tx^0.7", "Ty^-1.2"})
    EXPECT_LT(sup_norm(invariance_residual(b, Connection{fixtures::swirl(c)}, word(b, w)), pts), 1e-6);
  // a projective (Heisenberg) action: the Lie cocycle does not close
  EXPECT_GT(sup(lie_cocycle_residual(b, Section::reference(), 0, 1, pts), pts), 0.5);
}

#include <gtest/gtest.h>

#include <cmath>

#include "eqhol/eqhol.hpp"

using namespace eqhol;

namespace {

const LatticeBase kLat(8, 1.0);

SolverConfig quick() {
  SolverConfig c;
  c.fit_probes = 48;
  c.held_out_probes = 32;
  return c;
}

FieldLie fiber_translation(const LatticeBase& lat, std::string alpha_text) {
  FieldLie X;
  X.kind = FieldLie::Kind::fiber;
  X.label = "T";
  X.chi = Vec::Ones(lat.sites());
  auto a = FieldFunctional::parse(alpha_text, 2, false);
  X.alpha = [lat, a](double t, const Vec& s) { return a.eval(lat, s, t); };
  return X;
}

FieldLie shift(const LatticeBase& lat) {
  FieldLie X;
  X.kind = FieldLie::Kind::shift;
  X.label = "P";
  X.alpha = [](double, const Vec&) { return 0.0; };
  (void)lat;
  return X;
}

/// Z acting by s -> s + n on the lattice, alpha_n = n/2, flat.
FieldBundle half_shift(const LatticeBase& lat) {
  FieldDiscrete g;
  g.kind = FieldDiscrete::Kind::fiber_affine;
  g.label = "g";
  g.chi = Vec::Ones(lat.sites());
  g.alpha = [](long n, const Vec&) { return 0.5 * static_cast<double>(n); };
  return FieldBundle::make(lat, 2, {g}, {}, {}, Connection::flat(lat.sites()));
}

std::vector<LocalDensity> densities(const std::vector<std::string>& names) {
  std::vector<LocalDensity> out;
  for (const auto& n : names) out.push_back(LocalDensity::parse(n));
  return out;
}

std::vector<LocalOneForm> one_forms(const std::vector<std::string>& names) {
  std::vector<LocalOneForm> out;
  for (const auto& n : names) out.push_back(LocalOneForm::parse(n));
  return out;
}

Vec wave(const LatticeBase& lat) {
  return lat.sample([&](double x) { return std::sin(2 * M_PI * x / lat.period()) + 0.3; });
}

}  // namespace

TEST(Lattice, NeedsEightSites) {
  EXPECT_THROW(LatticeBase(7, 1.0), Error);
  EXPECT_THROW(LatticeBase(8, 0.0), Error);
}

TEST(Integrate, Examples) {
  Vec one = Vec::Ones(kLat.sites());
  EXPECT_NEAR(integrate_local(kLat, LocalDensity::parse("u"), one), 1.0, 1e-14);
  LatticeBase lat(16, 2.5);
  double c = 1.7;
  auto f = LocalDensity::parse(std::to_string(c / (lat.sites() * lat.spacing())));
  EXPECT_NEAR(integrate_local(lat, f, Vec::Zero(16)), c, 1e-9);
  EXPECT_NEAR(integrate_local(kLat, LocalDensity::parse("u*u1"), wave(kLat)), 0.0, 1e-13);
}

TEST(Integrate, NonFiniteReportsTheSite) {
  Vec s = Vec::Ones(kLat.sites());
  s[3] = -1.0;
  try {
    integrate_local(kLat, LocalDensity::parse("1/(u+1)"), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::evaluation);
    EXPECT_NE(std::string(e.what()).find("site 3"), std::string::npos) << e.what();
  }
}

TEST(Jets, SecondOrderConvergence) {
  double prev = 0.0;
  for (int m : {16, 32, 64, 128}) {
    LatticeBase lat(m, 1.0);
    Vec s = lat.sample([](double x) { return std::sin(2 * M_PI * x); });
    Mat J = jets(lat, s, 2);
    double err = 0.0;
    for (int i = 0; i < m; ++i) {
      double x = lat.position(i);
      err = std::max(err, std::abs(J(i, 1) - 2 * M_PI * std::cos(2 * M_PI * x)));
      err = std::max(err, std::abs(J(i, 2) + 4 * M_PI * M_PI * std::sin(2 * M_PI * x)));
    }
    if (prev > 0.0) EXPECT_GE(prev / err, 3.5) << m;
    prev = err;
  }
}

TEST(OneFormDensity, CovectorMatchesValue) {
  auto b = LocalOneForm::parse("u^2*v1 + u1*v2 + x*v");
  Vec s = wave(kLat);
  Vec d = kLat.sample([](double x) { return std::cos(4 * M_PI * x) - x; });
  EXPECT_NEAR(b.covector(kLat, s).dot(d), b.value(kLat, s, d), 1e-10);
  EXPECT_LT(b.linearity_residual(), 1e-12);
  EXPECT_GT(LocalOneForm::parse("u*v^2").linearity_residual(), 1e-3);
  EXPECT_GT(LocalOneForm::parse("u + v").linearity_residual(), 1e-3);
}

TEST(FieldFunctionalText, JetsOnlyInsideIntegrals) {
  EXPECT_NO_THROW(FieldFunctional::parse("t*I(u)^2", 2, false));
  EXPECT_THROW(FieldFunctional::parse("u + I(u)", 2, false), Error);
  Vec s = Vec::Constant(kLat.sites(), 2.0);
  EXPECT_NEAR(FieldFunctional::parse("n/2 + I(u)", 2, true).eval(kLat, s, 3.0), 3.5, 1e-14);
}

TEST(LieDerivative, FiberTranslationOfUSquared) {
  Vec s = wave(kLat);
  auto r = lie_derivative_local(kLat, LocalDensity::parse("u^2"), fiber_translation(kLat, "0"), s);
  EXPECT_NEAR(r.by_flow, 2 * s.sum() * kLat.spacing(), 1e-9);
  EXPECT_NEAR(r.by_density, r.by_flow, 1e-9);
}

TEST(LieDerivative, ShiftKillsTranslationInvariantDensities) {
  Vec s = wave(kLat);
  s[2] += 0.4;
  auto r = lie_derivative_local(kLat, LocalDensity::parse("u^2 + u1^2"), shift(kLat), s);
  EXPECT_NEAR(r.by_flow, 0.0, 1e-8);
  EXPECT_NEAR(r.by_density, 0.0, 1e-8);
  auto q = lie_derivative_local(kLat, LocalDensity::parse("x*u^3"), shift(kLat), s);
  EXPECT_NEAR(q.by_density, q.by_flow, 1e-7);
}

TEST(ShiftFlow, IsAGroup) {
  Vec s = wave(kLat);
  s[5] = -1.0;
  Vec a = shift_flow(kLat, 0.3, shift_flow(kLat, -0.1, s));
  EXPECT_LT((a - shift_flow(kLat, 0.2, s)).norm(), 1e-12);
  EXPECT_LT((shift_flow(kLat, 0.0, s) - s).norm(), 1e-12);
}

TEST(LocalConnection, DeclaredDensityMatches) {
  auto rho = LocalOneForm::parse("u^2*v + u1*v");
  auto fb = FieldBundle::make(kLat, 2, {}, {fiber_translation(kLat, "0")}, {}, Connection{rho.form(kLat)}, rho);
  // mu = -rho(X) for alpha = 0
  auto r = local_connection_check(fb, densities({"-(u^2) - u1"}));
  EXPECT_TRUE(r.ok());
}

TEST(LocalConnection, NonlocalConnectionIsCaught) {
  const int m = kLat.sites();
  OneForm nonlocal([m](const Vec& s) -> Vec { return Vec::Constant(m, s.sum() / (m * m)); });
  auto declared = LocalOneForm::parse("u*v");
  auto fb = FieldBundle::make(kLat, 2, {}, {}, {}, Connection{nonlocal}, declared);
  try {
    local_connection_check(fb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::locality_declaration);
    EXPECT_NE(std::string(e.what()).find("rho differs"), std::string::npos) << e.what();
  }
}

TEST(LocalSection, RecoversPlantedDensity) {
  auto X = fiber_translation(kLat, "I(0.3*(u+t)^2 - 0.3*u^2)");
  auto fb = FieldBundle::make(kLat, 2, {}, {X}, {}, Connection::flat(kLat.sites()));
  auto cert = local_section_search_lie(fb, Section::reference(), densities(default_density_terms(2, 2)), quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_TRUE(cert.xi_local);
  EXPECT_LT(cert.held_out_residual, 1e-8);
  Vec s = wave(kLat);
  EXPECT_NEAR(cert.field(s) - cert.field(Vec::Zero(kLat.sites())), 0.3 * s.squaredNorm() * kLat.spacing(), 1e-8);
}

TEST(LocalSection, ZeroModeSquareHasNoLocalPrimitive) {
  auto X = fiber_translation(kLat, "t*I(u)^2");
  auto fb = FieldBundle::make(kLat, 2, {}, {X}, {}, Connection::flat(kLat.sites()));
  auto cert = local_section_search_lie(fb, Section::reference(), densities(default_density_terms(2, 3)), quick());
  EXPECT_FALSE(cert.found);
  EXPECT_NE(cert.describe().find("not ruled out"), std::string::npos);
}

TEST(LocalGlobal, HalfShiftNeedsVOverTwoL) {
  LatticeBase lat(8, 2.0);
  auto fb = half_shift(lat);
  auto cert = local_global_search(fb, one_forms({"v", "u*v"}), field_paths(fb, 3, 1), quick());
  ASSERT_TRUE(cert.found) << cert.describe();
  EXPECT_NEAR(cert.coefficients[0], 1.0 / (2 * lat.period()), 1e-9);
  EXPECT_NEAR(cert.coefficients[1], 0.0, 1e-9);
}

TEST(LocalGlobal, AnsatzBlindToConstantsFails) {
  auto fb = half_shift(kLat);
  auto cert = local_global_search(fb, one_forms({"v1", "u*v1"}), field_paths(fb, 3, 1), quick());
  EXPECT_FALSE(cert.found);
}

TEST(LocalGlobal, PathsMustEndAtTheImage) {
  auto fb = half_shift(kLat);
  Word w = single(Letter::Kind::discrete, 0, 1.0);
  Vec a = Vec::Zero(kLat.sites());
  Path bad = Path::from_function([a](double t) -> Vec { return a + Vec::Constant(a.size(), 0.5 * t); }, 16);
  EXPECT_THROW(local_global_search(fb, one_forms({"v"}), {{w, bad}}, quick()), Error);
}

TEST(DensityTerms, Counts) {
  EXPECT_EQ(default_density_terms(2, 2).size(), 9u);  // 3 linear + 6 quadratic
  EXPECT_EQ(default_one_form_terms(1, 1).size(), 2u);
}

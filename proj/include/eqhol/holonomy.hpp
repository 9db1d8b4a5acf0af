#pragma once

// Horizontal lifts and phi-equivariant holonomy for paths gamma with
// gamma(1) = phi(gamma(0)), flat characters and the k map.

#include <complex>
#include <random>

#include "eqhol/bundle.hpp"

namespace eqhol {

inline constexpr double kInCPhiTolerance = 1e-6;
inline constexpr double kDualMethodTolerance = 1e-5;

struct LiftResult {
  CircleValue endpoint_phase;
  std::vector<double> phase_history;  // real phase at every path node
};

/// Horizontal lift in the S-trivialization: phase(s) = start + int_0^s rho^S.
inline LiftResult horizontal_lift(const ParameterSpace& s, const Connection& c, const Section& sec, const Path& path,
                                  CircleValue start_phase = CircleValue()) {
  std::vector<double> cum = cumulative_integral(s, section_rho(s, c, sec), path);
  LiftResult r;
  for (double v : cum) r.phase_history.push_back(start_phase.value() + v);
  r.endpoint_phase = CircleValue(r.phase_history.back());
  return r;
}

/// Integrates u' = 2 pi i rho_ref(gamma') u by RK4 over each chart segment,
/// starting from u0. Returns u(1).
inline std::complex<double> lift_ode(const ParameterSpace& s, const OneForm& rho_ref, const Path& path,
                                     std::complex<double> u0) {
  using C = std::complex<double>;
  const auto& p = path.points();
  C u = u0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    Vec step = s.displacement(p[k], p[k + 1]);
    auto rate = [&](double tau) { return C(0, 2 * M_PI * rho_ref(s.reduce(p[k] + tau * step), step)); };
    C r0 = rate(0.0), rh = rate(0.5), r1 = rate(1.0);
    C k1 = r0 * u;
    C k2 = rh * (u + 0.5 * k1);
    C k3 = rh * (u + 0.5 * k2);
    C k4 = r1 * (u + k3);
    u += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  return u;
}

struct HolonomyResult {
  CircleValue value;     // formula value, authoritative
  CircleValue formula;
  CircleValue lift;
  double cross_check = 0.0;  // circle distance between the two methods
  std::string word;
  std::string path_id;
};

inline void require_in_c_phi(const EquivariantBundle& b, const Word& w, const Path& g, double tol = kInCPhiTolerance) {
  double gap = b.space().distance(g.end(), b.apply(w, g.start()));
  if (gap > tol) {
    std::ostringstream os;
    os << "path does not satisfy gamma(1) = phi(gamma(0)) for phi = " << b.action().describe(w) << " (gap " << gap
       << " at " << describe_point(g.start()) << ")";
    fail(ErrorKind::not_in_c_phi, os.str());
  }
}

/// int_gamma rho^S - alpha^S_phi(gamma(0)).
inline double holonomy_formula_lift(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                    const Word& w, const Path& g) {
  return line_integral(b.space(), section_rho(b.space(), c, sec), g) - section_alpha_lift(b, sec, w)(g.start());
}

/// Solves lift(1) = phi_U(lift(0)) exp(2 pi i h) in the reference trivialization.
inline CircleValue holonomy_by_lift(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                    const Word& w, const Path& g) {
  using C = std::complex<double>;
  const Vec& x = g.start();
  double lam = sec.is_reference ? 0.0 : sec.lambda(x);
  C u0 = std::polar(1.0, 2 * M_PI * lam);  // phase 0 in the S-trivialization
  C u1 = lift_ode(b.space(), c.rho_ref, g, u0);
  C target = std::polar(1.0, 2 * M_PI * (b.alpha(w, x) + lam));
  return CircleValue(std::arg(u1 / target) / (2 * M_PI));
}

inline HolonomyResult equivariant_holonomy(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                           const Word& w, const Path& g, std::string path_id = "",
                                           double tol = kDualMethodTolerance) {
  require_in_c_phi(b, w, g);
  HolonomyResult r;
  r.formula = CircleValue(holonomy_formula_lift(b, c, sec, w, g));
  r.lift = holonomy_by_lift(b, c, sec, w, g);
  r.value = r.formula;
  r.cross_check = r.formula.distance(r.lift);
  r.word = b.action().describe(w);
  r.path_id = std::move(path_id);
  if (r.cross_check > tol) {
    std::ostringstream os;
    os << "lift and formula holonomy disagree by " << r.cross_check << " for " << r.word;
    fail(ErrorKind::consistency, os.str());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Paths in C^phi

/// x to phi(x) along the chart segment, bent by sin(pi s) * bend.
inline Path path_in_c_phi(const EquivariantBundle& b, const Word& w, const Vec& x, const Vec& bend,
                          std::size_t n = kDefaultPathSamples) {
  const auto& s = b.space();
  Vec d = s.displacement(x, b.apply(w, x));
  return Path::from_function([x, d, bend](double t) -> Vec { return x + t * d + std::sin(M_PI * t) * bend; }, n);
}

/// Random bend of size up to `scale` times the smallest axis extent.
template <class Rng>
Vec random_bend(const ParameterSpace& s, Rng& rng, double scale = 0.05) {
  double ext = s.axes()[0].extent();
  for (const Axis& a : s.axes()) ext = std::min(ext, a.extent());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(s.dimension());
  for (int i = 0; i < s.dimension(); ++i) v[i] = u(rng) * scale * ext;
  return v;
}

// ---------------------------------------------------------------------------
// Invariances

struct InvarianceReport {
  bool translate_applicable = false;
  std::string translate_note;
  double translate_residual = 0.0;   // |hol(phi' gamma) - hol(gamma)|
  double conjugate_residual = 0.0;   // |hol(zeta * gamma * phi.zeta^-1) - hol(gamma)|
  double max_residual() const { return std::max(translate_residual, conjugate_residual); }
};

/// Translation needs phi' gamma in C^phi, which holds when phi' commutes with
/// phi at gamma(0); otherwise that check is skipped and noted.
inline InvarianceReport holonomy_invariance_suite(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                                  const Word& phi, const Word& phi_prime, const Path& gamma,
                                                  const Path& zeta) {
  const auto& s = b.space();
  const auto& a = b.action();
  InvarianceReport r;
  CircleValue base = equivariant_holonomy(b, c, sec, phi, gamma).value;

  Path moved = act(s, [a, phi_prime](const Vec& x) { return a.apply(phi_prime, x); }, gamma);
  double gap = s.distance(moved.end(), b.apply(phi, moved.start()));
  if (gap <= kInCPhiTolerance) {
    r.translate_applicable = true;
    r.translate_residual = equivariant_holonomy(b, c, sec, phi, moved).value.distance(base);
  } else {
    r.translate_note = "phi' does not commute with phi at gamma(0); phi' gamma is not in C^phi";
  }

  Path conj = conjugate(s, zeta, gamma, [a, phi](const Vec& x) { return a.apply(phi, x); });
  r.conjugate_residual = equivariant_holonomy(b, c, sec, phi, conj).value.distance(base);
  return r;
}

/// alpha^S_phi(y) + int_zeta (phi^* rho^S - rho^S), zeta from y to x.
inline CircleValue transport_alpha(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                   const Word& w, const Path& zeta) {
  const auto& s = b.space();
  GroupAction a = b.action();
  OneForm rho = section_rho(s, c, sec);
  OneForm diff = pullback(s, [a, w](const Vec& x) { return a.apply(w, x); }, rho) - rho;
  return CircleValue(section_alpha_lift(b, sec, w)(zeta.start()) + line_integral(s, diff, zeta));
}

// ---------------------------------------------------------------------------
// Characters

/// A homomorphism G/G0 -> R/Z given on the discrete generators.
struct Character {
  std::vector<std::string> labels;
  std::vector<CircleValue> values;
  double spread = 0.0;  // largest path/basepoint disagreement seen while measuring

  CircleValue of(const Word& w) const {
    double v = 0.0;
    for (const Letter& l : w.letters)
      if (l.kind == Letter::Kind::discrete) v += static_cast<double>(l.exponent()) * values.at(l.generator).value();
    return CircleValue(v);
  }

  bool is_zero(double tol) const {
    for (CircleValue v : values)
      if (!v.approx(CircleValue(), tol)) return false;
    return true;
  }
};

struct SuiteConfig {
  int paths = 8;
  int basepoints = 3;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  double flat_tol = 1e-5;
  int probes = 32;
  double probe_margin = 0.2;
};

/// Largest |curv| and |mu| over probes.
inline double equivariant_curvature_size(const EquivariantBundle& b, const Connection& c,
                                         const std::vector<Vec>& probes) {
  const auto& s = b.space();
  TwoForm omega = exterior_derivative(s, c.rho_ref);
  Section ref = Section::reference();
  double m = 0.0;
  for (const Vec& x : probes) {
    m = std::max(m, omega.at(x).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < b.action().lie().size(); ++k) {
      const VectorField& X = b.action().lie()[k].field;
      m = std::max(m, std::abs(anomaly_flow(b, ref, k)(x) - c.rho_ref(x, X(x))));
    }
  }
  return m;
}

/// Measures hol over several paths and basepoints per generator.
inline Character flat_character(const EquivariantBundle& b, const Connection& c, const SuiteConfig& cfg = {}) {
  const auto& s = b.space();
  HaltonProbes probes(s, cfg.seed, cfg.probe_margin);
  double size = equivariant_curvature_size(b, c, probes.take(static_cast<std::size_t>(cfg.probes)));
  if (size > cfg.flat_tol)
    fail(ErrorKind::not_flat, "equivariant curvature does not vanish (sup " + std::to_string(size) + ")");

  std::mt19937_64 rng(cfg.seed);
  Character ch;
  auto bases = HaltonProbes(s, cfg.seed + 101, 0.3).take(static_cast<std::size_t>(cfg.basepoints));
  Section ref = Section::reference();
  for (std::size_t g = 0; g < b.action().generators().size(); ++g) {
    Word w = single(Letter::Kind::discrete, g, 1.0);
    std::vector<CircleValue> seen;
    for (int p = 0; p < cfg.paths; ++p) {
      const Vec& x = bases[static_cast<std::size_t>(p) % bases.size()];
      Path path = path_in_c_phi(b, w, x, p == 0 ? Vec::Zero(s.dimension()) : random_bend(s, rng));
      seen.push_back(equivariant_holonomy(b, c, ref, w, path).value);
    }
    double spread = 0.0;
    for (CircleValue v : seen) spread = std::max(spread, v.distance(seen.front()));
    ch.spread = std::max(ch.spread, spread);
    const auto& gen = b.action().generators()[g];
    if (spread > cfg.tol)
      fail(ErrorKind::inconsistency, "holonomy of '" + gen.label + "' depends on the path (spread " +
                                         std::to_string(spread) + ")");
    if (gen.in_identity_component && !seen.front().approx(CircleValue(), cfg.tol))
      fail(ErrorKind::inconsistency, "identity-component generator '" + gen.label + "' has nonzero holonomy");
    ch.labels.push_back(gen.label);
    ch.values.push_back(gen.in_identity_component ? CircleValue() : seen.front());
  }
  return ch;
}

/// Largest violation of d beta = 0, i_X beta = 0 and phi^* beta = beta over probes.
inline double cartan_closedness(const EquivariantBundle& b, const OneForm& beta, const std::vector<Vec>& probes) {
  const auto& s = b.space();
  const auto& a = b.action();
  TwoForm db = exterior_derivative(s, beta);
  double m = 0.0;
  for (const Vec& x : probes) {
    m = std::max(m, db.at(x).cwiseAbs().maxCoeff());
    for (const auto& l : a.lie()) m = std::max(m, std::abs(beta(x, l.field(x))));
    for (std::size_t g = 0; g < a.generators().size(); ++g) {
      Word w = single(Letter::Kind::discrete, g, 1.0);
      Vec pb = pullback(s, [a, w](const Vec& y) { return a.apply(w, y); }, beta).at(x);
      m = std::max(m, (pb - beta.at(x)).cwiseAbs().maxCoeff());
    }
  }
  return m;
}

struct KResult {
  CircleValue value;
  double spread = 0.0;
};

/// k^beta_phi = int_gamma beta, checked against alternative paths and basepoints.
inline KResult k_of_beta(const EquivariantBundle& b, const OneForm& beta, const Word& w, const Path& gamma,
                         const SuiteConfig& cfg = {}) {
  const auto& s = b.space();
  HaltonProbes probes(s, cfg.seed, cfg.probe_margin);
  double dres = cartan_closedness(b, beta, probes.take(static_cast<std::size_t>(cfg.probes)));
  if (dres > 1e-4) fail(ErrorKind::precondition, "beta is not Cartan-closed and invariant (residual " + std::to_string(dres) + ")");
  require_in_c_phi(b, w, gamma);
  KResult r;
  r.value = CircleValue(line_integral(s, beta, gamma));
  std::mt19937_64 rng(cfg.seed);
  auto bases = HaltonProbes(s, cfg.seed + 101, 0.3).take(static_cast<std::size_t>(cfg.basepoints));
  for (int p = 0; p < cfg.paths; ++p) {
    Path alt = path_in_c_phi(b, w, bases[static_cast<std::size_t>(p) % bases.size()], random_bend(s, rng));
    r.spread = std::max(r.spread, CircleValue(line_integral(s, beta, alt)).distance(r.value));
  }
  if (b.action().in_identity_component(w)) r.value = CircleValue();
  return r;
}

/// Flat bundle with kappa = h: Xi = theta and the constant cocycle
/// alpha_phi = -h(phi), since hol = int rho - alpha.
inline std::pair<EquivariantBundle, Connection> build_flat_from_character(const ParameterSpace& s,
                                                                         const GroupAction& action,
                                                                         const std::vector<double>& h,
                                                                         double tol = 1e-9) {
  if (h.size() != action.generators().size())
    fail(ErrorKind::invalid_character, "character needs one value per discrete generator");
  std::vector<DiscreteGenerator> gens = action.generators();
  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (gens[g].in_identity_component && circle_distance(h[g], 0.0) > tol)
      fail(ErrorKind::invalid_character, "character must vanish on identity-component generator '" + gens[g].label + "'");
    double v = -h[g];
    gens[g].alpha = [v](long n, const Vec&) { return static_cast<double>(n) * v; };
  }
  std::vector<LieGenerator> lie = action.lie();
  for (auto& l : lie) l.alpha = [](double, const Vec&) { return 0.0; };
  for (const Word& r : action.relations()) {
    double v = 0.0;
    for (const Letter& l : r.letters)
      if (l.kind == Letter::Kind::discrete) v += static_cast<double>(l.exponent()) * h[l.generator];
    if (circle_distance(v, 0.0) > tol)
      fail(ErrorKind::invalid_character, "character violates relation " + action.describe(r));
  }
  EquivariantBundle b(s, GroupAction(std::move(gens), std::move(lie), action.relations()));
  return {b, Connection::flat(s.dimension())};
}

}  // namespace eqhol

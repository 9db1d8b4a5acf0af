#pragma once

// The staged decision procedure: equivariant primitive, sigma correction,
// flattening, flat character, k-membership. Each stage either hands a
// certificate to the next one or stops with OBSTRUCTED / INCONCLUSIVE.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/solvers.hpp"

namespace eqhol {

enum class VerdictKind { cancels, obstructed, inconclusive };

inline std::string verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::cancels: return "CANCELS";
    case VerdictKind::obstructed: return "OBSTRUCTED";
    case VerdictKind::inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

inline int exit_code(VerdictKind k) {
  switch (k) {
    case VerdictKind::cancels: return 0;
    case VerdictKind::obstructed: return 2;
    case VerdictKind::inconclusive: return 3;
  }
  return 1;
}

struct StageReport {
  std::string name;
  std::string status;  // certificate, no-certificate, obstructed, measured, skipped
  std::string detail;
  std::optional<Certificate> certificate;
};

struct Revalidation {
  double primitive = 0.0;     // D beta vs curv_G on fresh probes
  double holonomy = 0.0;      // hol vs int beta on fresh (phi, gamma) pairs
  double section = 0.0;       // alpha / anomaly of the induced section
  std::size_t pairs = 0;
  std::string note;
};

struct Verdict {
  VerdictKind kind = VerdictKind::inconclusive;
  std::string stage;    // deciding stage
  std::string witness;  // obstruction witness or the ansatz limitation
  std::vector<StageReport> stages;
  std::optional<OneForm> beta;
  std::string beta_expression;
  std::optional<Character> kappa;
  std::optional<KMembership> membership;
  std::optional<Revalidation> revalidation;

  std::string summary() const {
    std::ostringstream os;
    os << verdict_name(kind);
    if (kind != VerdictKind::cancels) os << " at " << stage;
    os << ": " << witness;
    return os.str();
  }
};

struct VerdictConfig {
  SolverConfig solver;
  SuiteConfig suite;
  FormBasis primitive_basis;
  ScalarBasis sigma_basis;
  std::vector<OneForm> candidates;
  std::vector<std::string> candidate_names;
  std::optional<Vec> basepoint;
  double fixed_point_tol = 1e-8;
  int revalidation_pairs = 20;

  static VerdictConfig defaults(const ParameterSpace& s, int degree = 4) {
    VerdictConfig c;
    c.primitive_basis = default_form_basis(s, degree);
    c.sigma_basis = default_scalar_basis(s, degree);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Fixed points. A zero of X_N forces mu(X) = 0 there (i_X beta = -mu), and a
// fixed point of phi forces kappa_phi = 0 (the constant loop lies in C^phi).

struct FixedPoint {
  Vec point;
  double value = 0.0;  // mu(X) or kappa_phi there
  std::string label;
};

namespace detail {

template <class F>
std::optional<Vec> newton_zero(const ParameterSpace& s, F f, Vec x, double tol) {
  for (int it = 0; it < 40; ++it) {
    Vec r = f(x);
    if (!r.allFinite()) return std::nullopt;
    if (r.norm() < tol) return s.contains(x) ? std::optional<Vec>(x) : std::nullopt;
    Mat J(r.size(), x.size());
    double h = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      J.col(i) = (f(xp) - f(xm)) / (2 * h);
    }
    Vec step = J.completeOrthogonalDecomposition().solve(-r);
    if (!step.allFinite()) return std::nullopt;
    x += step;
    if (!s.contains(x)) return std::nullopt;
  }
  return std::nullopt;
}

inline std::vector<Vec> newton_starts(const ParameterSpace& s, std::uint64_t seed) {
  auto starts = HaltonProbes(s, seed + 503, 0.05).take(24);
  Vec centre(s.dimension());
  for (int i = 0; i < s.dimension(); ++i) centre[i] = 0.5 * (s.axes()[i].lo + s.axes()[i].hi);
  starts.insert(starts.begin(), centre);
  return starts;
}

}  // namespace detail

/// Zeros of X_N at which the moment is nonzero.
inline std::optional<FixedPoint> lie_fixed_point_obstruction(const EquivariantBundle& b,
                                                             const EquivariantCurvature& eq, double tol,
                                                             std::uint64_t seed) {
  const auto& s = b.space();
  for (std::size_t k = 0; k < b.action().lie().size(); ++k) {
    const VectorField& X = b.action().lie()[k].field;
    for (const Vec& x0 : detail::newton_starts(s, seed)) {
      auto z = detail::newton_zero(s, [&](const Vec& x) { return X(x); }, x0, 1e-12);
      if (!z) continue;
      double mu = eq.moment[k](*z);
      if (std::abs(mu) > tol) return FixedPoint{*z, mu, b.action().lie()[k].label};
    }
  }
  return std::nullopt;
}

/// Fixed points of discrete generators with a nonzero character value.
inline std::optional<FixedPoint> discrete_fixed_point_obstruction(const EquivariantBundle& b, const Character& kappa,
                                                                  double tol, std::uint64_t seed) {
  const auto& s = b.space();
  for (std::size_t g = 0; g < b.action().generators().size(); ++g) {
    if (kappa.values[g].approx(CircleValue(), tol)) continue;
    Word w = single(Letter::Kind::discrete, g, 1.0);
    for (const Vec& x0 : detail::newton_starts(s, seed)) {
      auto z = detail::newton_zero(s, [&](const Vec& x) { return Vec(s.displacement(x, b.apply(w, x))); }, x0, 1e-12);
      if (z) return FixedPoint{*z, kappa.values[g].value(), b.action().generators()[g].label};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Re-validation of a final certificate

inline Revalidation revalidate(const EquivariantBundle& b, const Connection& c, const EquivariantCurvature& eq,
                               const OneForm& beta, const VerdictConfig& cfg) {
  const auto& s = b.space();
  const auto& a = b.action();
  Revalidation r;
  auto fresh = HaltonProbes(s, cfg.solver.seed + 9001, cfg.solver.probe_margin).take(64);
  r.primitive = detail::primitive_residual(b, eq, beta, fresh, true).max();

  std::vector<Word> words;
  for (std::size_t g = 0; g < a.generators().size(); ++g) {
    words.push_back(single(Letter::Kind::discrete, g, 1.0));
    words.push_back(single(Letter::Kind::discrete, g, -1.0));
  }
  for (std::size_t k = 0; k < a.lie().size(); ++k) words.push_back(single(Letter::Kind::lie, k, 0.29));
  if (a.generators().size() >= 1 && a.lie().size() >= 1)
    words.push_back(single(Letter::Kind::discrete, 0, 1.0) * single(Letter::Kind::lie, 0, -0.41));

  if (!words.empty()) {
    std::mt19937_64 rng(cfg.solver.seed + 9002);
    auto bases = HaltonProbes(s, cfg.solver.seed + 9003, 0.3).take(static_cast<std::size_t>(cfg.revalidation_pairs));
    for (int p = 0; p < cfg.revalidation_pairs; ++p) {
      const Word& w = words[static_cast<std::size_t>(p) % words.size()];
      Path path = path_in_c_phi(b, w, bases[static_cast<std::size_t>(p)], random_bend(s, rng));
      CircleValue hol = equivariant_holonomy(b, c, Section::reference(), w, path).value;
      r.holonomy = std::max(r.holonomy, CircleValue(line_integral(s, beta, path)).distance(hol));
      ++r.pairs;
    }
  }

  if (s.topology() == Topology::torus) {
    r.note = "induced section not rebuilt on a torus chart";
    return r;
  }
  // S' = S0 exp(2 pi i Lambda) with d Lambda = rho_ref - beta
  Vec base = fresh.front();
  OneForm diff = c.rho_ref - beta;
  Section induced = Section::from(ScalarField([s, diff, base](const Vec& x) {
    return detail::segment_integral(s, diff, base, s.displacement(base, x));
  }));
  std::vector<Vec> few(fresh.begin(), fresh.begin() + 12);
  for (const Word& w : words) {
    if (w.letters.size() != 1 || w.letters[0].kind != Letter::Kind::discrete) continue;
    auto alpha = section_cocycle(b, induced, w);
    for (const Vec& x : few) r.section = std::max(r.section, alpha(x).distance(CircleValue()));
  }
  for (std::size_t k = 0; k < a.lie().size(); ++k)
    r.section = std::max(r.section, sup_norm(anomaly_flow(b, induced, k), few));
  return r;
}

// ---------------------------------------------------------------------------

namespace detail {

template <class F>
auto in_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(name);
  }
}

inline std::string describe_fixed_point(const FixedPoint& fp, const char* what) {
  std::ostringstream os;
  os << what << " of " << fp.label << " is " << fp.value << " at the fixed point " << describe_point(fp.point);
  return os.str();
}

}  // namespace detail

inline Verdict verdict_pipeline(const EquivariantBundle& b, const Connection& c, const VerdictConfig& cfg) {
  const auto& s = b.space();
  const auto& a = b.action();
  Verdict v;
  auto probes = HaltonProbes(s, cfg.solver.seed, cfg.solver.probe_margin).take(static_cast<std::size_t>(cfg.suite.probes));

  // 1. equivariant curvature and its primitive
  ConnectionReport rep = detail::in_stage("equivariant-curvature",
                                          [&] { return connection_report(b, c, Section::reference(), probes); });
  const EquivariantCurvature& eq = rep.equivariant;
  PrimitiveOptions full;
  FormCertificate prim = detail::in_stage("equivariant-curvature", [&] {
    return solve_equivariant_primitive(b, eq, cfg.primitive_basis, cfg.solver, full);
  });
  OneForm beta;
  bool need_sigma = false;
  if (prim.found) {
    beta = prim.form;
    v.stages.push_back({"equivariant-curvature", "certificate", "beta = " + prim.expression, prim});
  } else {
    PrimitiveOptions g0;
    g0.discrete_invariance = false;
    FormCertificate loose = a.generators().empty() ? prim : detail::in_stage("equivariant-curvature", [&] {
      return solve_equivariant_primitive(b, eq, cfg.primitive_basis, cfg.solver, g0);
    });
    if (!loose.found) {
      v.stages.push_back({"equivariant-curvature", "no-certificate", loose.describe(), loose});
      v.stage = "equivariant-curvature";
      if (auto fp = lie_fixed_point_obstruction(b, eq, 1e-6, cfg.solver.seed)) {
        v.kind = VerdictKind::obstructed;
        v.witness = detail::describe_fixed_point(*fp, "moment");
        v.stages.back().status = "obstructed";
      } else {
        v.kind = VerdictKind::inconclusive;
        v.witness = "ansatz-limited: " + loose.describe();
      }
      return v;
    }
    beta = loose.form;
    need_sigma = true;
    v.stages.push_back({"equivariant-curvature", "certificate",
                        "G0-equivariant beta0 = " + loose.expression + " (not invariant under discrete generators)", loose});
  }

  // 2. sigma obstruction
  if (!need_sigma) {
    v.stages.push_back({"sigma", "skipped", "beta is already invariant under every generator", std::nullopt});
  } else {
    Vec base = cfg.basepoint ? *cfg.basepoint : probes.front();
    SigmaResult sr = detail::in_stage("sigma", [&] { return sigma_obstruction(b, beta, base, cfg.sigma_basis, cfg.solver); });
    if (!sr.rho.found) {
      v.stages.push_back({"sigma", "no-certificate", sr.rho.describe(), sr.rho});
      v.kind = VerdictKind::inconclusive;
      v.stage = "sigma";
      v.witness = "ansatz-limited: " + sr.rho.describe();
      return v;
    }
    double res = detail::primitive_residual(b, eq, sr.beta, probes, true).max();
    if (res > cfg.solver.held_out_tol) {
      std::ostringstream os;
      os << "ansatz-limited: the sigma correction rho = " << sr.rho.expression
         << " breaks the Lie conditions (residual " << res << ")";
      v.stages.push_back({"sigma", "no-certificate", os.str(), sr.rho});
      v.kind = VerdictKind::inconclusive;
      v.stage = "sigma";
      v.witness = os.str();
      return v;
    }
    beta = sr.beta;
    v.stages.push_back({"sigma", "certificate", "beta = beta0 - d(" + sr.rho.expression + ")", sr.rho});
  }

  // 3. flatten: Xi' = Xi + 2 pi i beta, i.e. rho' = rho_ref - beta
  Connection flat{c.rho_ref - beta};
  double size = equivariant_curvature_size(b, flat, probes);
  {
    std::ostringstream os;
    os << "rho' = rho - beta has equivariant curvature sup " << size;
    v.stages.push_back({"flatten", "measured", os.str(), std::nullopt});
  }

  // 4. flat character
  Character kappa = detail::in_stage("flat-character", [&] { return flat_character(b, flat, cfg.suite); });
  v.kappa = kappa;
  {
    std::ostringstream os;
    os << "kappa = (";
    for (std::size_t g = 0; g < kappa.values.size(); ++g)
      os << (g ? ", " : "") << kappa.labels[g] << ": " << short_number(kappa.values[g].value());
    os << ") mod 1, spread " << kappa.spread;
    v.stages.push_back({"flat-character", "measured", os.str(), std::nullopt});
  }

  // 5. k-membership
  OneForm cert = beta;
  if (kappa.is_zero(cfg.solver.fit_tol)) {
    v.stages.push_back({"k-membership", "skipped", "kappa vanishes", std::nullopt});
  } else {
    KMembership m = detail::in_stage("k-membership", [&] {
      return k_membership(b, kappa, cfg.candidates, cfg.candidate_names, cfg.solver);
    });
    v.membership = m;
    if (!m.member) {
      v.stages.push_back({"k-membership", "no-certificate", m.describe(), std::nullopt});
      v.stage = "k-membership";
      if (auto fp = discrete_fixed_point_obstruction(b, kappa, cfg.solver.fit_tol, cfg.solver.seed)) {
        v.kind = VerdictKind::obstructed;
        v.witness = detail::describe_fixed_point(*fp, "kappa");
        v.stages.back().status = "obstructed";
      } else {
        v.kind = VerdictKind::inconclusive;
        v.witness = "ansatz-limited: " + m.describe();
      }
      return v;
    }
    for (std::size_t i = 0; i < cfg.candidates.size(); ++i)
      if (m.lambda[static_cast<Eigen::Index>(i)] != 0.0) cert = cert + m.lambda[static_cast<Eigen::Index>(i)] * cfg.candidates[i];
    v.stages.push_back({"k-membership", "certificate", m.describe(), std::nullopt});
  }

  // certificate expression: primitive part plus candidate multiples
  std::ostringstream expr;
  expr << (need_sigma ? "beta0 - d(" + v.stages[1].certificate->expression + ")" : prim.expression);
  if (v.membership && v.membership->member)
    for (std::size_t i = 0; i < cfg.candidates.size(); ++i) {
      double l = v.membership->lambda[static_cast<Eigen::Index>(i)];
      if (std::abs(l) <= 1e-12) continue;
      expr << " + ";
      if (short_number(l) != "1") expr << short_number(l) << " ";
      expr << "(" << cfg.candidate_names[i] << ")";
    }
  v.beta = cert;
  v.beta_expression = expr.str();
  if (v.beta_expression.rfind("0 + ", 0) == 0) v.beta_expression = v.beta_expression.substr(4);
  if (v.beta_expression.size() > 2 && v.beta_expression.front() == '(' && v.beta_expression.back() == ')' &&
      v.beta_expression.find('(', 1) == std::string::npos)
    v.beta_expression = v.beta_expression.substr(1, v.beta_expression.size() - 2);

  Revalidation rv = detail::in_stage("revalidation", [&] { return revalidate(b, c, eq, cert, cfg); });
  v.revalidation = rv;
  double worst = std::max({rv.primitive, rv.holonomy, rv.section});
  if (worst > cfg.solver.held_out_tol) {
    std::ostringstream os;
    os << "certificate beta = " << v.beta_expression << " failed re-validation (D beta " << rv.primitive << ", holonomy "
       << rv.holonomy << ", induced section " << rv.section << ")";
    throw Error(ErrorKind::consistency, os.str()).with_stage("revalidation");
  }
  v.kind = VerdictKind::cancels;
  v.stage = "k-membership";
  v.witness = "trivial equivariant bundle with beta = " + v.beta_expression;
  return v;
}

}  // namespace eqhol

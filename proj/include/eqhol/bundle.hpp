#pragma once

// Equivariant U(1)-bundles stored in a reference trivialization S0: the group
// acts by phi.(x, u) = (phi x, exp(2 pi i alpha_phi(x)) u) and a connection is
// Xi = theta - 2 pi i rho_ref.

#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "eqhol/circle.hpp"
#include "eqhol/conventions.hpp"
#include "eqhol/group.hpp"
#include "eqhol/path.hpp"

namespace eqhol {

/// S = S0 * exp(2 pi i Lambda).
struct Section {
  ScalarField lambda;
  bool is_reference = true;

  static Section reference() { return Section{}; }
  static Section from(ScalarField lambda) { return Section{std::move(lambda), false}; }

  /// Lambda' - Lambda relative to this section.
  Section shifted(const ScalarField& by) const { return Section{lambda + by, false}; }
};

/// Connection 1-form relative to S0.
struct Connection {
  OneForm rho_ref;

  static Connection flat(int dim) { return Connection{OneForm::zero(dim)}; }
};

using CircleField = std::function<CircleValue(const Vec&)>;

struct CocycleConfig {
  int word_length = 3;
  int probes = 64;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  double probe_margin = 0.2;
  std::vector<double> lie_params = {0.37, -0.61};
};

struct CocycleReport {
  double max_residual = 0.0;
  std::size_t checks = 0;
  std::string witness_kind;  // "cocycle", "relation", "inverse", "family"
  std::string witness_words;
  Vec witness_point;

  bool ok(double tol) const { return max_residual <= tol; }
  std::string describe() const {
    if (witness_kind.empty()) return "no residual";
    std::ostringstream os;
    os << witness_kind << " residual " << max_residual << " for " << witness_words << " at "
       << describe_point(witness_point);
    return os.str();
  }
};

class EquivariantBundle;
CocycleReport check_cocycle(const EquivariantBundle& bundle, const CocycleConfig& config = {});

class EquivariantBundle {
 public:
  /// Unchecked; use build_from_cocycle to validate the group and cocycle laws.
  EquivariantBundle(ParameterSpace space, GroupAction action) : space_(std::move(space)), action_(std::move(action)) {}

  static EquivariantBundle build_from_cocycle(ParameterSpace space, GroupAction action,
                                              const CocycleConfig& config = {}) {
    EquivariantBundle b(std::move(space), std::move(action));
    CocycleReport r = check_cocycle(b, config);
    if (!r.ok(config.tol)) fail(ErrorKind::construction, "invalid equivariant bundle: " + r.describe());
    return b;
  }

  const ParameterSpace& space() const { return space_; }
  const GroupAction& action() const { return action_; }

  /// Real lift of alpha^{S0}_w(x).
  double alpha(const Word& w, const Vec& x) const { return action_.alpha(w, x); }
  Vec apply(const Word& w, const Vec& x) const { return space_.reduce(action_.apply(w, x)); }

 private:
  ParameterSpace space_;
  GroupAction action_;
};

// ---------------------------------------------------------------------------
// Cocycle checks

namespace detail {

inline std::vector<Letter> alphabet(const GroupAction& a, const CocycleConfig& c) {
  std::vector<Letter> out;
  for (std::size_t g = 0; g < a.generators().size(); ++g) {
    out.push_back(Letter{Letter::Kind::discrete, g, 1.0});
    out.push_back(Letter{Letter::Kind::discrete, g, -1.0});
  }
  for (std::size_t l = 0; l < a.lie().size(); ++l)
    for (double p : c.lie_params) out.push_back(Letter{Letter::Kind::lie, l, p});
  return out;
}

inline void all_words(const std::vector<Letter>& alpha, int length, std::vector<Word>& out) {
  std::vector<Word> frontier{Word{}};
  for (int k = 0; k < length; ++k) {
    std::vector<Word> next;
    for (const Word& w : frontier)
      for (const Letter& l : alpha) {
        Word v = w;
        v.letters.push_back(l);
        next.push_back(v);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
}

}  // namespace detail

/// Compares alpha_{phi' phi}(x) with alpha_phi(x) + alpha_phi'(phi x), where the
/// left side is evaluated on the merged (reduced) word, so generator family
/// laws and flow additivity are exercised. Also checks relations and inverses.
inline CocycleReport check_cocycle(const EquivariantBundle& bundle, const CocycleConfig& config) {
  if (config.word_length < 2) fail(ErrorKind::precondition, "check_cocycle needs word_length >= 2");
  const auto& s = bundle.space();
  const auto& a = bundle.action();
  CocycleReport rep;
  rep.witness_point = Vec::Zero(s.dimension());
  auto record = [&](double r, const char* kind, const std::string& words, const Vec& x) {
    ++rep.checks;
    if (!(r <= rep.max_residual)) {
      rep.max_residual = std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
      rep.witness_kind = kind;
      rep.witness_words = words;
      rep.witness_point = x;
    }
  };

  HaltonProbes probes(s, config.seed, config.probe_margin);
  auto points = probes.take(static_cast<std::size_t>(config.probes));
  auto letters = detail::alphabet(a, config);
  std::vector<Word> short_words;
  detail::all_words(letters, config.word_length - 1, short_words);

  for (const Vec& x : points) {
    for (const Letter& l : letters) {
      Word w{{l}};
      record(s.distance(a.apply_inverse(w, a.apply(w, x)), x), "inverse", a.describe(w), x);
    }
    for (const Word& w1 : short_words) {
      Vec y = a.apply(w1, x);
      double a1 = a.alpha(w1, x);
      for (const Word& w2 : short_words) {
        if (static_cast<int>(w1.letters.size() + w2.letters.size()) > config.word_length) continue;
        Word merged = (w2 * w1).reduced();
        double lhs = a.alpha(merged, x);
        double rhs = a1 + a.alpha(w2, y);
        std::string words = "phi' = " + a.describe(w2) + ", phi = " + a.describe(w1);
        record(circle_distance(lhs, rhs), "cocycle", words, x);
        record(s.distance(a.apply(merged, x), a.apply(w2, y)), "composition", words, x);
      }
    }
    for (const Word& r : a.relations()) {
      record(circle_distance(a.alpha(r, x), 0.0), "relation", a.describe(r), x);
      record(s.distance(a.apply(r, x), x), "relation-map", a.describe(r), x);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Sections and anomalies

/// Real lift of alpha^S_phi(x) = alpha^{S0}_phi(x) + Lambda(x) - Lambda(phi x).
inline ScalarField section_alpha_lift(const EquivariantBundle& b, const Section& sec, const Word& w) {
  return ScalarField([b, sec, w](const Vec& x) {
    double v = b.alpha(w, x);
    if (!sec.is_reference) v += sec.lambda(x) - sec.lambda(b.apply(w, x));
    return v;
  });
}

inline CircleField section_cocycle(const EquivariantBundle& b, const Section& sec, const Word& w) {
  ScalarField lift = section_alpha_lift(b, sec, w);
  return [lift](const Vec& x) { return CircleValue(lift(x)); };
}

/// rho^S = rho_ref - d Lambda.
inline OneForm section_rho(const ParameterSpace& s, const Connection& c, const Section& sec) {
  if (sec.is_reference) return c.rho_ref;
  return c.rho_ref - exterior_derivative(s, sec.lambda);
}

enum class AnomalyMethod { flow_derivative, moment_formula };

inline constexpr double kAnomalyStep = 1e-4;
inline constexpr double kUnwrapLimit = 0.25;

namespace detail {

// Derivative at t = 0 of a circle-valued function given by real lifts,
// unwrapped against f(0) and Richardson-extrapolated over steps h and 2h.
inline double circle_derivative(const std::function<double(double)>& f, double h, const Vec& x) {
  double f0 = f(0.0);
  auto unwrapped = [&](double t) {
    double d = centered_mod1(f(t) - f0);
    if (std::abs(d) >= kUnwrapLimit)
      fail(ErrorKind::resolution, "cannot unwrap cocycle along flow at " + describe_point(x) +
                                      "; shrink the anomaly step or fd_step");
    return d;
  };
  double d1 = (unwrapped(h) - unwrapped(-h)) / (2 * h);
  double d2 = (unwrapped(2 * h) - unwrapped(-2 * h)) / (4 * h);
  return (4 * d1 - d2) / 3;
}

}  // namespace detail

/// a^S(X) by differentiating t -> alpha^S_{exp(tX)}(x).
inline ScalarField anomaly_flow(const EquivariantBundle& b, const Section& sec, std::size_t lie) {
  const LieGenerator& X = b.action().lie().at(lie);
  return ScalarField([b, sec, X](const Vec& x) {
    auto f = [&](double t) {
      double v = X.alpha(t, x);
      if (!sec.is_reference) v += sec.lambda(x) - sec.lambda(b.space().reduce(X.flow(t, x)));
      return v;
    };
    return detail::circle_derivative(f, kAnomalyStep, x);
  });
}

/// mu(X) = -(i / 2 pi) Xi(X_U), with X_U differentiated on the total space in
/// complex arithmetic. A scenario-declared moment takes precedence.
inline ScalarField moment(const EquivariantBundle& b, const Connection& c, std::size_t lie) {
  const LieGenerator& X = b.action().lie().at(lie);
  if (X.declared_moment) return *X.declared_moment;
  return ScalarField([X, c](const Vec& x) {
    using C = std::complex<double>;
    const double h = kAnomalyStep;
    auto z = [&](double t) { return std::polar(1.0, 2 * M_PI * X.alpha(t, x)); };
    C d1 = (z(h) - z(-h)) / (2 * h);
    C d2 = (z(2 * h) - z(-2 * h)) / (4 * h);
    C vertical = ((4.0 * d1 - d2) / 3.0) / z(0.0);  // theta(X_U)
    C xi = vertical - C(0, 2 * M_PI) * c.rho_ref(x, X.field(x));
    return kFundamentalFieldSign * (C(0, -1.0 / (2 * M_PI)) * xi).real();
  });
}

/// a^S(X) = mu(X) + rho^S(X_N).
inline ScalarField anomaly_moment(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                  std::size_t lie) {
  ScalarField mu = moment(b, c, lie);
  OneForm rho = section_rho(b.space(), c, sec);
  VectorField X = b.action().lie().at(lie).field;
  return mu + interior(X, rho);
}

inline ScalarField infinitesimal_anomaly(const EquivariantBundle& b, const Section& sec, std::size_t lie,
                                         AnomalyMethod method = AnomalyMethod::flow_derivative,
                                         const std::optional<Connection>& c = std::nullopt) {
  if (lie >= b.action().lie().size())
    fail(ErrorKind::usage, "no Lie generator with index " + std::to_string(lie) + " (group may be discrete)");
  if (method == AnomalyMethod::flow_derivative) return anomaly_flow(b, sec, lie);
  if (!c) fail(ErrorKind::precondition, "moment-formula anomaly needs a connection");
  return anomaly_moment(b, *c, sec, lie);
}

struct BracketFit {
  std::vector<double> coefficients;  // [X_i, X_j]_N = sum_k C^k X_kN
  double fit_residual = 0.0;
};

/// Least-squares structure constants of the fundamental fields on probe points.
inline BracketFit fit_bracket(const ParameterSpace& s, const std::vector<VectorField>& fields, std::size_t i,
                              std::size_t j, const std::vector<Vec>& probes) {
  VectorField Z = lie_bracket(s, fields.at(i), fields.at(j));
  const int d = s.dimension();
  const auto K = static_cast<Eigen::Index>(probes.size());
  Mat A(K * d, static_cast<Eigen::Index>(fields.size()));
  Vec rhs(K * d);
  for (Eigen::Index p = 0; p < K; ++p) {
    const Vec& x = probes[static_cast<std::size_t>(p)];
    rhs.segment(p * d, d) = Z(x);
    for (std::size_t k = 0; k < fields.size(); ++k) A.block(p * d, static_cast<Eigen::Index>(k), d, 1) = fields[k](x);
  }
  Vec c = A.colPivHouseholderQr().solve(rhs);
  BracketFit fit;
  fit.coefficients.assign(c.data(), c.data() + c.size());
  fit.fit_residual = (A * c - rhs).cwiseAbs().maxCoeff();
  return fit;
}

/// X_N(a(Y)) - Y_N(a(X)) - a([X, Y]) for given anomaly fields. The bracket is
/// expanded over the generators by fitted structure constants.
inline ScalarField lie_cocycle_residual(const ParameterSpace& s, const std::vector<VectorField>& fields,
                                        const std::vector<ScalarField>& anomalies, std::size_t i, std::size_t j,
                                        const std::vector<Vec>& probes, double closure_tol = 1e-6) {
  BracketFit fit = fit_bracket(s, fields, i, j, probes);
  if (fit.fit_residual > closure_tol)
    fail(ErrorKind::consistency, "Lie generators do not close under the bracket (fit residual " +
                                     std::to_string(fit.fit_residual) + ")");
  ScalarField bracket_term = ScalarField::constant(0.0);
  for (std::size_t k = 0; k < fields.size(); ++k)
    if (fit.coefficients[k] != 0.0) bracket_term = bracket_term + fit.coefficients[k] * anomalies[k];
  return directional_derivative(s, anomalies[j], fields[i]) - directional_derivative(s, anomalies[i], fields[j]) -
         bracket_term;
}

inline ScalarField lie_cocycle_residual(const EquivariantBundle& b, const Section& sec, std::size_t i, std::size_t j,
                                        const std::vector<Vec>& probes) {
  std::vector<VectorField> fields;
  std::vector<ScalarField> anomalies;
  for (std::size_t k = 0; k < b.action().lie().size(); ++k) {
    fields.push_back(b.action().lie()[k].field);
    anomalies.push_back(anomaly_flow(b, sec, k));
  }
  return lie_cocycle_residual(b.space(), fields, anomalies, i, j, probes);
}

// ---------------------------------------------------------------------------
// Curvature

struct EquivariantCurvature {
  TwoForm omega;
  std::vector<ScalarField> moment;
};

struct ConnectionReport {
  OneForm rho_s;
  TwoForm curv;
  std::vector<ScalarField> moment;
  EquivariantCurvature equivariant;
  double closedness_residual = 0.0;  // sup |d omega|
  double moment_residual = 0.0;      // sup |i_X omega - d mu(X)|
};

inline constexpr double kClosednessTolerance = 1e-4;

/// Checks d omega = 0 and i_X omega = d mu(X) at probes; large residuals signal
/// inconsistent data (typically a connection that is not invariant).
inline void measure_closedness(const ParameterSpace& s, const EquivariantCurvature& eq,
                               const std::vector<VectorField>& fields, const std::vector<Vec>& probes,
                               double& closed, double& moment_res) {
  closed = 0.0;
  moment_res = 0.0;
  for (const Vec& x : probes) {
    closed = std::max(closed, closedness_residual(s, eq.omega, x));
    for (std::size_t k = 0; k < fields.size(); ++k) {
      Vec lhs = interior(fields[k], eq.omega).at(x);
      Vec rhs = exterior_derivative(s, eq.moment[k]).at(x);
      moment_res = std::max(moment_res, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
}

inline ConnectionReport connection_report(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                          const std::vector<Vec>& probes, double tol = kClosednessTolerance) {
  const auto& s = b.space();
  ConnectionReport r;
  r.rho_s = section_rho(s, c, sec);
  r.curv = exterior_derivative(s, r.rho_s);
  std::vector<VectorField> fields;
  for (std::size_t k = 0; k < b.action().lie().size(); ++k) {
    const VectorField& X = b.action().lie()[k].field;
    fields.push_back(X);
    r.moment.push_back(anomaly_flow(b, sec, k) - interior(X, r.rho_s));
  }
  r.equivariant = EquivariantCurvature{r.curv, r.moment};
  measure_closedness(s, r.equivariant, fields, probes, r.closedness_residual, r.moment_residual);
  if (r.closedness_residual > tol || r.moment_residual > tol) {
    std::ostringstream os;
    os << "equivariant curvature is not closed (d omega residual " << r.closedness_residual
       << ", i_X omega - d mu residual " << r.moment_residual << "); is the connection invariant?";
    fail(ErrorKind::consistency, os.str());
  }
  return r;
}

/// L_X rho^S + kDescentSign * d a^S(X); vanishes for invariant connections.
inline OneForm descent_residual(const EquivariantBundle& b, const Connection& c, const Section& sec,
                                std::size_t lie) {
  const auto& s = b.space();
  OneForm rho = section_rho(s, c, sec);
  const VectorField& X = b.action().lie().at(lie).field;
  return lie_derivative(s, X, rho) + static_cast<double>(kDescentSign) * exterior_derivative(s, anomaly_flow(b, sec, lie));
}

/// Connection invariance phi^* rho - rho - d alpha_phi for a word; zero when Xi is invariant.
inline OneForm invariance_residual(const EquivariantBundle& b, const Connection& c, const Word& w) {
  const auto& s = b.space();
  GroupAction a = b.action();
  PointMap phi = [a, w](const Vec& x) { return a.apply(w, x); };
  ScalarField alpha([b, w](const Vec& x) { return b.alpha(w, x); });
  return pullback(s, phi, c.rho_ref) - c.rho_ref - exterior_derivative(s, alpha);
}

/// delta alpha: differential of a circle-valued field through a local real lift.
inline OneForm circle_delta(const ParameterSpace& s, CircleField alpha) {
  return OneForm([s, alpha](const Vec& x) -> Vec {
    double h = s.fd_step();
    s.require_stencil(x, h);
    CircleValue a0 = alpha(x);
    Vec g(s.dimension());
    for (int i = 0; i < s.dimension(); ++i) {
      CircleValue ap = alpha(fd::shifted(s, x, i, h));
      CircleValue am = alpha(fd::shifted(s, x, i, -h));
      if (ap.distance(a0) >= kUnwrapLimit || am.distance(a0) >= kUnwrapLimit)
        fail(ErrorKind::resolution, "circle-valued field jumps across the stencil at " + describe_point(x) +
                                        "; shrink fd_step");
      g[i] = ((ap - a0).centered() - (am - a0).centered()) / (2 * h);
    }
    return g;
  });
}

}  // namespace eqhol

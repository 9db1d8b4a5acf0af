#pragma once

// Certificate searches. Every search is a linear least-squares problem over a
// finite ansatz; congruences mod 1 get integer lifts by iterated rounding.
// A failed search is only a statement about the ansatz.

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/ansatz.hpp"
#include "eqhol/bundle.hpp"
#include "eqhol/holonomy.hpp"

namespace eqhol {

struct SolverConfig {
  std::uint64_t seed = 1;
  int fit_probes = 256;
  int held_out_probes = 256;
  double fit_tol = 1e-6;
  double held_out_tol = 1e-5;
  double condition_limit = 1e12;
  double probe_margin = 0.2;
  std::vector<double> lie_params = {0.37, -0.61};
  int paths = 8;
  int max_slack = 16;
  int lift_iterations = 20;
};

struct Certificate {
  bool found = false;
  std::string unknown;
  Vec coefficients;
  std::string expression;
  std::string basis_description;
  std::size_t basis_size = 0;
  double fit_residual = std::numeric_limits<double>::infinity();
  double held_out_residual = std::numeric_limits<double>::infinity();
  double fit_rms = std::numeric_limits<double>::infinity();  // what least squares minimises
  double condition_number = 0.0;

  explicit operator bool() const { return found; }

  std::string describe() const {
    std::ostringstream os;
    if (found) {
      os << unknown << " = " << expression << " (fit residual " << fit_residual << ", held-out "
         << held_out_residual << ")";
    } else {
      os << "no certificate for " << unknown << " within " << basis_description << " (" << basis_size
         << " terms, best fit residual " << fit_residual
         << "); a solution outside this ansatz is not ruled out";
    }
    return os.str();
  }
};

struct ScalarCertificate : Certificate {
  ScalarField field;
  Section section;  // induced section, for coboundary searches
};

struct FormCertificate : Certificate {
  OneForm form;
};

namespace detail {

struct LinearRows {
  int cols = 0;
  std::vector<Vec> rows;
  std::vector<double> target;
  std::vector<char> modular;

  void add(Vec row, double t, bool mod) {
    rows.push_back(std::move(row));
    target.push_back(t);
    modular.push_back(mod ? 1 : 0);
  }

  Mat matrix() const {
    Mat A(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return A;
  }
};

struct LsqFit {
  Vec coef;
  double max_residual = 0.0;
  double rms = 0.0;
};

/// Column-equilibrated truncated-SVD solve; the minimum-norm choice removes
/// gauge directions such as additive constants.
/// `weights` (optional) favours columns in the minimum-norm choice.
inline Vec min_norm_solve(const Mat& A, const Vec& b, const Vec& weights = Vec()) {
  Vec scale = A.colwise().norm().transpose();
  // a column at roundoff level is a pure gauge direction; scaling it up
  // would hand it an arbitrary large coefficient
  double top = scale.size() ? scale.maxCoeff() : 0.0;
  Vec keep = Vec::Ones(scale.size());
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale[j] > 1e-12 * top)) {
      scale[j] = 1.0;
      keep[j] = 0.0;
    }
  if (weights.size() == scale.size()) scale = scale.cwiseQuotient(weights);
  Mat As = A * keep.cwiseQuotient(scale).asDiagonal();
  Eigen::BDCSVD<Mat> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  Vec y = svd.solve(b);
  return y.cwiseProduct(keep).cwiseQuotient(scale);
}

inline LsqFit fit_rows(const LinearRows& rows, int iterations, const Vec& weights = Vec()) {
  LsqFit fit;
  fit.coef = Vec::Zero(rows.cols);
  if (rows.rows.empty()) return fit;
  Mat A = rows.matrix();
  // Modular targets arrive as continuous real lifts, so only a few integer
  // corrections are needed; centering them first would create sawtooth jumps.
  Vec t = Eigen::Map<const Vec>(rows.target.data(), static_cast<Eigen::Index>(rows.target.size()));
  Vec r;
  for (int it = 0; it <= iterations; ++it) {
    fit.coef = min_norm_solve(A, t, weights);
    r = A * fit.coef - t;
    bool changed = false;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (!rows.modular[static_cast<std::size_t>(i)]) continue;
      double k = std::round(r[i]);
      if (k != 0.0) {
        t[i] += k;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (rows.modular[static_cast<std::size_t>(i)]) r[i] = centered_mod1(r[i]);
  fit.max_residual = r.cwiseAbs().maxCoeff();
  fit.rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  return fit;
}

/// Condition number of the column-equilibrated Gram matrix B^T B.
inline double gram_condition(const Mat& B) {
  if (B.cols() == 0) return 1.0;
  Vec scale = B.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale[j] > 0.0)) return std::numeric_limits<double>::infinity();
  Eigen::BDCSVD<Mat> svd(B * scale.cwiseInverse().asDiagonal());
  const Vec& sv = svd.singularValues();
  double smin = sv[sv.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  double k = sv[0] / smin;
  return k * k;
}

inline void require_conditioning(double cond, const SolverConfig& cfg, const std::string& basis) {
  if (cond > cfg.condition_limit) {
    std::ostringstream os;
    os << "ansatz Gram condition number " << cond << " exceeds " << cfg.condition_limit << " for " << basis
       << "; shrink the ansatz or remove dependent terms";
    fail(ErrorKind::conditioning, os.str());
  }
}

inline double scalar_condition(const ScalarBasis& basis, const std::vector<Vec>& probes) {
  Mat B(static_cast<Eigen::Index>(probes.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t p = 0; p < probes.size(); ++p)
    for (std::size_t j = 0; j < basis.size(); ++j)
      B(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = basis.fields[j](probes[p]);
  return gram_condition(B);
}

inline double form_condition(const FormBasis& basis, const std::vector<Vec>& probes, int dim) {
  Mat B(static_cast<Eigen::Index>(probes.size()) * dim, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t p = 0; p < probes.size(); ++p)
    for (std::size_t j = 0; j < basis.size(); ++j)
      B.block(static_cast<Eigen::Index>(p) * dim, static_cast<Eigen::Index>(j), dim, 1) = basis.forms[j].at(probes[p]);
  return gram_condition(B);
}

struct ProbeSets {
  std::vector<Vec> fit;
  std::vector<Vec> held_out;
};

inline ProbeSets probe_sets(const ParameterSpace& s, const SolverConfig& cfg) {
  HaltonProbes h(s, cfg.seed, cfg.probe_margin);
  auto nf = static_cast<std::size_t>(cfg.fit_probes);
  return {h.take(nf), h.take(static_cast<std::size_t>(cfg.held_out_probes), nf)};
}

/// Generator words used as constraints: each discrete generator once and each
/// Lie generator at the configured flow parameters.
inline std::vector<Word> generator_words(const GroupAction& a, const SolverConfig& cfg) {
  std::vector<Word> out;
  for (std::size_t g = 0; g < a.generators().size(); ++g) out.push_back(single(Letter::Kind::discrete, g, 1.0));
  for (std::size_t k = 0; k < a.lie().size(); ++k)
    for (double t : cfg.lie_params) out.push_back(single(Letter::Kind::lie, k, t));
  return out;
}

template <class C>
void finish(C& cert, const LsqFit& fit, double held, const SolverConfig& cfg) {
  cert.coefficients = fit.coef;
  cert.fit_residual = fit.max_residual;
  cert.fit_rms = fit.rms;
  cert.held_out_residual = held;
  cert.found = fit.max_residual <= cfg.fit_tol && held <= cfg.held_out_tol;
}

/// Integral of a 1-form along the chart segment a -> a + v, composite 5-point Gauss-Legendre.
inline double segment_integral(const ParameterSpace& s, const OneForm& form, const Vec& a, const Vec& v,
                               int panels = 16) {
  static constexpr double node[] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                    0.9061798459386640};
  static constexpr double weight[] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                      0.2369268850561891, 0.2369268850561891};
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double lo = static_cast<double>(p) / panels, half = 0.5 / panels;
    for (int q = 0; q < 5; ++q) {
      double t = lo + half * (1.0 + node[q]);
      total += weight[q] * half * form(s.reduce(a + t * v), v);
    }
  }
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Group coboundary: alpha^S_phi = theta o phi - theta mod 1

inline ScalarCertificate solve_group_coboundary(const EquivariantBundle& b, const Section& sec,
                                                const ScalarBasis& basis, const SolverConfig& cfg = {}) {
  const auto& s = b.space();
  auto words = detail::generator_words(b.action(), cfg);
  if (words.empty()) fail(ErrorKind::precondition, "group coboundary search needs at least one generator");
  auto probes = detail::probe_sets(s, cfg);

  ScalarCertificate cert;
  cert.unknown = "theta";
  cert.basis_description = basis.description;
  cert.basis_size = basis.size();
  cert.condition_number = detail::scalar_condition(basis, probes.fit);
  detail::require_conditioning(cert.condition_number, cfg, basis.description);

  detail::LinearRows rows;
  rows.cols = static_cast<int>(basis.size());
  for (const Word& w : words) {
    ScalarField target = section_alpha_lift(b, sec, w);
    for (const Vec& x : probes.fit) {
      Vec y = b.apply(w, x);
      Vec row(rows.cols);
      for (std::size_t j = 0; j < basis.size(); ++j) row[static_cast<Eigen::Index>(j)] = basis.fields[j](y) - basis.fields[j](x);
      rows.add(std::move(row), target(x), true);
    }
  }
  auto fit = detail::fit_rows(rows, cfg.lift_iterations);

  cert.field = basis.combine(fit.coef);
  cert.section = sec.shifted(cert.field);
  cert.expression = describe_combination(scalar_names(basis), fit.coef);

  // alpha of the new section on held-out probes, including products of two generators
  std::vector<Word> checks = words;
  for (const Word& u : words)
    for (const Word& v : words) checks.push_back(u * v.inverse());
  double held = 0.0;
  for (const Word& w : checks) {
    auto alpha = section_cocycle(b, cert.section, w);
    for (const Vec& x : probes.held_out) held = std::max(held, alpha(x).distance(CircleValue()));
  }
  detail::finish(cert, fit, held, cfg);
  return cert;
}

// ---------------------------------------------------------------------------
// Lie coboundary: a^S(X) = X(Lambda)

inline ScalarCertificate solve_lie_coboundary(const EquivariantBundle& b, const Section& sec,
                                              const ScalarBasis& basis, const SolverConfig& cfg = {}) {
  const auto& s = b.space();
  const auto& lie = b.action().lie();
  if (lie.empty()) fail(ErrorKind::precondition, "Lie coboundary search needs Lie generators with flows");
  auto probes = detail::probe_sets(s, cfg);

  ScalarCertificate cert;
  cert.unknown = "Lambda";
  cert.basis_description = basis.description;
  cert.basis_size = basis.size();
  cert.condition_number = detail::scalar_condition(basis, probes.fit);
  detail::require_conditioning(cert.condition_number, cfg, basis.description);

  std::vector<OneForm> dbasis;
  for (const auto& f : basis.fields) dbasis.push_back(exterior_derivative(s, f));

  detail::LinearRows rows;
  rows.cols = static_cast<int>(basis.size());
  for (std::size_t k = 0; k < lie.size(); ++k) {
    ScalarField a = anomaly_flow(b, sec, k);
    for (const Vec& x : probes.fit) {
      Vec X = lie[k].field(x);
      Vec row(rows.cols);
      for (std::size_t j = 0; j < basis.size(); ++j) row[static_cast<Eigen::Index>(j)] = dbasis[j](x, X);
      rows.add(std::move(row), a(x), false);
    }
  }
  auto fit = detail::fit_rows(rows, cfg.lift_iterations);

  cert.field = basis.combine(fit.coef);
  cert.section = sec.shifted(cert.field);
  cert.expression = describe_combination(scalar_names(basis), fit.coef);

  double held = 0.0;
  for (std::size_t k = 0; k < lie.size(); ++k)
    held = std::max(held, sup_norm(anomaly_flow(b, cert.section, k), probes.held_out));
  detail::finish(cert, fit, held, cfg);
  return cert;
}

// ---------------------------------------------------------------------------
// Equivariant primitive: d beta = omega, i_X beta = -mu(X), phi^* beta = beta

struct PrimitiveOptions {
  /// When set, also impose int_gamma beta = hol_phi(gamma) mod 1 for discrete
  /// generators, with holonomy measured for this connection in the reference section.
  std::optional<Connection> match_holonomy;
  bool discrete_invariance = true;
};

namespace detail {

struct PrimitiveResidual {
  double exterior = 0.0;
  double moment = 0.0;
  double invariance = 0.0;
  double max() const { return std::max({exterior, moment, invariance}); }
};

inline PrimitiveResidual primitive_residual(const EquivariantBundle& b, const EquivariantCurvature& eq,
                                            const OneForm& beta, const std::vector<Vec>& probes,
                                            bool discrete_invariance) {
  const auto& s = b.space();
  const auto& a = b.action();
  TwoForm db = exterior_derivative(s, beta);
  PrimitiveResidual r;
  for (const Vec& x : probes) {
    r.exterior = std::max(r.exterior, (db.at(x) - eq.omega.at(x)).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < a.lie().size(); ++k)
      r.moment = std::max(r.moment, std::abs(beta(x, a.lie()[k].field(x)) + eq.moment[k](x)));
    if (!discrete_invariance) continue;
    for (std::size_t g = 0; g < a.generators().size(); ++g) {
      Word w = single(Letter::Kind::discrete, g, 1.0);
      Vec pb = pullback(s, [a, w](const Vec& y) { return a.apply(w, y); }, beta).at(x);
      r.invariance = std::max(r.invariance, (pb - beta.at(x)).cwiseAbs().maxCoeff());
    }
  }
  return r;
}

/// Paths in C^phi for the discrete generators, as used for holonomy matching.
inline std::vector<std::pair<Word, Path>> generator_paths(const EquivariantBundle& b, int count, std::uint64_t seed) {
  const auto& s = b.space();
  std::mt19937_64 rng(seed);
  auto bases = HaltonProbes(s, seed + 211, 0.3).take(static_cast<std::size_t>(std::max(count, 1)));
  std::vector<std::pair<Word, Path>> out;
  for (std::size_t g = 0; g < b.action().generators().size(); ++g) {
    Word w = single(Letter::Kind::discrete, g, 1.0);
    for (int p = 0; p < count; ++p) {
      Vec bend = p == 0 ? Vec::Zero(s.dimension()) : random_bend(s, rng);
      out.emplace_back(w, path_in_c_phi(b, w, bases[static_cast<std::size_t>(p)], bend));
    }
  }
  return out;
}

}  // namespace detail

inline FormCertificate solve_equivariant_primitive(const EquivariantBundle& b, const EquivariantCurvature& eq,
                                                   const FormBasis& basis, const SolverConfig& cfg = {},
                                                   const PrimitiveOptions& opts = {}) {
  const auto& s = b.space();
  const auto& a = b.action();
  const int d = s.dimension();
  if (eq.moment.size() != a.lie().size())
    fail(ErrorKind::precondition, "equivariant curvature needs one moment per Lie generator");
  auto probes = detail::probe_sets(s, cfg);

  {
    std::vector<VectorField> fields;
    for (const auto& l : a.lie()) fields.push_back(l.field);
    std::vector<Vec> some(probes.fit.begin(), probes.fit.begin() + std::min<std::ptrdiff_t>(32, std::ssize(probes.fit)));
    double closed = 0.0, mres = 0.0;
    measure_closedness(s, eq, fields, some, closed, mres);
    if (closed > kClosednessTolerance || mres > kClosednessTolerance) {
      std::ostringstream os;
      os << "equivariant curvature fails closedness checks (d omega " << closed << ", i_X omega - d mu " << mres << ")";
      fail(ErrorKind::precondition, os.str());
    }
  }

  FormCertificate cert;
  cert.unknown = "beta";
  cert.basis_description = basis.description;
  cert.basis_size = basis.size();
  cert.condition_number = detail::form_condition(basis, probes.fit, d);
  detail::require_conditioning(cert.condition_number, cfg, basis.description);

  const auto p = basis.size();
  std::vector<TwoForm> dbasis;
  for (const auto& f : basis.forms) dbasis.push_back(exterior_derivative(s, f));

  detail::LinearRows rows;
  rows.cols = static_cast<int>(p);
  for (const Vec& x : probes.fit) {
    std::vector<Mat> dj;
    std::vector<Vec> bj;
    for (std::size_t j = 0; j < p; ++j) {
      dj.push_back(dbasis[j].at(x));
      bj.push_back(basis.forms[j].at(x));
    }
    Mat om = eq.omega.at(x);
    for (int u = 0; u < d; ++u)
      for (int v = u + 1; v < d; ++v) {
        Vec row(rows.cols);
        for (std::size_t j = 0; j < p; ++j) row[static_cast<Eigen::Index>(j)] = dj[j](u, v);
        rows.add(std::move(row), om(u, v), false);
      }
    for (std::size_t k = 0; k < a.lie().size(); ++k) {
      Vec X = a.lie()[k].field(x);
      Vec row(rows.cols);
      for (std::size_t j = 0; j < p; ++j) row[static_cast<Eigen::Index>(j)] = bj[j].dot(X);
      rows.add(std::move(row), -eq.moment[k](x), false);
    }
    if (!opts.discrete_invariance) continue;
    for (std::size_t g = 0; g < a.generators().size(); ++g) {
      Word w = single(Letter::Kind::discrete, g, 1.0);
      PointMap phi = [a, w](const Vec& y) { return a.apply(w, y); };
      Mat J = map_jacobian(s, phi, x);
      Vec y = b.apply(w, x);
      std::vector<Vec> diff;
      for (std::size_t j = 0; j < p; ++j) diff.push_back(J.transpose() * basis.forms[j].at(y) - bj[j]);
      for (int i = 0; i < d; ++i) {
        Vec row(rows.cols);
        for (std::size_t j = 0; j < p; ++j) row[static_cast<Eigen::Index>(j)] = diff[j][i];
        rows.add(std::move(row), 0.0, false);
      }
    }
  }

  std::vector<std::pair<Word, Path>> hol_paths;
  if (opts.match_holonomy) {
    hol_paths = detail::generator_paths(b, cfg.paths, cfg.seed);
    for (const auto& [w, path] : hol_paths) {
      Vec row(rows.cols);
      for (std::size_t j = 0; j < p; ++j) row[static_cast<Eigen::Index>(j)] = line_integral(s, basis.forms[j], path);
      double hol = equivariant_holonomy(b, *opts.match_holonomy, Section::reference(), w, path).value.value();
      rows.add(std::move(row), hol, true);
    }
  }

  auto fit = detail::fit_rows(rows, cfg.lift_iterations);
  cert.form = basis.combine(fit.coef);
  cert.expression = describe_form(basis, fit.coef);

  double held = detail::primitive_residual(b, eq, cert.form, probes.held_out, opts.discrete_invariance).max();
  if (opts.match_holonomy) {
    for (const auto& [w, path] : detail::generator_paths(b, cfg.paths, cfg.seed + 17)) {
      CircleValue hol = equivariant_holonomy(b, *opts.match_holonomy, Section::reference(), w, path).value;
      held = std::max(held, CircleValue(line_integral(s, cert.form, path)).distance(hol));
    }
  }
  detail::finish(cert, fit, held, cfg);
  return cert;
}

// ---------------------------------------------------------------------------
// sigma obstruction for the discrete part

struct SigmaResult {
  std::vector<std::string> words;
  std::vector<ScalarField> sigma;  // sigma_phi, normalised to vanish at the basepoint
  double spread = 0.0;             // path dependence seen while integrating
  bool already_invariant = false;
  ScalarCertificate rho;           // sigma_phi = phi^* rho - rho + c_phi
  Vec constants;                   // c_phi
  OneForm beta;                    // beta0 - d rho when rho was found, beta0 otherwise
};

inline SigmaResult sigma_obstruction(const EquivariantBundle& b, const OneForm& beta0, const Vec& basepoint,
                                     const ScalarBasis& basis, const SolverConfig& cfg = {}) {
  const auto& s = b.space();
  const auto& a = b.action();
  auto probes = detail::probe_sets(s, cfg);
  SigmaResult r;
  r.beta = beta0;
  r.rho.unknown = "rho";
  r.rho.basis_description = basis.description;
  r.rho.basis_size = basis.size();

  std::vector<OneForm> delta;
  std::vector<Word> words;
  for (std::size_t g = 0; g < a.generators().size(); ++g) {
    Word w = single(Letter::Kind::discrete, g, 1.0);
    words.push_back(w);
    r.words.push_back(a.describe(w));
    delta.push_back(pullback(s, [a, w](const Vec& y) { return a.apply(w, y); }, beta0) - beta0);
  }

  double closed = 0.0, size = 0.0;
  std::vector<Vec> some(probes.fit.begin(), probes.fit.begin() + std::min<std::ptrdiff_t>(32, std::ssize(probes.fit)));
  for (const OneForm& dl : delta) {
    TwoForm ddl = exterior_derivative(s, dl);
    for (const Vec& x : some) closed = std::max(closed, ddl.at(x).cwiseAbs().maxCoeff());
    size = std::max(size, sup_norm(dl, probes.fit));
  }
  if (closed > kClosednessTolerance)
    fail(ErrorKind::precondition, "d beta0 is not invariant under the discrete generators (residual " +
                                      std::to_string(closed) + ")");

  if (size <= cfg.fit_tol) {
    r.already_invariant = true;
    for (std::size_t g = 0; g < words.size(); ++g) r.sigma.push_back(ScalarField::constant(0.0));
    r.constants = Vec::Zero(static_cast<Eigen::Index>(words.size()));
    r.rho.found = true;
    r.rho.coefficients = Vec::Zero(static_cast<Eigen::Index>(basis.size()));
    r.rho.expression = "0";
    r.rho.fit_residual = r.rho.held_out_residual = 0.0;
    r.rho.field = ScalarField::constant(0.0);
    return r;
  }

  for (const OneForm& dl : delta)
    r.sigma.push_back(ScalarField([s, dl, basepoint](const Vec& x) {
      return detail::segment_integral(s, dl, basepoint, s.displacement(basepoint, x));
    }));

  // path independence: compare against a bent two-segment route
  std::mt19937_64 rng(cfg.seed + 5);
  for (std::size_t g = 0; g < delta.size(); ++g)
    for (std::size_t k = 0; k < 8 && k < probes.held_out.size(); ++k) {
      const Vec& x = probes.held_out[k];
      Vec mid = s.reduce(basepoint + 0.5 * s.displacement(basepoint, x) + random_bend(s, rng, 0.1));
      double bent = detail::segment_integral(s, delta[g], basepoint, s.displacement(basepoint, mid)) +
                    detail::segment_integral(s, delta[g], mid, s.displacement(mid, x));
      r.spread = std::max(r.spread, std::abs(bent - r.sigma[g](x)));
    }
  if (r.spread > cfg.held_out_tol)
    fail(ErrorKind::assumption_violation, "sigma depends on the integration path (spread " + std::to_string(r.spread) +
                                              "); the H^1 = 0 assertion looks false");

  r.rho.condition_number = detail::scalar_condition(basis, probes.fit);
  detail::require_conditioning(r.rho.condition_number, cfg, basis.description);

  const auto p = static_cast<Eigen::Index>(basis.size());
  const auto G = static_cast<Eigen::Index>(words.size());
  detail::LinearRows rows;
  rows.cols = static_cast<int>(p + G);
  for (Eigen::Index g = 0; g < G; ++g)
    for (const Vec& x : probes.fit) {
      Vec y = b.apply(words[static_cast<std::size_t>(g)], x);
      Vec row = Vec::Zero(rows.cols);
      for (Eigen::Index j = 0; j < p; ++j)
        row[j] = basis.fields[static_cast<std::size_t>(j)](y) - basis.fields[static_cast<std::size_t>(j)](x);
      row[p + g] = 1.0;
      rows.add(std::move(row), r.sigma[static_cast<std::size_t>(g)](x), false);
    }
  // sigma is only defined up to constants: let c_phi take any constant part
  // before the ansatz does (phi^* x - x is constant for translations)
  Vec weights = Vec::Ones(rows.cols);
  weights.tail(G).setConstant(1e4);
  auto fit = detail::fit_rows(rows, 0, weights);
  Vec coef = fit.coef.head(p);
  r.constants = fit.coef.tail(G);
  r.rho.field = basis.combine(coef);
  r.rho.expression = describe_combination(scalar_names(basis), coef);

  double held = 0.0;
  for (Eigen::Index g = 0; g < G; ++g)
    for (std::size_t k = 0; k < 32 && k < probes.held_out.size(); ++k) {
      const Vec& x = probes.held_out[k];
      double pred = r.rho.field(b.apply(words[static_cast<std::size_t>(g)], x)) - r.rho.field(x) + r.constants[g];
      held = std::max(held, std::abs(pred - r.sigma[static_cast<std::size_t>(g)](x)));
    }
  OneForm improved = beta0 - exterior_derivative(s, r.rho.field);
  for (Eigen::Index g = 0; g < G; ++g) {
    Word w = words[static_cast<std::size_t>(g)];
    OneForm inv = pullback(s, [a, w](const Vec& y) { return a.apply(w, y); }, improved) - improved;
    held = std::max(held, sup_norm(inv, probes.held_out));
  }
  detail::LsqFit head{coef, fit.max_residual, fit.rms};
  detail::finish(r.rho, head, held, cfg);
  if (r.rho.found) r.beta = improved;
  return r;
}

// ---------------------------------------------------------------------------
// Membership of kappa in the span of candidate k maps

struct KMembership {
  bool member = false;
  Vec lambda;
  std::vector<long> slack;
  double residual = 0.0;
  Mat k;  // generator x candidate, values in [0, 1)
  std::vector<std::string> generators;
  std::vector<std::string> candidates;

  std::string describe() const {
    std::ostringstream os;
    if (member) {
      os << "kappa = ";
      for (Eigen::Index i = 0; i < lambda.size(); ++i)
        os << (i ? " + " : "") << short_number(lambda[i]) << " k(" << candidates[static_cast<std::size_t>(i)] << ")";
      if (lambda.size() == 0) os << "0";
      os << " mod 1";
    } else {
      os << "kappa is not in the span of the " << candidates.size()
         << " candidate k maps (best residual " << residual << "); other invariant closed forms are not ruled out";
    }
    return os.str();
  }
};

inline KMembership k_membership(const EquivariantBundle& b, const Character& kappa,
                                const std::vector<OneForm>& candidates, const std::vector<std::string>& names,
                                const SolverConfig& cfg = {}) {
  const auto& a = b.action();
  const auto G = static_cast<Eigen::Index>(a.generators().size());
  const auto C = static_cast<Eigen::Index>(candidates.size());
  KMembership m;
  m.generators = kappa.labels;
  m.candidates = names;
  m.k = Mat::Zero(G, C);
  m.lambda = Vec::Zero(C);
  m.slack.assign(static_cast<std::size_t>(G), 0);

  SuiteConfig suite;
  suite.seed = cfg.seed;
  suite.paths = std::max(2, cfg.paths / 2);
  Vec base = HaltonProbes(b.space(), cfg.seed + 307, 0.3)(0);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index g = 0; g < G; ++g) {
      Word w = single(Letter::Kind::discrete, static_cast<std::size_t>(g), 1.0);
      KResult kr = k_of_beta(b, candidates[static_cast<std::size_t>(c)], w, path_in_c_phi(b, w, base, Vec::Zero(b.space().dimension())), suite);
      m.k(g, c) = kr.value.value();
    }
  Vec target(G);
  for (Eigen::Index g = 0; g < G; ++g) target[g] = kappa.values.at(static_cast<std::size_t>(g)).value();

  if (kappa.is_zero(cfg.fit_tol)) {
    m.member = true;
    return m;
  }

  // bounded integer search over the slack vector; prefer small residual, then small |m|, then small |lambda|
  int S = cfg.max_slack;
  while (S > 0 && std::pow(2.0 * S + 1.0, static_cast<double>(G)) > 2e5) --S;
  std::vector<long> cur(static_cast<std::size_t>(G), -S);
  double best = std::numeric_limits<double>::infinity();
  long best_l1 = 0;
  double best_norm = 0.0;
  while (true) {
    Vec t = target;
    long l1 = 0;
    for (Eigen::Index g = 0; g < G; ++g) {
      t[g] += static_cast<double>(cur[static_cast<std::size_t>(g)]);
      l1 += std::labs(cur[static_cast<std::size_t>(g)]);
    }
    Vec lam = C > 0 ? detail::min_norm_solve(m.k, t) : Vec();
    double res = C > 0 ? (m.k * lam - t).cwiseAbs().maxCoeff() : t.cwiseAbs().maxCoeff();
    double norm = C > 0 ? lam.norm() : 0.0;
    bool better = res < best - 1e-12 ||
                  (std::abs(res - best) <= 1e-12 && (l1 < best_l1 || (l1 == best_l1 && norm < best_norm - 1e-12)));
    if (better) {
      best = res;
      best_l1 = l1;
      best_norm = norm;
      m.lambda = C > 0 ? lam : Vec();
      m.slack = cur;
    }
    Eigen::Index g = 0;
    for (; g < G; ++g) {
      if (++cur[static_cast<std::size_t>(g)] <= S) break;
      cur[static_cast<std::size_t>(g)] = -S;
    }
    if (g == G) break;
  }
  m.residual = best;
  m.member = best <= cfg.fit_tol;
  return m;
}

}  // namespace eqhol

#pragma once

// Field space of a real scalar on a lattice circle. Fields are vectors in R^m,
// so every generic operation (cocycles, holonomy, solvers) runs unchanged on
// them; this header adds jets, densities and the local searches.
//
// Locality is structural: a density only ever sees the jet at one site.

#include <complex>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/solvers.hpp"

namespace eqhol {

class LatticeBase {
 public:
  LatticeBase(int sites, double period) : m_(sites), period_(period) {
    if (sites < 8) fail(ErrorKind::construction, "lattice needs at least 8 sites, got " + std::to_string(sites));
    if (!(period > 0.0)) fail(ErrorKind::construction, "lattice period must be positive");
  }

  int sites() const { return m_; }
  double period() const { return period_; }
  double spacing() const { return period_ / m_; }
  double position(int i) const { return spacing() * wrap(i); }
  int wrap(int i) const { return ((i % m_) + m_) % m_; }

  /// Periodic central difference (s_{i+1} - s_{i-1}) / 2h.
  Vec difference(const Vec& s) const {
    Vec d(m_);
    double inv = 1.0 / (2 * spacing());
    for (int i = 0; i < m_; ++i) d[i] = (s[wrap(i + 1)] - s[wrap(i - 1)]) * inv;
    return d;
  }

  Vec sample(const std::function<double(double)>& f) const {
    Vec s(m_);
    for (int i = 0; i < m_; ++i) s[i] = f(position(i));
    return s;
  }

 private:
  int m_;
  double period_;
};

/// Column k holds D^k s, k = 0..order.
inline Mat jets(const LatticeBase& lat, const Vec& s, int order) {
  if (s.size() != lat.sites()) fail(ErrorKind::usage, "field has the wrong number of sites");
  Mat J(lat.sites(), order + 1);
  J.col(0) = s;
  for (int k = 1; k <= order; ++k) J.col(k) = lat.difference(J.col(k - 1));
  return J;
}

/// One site's view of a field: position and jet (u, u1, ..).
struct SiteJet {
  int index = 0;
  double x = 0.0;
  std::span<const double> u;
  std::span<const double> v;  // variation jet, for 1-form densities
};

namespace detail {

inline std::vector<double> row(const Mat& J, int i) {
  std::vector<double> r(static_cast<std::size_t>(J.cols()));
  for (Eigen::Index k = 0; k < J.cols(); ++k) r[static_cast<std::size_t>(k)] = J(i, k);
  return r;
}

inline double site_value(const expr::Expression& e, const SiteJet& j) {
  expr::Env env;
  env.site = j.x;
  env.jet = j.u;
  env.variation = j.v;
  return e.eval(env);
}

}  // namespace detail

/// A density in the jet symbols x, u, u1..u<order>.
struct LocalDensity {
  expr::Expression expr;
  int order = 2;

  static LocalDensity parse(std::string_view text, int order = 2, int line = 1, int column = 1) {
    return LocalDensity{expr::Expression::parse(text, expr::Context::density(order), line, column), order};
  }

  double at(const SiteJet& j) const { return detail::site_value(expr, j); }

  /// d f / d u_k at one site; Richardson-extrapolated central differences.
  Vec partials(const SiteJet& j) const {
    std::vector<double> u(j.u.begin(), j.u.end());
    Vec g(order + 1);
    for (int k = 0; k <= order; ++k) {
      auto f = [&](double d) {
        std::vector<double> w = u;
        w[static_cast<std::size_t>(k)] += d;
        return at(SiteJet{j.index, j.x, w, {}});
      };
      double h = 1e-3 * std::max(1.0, std::abs(u[static_cast<std::size_t>(k)]));
      double d1 = (f(h) - f(-h)) / (2 * h);
      double d2 = (f(2 * h) - f(-2 * h)) / (4 * h);
      g[k] = (4 * d1 - d2) / 3;
    }
    return g;
  }
};

/// I[f](s) = sum_i f(j_i s) h.
inline double integrate_local(const LatticeBase& lat, const LocalDensity& f, const Vec& s) {
  Mat J = jets(lat, s, f.order);
  double total = 0.0;
  for (int i = 0; i < lat.sites(); ++i) {
    auto r = detail::row(J, i);
    double v = f.at(SiteJet{i, lat.position(i), r, {}});
    if (!std::isfinite(v)) fail(ErrorKind::evaluation, "non-finite density value at site " + std::to_string(i));
    total += v;
  }
  return total * lat.spacing();
}

/// A 0-form on field space given by a density.
struct LocalFunctional {
  LatticeBase lattice;
  LocalDensity density;

  double operator()(const Vec& s) const { return integrate_local(lattice, density, s); }
  ScalarField field() const {
    auto self = *this;
    return ScalarField([self](const Vec& s) { return self(s); });
  }
};

/// A 1-form on field space: a density in (x, u.., v..) linear in the variation jet v.
struct LocalOneForm {
  expr::Expression expr;
  int order = 2;

  static LocalOneForm parse(std::string_view text, int order = 2, int line = 1, int column = 1) {
    return LocalOneForm{expr::Expression::parse(text, expr::Context::one_form_density(order), line, column), order};
  }

  /// d f / d v_k at every site; exact because f is linear in v.
  Mat coefficients(const LatticeBase& lat, const Vec& s) const {
    Mat J = jets(lat, s, order);
    Mat C(lat.sites(), order + 1);
    std::vector<double> v(static_cast<std::size_t>(order + 1), 0.0);
    for (int i = 0; i < lat.sites(); ++i) {
      auto r = detail::row(J, i);
      double base = detail::site_value(expr, SiteJet{i, lat.position(i), r, v});
      for (int k = 0; k <= order; ++k) {
        v[static_cast<std::size_t>(k)] = 1.0;
        C(i, k) = detail::site_value(expr, SiteJet{i, lat.position(i), r, v}) - base;
        v[static_cast<std::size_t>(k)] = 0.0;
      }
    }
    return C;
  }

  /// The covector: beta_s(delta) = sum_i sum_k C_ik (D^k delta)_i h; D^T = -D.
  Vec covector(const LatticeBase& lat, const Vec& s) const {
    Mat C = coefficients(lat, s);
    Vec out = Vec::Zero(lat.sites());
    for (int k = order; k >= 0; --k) {
      out = -lat.difference(out);
      out += C.col(k);
    }
    // Horner in (-D): sum_k (-D)^k C_k
    return out * lat.spacing();
  }

  double value(const LatticeBase& lat, const Vec& s, const Vec& delta) const {
    Mat J = jets(lat, s, order);
    Mat V = jets(lat, delta, order);
    double total = 0.0;
    for (int i = 0; i < lat.sites(); ++i) {
      auto r = detail::row(J, i);
      auto q = detail::row(V, i);
      total += detail::site_value(expr, SiteJet{i, lat.position(i), r, q});
    }
    return total * lat.spacing();
  }

  OneForm form(const LatticeBase& lat) const {
    auto self = *this;
    return OneForm([self, lat](const Vec& s) -> Vec { return self.covector(lat, s); });
  }

  /// Largest violation of linearity in the variation over random jets.
  double linearity_residual(std::uint64_t seed = 1, int trials = 16) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto n = static_cast<std::size_t>(order + 1);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> j(n), a(n), b(n), c(n), z(n, 0.0);
      for (auto& v : j) v = u(rng);
      for (auto& v : a) v = u(rng);
      for (auto& v : b) v = u(rng);
      double p = u(rng), q = u(rng), x = u(rng);
      for (std::size_t k = 0; k < n; ++k) c[k] = p * a[k] + q * b[k];
      auto f = [&](const std::vector<double>& v) { return detail::site_value(expr, SiteJet{0, x, j, v}); };
      worst = std::max(worst, std::abs(f(c) - p * f(a) - q * f(b)));
      worst = std::max(worst, std::abs(f(z)));
    }
    return worst;
  }
};

// ---------------------------------------------------------------------------
// Field-space functionals with I(...) (cocycles, anomalies)

namespace detail {

inline void check_functional_node(const expr::Node& n, bool inside) {
  if (n.kind == expr::Node::Kind::symbol && !inside &&
      (n.symbol == expr::SymbolClass::jet || n.symbol == expr::SymbolClass::site || n.symbol == expr::SymbolClass::variation))
    fail(ErrorKind::semantic, expr::detail::where(n.line, n.column) + ": jet symbol '" + n.name +
                                  "' outside I(...) in a field-space functional");
  if (n.kind == expr::Node::Kind::call && n.name == "I" && inside)
    fail(ErrorKind::semantic, expr::detail::where(n.line, n.column) + ": nested I(...)");
  bool in = inside || (n.kind == expr::Node::Kind::call && n.name == "I");
  for (const auto& a : n.args) check_functional_node(*a, in);
}

}  // namespace detail

/// An expression in n or t and lattice integrals I(density), e.g. "n/2" or "t*I(u)^2".
struct FieldFunctional {
  expr::Expression expr;
  int order = 2;

  static FieldFunctional parse(std::string_view text, int order, bool discrete, int line = 1, int column = 1) {
    expr::Context ctx = expr::Context::density(order);
    ctx.integral = true;
    ctx.exponent = discrete;
    ctx.time = !discrete;
    FieldFunctional f{expr::Expression::parse(text, ctx, line, column), order};
    detail::check_functional_node(f.expr.root(), false);
    return f;
  }

  /// param is n for discrete families and t for flows.
  double eval(const LatticeBase& lat, const Vec& s, double param) const {
    Mat J = jets(lat, s, order);
    std::function<double(const expr::Node&)> integrate = [&](const expr::Node& inner) {
      double total = 0.0;
      for (int i = 0; i < lat.sites(); ++i) {
        auto r = detail::row(J, i);
        expr::Env env;
        env.site = lat.position(i);
        env.jet = r;
        env.n = param;
        env.t = param;
        total += expr::detail::eval_node(inner, env);
      }
      return total * lat.spacing();
    };
    expr::Env env;
    env.n = param;
    env.t = param;
    env.integrate = &integrate;
    return expr.eval(env);
  }
};

// ---------------------------------------------------------------------------
// Group actions on lattice fields, all projectable

/// exp(-t D) s, exactly, by diagonalising the circulant D.
inline Vec shift_flow(const LatticeBase& lat, double t, const Vec& s) {
  using C = std::complex<double>;
  const int m = lat.sites();
  std::vector<C> hat(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    C acc = 0.0;
    for (int j = 0; j < m; ++j) acc += s[j] * std::polar(1.0, -2 * M_PI * j * k / m);
    hat[static_cast<std::size_t>(k)] = acc * std::polar(1.0, -t * std::sin(2 * M_PI * k / m) / lat.spacing());
  }
  Vec out(m);
  for (int j = 0; j < m; ++j) {
    C acc = 0.0;
    for (int k = 0; k < m; ++k) acc += hat[static_cast<std::size_t>(k)] * std::polar(1.0, 2 * M_PI * j * k / m);
    out[j] = acc.real() / m;
  }
  return out;
}

struct FieldDiscrete {
  enum class Kind { site_shift, fiber_affine };
  Kind kind = Kind::fiber_affine;
  std::string label;
  int sites = 1;     // site_shift: s_i -> s_{i - sites}
  double scale = 1.0; // fiber_affine: s -> scale * s + chi
  Vec chi;
  std::function<double(long, const Vec&)> alpha;
  bool in_identity_component = false;

  DiscreteGenerator generator(const LatticeBase& lat) const {
    DiscreteGenerator g;
    g.label = label;
    g.alpha = alpha;
    g.in_identity_component = in_identity_component;
    if (kind == Kind::site_shift) {
      int k = sites;
      auto shift = [lat, k](long n, const Vec& s) {
        Vec out(s.size());
        for (int i = 0; i < lat.sites(); ++i) out[i] = s[lat.wrap(i - static_cast<int>(n) * k)];
        return out;
      };
      g.power = shift;
      g.power_inverse = [shift](long n, const Vec& s) { return shift(-n, s); };
    } else {
      double a = scale;
      Vec c = chi;
      auto affine = [a, c](long n, const Vec& s) -> Vec {
        double an = std::pow(a, static_cast<double>(n));
        double sum = a == 1.0 ? static_cast<double>(n) : (an - 1.0) / (a - 1.0);
        return an * s + sum * c;
      };
      g.power = affine;
      g.power_inverse = [affine](long n, const Vec& s) { return affine(-n, s); };
    }
    return g;
  }
};

struct FieldLie {
  enum class Kind { shift, fiber };
  Kind kind = Kind::fiber;
  std::string label;
  Vec chi;  // fiber direction
  std::function<double(double, const Vec&)> alpha;

  /// The induced vector field on field space.
  Vec field(const LatticeBase& lat, const Vec& s) const { return kind == Kind::shift ? Vec(-lat.difference(s)) : chi; }

  LieGenerator generator(const LatticeBase& lat) const {
    LieGenerator X;
    X.label = label;
    X.alpha = alpha;
    if (kind == Kind::shift) {
      X.field = VectorField([lat](const Vec& s) -> Vec { return -lat.difference(s); });
      X.flow = [lat](double t, const Vec& s) { return shift_flow(lat, t, s); };
    } else {
      Vec c = chi;
      X.field = VectorField([c](const Vec&) -> Vec { return c; });
      X.flow = [c](double t, const Vec& s) -> Vec { return s + t * c; };
    }
    return X;
  }
};

/// An equivariant bundle over lattice fields plus the data needed for the local searches.
struct FieldBundle {
  LatticeBase lattice;
  int jet_order = 2;
  std::vector<FieldDiscrete> discrete;
  std::vector<FieldLie> lie;
  EquivariantBundle bundle;
  Connection connection;
  std::optional<LocalOneForm> rho_density;  // declared local connection, if any

  static FieldBundle make(const LatticeBase& lat, int order, std::vector<FieldDiscrete> discrete,
                          std::vector<FieldLie> lie, std::vector<Word> relations, Connection c,
                          std::optional<LocalOneForm> rho_density = std::nullopt, double field_range = 4.0) {
    std::vector<DiscreteGenerator> gens;
    for (const auto& d : discrete) gens.push_back(d.generator(lat));
    std::vector<LieGenerator> lies;
    for (const auto& l : lie) lies.push_back(l.generator(lat));
    EquivariantBundle b(ParameterSpace::euclidean(lat.sites(), -field_range, field_range),
                        GroupAction(std::move(gens), std::move(lies), std::move(relations)));
    return FieldBundle{lat, order, std::move(discrete), std::move(lie), std::move(b), std::move(c), std::move(rho_density)};
  }
};

// ---------------------------------------------------------------------------
// L_X of a local functional

struct LocalLieDerivative {
  double by_flow = 0.0;     // finite difference along the flow
  double by_density = 0.0;  // chain rule on jets, summed over sites
};

/// Chain-rule density of L_X I[f] at site i: sum_k df/du_k (D^k X(s))_i.
inline double induced_density(const LatticeBase& lat, const LocalDensity& f, const FieldLie& X, const Mat& J,
                              const Mat& XJ, int i) {
  auto r = detail::row(J, i);
  Vec g = f.partials(SiteJet{i, lat.position(i), r, {}});
  double v = 0.0;
  for (int k = 0; k <= f.order; ++k) v += g[k] * XJ(i, k);
  (void)X;
  return v;
}

inline LocalLieDerivative lie_derivative_local(const LatticeBase& lat, const LocalDensity& f, const FieldLie& X,
                                               const Vec& s, double tol = 1e-6) {
  LocalFunctional F{lat, f};
  LieGenerator gen = X.generator(lat);
  LocalLieDerivative r;
  const double h = 1e-3;
  auto at = [&](double t) {
    Vec y = gen.flow(t, s);
    if (!y.allFinite()) fail(ErrorKind::evaluation, "flow of '" + X.label + "' produced a non-finite field");
    return F(y);
  };
  double d1 = (at(h) - at(-h)) / (2 * h);
  double d2 = (at(2 * h) - at(-2 * h)) / (4 * h);
  r.by_flow = (4 * d1 - d2) / 3;

  Mat J = jets(lat, s, f.order);
  Mat XJ = jets(lat, X.field(lat, s), f.order);
  for (int i = 0; i < lat.sites(); ++i) r.by_density += induced_density(lat, f, X, J, XJ, i);
  r.by_density *= lat.spacing();
  if (std::abs(r.by_flow - r.by_density) > tol * std::max(1.0, std::abs(r.by_flow)))
    fail(ErrorKind::consistency, "L_X by flow (" + std::to_string(r.by_flow) + ") and by density (" +
                                     std::to_string(r.by_density) + ") disagree for '" + X.label + "'");
  return r;
}

// ---------------------------------------------------------------------------
// Local connection check

struct LocalConnectionReport {
  double rho_residual = 0.0;
  double curvature_residual = 0.0;
  double moment_residual = 0.0;
  std::size_t probes = 0;
  std::string witness;
  bool ok(double tol = 1e-6) const { return std::max({rho_residual, curvature_residual, moment_residual}) <= tol; }
};

/// d rho(d1, d2) from the density: sum_i [D_{d1} f(j s, j d2) - D_{d2} f(j s, j d1)] h.
inline double local_curvature(const LatticeBase& lat, const LocalOneForm& rho, const Vec& s, const Vec& d1,
                              const Vec& d2) {
  const double eps = 1e-4;
  auto dir = [&](const Vec& along, const Vec& var) {
    double a = rho.value(lat, s + eps * along, var), b = rho.value(lat, s - eps * along, var);
    double a2 = rho.value(lat, s + 2 * eps * along, var), b2 = rho.value(lat, s - 2 * eps * along, var);
    return (4 * (a - b) / (2 * eps) - (a2 - b2) / (4 * eps)) / 3;
  };
  return dir(d1, d2) - dir(d2, d1);
}

inline LocalConnectionReport local_connection_check(const FieldBundle& fb, const std::vector<LocalDensity>& moment_densities = {},
                                                    std::uint64_t seed = 1, int count = 12, double tol = 1e-6) {
  if (!fb.rho_density) fail(ErrorKind::precondition, "no local density declared for the connection");
  const auto& lat = fb.lattice;
  const auto& s = fb.bundle.space();
  const LocalOneForm& rho = *fb.rho_density;
  LocalConnectionReport r;
  auto fields = HaltonProbes(s, seed, 0.3).take(static_cast<std::size_t>(3 * count));
  auto note = [&](double& worst, double v, const std::string& what) {
    if (v > worst) {
      worst = v;
      if (v > tol) r.witness = what;
    }
  };

  // random fields and variations, then two-site probes that separate nonlocal couplings
  std::vector<std::pair<Vec, Vec>> pairs;
  for (int k = 0; k < count; ++k) pairs.emplace_back(fields[static_cast<std::size_t>(k)], fields[static_cast<std::size_t>(count + k)]);
  const int m = lat.sites();
  for (int i : {0, m / 4}) {
    int j = lat.wrap(i + m / 2);
    pairs.emplace_back(unit_vector(m, i), unit_vector(m, j));
  }
  Vec generic_probe;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [f, d] = pairs[p];
    double v = std::abs(fb.connection.rho_ref(f, d) - rho.value(lat, f, d));
    std::ostringstream w;
    if (p >= static_cast<std::size_t>(count)) {
      int i = static_cast<int>((p - static_cast<std::size_t>(count)) == 0 ? 0 : m / 4);
      w << "rho differs from its declared density by " << v << " on the two-site probe (field at site " << i
        << ", variation at site " << lat.wrap(i + m / 2) << ")";
    } else {
      w << "rho differs from its declared density by " << v << " on probe field " << p;
    }
    note(r.rho_residual, v, w.str());
    ++r.probes;
  }

  TwoForm generic = exterior_derivative(s, fb.connection.rho_ref);
  for (int k = 0; k < std::min(count, 4); ++k) {
    const Vec& f = fields[static_cast<std::size_t>(k)];
    const Vec& d1 = fields[static_cast<std::size_t>(count + k)];
    const Vec& d2 = fields[static_cast<std::size_t>(2 * count + k)];
    double v = std::abs(generic(f, d1, d2) - local_curvature(lat, rho, f, d1, d2));
    note(r.curvature_residual, v, "curvature of rho differs from the density-derived 2-form by " + std::to_string(v));
  }

  if (!moment_densities.empty()) {
    if (moment_densities.size() != fb.lie.size())
      fail(ErrorKind::locality_declaration, "need one moment density per Lie generator");
    for (std::size_t k = 0; k < fb.lie.size(); ++k) {
      ScalarField mu = moment(fb.bundle, fb.connection, k);
      for (int p = 0; p < count; ++p) {
        const Vec& f = fields[static_cast<std::size_t>(p)];
        double v = std::abs(mu(f) - integrate_local(lat, moment_densities[k], f));
        note(r.moment_residual, v, "moment of '" + fb.lie[k].label + "' differs from its declared density by " + std::to_string(v));
      }
    }
  }
  if (!r.ok(tol)) fail(ErrorKind::locality_declaration, r.witness);
  return r;
}

namespace detail {

/// Columns that survive Gram-Schmidt in order. On a periodic lattice total
/// derivatives integrate to zero, so a monomial ansatz is never independent.
inline std::vector<std::size_t> independent_columns(const Mat& B, double rel_tol = 1e-8) {
  std::vector<std::size_t> keep;
  std::vector<Vec> basis;
  double scale = 0.0;
  for (Eigen::Index j = 0; j < B.cols(); ++j) scale = std::max(scale, B.col(j).norm());
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    double n0 = B.col(j).norm();
    if (n0 <= 1e-12 * std::max(scale, 1.0)) continue;
    Vec r = B.col(j) / n0;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& q : basis) r -= q.dot(r) * q;
    double n = r.norm();
    if (n <= rel_tol) continue;
    basis.push_back(r / n);
    keep.push_back(static_cast<std::size_t>(j));
  }
  return keep;
}

/// Re-index a certificate over the pruned ansatz back onto the full one.
template <class Cert, class Term>
void expand(Cert& cert, const std::vector<Term>& full, const std::vector<std::size_t>& keep) {
  Vec coef = Vec::Zero(static_cast<Eigen::Index>(full.size()));
  for (std::size_t k = 0; k < keep.size() && static_cast<Eigen::Index>(k) < cert.coefficients.size(); ++k)
    coef[static_cast<Eigen::Index>(keep[k])] = cert.coefficients[static_cast<Eigen::Index>(k)];
  cert.coefficients = coef;
  cert.densities.clear();
  std::vector<std::string> dropped;
  std::size_t next = 0;
  for (std::size_t j = 0; j < full.size(); ++j) {
    cert.densities.push_back(full[j].expr.print());
    if (next < keep.size() && keep[next] == j)
      ++next;
    else
      dropped.push_back(cert.densities.back());
  }
  cert.basis_size = full.size();
  if (!dropped.empty()) {
    std::string d;
    for (const auto& x : dropped) d += (d.empty() ? "" : ", ") + x;
    cert.basis_description += "; dropped as dependent on the lattice: {" + d + "}";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ansatz libraries

/// Monomials in u, u1..u<order> of degree 1..degree (constants are gauge).
inline std::vector<std::string> default_density_terms(int order, int degree) {
  std::vector<std::string> names{"u"};
  for (int k = 1; k <= order; ++k) names.push_back("u" + std::to_string(k));
  std::vector<std::vector<int>> tuples;
  std::vector<int> cur;
  detail::exponent_tuples(order + 1, degree, cur, tuples);
  std::vector<std::string> out;
  for (const auto& t : tuples) {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == 0) continue;
      os << (first ? "" : "*") << names[i];
      if (t[i] > 1) os << "^" << t[i];
      first = false;
    }
    if (!first) out.push_back(os.str());
  }
  return out;
}

/// Each scalar monomial of degree < degree (including 1) times each variation jet.
inline std::vector<std::string> default_one_form_terms(int order, int degree) {
  std::vector<std::string> scal{"1"};
  for (const auto& t : default_density_terms(order, degree - 1)) scal.push_back(t);
  std::vector<std::string> out;
  for (const auto& t : scal)
    for (int k = 0; k <= order; ++k) {
      std::string v = k == 0 ? "v" : "v" + std::to_string(k);
      out.push_back(t == "1" ? v : t + "*" + v);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Local section search: a^S(X) = L_X Lambda with Lambda = I[f]

struct LocalSectionCertificate : ScalarCertificate {
  std::vector<std::string> densities;
  bool xi_local = false;  // the induced section S exp(2 pi i Lambda) is local
};

namespace detail {

inline LocalSectionCertificate section_search(const FieldBundle& fb, const Section& sec,
                                              const std::vector<LocalDensity>& ansatz, const SolverConfig& cfg) {
  const auto& lat = fb.lattice;
  const auto& s = fb.bundle.space();
  if (fb.lie.empty()) fail(ErrorKind::precondition, "local section search needs Lie generators");
  auto probes = detail::probe_sets(s, cfg);
  LocalSectionCertificate cert;
  cert.unknown = "Lambda";
  cert.basis_size = ansatz.size();
  std::ostringstream desc;
  desc << "local densities {";
  for (std::size_t j = 0; j < ansatz.size(); ++j) {
    cert.densities.push_back(ansatz[j].expr.print());
    desc << (j ? ", " : "") << cert.densities.back();
  }
  desc << "}";
  cert.basis_description = desc.str();

  {
    Mat B(static_cast<Eigen::Index>(probes.fit.size()), static_cast<Eigen::Index>(ansatz.size()));
    for (std::size_t p = 0; p < probes.fit.size(); ++p)
      for (std::size_t j = 0; j < ansatz.size(); ++j)
        B(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = integrate_local(lat, ansatz[j], probes.fit[p]);
    cert.condition_number = detail::gram_condition(B);
    detail::require_conditioning(cert.condition_number, cfg, cert.basis_description);
  }

  detail::LinearRows rows;
  rows.cols = static_cast<int>(ansatz.size());
  for (std::size_t k = 0; k < fb.lie.size(); ++k) {
    ScalarField a = anomaly_flow(fb.bundle, sec, k);
    for (const Vec& f : probes.fit) {
      Vec row(rows.cols);
      for (std::size_t j = 0; j < ansatz.size(); ++j) {
        Mat J = jets(lat, f, ansatz[j].order);
        Mat XJ = jets(lat, fb.lie[k].field(lat, f), ansatz[j].order);
        double v = 0.0;
        for (int i = 0; i < lat.sites(); ++i) v += induced_density(lat, ansatz[j], fb.lie[k], J, XJ, i);
        row[static_cast<Eigen::Index>(j)] = v * lat.spacing();
      }
      rows.add(std::move(row), a(f), false);
    }
  }
  auto fit = detail::fit_rows(rows, 0);
  auto dens = ansatz;
  Vec coef = fit.coef;
  cert.field = ScalarField([lat, dens, coef](const Vec& f) {
    double v = 0.0;
    for (std::size_t j = 0; j < dens.size(); ++j)
      if (coef[static_cast<Eigen::Index>(j)] != 0.0) v += coef[static_cast<Eigen::Index>(j)] * integrate_local(lat, dens[j], f);
    return v;
  });
  cert.section = sec.shifted(cert.field);
  cert.expression = "I(" + describe_combination(cert.densities, coef) + ")";

  double held = 0.0;
  for (std::size_t k = 0; k < fb.lie.size(); ++k)
    held = std::max(held, sup_norm(anomaly_flow(fb.bundle, cert.section, k), probes.held_out));
  detail::finish(cert, fit, held, cfg);
  cert.xi_local = cert.found;
  return cert;
}

}  // namespace detail

inline LocalSectionCertificate local_section_search_lie(const FieldBundle& fb, const Section& sec,
                                                        const std::vector<LocalDensity>& ansatz,
                                                        const SolverConfig& cfg = {}) {
  auto fields = detail::probe_sets(fb.bundle.space(), cfg).fit;
  fields.resize(std::min<std::size_t>(fields.size(), 32));
  Mat B(static_cast<Eigen::Index>(fields.size()), static_cast<Eigen::Index>(ansatz.size()));
  for (std::size_t p = 0; p < fields.size(); ++p)
    for (std::size_t j = 0; j < ansatz.size(); ++j)
      B(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = integrate_local(fb.lattice, ansatz[j], fields[p]);
  auto keep = detail::independent_columns(B);
  std::vector<LocalDensity> kept;
  for (auto j : keep) kept.push_back(ansatz[j]);
  auto cert = detail::section_search(fb, sec, kept, cfg);
  detail::expand(cert, ansatz, keep);
  return cert;
}

// ---------------------------------------------------------------------------
// Local global search: hol_phi(gamma) = int_gamma beta, beta local, D beta = curv_G

struct LocalFormCertificate : FormCertificate {
  std::vector<std::string> densities;
  std::size_t paths = 0;
};

/// Paths in C^phi from probe fields, bent with smooth lattice profiles.
inline std::vector<std::pair<Word, Path>> field_paths(const FieldBundle& fb, int per_generator, std::uint64_t seed) {
  const auto& s = fb.bundle.space();
  const auto& lat = fb.lattice;
  std::vector<std::pair<Word, Path>> out;
  auto bases = HaltonProbes(s, seed + 41, 0.35).take(static_cast<std::size_t>(std::max(per_generator, 1)));
  std::mt19937_64 rng(seed + 43);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t g = 0; g < fb.bundle.action().generators().size(); ++g) {
    Word w = single(Letter::Kind::discrete, g, 1.0);
    for (int p = 0; p < per_generator; ++p) {
      double a = p == 0 ? 0.0 : u(rng), b = p == 0 ? 0.0 : u(rng);
      Vec bend = lat.sample([&](double x) { return a * std::sin(2 * M_PI * x / lat.period()) + b; });
      out.emplace_back(w, path_in_c_phi(fb.bundle, w, bases[static_cast<std::size_t>(p)], bend, 64));
    }
  }
  return out;
}

namespace detail {

inline LocalFormCertificate global_search(const FieldBundle& fb, const std::vector<LocalOneForm>& ansatz,
                                          const std::vector<std::pair<Word, Path>>& paths, const SolverConfig& cfg) {
  const auto& lat = fb.lattice;
  const auto& s = fb.bundle.space();
  const auto& a = fb.bundle.action();
  const int m = lat.sites();
  auto probes = detail::probe_sets(s, cfg);
  LocalFormCertificate cert;
  cert.unknown = "beta";
  cert.basis_size = ansatz.size();
  cert.paths = paths.size();
  std::ostringstream desc;
  desc << "local 1-form densities {";
  for (std::size_t j = 0; j < ansatz.size(); ++j) {
    if (ansatz[j].linearity_residual() > 1e-9)
      fail(ErrorKind::locality_declaration, "1-form density '" + ansatz[j].expr.print() + "' is not linear in the variation");
    cert.densities.push_back(ansatz[j].expr.print());
    desc << (j ? ", " : "") << cert.densities.back();
  }
  desc << "}";
  cert.basis_description = desc.str();

  std::vector<OneForm> forms;
  for (const auto& f : ansatz) forms.push_back(f.form(lat));
  {
    std::vector<Vec> few(probes.fit.begin(), probes.fit.begin() + std::min<std::ptrdiff_t>(16, std::ssize(probes.fit)));
    FormBasis fbasis;
    fbasis.forms = forms;
    cert.condition_number = detail::form_condition(fbasis, few, m);
    detail::require_conditioning(cert.condition_number, cfg, cert.basis_description);
  }

  Section ref = Section::reference();
  detail::LinearRows rows;
  rows.cols = static_cast<int>(ansatz.size());
  for (const auto& [w, path] : paths) {
    double hol = equivariant_holonomy(fb.bundle, fb.connection, ref, w, path).value.value();
    Vec row(rows.cols);
    for (std::size_t j = 0; j < forms.size(); ++j) row[static_cast<Eigen::Index>(j)] = line_integral(s, forms[j], path);
    rows.add(std::move(row), hol, true);
  }

  // D beta = curv_G and invariance, on a few probe fields and random variation pairs
  std::vector<Vec> few(probes.fit.begin(), probes.fit.begin() + std::min<std::ptrdiff_t>(8, std::ssize(probes.fit)));
  std::mt19937_64 rng(cfg.seed + 61);
  std::normal_distribution<double> nd;
  TwoForm omega = exterior_derivative(s, fb.connection.rho_ref);
  for (const Vec& f : few) {
    Vec d1(m), d2(m);
    for (int i = 0; i < m; ++i) {
      d1[i] = nd(rng);
      d2[i] = nd(rng);
    }
    Vec row(rows.cols);
    for (std::size_t j = 0; j < ansatz.size(); ++j) row[static_cast<Eigen::Index>(j)] = local_curvature(lat, ansatz[j], f, d1, d2);
    rows.add(row, omega(f, d1, d2), false);
    for (std::size_t k = 0; k < a.lie().size(); ++k) {
      Vec X = a.lie()[k].field(f);
      for (std::size_t j = 0; j < ansatz.size(); ++j) row[static_cast<Eigen::Index>(j)] = ansatz[j].value(lat, f, X);
      rows.add(row, -moment(fb.bundle, fb.connection, k)(f), false);
    }
    for (std::size_t g = 0; g < a.generators().size(); ++g) {
      Word w = single(Letter::Kind::discrete, g, 1.0);
      Vec y = fb.bundle.apply(w, f);
      Mat Jm = map_jacobian(s, [a, w](const Vec& z) { return a.apply(w, z); }, f);
      Vec dv = Jm * d1;
      for (std::size_t j = 0; j < ansatz.size(); ++j)
        row[static_cast<Eigen::Index>(j)] = ansatz[j].value(lat, y, dv) - ansatz[j].value(lat, f, d1);
      rows.add(row, 0.0, false);
    }
  }

  auto fit = detail::fit_rows(rows, cfg.lift_iterations);
  Vec coef = fit.coef;
  auto fs = forms;
  cert.form = OneForm([fs, coef](const Vec& f) -> Vec {
    Vec v = Vec::Zero(f.size());
    for (std::size_t j = 0; j < fs.size(); ++j)
      if (coef[static_cast<Eigen::Index>(j)] != 0.0) v += coef[static_cast<Eigen::Index>(j)] * fs[j].at(f);
    return v;
  });
  cert.expression = "I(" + describe_combination(cert.densities, coef) + ")";

  double held = 0.0;
  for (const auto& [w, path] : field_paths(fb, 4, cfg.seed + 1000)) {
    CircleValue hol = equivariant_holonomy(fb.bundle, fb.connection, ref, w, path).value;
    held = std::max(held, CircleValue(line_integral(s, cert.form, path)).distance(hol));
  }
  detail::finish(cert, fit, held, cfg);
  return cert;
}

}  // namespace detail

inline LocalFormCertificate local_global_search(const FieldBundle& fb, const std::vector<LocalOneForm>& ansatz,
                                                const std::vector<std::pair<Word, Path>>& paths,
                                                const SolverConfig& cfg = {}) {
  for (const auto& f : ansatz)
    if (f.linearity_residual() > 1e-9)
      fail(ErrorKind::locality_declaration, "1-form density '" + f.expr.print() + "' is not linear in the variation");
  auto fields = detail::probe_sets(fb.bundle.space(), cfg).fit;
  fields.resize(std::min<std::size_t>(fields.size(), 8));
  const Eigen::Index m = fb.lattice.sites();
  Mat B(m * static_cast<Eigen::Index>(fields.size()), static_cast<Eigen::Index>(ansatz.size()));
  for (std::size_t p = 0; p < fields.size(); ++p)
    for (std::size_t j = 0; j < ansatz.size(); ++j)
      B.block(m * static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j), m, 1) = ansatz[j].covector(fb.lattice, fields[p]);
  auto keep = detail::independent_columns(B);
  std::vector<LocalOneForm> kept;
  for (auto j : keep) kept.push_back(ansatz[j]);
  auto cert = detail::global_search(fb, kept, paths, cfg);
  detail::expand(cert, ansatz, keep);
  return cert;
}

}  // namespace eqhol

#pragma once

// Evaluable fields on a parameter space and central-difference exterior
// calculus over them. Forms carry their chart components, so linearity and
// antisymmetry hold by construction.

#include <functional>
#include <utility>
#include <vector>

#include "eqhol/expr.hpp"
#include "eqhol/space.hpp"

namespace eqhol {

using PointMap = std::function<Vec(const Vec&)>;

class ScalarField {
 public:
  using Fn = std::function<double(const Vec&)>;
  ScalarField() : fn_([](const Vec&) { return 0.0; }) {}
  explicit ScalarField(Fn fn) : fn_(std::move(fn)) {}

  static ScalarField constant(double c) {
    return ScalarField([c](const Vec&) { return c; });
  }
  static ScalarField from_expr(expr::Expression e) {
    return ScalarField([e = std::move(e)](const Vec& x) {
      return e.eval_at(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    });
  }

  double operator()(const Vec& x) const { return fn_(x); }

  friend ScalarField operator+(ScalarField a, ScalarField b) {
    return ScalarField([a, b](const Vec& x) { return a(x) + b(x); });
  }
  friend ScalarField operator-(ScalarField a, ScalarField b) {
    return ScalarField([a, b](const Vec& x) { return a(x) - b(x); });
  }
  friend ScalarField operator*(double c, ScalarField a) {
    return ScalarField([c, a](const Vec& x) { return c * a(x); });
  }

 private:
  Fn fn_;
};

class VectorField {
 public:
  using Fn = std::function<Vec(const Vec&)>;
  VectorField() = default;
  explicit VectorField(Fn fn) : fn_(std::move(fn)) {}

  static VectorField from_exprs(std::vector<expr::Expression> comps) {
    return VectorField([c = std::move(comps)](const Vec& x) {
      Vec v(static_cast<Eigen::Index>(c.size()));
      std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i].eval_at(xs);
      return v;
    });
  }

  Vec operator()(const Vec& x) const { return fn_(x); }
  explicit operator bool() const { return static_cast<bool>(fn_); }

  friend VectorField operator+(VectorField a, VectorField b) {
    return VectorField([a, b](const Vec& x) -> Vec { return a(x) + b(x); });
  }
  friend VectorField operator*(double c, VectorField a) {
    return VectorField([c, a](const Vec& x) -> Vec { return c * a(x); });
  }

 private:
  Fn fn_;
};

/// A 1-form, stored as its covector field.
class OneForm {
 public:
  using Fn = std::function<Vec(const Vec&)>;
  OneForm() = default;
  explicit OneForm(Fn components) : fn_(std::move(components)) {}

  static OneForm zero(int dim) {
    return OneForm([dim](const Vec&) -> Vec { return Vec::Zero(dim); });
  }
  static OneForm from_exprs(std::vector<expr::Expression> comps) {
    return OneForm(VectorField::from_exprs(std::move(comps)));
  }
  explicit OneForm(const VectorField& covectors) : fn_([covectors](const Vec& x) { return covectors(x); }) {}

  Vec at(const Vec& x) const { return fn_(x); }
  double operator()(const Vec& x, const Vec& v) const { return fn_(x).dot(v); }

  friend OneForm operator+(OneForm a, OneForm b) {
    return OneForm([a, b](const Vec& x) -> Vec { return a.at(x) + b.at(x); });
  }
  friend OneForm operator-(OneForm a, OneForm b) {
    return OneForm([a, b](const Vec& x) -> Vec { return a.at(x) - b.at(x); });
  }
  friend OneForm operator*(double c, OneForm a) {
    return OneForm([c, a](const Vec& x) -> Vec { return c * a.at(x); });
  }

 private:
  Fn fn_;
};

/// A 2-form, stored as its antisymmetric component matrix.
class TwoForm {
 public:
  using Fn = std::function<Mat(const Vec&)>;
  TwoForm() = default;
  explicit TwoForm(Fn components) : fn_(std::move(components)) {}

  static TwoForm zero(int dim) {
    return TwoForm([dim](const Vec&) -> Mat { return Mat::Zero(dim, dim); });
  }

  Mat at(const Vec& x) const { return fn_(x); }
  double operator()(const Vec& x, const Vec& u, const Vec& v) const { return u.dot(fn_(x) * v); }

  friend TwoForm operator-(TwoForm a, TwoForm b) {
    return TwoForm([a, b](const Vec& x) -> Mat { return a.at(x) - b.at(x); });
  }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Central differences

namespace fd {

inline Vec shifted(const ParameterSpace& s, const Vec& x, int i, double h) {
  Vec y = x;
  y[i] += h;
  return s.reduce(y);
}

/// Partial derivatives of a vector-valued function; column i = d/dx_i.
template <class F>
Mat jacobian_columns(const ParameterSpace& s, const F& f, const Vec& x) {
  double h = s.fd_step();
  s.require_stencil(x, h);
  int d = s.dimension();
  Mat J;
  for (int i = 0; i < d; ++i) {
    Vec col = (f(shifted(s, x, i, h)) - f(shifted(s, x, i, -h))) / (2 * h);
    if (i == 0) J.resize(col.size(), d);
    J.col(i) = col;
  }
  return J;
}

}  // namespace fd

/// df as a 1-form.
inline OneForm exterior_derivative(const ParameterSpace& s, const ScalarField& f) {
  return OneForm([s, f](const Vec& x) -> Vec {
    double h = s.fd_step();
    s.require_stencil(x, h);
    Vec g(s.dimension());
    for (int i = 0; i < s.dimension(); ++i)
      g[i] = (f(fd::shifted(s, x, i, h)) - f(fd::shifted(s, x, i, -h))) / (2 * h);
    return g;
  });
}

/// d rho(u, v) = D_u(rho(., v)) - D_v(rho(., u)) with constant extensions of u, v.
inline TwoForm exterior_derivative(const ParameterSpace& s, const OneForm& rho) {
  return TwoForm([s, rho](const Vec& x) -> Mat {
    // J(j, i) = d rho_j / d x_i
    Mat J = fd::jacobian_columns(s, [&](const Vec& y) { return rho.at(y); }, x);
    return J.transpose() - J;
  });
}

/// Largest component of d(omega) at x; zero for closed 2-forms.
inline double closedness_residual(const ParameterSpace& s, const TwoForm& omega, const Vec& x) {
  double h = s.fd_step();
  s.require_stencil(x, h);
  int d = s.dimension();
  std::vector<Mat> D(d);  // D[i] = d omega / d x_i
  for (int i = 0; i < d; ++i)
    D[i] = (omega.at(fd::shifted(s, x, i, h)) - omega.at(fd::shifted(s, x, i, -h))) / (2 * h);
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int k = j + 1; k < d; ++k)
        worst = std::max(worst, std::abs(D[i](j, k) + D[j](k, i) + D[k](i, j)));
  return worst;
}

/// X(f) = df(X).
inline ScalarField directional_derivative(const ParameterSpace& s, const ScalarField& f, const VectorField& X) {
  OneForm df = exterior_derivative(s, f);
  return ScalarField([df, X](const Vec& x) { return df(x, X(x)); });
}

/// [X, Y]^i = X^j d_j Y^i - Y^j d_j X^i.
inline VectorField lie_bracket(const ParameterSpace& s, const VectorField& X, const VectorField& Y) {
  return VectorField([s, X, Y](const Vec& x) -> Vec {
    Mat JX = fd::jacobian_columns(s, [&](const Vec& y) { return X(y); }, x);
    Mat JY = fd::jacobian_columns(s, [&](const Vec& y) { return Y(y); }, x);
    return JY * X(x) - JX * Y(x);
  });
}

inline ScalarField interior(const VectorField& X, const OneForm& rho) {
  return ScalarField([X, rho](const Vec& x) { return rho(x, X(x)); });
}

/// (i_X omega)(v) = omega(X, v).
inline OneForm interior(const VectorField& X, const TwoForm& omega) {
  return OneForm([X, omega](const Vec& x) -> Vec { return omega.at(x).transpose() * X(x); });
}

/// L_X rho = i_X d rho + d(i_X rho).
inline OneForm lie_derivative(const ParameterSpace& s, const VectorField& X, const OneForm& rho) {
  return interior(X, exterior_derivative(s, rho)) + exterior_derivative(s, interior(X, rho));
}

/// Derivative of a point map, using minimal-image differences on torus charts.
inline Mat map_jacobian(const ParameterSpace& s, const PointMap& phi, const Vec& x) {
  double h = s.fd_step();
  int d = s.dimension();
  Mat J(d, d);
  for (int i = 0; i < d; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = s.displacement(phi(xm), phi(xp)) / (2 * h);
  }
  return J;
}

/// (phi^* rho)_x(v) = rho_{phi x}(Dphi v).
inline OneForm pullback(const ParameterSpace& s, const PointMap& phi, const OneForm& rho) {
  return OneForm([s, phi, rho](const Vec& x) -> Vec {
    Mat J = map_jacobian(s, phi, x);
    return J.transpose() * rho.at(s.reduce(phi(x)));
  });
}

inline ScalarField pullback(const ParameterSpace& s, const PointMap& phi, const ScalarField& f) {
  return ScalarField([s, phi, f](const Vec& x) { return f(s.reduce(phi(x))); });
}

/// Largest absolute value over a probe set.
inline double sup_norm(const ScalarField& f, const std::vector<Vec>& probes) {
  double m = 0.0;
  for (const Vec& p : probes) m = std::max(m, std::abs(f(p)));
  return m;
}

inline double sup_norm(const OneForm& f, const std::vector<Vec>& probes) {
  double m = 0.0;
  for (const Vec& p : probes) m = std::max(m, f.at(p).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace eqhol

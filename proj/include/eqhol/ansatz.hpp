#pragma once

// Finite search spaces for the certificate solvers, built from DSL expressions
// so that every basis element (and hence every certificate) prints back as an
// expression.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/expr.hpp"
#include "eqhol/forms.hpp"

namespace eqhol {

struct ScalarBasis {
  std::vector<expr::Expression> exprs;
  std::vector<ScalarField> fields;
  std::string description;

  std::size_t size() const { return fields.size(); }

  static ScalarBasis from_exprs(std::vector<expr::Expression> es, std::string description) {
    ScalarBasis b;
    for (auto& e : es) b.fields.push_back(ScalarField::from_expr(e));
    b.exprs = std::move(es);
    b.description = std::move(description);
    return b;
  }

  ScalarField combine(const Vec& c) const {
    auto fs = fields;
    Vec coef = c;
    return ScalarField([fs, coef](const Vec& x) {
      double v = 0.0;
      for (std::size_t j = 0; j < fs.size(); ++j)
        if (coef[static_cast<Eigen::Index>(j)] != 0.0) v += coef[static_cast<Eigen::Index>(j)] * fs[j](x);
      return v;
    });
  }
};

/// A 1-form basis element: one coefficient expression per coordinate differential.
struct FormBasis {
  std::vector<std::vector<expr::Expression>> exprs;
  std::vector<OneForm> forms;
  std::string description;

  std::size_t size() const { return forms.size(); }

  static FormBasis from_exprs(std::vector<std::vector<expr::Expression>> es, std::string description) {
    FormBasis b;
    for (auto& comps : es) b.forms.push_back(OneForm::from_exprs(comps));
    b.exprs = std::move(es);
    b.description = std::move(description);
    return b;
  }

  OneForm combine(const Vec& c) const {
    auto fs = forms;
    Vec coef = c;
    return OneForm([fs, coef](const Vec& x) -> Vec {
      Vec v = fs.empty() ? Vec() : Vec::Zero(fs.front().at(x).size());
      for (std::size_t j = 0; j < fs.size(); ++j)
        if (coef[static_cast<Eigen::Index>(j)] != 0.0) v += coef[static_cast<Eigen::Index>(j)] * fs[j].at(x);
      return v;
    });
  }
};

namespace detail {

inline void exponent_tuples(int dim, int degree, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dim) {
    out.push_back(cur);
    return;
  }
  int used = 0;
  for (int e : cur) used += e;
  for (int e = 0; e + used <= degree; ++e) {
    cur.push_back(e);
    exponent_tuples(dim, degree, cur, out);
    cur.pop_back();
  }
}

inline std::string monomial_text(const std::vector<int>& exps) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    if (exps[i] == 0) continue;
    if (!first) os << '*';
    os << 'x' << (i + 1);
    if (exps[i] > 1) os << '^' << exps[i];
    first = false;
  }
  return first ? "1" : os.str();
}

}  // namespace detail

/// Monomials of total degree <= `degree` in the box coordinates, times
/// {1, cos(k a), sin(k a)} (k <= harmonics) in each torus angle a = 2 pi x / period.
inline std::vector<std::string> default_scalar_terms(const ParameterSpace& s, int degree, int harmonics = 1) {
  std::vector<int> box_axes, torus_axes;
  for (int i = 0; i < s.dimension(); ++i)
    (s.topology() == Topology::torus ? torus_axes : box_axes).push_back(i);

  std::vector<std::vector<int>> tuples;
  std::vector<int> cur;
  detail::exponent_tuples(static_cast<int>(box_axes.size()), degree, cur, tuples);

  std::vector<std::string> trig{""};
  for (int i : torus_axes) {
    std::ostringstream angle;
    angle << "2*pi*x" << (i + 1) << "/" << expr::detail::format_number(s.axes()[i].extent());
    std::vector<std::string> next;
    for (const std::string& t : trig) {
      next.push_back(t);
      for (int k = 1; k <= harmonics; ++k) {
        std::string arg = k == 1 ? angle.str() : std::to_string(k) + "*" + angle.str();
        for (const char* f : {"cos", "sin"}) next.push_back(t + (t.empty() ? "" : "*") + f + "(" + arg + ")");
      }
    }
    trig = std::move(next);
  }

  std::vector<std::string> out;
  for (const auto& tup : tuples) {
    std::vector<int> exps(static_cast<std::size_t>(s.dimension()), 0);
    for (std::size_t k = 0; k < box_axes.size(); ++k) exps[static_cast<std::size_t>(box_axes[k])] = tup[k];
    std::string mono = detail::monomial_text(exps);
    for (const std::string& t : trig) {
      if (t.empty()) out.push_back(mono);
      else out.push_back(mono == "1" ? t : mono + "*" + t);
    }
  }
  return out;
}

inline ScalarBasis scalar_basis(const ParameterSpace& s, const std::vector<std::string>& terms, std::string description) {
  std::vector<expr::Expression> es;
  for (const auto& t : terms) es.push_back(expr::Expression::parse(t, expr::Context::manifold(s.dimension())));
  return ScalarBasis::from_exprs(std::move(es), std::move(description));
}

inline ScalarBasis default_scalar_basis(const ParameterSpace& s, int degree, bool with_constant = true) {
  auto terms = default_scalar_terms(s, degree);
  if (!with_constant) terms.erase(terms.begin());
  std::ostringstream d;
  d << "scalar monomials of degree <= " << degree;
  if (s.topology() == Topology::torus) d << " times first torus harmonics";
  if (!with_constant) d << " without constant";
  return scalar_basis(s, terms, d.str());
}

/// Each scalar term times each coordinate differential.
inline FormBasis default_form_basis(const ParameterSpace& s, int degree) {
  auto terms = default_scalar_terms(s, degree);
  auto ctx = expr::Context::manifold(s.dimension());
  std::vector<std::vector<expr::Expression>> es;
  for (const auto& t : terms)
    for (int i = 0; i < s.dimension(); ++i) {
      std::vector<expr::Expression> comps;
      for (int j = 0; j < s.dimension(); ++j) comps.push_back(expr::Expression::parse(j == i ? t : "0", ctx));
      es.push_back(std::move(comps));
    }
  std::ostringstream d;
  d << "1-forms with monomial coefficients of degree <= " << degree;
  return FormBasis::from_exprs(std::move(es), d.str());
}

/// Ten significant digits, enough to read off a certificate.
inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// "c1 * b1 + c2 * b2" for nonzero coefficients; basis elements printed as DSL text.
inline std::string describe_combination(const std::vector<std::string>& names, const Vec& c, double drop = 1e-9) {
  std::ostringstream os;
  bool first = true;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (std::abs(c[j]) <= drop) continue;
    double v = c[j];
    if (!first) os << (v < 0 ? " - " : " + ");
    else if (v < 0) os << "-";
    const std::string& n = names[static_cast<std::size_t>(j)];
    std::string num = short_number(std::abs(v));
    if (n == "1") os << num;
    else if (num == "1") os << n;
    else os << num << "*" << n;
    first = false;
  }
  return first ? "0" : os.str();
}

inline std::vector<std::string> scalar_names(const ScalarBasis& b) {
  std::vector<std::string> out;
  for (const auto& e : b.exprs) out.push_back(e.print());
  return out;
}

/// Form basis names as "coef dxi" sums, e.g. "x2 dx1 - x1 dx2".
inline std::vector<std::string> form_names(const FormBasis& b) {
  std::vector<std::string> out;
  for (const auto& comps : b.exprs) {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      std::string c = comps[i].print();
      if (c == "0") continue;
      if (!first) os << " + ";
      bool atomic = c.find_first_of("+-") == std::string::npos;
      if (c != "1") os << (atomic ? c : "(" + c + ")") << " ";
      os << "dx" << (i + 1);
      first = false;
    }
    out.push_back(first ? "0" : "(" + os.str() + ")");
  }
  return out;
}

/// Form basis names without the outer parentheses for single-term elements.
inline std::string describe_form(const FormBasis& b, const Vec& c, double drop = 1e-9) {
  auto names = form_names(b);
  for (auto& n : names)
    if (n.size() > 2 && n.find(" + ") == std::string::npos) n = n.substr(1, n.size() - 2);
  std::ostringstream os;
  bool first = true;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (std::abs(c[j]) <= drop) continue;
    double v = c[j];
    if (!first) os << (v < 0 ? " - " : " + ");
    else if (v < 0) os << "-";
    std::string num = short_number(std::abs(v));
    if (num != "1") os << num << " ";
    os << names[static_cast<std::size_t>(j)];
    first = false;
  }
  return first ? "0" : os.str();
}

}  // namespace eqhol

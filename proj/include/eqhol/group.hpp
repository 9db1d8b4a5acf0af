#pragma once

// Finitely presented transformation groups: discrete generator families,
// one-parameter (Lie) generators with flows, and words in both.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/forms.hpp"

namespace eqhol {

/// A diffeomorphism of the parameter space with its inverse.
struct GroupElement {
  std::string label;
  PointMap forward;
  PointMap inverse;
  bool in_identity_component = false;

  Vec operator()(const Vec& x) const { return forward(x); }

  /// a o b (apply b first).
  friend GroupElement compose(const GroupElement& a, const GroupElement& b) {
    return GroupElement{a.label + " " + b.label,
                        [a, b](const Vec& x) { return a.forward(b.forward(x)); },
                        [a, b](const Vec& x) { return b.inverse(a.inverse(x)); },
                        a.in_identity_component && b.in_identity_component};
  }
};

/// Integer powers phi^n of one discrete generator. Either a closed-form family
/// (maps given as functions of n) or a single step iterated |n| times.
struct DiscreteGenerator {
  std::string label;
  std::function<Vec(long, const Vec&)> power;          // x -> phi^n(x), n may be negative
  std::function<Vec(long, const Vec&)> power_inverse;  // x -> (phi^n)^{-1}(x)
  std::function<double(long, const Vec&)> alpha;       // real lift of alpha_{phi^n}(x)
  bool in_identity_component = false;

  /// Builds the family from one step, its inverse and the one-step cocycle.
  static DiscreteGenerator from_step(std::string label, PointMap step, PointMap step_inverse,
                                     std::function<double(const Vec&)> alpha_step, bool identity_component) {
    DiscreteGenerator g;
    g.label = std::move(label);
    g.in_identity_component = identity_component;
    auto iterate = [step, step_inverse](long n, const Vec& x) {
      Vec y = x;
      for (long k = 0; k < std::labs(n); ++k) y = n > 0 ? step(y) : step_inverse(y);
      return y;
    };
    g.power = iterate;
    g.power_inverse = [iterate](long n, const Vec& x) { return iterate(-n, x); };
    // cocycle law: alpha_{phi^n}(x) = sum_k alpha_phi(phi^k x); alpha_{phi^-1}(x) = -alpha_phi(phi^-1 x)
    g.alpha = [step, step_inverse, alpha_step](long n, const Vec& x) {
      double a = 0.0;
      Vec y = x;
      if (n >= 0) {
        for (long k = 0; k < n; ++k) {
          a += alpha_step(y);
          y = step(y);
        }
      } else {
        for (long k = 0; k < -n; ++k) {
          y = step_inverse(y);
          a -= alpha_step(y);
        }
      }
      return a;
    };
    return g;
  }

  GroupElement element(long n) const {
    auto p = power;
    auto q = power_inverse;
    return GroupElement{label + "^" + std::to_string(n), [p, n](const Vec& x) { return p(n, x); },
                        [q, n](const Vec& x) { return q(n, x); }, in_identity_component || n == 0};
  }
};

/// A one-parameter subgroup exp(tX): fundamental vector field, flow, and the
/// cocycle along the flow. X_N(x) = d/dt flow(t, x) at t = 0.
struct LieGenerator {
  std::string label;
  VectorField field;
  std::function<Vec(double, const Vec&)> flow;
  std::function<double(double, const Vec&)> alpha;
  std::optional<ScalarField> declared_moment;  // optional scenario-declared mu(X)

  /// RK4 integration of the generator field, used when no closed-form flow is given.
  static std::function<Vec(double, const Vec&)> rk4_flow(VectorField X, double max_step = 1e-2) {
    return [X, max_step](double t, const Vec& x0) {
      if (t == 0.0) return x0;
      int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / max_step)));
      double h = t / steps;
      Vec x = x0;
      for (int k = 0; k < steps; ++k) {
        Vec k1 = X(x);
        Vec k2 = X(x + 0.5 * h * k1);
        Vec k3 = X(x + 0.5 * h * k2);
        Vec k4 = X(x + h * k3);
        x += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      return x;
    };
  }

  GroupElement element(double t) const {
    auto f = flow;
    std::ostringstream os;
    os << label << "^" << t;
    return GroupElement{os.str(), [f, t](const Vec& x) { return f(t, x); },
                        [f, t](const Vec& x) { return f(-t, x); }, true};
  }
};

/// One letter of a word: a discrete generator power or a flow time.
struct Letter {
  enum class Kind { discrete, lie };
  Kind kind = Kind::discrete;
  std::size_t generator = 0;
  double param = 0.0;  // integer exponent for discrete letters

  long exponent() const { return std::lround(param); }

  friend bool operator==(const Letter& a, const Letter& b) {
    return a.kind == b.kind && a.generator == b.generator && a.param == b.param;
  }
};

/// A group element as a product of letters, written left to right as group
/// multiplication: [a, b] means a*b, which acts on points as a(b(x)).
struct Word {
  std::vector<Letter> letters;

  bool empty() const { return letters.empty(); }

  friend Word operator*(const Word& a, const Word& b) {
    Word w = a;
    w.letters.insert(w.letters.end(), b.letters.begin(), b.letters.end());
    return w;
  }

  Word inverse() const {
    Word w;
    for (auto it = letters.rbegin(); it != letters.rend(); ++it) {
      Letter l = *it;
      l.param = -l.param;
      w.letters.push_back(l);
    }
    return w;
  }

  /// Merges adjacent letters of the same generator and drops trivial letters.
  Word reduced() const {
    Word w;
    for (const Letter& l : letters) {
      if (!w.letters.empty() && w.letters.back().kind == l.kind && w.letters.back().generator == l.generator) {
        w.letters.back().param += l.param;
        if (w.letters.back().param == 0.0) w.letters.pop_back();
      } else if (l.param != 0.0) {
        w.letters.push_back(l);
      }
    }
    return w;
  }

  friend bool operator==(const Word& a, const Word& b) { return a.letters == b.letters; }
};

inline Word single(Letter::Kind kind, std::size_t generator, double param) {
  return Word{{Letter{kind, generator, param}}};
}

/// A group presentation acting on a parameter space.
class GroupAction {
 public:
  GroupAction() = default;
  GroupAction(std::vector<DiscreteGenerator> generators, std::vector<LieGenerator> lie,
              std::vector<Word> relations = {})
      : generators_(std::move(generators)), lie_(std::move(lie)), relations_(std::move(relations)) {
    for (const auto& g : generators_) {
      if (!g.power) fail(ErrorKind::construction, "generator '" + g.label + "' has no map");
      if (!g.power_inverse) fail(ErrorKind::construction, "generator '" + g.label + "' has no inverse");
      if (!g.alpha) fail(ErrorKind::construction, "generator '" + g.label + "' has no cocycle");
    }
    for (const auto& l : lie_) {
      if (!l.field) fail(ErrorKind::construction, "Lie generator '" + l.label + "' has no field");
      if (!l.flow) fail(ErrorKind::construction, "Lie generator '" + l.label + "' has no flow");
      if (!l.alpha) fail(ErrorKind::construction, "Lie generator '" + l.label + "' has no cocycle");
    }
  }

  const std::vector<DiscreteGenerator>& generators() const { return generators_; }
  const std::vector<LieGenerator>& lie() const { return lie_; }
  const std::vector<Word>& relations() const { return relations_; }

  Vec apply_letter(const Letter& l, const Vec& x) const {
    if (l.kind == Letter::Kind::discrete) return generators_.at(l.generator).power(l.exponent(), x);
    return lie_.at(l.generator).flow(l.param, x);
  }

  Vec apply_letter_inverse(const Letter& l, const Vec& x) const {
    if (l.kind == Letter::Kind::discrete) return generators_.at(l.generator).power_inverse(l.exponent(), x);
    return lie_.at(l.generator).flow(-l.param, x);
  }

  /// phi(x) for phi = letters[0] * ... * letters[k-1] (rightmost acts first).
  Vec apply(const Word& w, const Vec& x) const {
    Vec y = x;
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) y = apply_letter(*it, y);
    return y;
  }

  Vec apply_inverse(const Word& w, const Vec& x) const {
    Vec y = x;
    for (const Letter& l : w.letters) y = apply_letter_inverse(l, y);
    return y;
  }

  double letter_alpha(const Letter& l, const Vec& x) const {
    if (l.kind == Letter::Kind::discrete) return generators_.at(l.generator).alpha(l.exponent(), x);
    return lie_.at(l.generator).alpha(l.param, x);
  }

  /// Real lift of alpha_phi(x), extended to words by the cocycle law
  /// alpha_{phi' phi}(x) = alpha_phi(x) + alpha_phi'(phi x).
  double alpha(const Word& w, const Vec& x) const {
    double a = 0.0;
    Vec y = x;
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) {
      a += letter_alpha(*it, y);
      y = apply_letter(*it, y);
    }
    return a;
  }

  bool in_identity_component(const Word& w) const {
    for (const Letter& l : w.letters)
      if (l.kind == Letter::Kind::discrete && !generators_.at(l.generator).in_identity_component &&
          l.exponent() != 0)
        return false;
    return true;
  }

  GroupElement element(const Word& w) const {
    GroupAction self = *this;
    return GroupElement{describe(w), [self, w](const Vec& x) { return self.apply(w, x); },
                        [self, w](const Vec& x) { return self.apply_inverse(w, x); }, in_identity_component(w)};
  }

  std::optional<std::size_t> find_generator(const std::string& label) const {
    for (std::size_t i = 0; i < generators_.size(); ++i)
      if (generators_[i].label == label) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> find_lie(const std::string& label) const {
    for (std::size_t i = 0; i < lie_.size(); ++i)
      if (lie_[i].label == label) return i;
    return std::nullopt;
  }

  /// Parses "g^1 h^-2 R^0.5" (letters separated by spaces or '*'); "e" is the identity.
  Word parse_word(const std::string& text) const {
    Word w;
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), '*', ' ');
    std::istringstream is(normalized);
    std::string tok;
    while (is >> tok) {
      if (tok == "e" || tok == "1") continue;
      std::string label = tok;
      double param = 1.0;
      auto caret = tok.find('^');
      if (caret != std::string::npos) {
        label = tok.substr(0, caret);
        try {
          std::size_t used = 0;
          param = std::stod(tok.substr(caret + 1), &used);
          if (used != tok.size() - caret - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          fail(ErrorKind::syntax, "bad exponent in word letter '" + tok + "'");
        }
      }
      if (auto g = find_generator(label)) {
        if (param != std::round(param))
          fail(ErrorKind::semantic, "discrete generator '" + label + "' needs an integer exponent");
        w.letters.push_back(Letter{Letter::Kind::discrete, *g, param});
      } else if (auto l = find_lie(label)) {
        w.letters.push_back(Letter{Letter::Kind::lie, *l, param});
      } else {
        fail(ErrorKind::semantic, "unknown generator '" + label + "' in word '" + text + "'");
      }
    }
    return w;
  }

  std::string describe(const Word& w) const {
    if (w.empty()) return "e";
    std::ostringstream os;
    for (std::size_t i = 0; i < w.letters.size(); ++i) {
      const Letter& l = w.letters[i];
      if (i) os << ' ';
      if (l.kind == Letter::Kind::discrete)
        os << generators_.at(l.generator).label << '^' << l.exponent();
      else
        os << lie_.at(l.generator).label << '^' << l.param;
    }
    return os.str();
  }

 private:
  std::vector<DiscreteGenerator> generators_;
  std::vector<LieGenerator> lie_;
  std::vector<Word> relations_;
};

}  // namespace eqhol

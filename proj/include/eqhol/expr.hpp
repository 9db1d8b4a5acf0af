#pragma once

// Expression mini-language shared by scenario files, scalar/1-form fields and
// lattice jet densities.
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := base ("^" unsigned)?
//   base   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")" | "-" base
//
// Note that "-" binds tighter than "^": -x1^2 parses as (-x1)^2.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eqhol/error.hpp"

namespace eqhol::expr {

/// Which identifiers an expression may reference.
struct Context {
  int coordinates = 0;      // x1..x<coordinates>
  bool site = false;        // x (lattice position)
  int jet_order = -1;       // u, u1..u<jet_order>; -1 disables
  int variation_order = -1; // v, v1..v<variation_order>; -1 disables
  bool exponent = false;    // n (integer power of a discrete generator)
  bool time = false;        // t (flow time)
  bool integral = false;    // I(density) lattice integral

  static Context manifold(int dim) { return Context{.coordinates = dim}; }
  static Context density(int order) { return Context{.site = true, .jet_order = order}; }
  static Context one_form_density(int order) {
    return Context{.site = true, .jet_order = order, .variation_order = order};
  }
};

enum class SymbolClass { coordinate, site, jet, variation, exponent, time, pi };

enum class BinaryOp { add, sub, mul, div };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { number, symbol, call, negate, binary, power };
  Kind kind = Kind::number;
  double number = 0.0;
  std::string name;  // symbol or function name
  SymbolClass symbol = SymbolClass::pi;
  int index = 0;     // coordinate / jet index
  BinaryOp op = BinaryOp::add;
  int exponent = 0;
  std::vector<NodePtr> args;
  int line = 1;
  int column = 1;
};

inline bool same_tree(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Node::Kind::number: return a.number == b.number;
    case Node::Kind::symbol: return a.name == b.name;
    case Node::Kind::power:
      if (a.exponent != b.exponent) return false;
      break;
    case Node::Kind::binary:
      if (a.op != b.op) return false;
      break;
    case Node::Kind::call:
      if (a.name != b.name) return false;
      break;
    case Node::Kind::negate: break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same_tree(*a.args[i], *b.args[i])) return false;
  return true;
}

/// Values bound to the identifiers at evaluation time.
struct Env {
  std::span<const double> coords;
  double site = 0.0;
  std::span<const double> jet;
  std::span<const double> variation;
  double n = 0.0;
  double t = 0.0;
  const std::function<double(const Node&)>* integrate = nullptr;
};

namespace detail {

inline std::string where(int line, int column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

class Parser {
 public:
  Parser(std::string_view text, const Context& ctx, int line, int column)
      : text_(text), ctx_(ctx), line_(line), col0_(column) {}

  NodePtr parse() {
    skip();
    if (pos_ >= text_.size()) syntax(pos_, "empty expression");
    NodePtr e = expr();
    skip();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') syntax(pos_, "unmatched ')'");
      syntax(pos_, std::string("unexpected '") + text_[pos_] + "'");
    }
    return e;
  }

 private:
  std::string_view text_;
  Context ctx_;
  int line_;
  int col0_;
  std::size_t pos_ = 0;

  int col(std::size_t at) const { return col0_ + static_cast<int>(at); }

  [[noreturn]] void syntax(std::size_t at, const std::string& msg) const {
    fail(ErrorKind::syntax, where(line_, col(at)) + ": " + msg);
  }
  [[noreturn]] void semantic(std::size_t at, const std::string& msg) const {
    fail(ErrorKind::semantic, where(line_, col(at)) + ": " + msg);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::shared_ptr<Node> make(Node::Kind k, std::size_t at) const {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->line = line_;
    n->column = col(at);
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      skip();
      std::size_t at = pos_;
      if (accept('+')) {
        lhs = binary(BinaryOp::add, lhs, term(), at);
      } else if (accept('-')) {
        lhs = binary(BinaryOp::sub, lhs, term(), at);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = factor();
    for (;;) {
      skip();
      std::size_t at = pos_;
      if (accept('*')) {
        lhs = binary(BinaryOp::mul, lhs, factor(), at);
      } else if (accept('/')) {
        lhs = binary(BinaryOp::div, lhs, factor(), at);
      } else {
        return lhs;
      }
    }
  }

  NodePtr binary(BinaryOp op, NodePtr a, NodePtr b, std::size_t at) {
    auto n = make(Node::Kind::binary, at);
    n->op = op;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr factor() {
    NodePtr b = base();
    skip();
    std::size_t at = pos_;
    if (accept('^')) {
      skip();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) syntax(start, "expected unsigned integer exponent after '^'");
      auto n = make(Node::Kind::power, at);
      n->exponent = std::stoi(std::string(text_.substr(start, pos_ - start)));
      n->args = {std::move(b)};
      return n;
    }
    return b;
  }

  NodePtr base() {
    skip();
    if (pos_ >= text_.size()) syntax(pos_, "unexpected end of expression");
    std::size_t at = pos_;
    char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      auto n = make(Node::Kind::negate, at);
      n->args = {base()};
      return n;
    }
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!accept(')')) syntax(at, "unmatched '('");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    syntax(at, std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    std::size_t at = pos_;
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    std::string buf(text_.substr(pos_));
    double v = std::strtod(buf.c_str(), &end);
    std::size_t len = static_cast<std::size_t>(end - buf.c_str());
    if (len == 0) syntax(at, "malformed number");
    (void)begin;
    pos_ += len;
    auto n = make(Node::Kind::number, at);
    n->number = v;
    return n;
  }

  NodePtr identifier() {
    std::size_t at = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(at, pos_ - at));
    skip();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      std::size_t open = pos_;
      ++pos_;
      auto n = make(Node::Kind::call, at);
      n->name = name;
      std::vector<NodePtr> args;
      args.push_back(expr());
      while (accept(',')) args.push_back(expr());
      if (!accept(')')) syntax(open, "unmatched '('");
      n->args = std::move(args);
      check_call(*n, at);
      return n;
    }
    auto n = make(Node::Kind::symbol, at);
    n->name = name;
    resolve(*n, at);
    return n;
  }

  void check_call(const Node& n, std::size_t at) const {
    static const char* unary[] = {"sin", "cos", "exp", "tanh"};
    for (const char* f : unary) {
      if (n.name == f) {
        if (n.args.size() != 1) semantic(at, n.name + " expects 1 argument, got " + std::to_string(n.args.size()));
        return;
      }
    }
    if (n.name == "I") {
      if (!ctx_.integral) semantic(at, "I(...) is only available in field-space functionals");
      if (n.args.size() != 1) semantic(at, "I expects 1 argument");
      return;
    }
    semantic(at, "unknown function '" + n.name + "'");
  }

  static bool indexed(const std::string& name, char head, int& index) {
    if (name.empty() || name[0] != head) return false;
    if (name.size() == 1) {
      index = 0;
      return true;
    }
    for (std::size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
    if (name.size() > 2) return false;
    index = name[1] - '0';
    return true;
  }

  void resolve(Node& n, std::size_t at) const {
    const std::string& s = n.name;
    int idx = 0;
    if (s == "pi") {
      n.symbol = SymbolClass::pi;
      return;
    }
    if (s == "n") {
      if (!ctx_.exponent) semantic(at, "unresolved name 'n' (only valid in discrete generator families)");
      n.symbol = SymbolClass::exponent;
      return;
    }
    if (s == "t") {
      if (!ctx_.time) semantic(at, "unresolved name 't' (only valid in flow expressions)");
      n.symbol = SymbolClass::time;
      return;
    }
    if (s == "x") {
      if (!ctx_.site) semantic(at, "unresolved name 'x' (lattice position is only valid in densities)");
      n.symbol = SymbolClass::site;
      return;
    }
    if (indexed(s, 'x', idx) && idx >= 1) {
      if (idx > ctx_.coordinates)
        semantic(at, "unresolved name '" + s + "' (space has dimension " + std::to_string(ctx_.coordinates) + ")");
      n.symbol = SymbolClass::coordinate;
      n.index = idx - 1;
      return;
    }
    if (indexed(s, 'u', idx)) {
      if (idx > ctx_.jet_order)
        semantic(at, "unresolved name '" + s + "' (jet order " + std::to_string(ctx_.jet_order) + ")");
      n.symbol = SymbolClass::jet;
      n.index = idx;
      return;
    }
    if (indexed(s, 'v', idx)) {
      if (idx > ctx_.variation_order)
        semantic(at, "unresolved name '" + s + "' (variation jets unavailable here)");
      n.symbol = SymbolClass::variation;
      n.index = idx;
      return;
    }
    semantic(at, "unresolved name '" + s + "'");
  }
};

inline double eval_node(const Node& n, const Env& env) {
  switch (n.kind) {
    case Node::Kind::number: return n.number;
    case Node::Kind::symbol:
      switch (n.symbol) {
        case SymbolClass::coordinate: return env.coords[n.index];
        case SymbolClass::site: return env.site;
        case SymbolClass::jet: return env.jet[n.index];
        case SymbolClass::variation: return env.variation[n.index];
        case SymbolClass::exponent: return env.n;
        case SymbolClass::time: return env.t;
        case SymbolClass::pi: return M_PI;
      }
      return 0.0;
    case Node::Kind::negate: return -eval_node(*n.args[0], env);
    case Node::Kind::power: {
      double b = eval_node(*n.args[0], env);
      double r = 1.0;
      for (int i = 0; i < n.exponent; ++i) r *= b;
      return r;
    }
    case Node::Kind::binary: {
      double a = eval_node(*n.args[0], env);
      double b = eval_node(*n.args[1], env);
      switch (n.op) {
        case BinaryOp::add: return a + b;
        case BinaryOp::sub: return a - b;
        case BinaryOp::mul: return a * b;
        case BinaryOp::div: return a / b;
      }
      return 0.0;
    }
    case Node::Kind::call: {
      if (n.name == "I") {
        if (env.integrate == nullptr)
          fail(ErrorKind::evaluation, "I(...) evaluated outside a field-space context");
        return (*env.integrate)(*n.args[0]);
      }
      double a = eval_node(*n.args[0], env);
      if (n.name == "sin") return std::sin(a);
      if (n.name == "cos") return std::cos(a);
      if (n.name == "exp") return std::exp(a);
      if (n.name == "tanh") return std::tanh(a);
      return 0.0;
    }
  }
  return 0.0;
}

inline bool atomic(const Node& n) {
  return n.kind == Node::Kind::symbol || n.kind == Node::Kind::call ||
         (n.kind == Node::Kind::number && n.number >= 0.0);
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) {
      s = buf;
      break;
    }
  }
  return s;
}

inline void print_node(const Node& n, std::ostream& os);

inline void print_operand(const Node& n, std::ostream& os, bool wrap) {
  if (wrap) os << '(';
  print_node(n, os);
  if (wrap) os << ')';
}

inline void print_node(const Node& n, std::ostream& os) {
  switch (n.kind) {
    case Node::Kind::number: os << format_number(n.number); return;
    case Node::Kind::symbol: os << n.name; return;
    case Node::Kind::call:
      os << n.name << '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) os << ", ";
        print_node(*n.args[i], os);
      }
      os << ')';
      return;
    case Node::Kind::negate:
      os << '-';
      print_operand(*n.args[0], os, !atomic(*n.args[0]) && n.args[0]->kind != Node::Kind::negate);
      return;
    case Node::Kind::power:
      print_operand(*n.args[0], os, !atomic(*n.args[0]) && n.args[0]->kind != Node::Kind::negate);
      os << '^' << n.exponent;
      return;
    case Node::Kind::binary: {
      const Node& a = *n.args[0];
      const Node& b = *n.args[1];
      bool additive = n.op == BinaryOp::add || n.op == BinaryOp::sub;
      auto is_additive = [](const Node& m) {
        return m.kind == Node::Kind::binary && (m.op == BinaryOp::add || m.op == BinaryOp::sub);
      };
      // left-associative: the left operand only needs parentheses when it binds looser
      print_operand(a, os, !additive && is_additive(a));
      switch (n.op) {
        case BinaryOp::add: os << " + "; break;
        case BinaryOp::sub: os << " - "; break;
        case BinaryOp::mul: os << " * "; break;
        case BinaryOp::div: os << " / "; break;
      }
      print_operand(b, os, b.kind == Node::Kind::binary && (additive ? is_additive(b) : true));
      return;
    }
  }
}

inline bool references(const Node& n, SymbolClass c) {
  if (n.kind == Node::Kind::symbol && n.symbol == c) return true;
  for (const auto& a : n.args)
    if (references(*a, c)) return true;
  return false;
}

}  // namespace detail

/// A parsed expression. Immutable and cheap to copy.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text, const Context& ctx, int line = 1, int column = 1) {
    Expression e;
    e.root_ = detail::Parser(text, ctx, line, column).parse();
    e.source_ = std::string(text);
    return e;
  }

  static Expression constant(double v) {
    auto n = std::make_shared<Node>();
    n->number = v;
    Expression e;
    if (v < 0) {
      auto neg = std::make_shared<Node>();
      neg->kind = Node::Kind::negate;
      n->number = -v;
      neg->args = {n};
      e.root_ = neg;
    } else {
      e.root_ = n;
    }
    e.source_ = e.print();
    return e;
  }

  bool empty() const { return root_ == nullptr; }
  const Node& root() const { return *root_; }
  const std::string& source() const { return source_; }

  double eval(const Env& env) const { return detail::eval_node(*root_, env); }

  double eval_at(std::span<const double> coords) const {
    Env env;
    env.coords = coords;
    return eval(env);
  }

  bool references(SymbolClass c) const { return root_ && detail::references(*root_, c); }

  std::string print() const {
    std::ostringstream os;
    detail::print_node(*root_, os);
    return os.str();
  }

  friend bool operator==(const Expression& a, const Expression& b) {
    if (a.empty() || b.empty()) return a.empty() == b.empty();
    return same_tree(*a.root_, *b.root_);
  }

 private:
  NodePtr root_;
  std::string source_;
};

}  // namespace eqhol::expr

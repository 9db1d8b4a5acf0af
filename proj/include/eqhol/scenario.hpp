#pragma once

// Scenario files: a strict TOML subset (tables, arrays of tables, strings,
// numbers, booleans, arrays) plus a schema on top. Every value keeps its
// source position so that expression errors point into the file.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eqhol/locality.hpp"
#include "eqhol/verdict.hpp"

namespace eqhol::scenario {

inline constexpr int kSchemaVersion = 1;

struct Value {
  enum class Kind { boolean, integer, real, string, array };
  Kind kind = Kind::integer;
  bool boolean = false;
  long integer = 0;
  double real = 0.0;
  std::string text;
  std::vector<Value> items;
  int line = 1;
  int column = 1;

  /// Positions are ignored.
  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::boolean: return a.boolean == b.boolean;
      case Kind::integer: return a.integer == b.integer;
      case Kind::real: return a.real == b.real;
      case Kind::string: return a.text == b.text;
      case Kind::array: return a.items == b.items;
    }
    return false;
  }
};

struct Entry {
  std::string key;
  Value value;
  int line = 1;
  int column = 1;
  friend bool operator==(const Entry& a, const Entry& b) { return a.key == b.key && a.value == b.value; }
};

struct Table {
  std::string name;  // "" for the root
  bool array = false;
  std::vector<Entry> entries;
  int line = 1;

  const Entry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
  friend bool operator==(const Table& a, const Table& b) {
    return a.name == b.name && a.array == b.array && a.entries == b.entries;
  }
};

struct Document {
  std::vector<Table> tables;  // tables[0] is the root
  friend bool operator==(const Document& a, const Document& b) { return a.tables == b.tables; }
};

namespace detail {

using expr::detail::where;

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Document parse() {
    Document doc;
    doc.tables.push_back(Table{"", false, {}, 1});
    std::set<std::string> seen_tables;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        Table t = header();
        if (!t.array) {
          if (seen_tables.count(t.name)) fail(ErrorKind::syntax, where(t.line, 1) + ": duplicate table [" + t.name + "]");
          seen_tables.insert(t.name);
        }
        doc.tables.push_back(std::move(t));
      } else {
        Entry e = entry();
        Table& t = doc.tables.back();
        if (t.find(e.key)) fail(ErrorKind::syntax, where(e.line, e.column) + ": duplicate key '" + e.key + "'");
        t.entries.push_back(std::move(e));
      }
      end_of_line();
    }
    return doc;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  char get() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      line_start_ = pos_;
    }
    return c;
  }
  int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

  [[noreturn]] void syntax(const std::string& msg) const { fail(ErrorKind::syntax, where(line_, column()) + ": " + msg); }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n')
        get();
      else
        break;
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') syntax("unexpected '" + std::string(1, peek()) + "' after value");
    get();
  }

  static bool bare(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

  std::string key_name() {
    std::string k;
    while (!eof() && bare(peek())) k += get();
    if (k.empty()) syntax("expected a key");
    return k;
  }

  Table header() {
    Table t;
    t.line = line_;
    get();
    if (peek() == '[') {
      get();
      t.array = true;
    }
    skip_spaces();
    t.name = key_name();
    while (peek() == '.') {
      get();
      t.name += "." + key_name();
    }
    skip_spaces();
    if (peek() != ']') syntax("expected ']' to close the table header");
    get();
    if (t.array) {
      if (peek() != ']') syntax("expected ']]' to close the array-of-tables header");
      get();
    }
    return t;
  }

  Entry entry() {
    Entry e;
    e.line = line_;
    e.column = column();
    e.key = key_name();
    skip_spaces();
    if (peek() != '=') syntax("expected '=' after key '" + e.key + "'");
    get();
    skip_spaces();
    e.value = value();
    return e;
  }

  Value value() {
    Value v;
    v.line = line_;
    v.column = column();
    if (eof() || peek() == '\n') syntax("expected a value");
    char c = peek();
    if (c == '"') {
      v.kind = Value::Kind::string;
      get();
      v.column = column();  // expressions are positioned inside the quotes
      while (true) {
        if (eof() || peek() == '\n') fail(ErrorKind::syntax, where(v.line, v.column - 1) + ": unterminated string");
        char ch = get();
        if (ch == '"') break;
        if (ch == '\\') {
          if (eof()) syntax("unterminated escape");
          char esc = get();
          switch (esc) {
            case '"': v.text += '"'; break;
            case '\\': v.text += '\\'; break;
            case 'n': v.text += '\n'; break;
            case 't': v.text += '\t'; break;
            default: syntax(std::string("unknown escape '\\") + esc + "'");
          }
        } else {
          v.text += ch;
        }
      }
      return v;
    }
    if (c == '[') {
      v.kind = Value::Kind::array;
      get();
      while (true) {
        skip_blank_lines();
        if (peek() == ']') {
          get();
          break;
        }
        v.items.push_back(value());
        skip_blank_lines();
        if (peek() == ',') {
          get();
        } else if (peek() == ']') {
          get();
          break;
        } else {
          syntax("expected ',' or ']' in array");
        }
      }
      return v;
    }
    std::string word;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                      peek() == '-' || peek() == '_'))
      word += get();
    if (word == "true" || word == "false") {
      v.kind = Value::Kind::boolean;
      v.boolean = word == "true";
      return v;
    }
    if (word.empty()) syntax("unexpected '" + std::string(1, c) + "'");
    std::string digits;
    for (char ch : word)
      if (ch != '_') digits += ch;
    bool is_real = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    try {
      std::size_t used = 0;
      if (is_real) {
        v.kind = Value::Kind::real;
        v.real = std::stod(digits, &used);
      } else {
        v.kind = Value::Kind::integer;
        v.integer = std::stol(digits, &used);
      }
      if (used != digits.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::syntax, where(v.line, v.column) + ": bad value '" + word + "'");
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  int line_ = 1;
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string print_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // shortest representation that reads back exactly
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::stod(buf) == v) {
      s = buf;
      break;
    }
  }
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline void print_value(const Value& v, std::ostream& os) {
  switch (v.kind) {
    case Value::Kind::boolean: os << (v.boolean ? "true" : "false"); break;
    case Value::Kind::integer: os << v.integer; break;
    case Value::Kind::real: os << print_real(v.real); break;
    case Value::Kind::string: os << quote(v.text); break;
    case Value::Kind::array:
      os << '[';
      for (std::size_t i = 0; i < v.items.size(); ++i) {
        if (i) os << ", ";
        print_value(v.items[i], os);
      }
      os << ']';
      break;
  }
}

}  // namespace detail

inline Document parse_document(std::string_view text) { return detail::Reader(text).parse(); }

/// Canonical text; parse_document(print_document(d)) == d.
inline std::string print_document(const Document& d) {
  std::ostringstream os;
  bool first = true;
  for (const Table& t : d.tables) {
    if (!t.name.empty()) {
      if (!first) os << '\n';
      os << (t.array ? "[[" : "[") << t.name << (t.array ? "]]" : "]") << '\n';
    }
    for (const Entry& e : t.entries) {
      os << e.key << " = ";
      detail::print_value(e.value, os);
      os << '\n';
    }
    first = first && t.entries.empty() && t.name.empty();
    if (!t.name.empty() || !t.entries.empty()) first = false;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Schema

struct SpaceSpec {
  std::string topology = "euclidean";  // euclidean | torus
  int dimension = 1;
  std::vector<double> lower, upper;    // euclidean
  double period = 1.0;                 // torus
  double fd_step = 1e-4;
};

struct GeneratorSpec {
  std::string label;
  bool identity_component = false;
  int line = 1;
  // manifold scenarios
  bool family = false;  // map and alpha written in terms of n
  std::vector<expr::Expression> map, inverse;
  expr::Expression alpha;
  // lattice scenarios
  std::string kind;  // site_shift | fiber_affine
  int sites = 1;
  double scale = 1.0;
  expr::Expression chi;
  std::optional<FieldFunctional> field_alpha;
};

struct LieSpec {
  std::string label;
  int line = 1;
  std::vector<expr::Expression> field;
  std::vector<expr::Expression> flow;  // empty: RK4
  expr::Expression alpha;
  std::optional<expr::Expression> moment;
  // lattice scenarios
  std::string kind;  // shift | fiber
  expr::Expression chi;
  std::optional<FieldFunctional> field_alpha;
  std::optional<LocalDensity> moment_density;
};

struct LocalitySpec {
  int sites = 16;
  double period = 1.0;
  int jet_order = 2;
  int degree = 4;
  double field_range = 4.0;
  std::vector<std::string> density_ansatz;   // empty: default monomials
  std::vector<std::string> one_form_ansatz;  // empty: default monomials times v-jets
  int paths = 3;
};

struct SolverSpec {
  std::uint64_t seed = 1;
  int degree = 4;
  int fit_probes = 256;
  int held_out_probes = 256;
  double fit_tol = 1e-6;
  double held_out_tol = 1e-5;
  double condition_limit = 1e12;
  int word_length = 3;
  int probes = 64;
  std::vector<std::vector<expr::Expression>> candidates;
  std::vector<std::vector<expr::Expression>> primitive_basis;
  std::vector<expr::Expression> sigma_basis;
  std::optional<std::vector<double>> basepoint;
};

struct PathSpec {
  std::string name;
  std::vector<expr::Expression> point;  // in t, t in [0, 1]
  int samples = static_cast<int>(kDefaultPathSamples);
};

struct Assumptions {
  bool a1 = false;  // N connected with H^1(N) = 0
  bool a2 = false;  // a local connection exists
  bool a3 = false;  // H^1_loc of the field space vanishes
};

struct Scenario {
  Document document;
  std::string name;
  std::string description;
  std::optional<SpaceSpec> space;
  std::optional<LocalitySpec> locality;
  std::vector<GeneratorSpec> generators;
  std::vector<LieSpec> lie;
  std::vector<std::string> relations;
  std::vector<expr::Expression> rho;    // manifold
  std::optional<LocalOneForm> rho_density;  // lattice
  std::optional<expr::Expression> lambda;
  std::optional<LocalDensity> lambda_density;
  Assumptions assumptions;
  SolverSpec solver;
  std::vector<PathSpec> paths;

  bool lattice() const { return locality.has_value(); }
  int dimension() const { return lattice() ? locality->sites : space->dimension; }
};

namespace detail {

[[noreturn]] inline void semantic(int line, int column, const std::string& msg) {
  fail(ErrorKind::semantic, where(line, column) + ": " + msg);
}

/// Typed, position-aware access to one table with unknown-key rejection.
class Fields {
 public:
  Fields(const Table& t, std::set<std::string> allowed) : t_(t) {
    for (const auto& e : t.entries)
      if (!allowed.count(e.key))
        semantic(e.line, e.column, "unknown key '" + e.key + "' in " + label());
  }

  std::string label() const {
    if (t_.name.empty()) return "the top level";
    return (t_.array ? "[[" : "[") + t_.name + (t_.array ? "]]" : "]");
  }

  bool has(std::string_view k) const { return t_.find(k) != nullptr; }

  const Value& get(std::string_view k) const {
    const Entry* e = t_.find(k);
    if (!e) semantic(t_.line, 1, "missing key '" + std::string(k) + "' in " + label());
    return e->value;
  }

  const Value& typed(std::string_view k, Value::Kind kind, const char* what) const {
    const Value& v = get(k);
    if (v.kind != kind) semantic(v.line, v.column, "'" + std::string(k) + "' must be " + what);
    return v;
  }

  std::string str(std::string_view k) const { return typed(k, Value::Kind::string, "a string").text; }
  std::string str(std::string_view k, std::string d) const { return has(k) ? str(k) : d; }
  bool boolean(std::string_view k, bool d) const { return has(k) ? typed(k, Value::Kind::boolean, "true or false").boolean : d; }
  bool boolean(std::string_view k) const { return typed(k, Value::Kind::boolean, "true or false").boolean; }
  long integer(std::string_view k) const { return typed(k, Value::Kind::integer, "an integer").integer; }
  long integer(std::string_view k, long d) const { return has(k) ? integer(k) : d; }
  double real(std::string_view k) const {
    const Value& v = get(k);
    if (v.kind == Value::Kind::integer) return static_cast<double>(v.integer);
    if (v.kind != Value::Kind::real) semantic(v.line, v.column, "'" + std::string(k) + "' must be a number");
    return v.real;
  }
  double real(std::string_view k, double d) const { return has(k) ? real(k) : d; }

  std::vector<double> reals(std::string_view k) const {
    const Value& v = typed(k, Value::Kind::array, "an array of numbers");
    std::vector<double> out;
    for (const Value& i : v.items) {
      if (i.kind == Value::Kind::integer)
        out.push_back(static_cast<double>(i.integer));
      else if (i.kind == Value::Kind::real)
        out.push_back(i.real);
      else
        semantic(i.line, i.column, "'" + std::string(k) + "' must hold numbers");
    }
    return out;
  }

  std::vector<const Value*> strings(std::string_view k) const {
    std::vector<const Value*> out;
    if (!has(k)) return out;
    const Value& v = typed(k, Value::Kind::array, "an array of strings");
    for (const Value& i : v.items) {
      if (i.kind != Value::Kind::string) semantic(i.line, i.column, "'" + std::string(k) + "' must hold strings");
      out.push_back(&i);
    }
    return out;
  }

  const Table& table() const { return t_; }

 private:
  const Table& t_;
};

inline expr::Expression scalar(const Value& v, const expr::Context& ctx) {
  return expr::Expression::parse(v.text, ctx, v.line, v.column);
}

/// "[e1, e2, ...]" split at top-level commas; each component keeps its column.
inline std::vector<expr::Expression> vector_expr(const Value& v, const expr::Context& ctx, int dim, const std::string& what) {
  const std::string& s = v.text;
  std::size_t open = s.find_first_not_of(" \t");
  if (open == std::string::npos || s[open] != '[')
    fail(ErrorKind::syntax, where(v.line, v.column) + ": " + what + " must be a vector literal \"[...]\"");
  std::size_t close = s.find_last_not_of(" \t");
  if (s[close] != ']') fail(ErrorKind::syntax, where(v.line, v.column + static_cast<int>(close)) + ": expected ']' to close " + what);
  std::vector<expr::Expression> out;
  int depth = 0;
  std::size_t start = open + 1;
  for (std::size_t i = open + 1; i <= close; ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if ((c == ',' && depth == 0) || i == close) {
      std::string part = s.substr(start, i - start);
      out.push_back(expr::Expression::parse(part, ctx, v.line, v.column + static_cast<int>(start)));
      start = i + 1;
    }
  }
  if (static_cast<int>(out.size()) != dim)
    semantic(v.line, v.column, what + " has " + std::to_string(out.size()) + " components, expected " + std::to_string(dim));
  return out;
}

inline expr::Context with(expr::Context c, bool n, bool t) {
  c.exponent = n;
  c.time = t;
  return c;
}

inline void read_space(Scenario& sc, const Table& t) {
  Fields f(t, {"dimension", "topology", "lower", "upper", "period", "fd_step"});
  SpaceSpec sp;
  sp.dimension = static_cast<int>(f.integer("dimension"));
  if (sp.dimension < 1 || sp.dimension > 9) semantic(f.get("dimension").line, f.get("dimension").column, "dimension must be 1..9");
  sp.topology = f.str("topology");
  sp.fd_step = f.real("fd_step", 1e-4);
  if (sp.topology == "euclidean") {
    if (f.has("period")) semantic(f.get("period").line, f.get("period").column, "'period' is only for torus spaces");
    sp.lower = f.reals("lower");
    sp.upper = f.reals("upper");
    for (const auto* k : {"lower", "upper"}) {
      const auto& vals = std::string(k) == "lower" ? sp.lower : sp.upper;
      if (static_cast<int>(vals.size()) != sp.dimension)
        semantic(f.get(k).line, f.get(k).column, std::string("'") + k + "' needs one bound per dimension");
    }
  } else if (sp.topology == "torus") {
    if (f.has("lower") || f.has("upper")) semantic(t.line, 1, "torus spaces take 'period', not bounds");
    sp.period = f.real("period");
  } else {
    semantic(f.get("topology").line, f.get("topology").column, "topology must be \"euclidean\" or \"torus\"");
  }
  sc.space = sp;
}

inline void read_locality(Scenario& sc, const Table& t) {
  Fields f(t, {"sites", "period", "jet_order", "degree", "field_range", "density_ansatz", "one_form_ansatz", "paths"});
  LocalitySpec l;
  l.sites = static_cast<int>(f.integer("sites"));
  l.period = f.real("period");
  l.jet_order = static_cast<int>(f.integer("jet_order", 2));
  if (l.jet_order < 0 || l.jet_order > 6) semantic(t.line, 1, "jet_order must be 0..6");
  l.degree = static_cast<int>(f.integer("degree", 4));
  l.field_range = f.real("field_range", 4.0);
  l.paths = static_cast<int>(f.integer("paths", 3));
  for (const Value* v : f.strings("density_ansatz")) {
    LocalDensity::parse(v->text, l.jet_order, v->line, v->column);
    l.density_ansatz.push_back(v->text);
  }
  for (const Value* v : f.strings("one_form_ansatz")) {
    LocalOneForm::parse(v->text, l.jet_order, v->line, v->column);
    l.one_form_ansatz.push_back(v->text);
  }
  LatticeBase(l.sites, l.period);  // validates
  sc.locality = l;
}

inline void read_generator(Scenario& sc, const Table& t) {
  GeneratorSpec g;
  g.line = t.line;
  if (sc.lattice()) {
    Fields f(t, {"label", "kind", "sites", "scale", "chi", "alpha", "identity_component"});
    g.label = f.str("label");
    g.kind = f.str("kind");
    g.identity_component = f.boolean("identity_component", false);
    if (g.kind == "site_shift") {
      g.sites = static_cast<int>(f.integer("sites", 1));
      if (f.has("scale") || f.has("chi")) semantic(t.line, 1, "site_shift takes only 'sites'");
    } else if (g.kind == "fiber_affine") {
      g.scale = f.real("scale", 1.0);
      if (!(g.scale > 0.0)) semantic(f.get("scale").line, f.get("scale").column, "scale must be positive");
      g.chi = f.has("chi") ? scalar(f.get("chi"), expr::Context{.site = true}) : expr::Expression::constant(0.0);
      if (f.has("sites")) semantic(f.get("sites").line, f.get("sites").column, "'sites' is only for site_shift");
    } else {
      semantic(f.get("kind").line, f.get("kind").column, "lattice generator kind must be \"site_shift\" or \"fiber_affine\"");
    }
    const Value& a = f.typed("alpha", Value::Kind::string, "a string");
    g.field_alpha = FieldFunctional::parse(a.text, sc.locality->jet_order, true, a.line, a.column);
  } else {
    Fields f(t, {"label", "map", "inverse", "alpha", "identity_component"});
    g.label = f.str("label");
    g.identity_component = f.boolean("identity_component", false);
    int d = sc.space->dimension;
    auto ctx = expr::Context::manifold(d);
    const Value& mv = f.typed("map", Value::Kind::string, "a string");
    auto probe = vector_expr(mv, with(ctx, true, false), d, "map");
    for (const auto& e : probe) g.family = g.family || e.references(expr::SymbolClass::exponent);
    g.map = probe;
    g.inverse = vector_expr(f.typed("inverse", Value::Kind::string, "a string"), with(ctx, g.family, false), d, "inverse");
    g.alpha = scalar(f.typed("alpha", Value::Kind::string, "a string"), with(ctx, g.family, false));
  }
  for (const auto& other : sc.generators)
    if (other.label == g.label) semantic(t.line, 1, "duplicate generator label '" + g.label + "'");
  sc.generators.push_back(std::move(g));
}

inline void read_lie(Scenario& sc, const Table& t) {
  LieSpec l;
  l.line = t.line;
  if (sc.lattice()) {
    Fields f(t, {"label", "kind", "chi", "alpha", "moment_density"});
    l.label = f.str("label");
    l.kind = f.str("kind");
    if (l.kind == "fiber")
      l.chi = f.has("chi") ? scalar(f.get("chi"), expr::Context{.site = true}) : expr::Expression::constant(1.0);
    else if (l.kind != "shift")
      semantic(f.get("kind").line, f.get("kind").column, "lattice Lie generator kind must be \"shift\" or \"fiber\"");
    const Value& a = f.typed("alpha", Value::Kind::string, "a string");
    l.field_alpha = FieldFunctional::parse(a.text, sc.locality->jet_order, false, a.line, a.column);
    if (f.has("moment_density")) {
      const Value& m = f.typed("moment_density", Value::Kind::string, "a string");
      l.moment_density = LocalDensity::parse(m.text, sc.locality->jet_order, m.line, m.column);
    }
  } else {
    Fields f(t, {"label", "field", "flow", "alpha", "moment"});
    int d = sc.space->dimension;
    auto ctx = expr::Context::manifold(d);
    l.label = f.str("label");
    l.field = vector_expr(f.typed("field", Value::Kind::string, "a string"), ctx, d, "field");
    if (f.has("flow")) l.flow = vector_expr(f.typed("flow", Value::Kind::string, "a string"), with(ctx, false, true), d, "flow");
    l.alpha = scalar(f.typed("alpha", Value::Kind::string, "a string"), with(ctx, false, true));
    if (f.has("moment")) l.moment = scalar(f.typed("moment", Value::Kind::string, "a string"), ctx);
  }
  for (const auto& other : sc.lie)
    if (other.label == l.label) semantic(t.line, 1, "duplicate Lie generator label '" + l.label + "'");
  for (const auto& other : sc.generators)
    if (other.label == l.label) semantic(t.line, 1, "label '" + l.label + "' is used by a discrete generator");
  sc.lie.push_back(std::move(l));
}

inline void read_solver(Scenario& sc, const Table& t) {
  Fields f(t, {"seed", "degree", "fit_probes", "held_out_probes", "fit_tol", "held_out_tol", "condition_limit",
               "word_length", "probes", "candidates", "primitive_basis", "sigma_basis", "basepoint"});
  SolverSpec& s = sc.solver;
  s.seed = static_cast<std::uint64_t>(f.integer("seed", 1));
  s.degree = static_cast<int>(f.integer("degree", 4));
  s.fit_probes = static_cast<int>(f.integer("fit_probes", 256));
  s.held_out_probes = static_cast<int>(f.integer("held_out_probes", 256));
  s.fit_tol = f.real("fit_tol", 1e-6);
  s.held_out_tol = f.real("held_out_tol", 1e-5);
  s.condition_limit = f.real("condition_limit", 1e12);
  s.word_length = static_cast<int>(f.integer("word_length", 3));
  s.probes = static_cast<int>(f.integer("probes", 64));
  if (sc.lattice()) {
    for (const char* k : {"candidates", "primitive_basis", "sigma_basis", "basepoint"})
      if (f.has(k)) semantic(f.get(k).line, f.get(k).column, std::string("'") + k + "' is not used by lattice scenarios");
    return;
  }
  int d = sc.space->dimension;
  auto ctx = expr::Context::manifold(d);
  for (const Value* v : f.strings("candidates")) s.candidates.push_back(vector_expr(*v, ctx, d, "candidate"));
  for (const Value* v : f.strings("primitive_basis")) s.primitive_basis.push_back(vector_expr(*v, ctx, d, "primitive basis form"));
  for (const Value* v : f.strings("sigma_basis")) s.sigma_basis.push_back(scalar(*v, ctx));
  if (f.has("basepoint")) {
    s.basepoint = f.reals("basepoint");
    if (static_cast<int>(s.basepoint->size()) != d) semantic(f.get("basepoint").line, f.get("basepoint").column, "basepoint needs one coordinate per dimension");
  }
}

}  // namespace detail

/// Parses and validates a scenario. Errors carry line and column.
inline Scenario parse_scenario(std::string_view text) {
  using namespace detail;
  Scenario sc;
  sc.document = parse_document(text);
  const auto& tables = sc.document.tables;

  Fields root(tables[0], {"schema_version", "name", "description"});
  const Value& ver = root.typed("schema_version", Value::Kind::integer, "an integer");
  if (ver.integer != kSchemaVersion)
    semantic(ver.line, ver.column, "unsupported schema_version " + std::to_string(ver.integer) + " (this build reads " +
                                       std::to_string(kSchemaVersion) + ")");
  sc.name = root.str("name");
  sc.description = root.str("description", "");

  static const std::set<std::string> known{"space", "locality", "group", "group.generator", "group.lie", "connection",
                                           "section", "assumptions", "solver", "path"};
  static const std::set<std::string> arrays{"group.generator", "group.lie", "path"};
  const Table* group = nullptr;
  const Table* assumptions = nullptr;
  for (std::size_t i = 1; i < tables.size(); ++i) {
    const Table& t = tables[i];
    if (!known.count(t.name)) semantic(t.line, 1, "unknown table '" + t.name + "'");
    if (arrays.count(t.name) != static_cast<std::size_t>(t.array))
      semantic(t.line, 1, t.array ? "'" + t.name + "' is a table, write [" + t.name + "]"
                                  : "'" + t.name + "' is an array of tables, write [[" + t.name + "]]");
    if (t.name == "group") group = &t;
    if (t.name == "assumptions") assumptions = &t;
  }

  // The base comes first: [space] for manifolds, [locality] for lattice field spaces.
  const Table* space = nullptr;
  const Table* locality = nullptr;
  for (const Table& t : tables) {
    if (t.name == "space") space = &t;
    if (t.name == "locality") locality = &t;
  }
  if (space && locality) semantic(locality->line, 1, "a scenario has either [space] or [locality], not both");
  if (!space && !locality) semantic(1, 1, "missing [space] (or [locality] for a lattice scenario)");
  if (space) read_space(sc, *space);
  if (locality) read_locality(sc, *locality);

  if (!group) semantic(1, 1, "missing [group] table: at least one generator is required");
  {
    Fields g(*group, {"relations"});
    for (const Value* v : g.strings("relations")) sc.relations.push_back(v->text);
  }
  for (const Table& t : tables) {
    if (t.name == "group.generator") read_generator(sc, t);
    if (t.name == "group.lie") read_lie(sc, t);
  }
  if (sc.generators.empty() && sc.lie.empty())
    semantic(group->line, 1, "group needs at least one generator ([[group.generator]] or [[group.lie]])");

  if (!assumptions) semantic(1, 1, "missing [assumptions] table (A1, A2, A3 must be stated)");
  {
    Fields a(*assumptions, {"A1", "A2", "A3"});
    sc.assumptions = Assumptions{a.boolean("A1"), a.boolean("A2"), a.boolean("A3")};
  }

  for (const Table& t : tables) {
    if (t.name == "connection") {
      Fields f(t, {"rho"});
      const Value& v = f.typed("rho", Value::Kind::string, "a string");
      if (sc.lattice())
        sc.rho_density = LocalOneForm::parse(v.text, sc.locality->jet_order, v.line, v.column);
      else
        sc.rho = vector_expr(v, expr::Context::manifold(sc.space->dimension), sc.space->dimension, "rho");
    } else if (t.name == "section") {
      Fields f(t, {"lambda"});
      const Value& v = f.typed("lambda", Value::Kind::string, "a string");
      if (sc.lattice())
        sc.lambda_density = LocalDensity::parse(v.text, sc.locality->jet_order, v.line, v.column);
      else
        sc.lambda = scalar(v, expr::Context::manifold(sc.space->dimension));
    } else if (t.name == "solver") {
      read_solver(sc, t);
    } else if (t.name == "path") {
      if (sc.lattice()) semantic(t.line, 1, "lattice scenarios generate their own paths");
      Fields f(t, {"name", "point", "samples"});
      PathSpec p;
      p.name = f.str("name");
      p.point = vector_expr(f.typed("point", Value::Kind::string, "a string"),
                            with(expr::Context::manifold(sc.space->dimension), false, true), sc.space->dimension, "point");
      p.samples = static_cast<int>(f.integer("samples", static_cast<long>(kDefaultPathSamples)));
      if (p.samples < 2) semantic(f.get("samples").line, f.get("samples").column, "a path needs at least 2 samples");
      for (const auto& other : sc.paths)
        if (other.name == p.name) semantic(t.line, 1, "duplicate path name '" + p.name + "'");
      sc.paths.push_back(std::move(p));
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorKind::usage, "cannot read scenario file '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), file + ": " + e.detail());
  }
}

inline std::string print_scenario(const Scenario& sc) { return print_document(sc.document); }

// ---------------------------------------------------------------------------
// Building runtime objects

namespace detail {

inline Vec eval_vector(const std::vector<expr::Expression>& es, const expr::Env& env) {
  Vec v(static_cast<Eigen::Index>(es.size()));
  for (std::size_t i = 0; i < es.size(); ++i) v[static_cast<Eigen::Index>(i)] = es[i].eval(env);
  return v;
}

inline expr::Env at_point(const Vec& x) {
  expr::Env env;
  env.coords = std::span<const double>(x.data(), static_cast<std::size_t>(x.size()));
  return env;
}

/// "0.5 dx1", "x1 dx2 - x2 dx1".
inline std::string form_text(const std::vector<expr::Expression>& comps) {
  return describe_form(FormBasis::from_exprs({comps}, ""), Vec::Ones(1));
}

inline Vec lattice_samples(const LatticeBase& lat, const expr::Expression& e) {
  return lat.sample([&](double x) {
    expr::Env env;
    env.site = x;
    return e.eval(env);
  });
}

}  // namespace detail

inline ParameterSpace build_space(const Scenario& sc) {
  if (sc.lattice()) {
    const auto& l = *sc.locality;
    return ParameterSpace::euclidean(l.sites, -l.field_range, l.field_range);
  }
  const SpaceSpec& s = *sc.space;
  if (s.topology == "torus") return ParameterSpace::torus(s.dimension, s.period, s.fd_step);
  std::vector<Axis> axes;
  for (int i = 0; i < s.dimension; ++i) axes.push_back(Axis{s.lower[static_cast<std::size_t>(i)], s.upper[static_cast<std::size_t>(i)]});
  return ParameterSpace(Topology::euclidean_box, axes, s.fd_step);
}

inline LatticeBase build_lattice(const Scenario& sc) {
  if (!sc.lattice()) fail(ErrorKind::usage, "scenario '" + sc.name + "' has no [locality] table");
  return LatticeBase(sc.locality->sites, sc.locality->period);
}

inline FieldBundle build_field_bundle(const Scenario& sc) {
  using namespace detail;
  LatticeBase lat = build_lattice(sc);
  std::vector<FieldDiscrete> discrete;
  for (const auto& g : sc.generators) {
    FieldDiscrete d;
    d.label = g.label;
    d.in_identity_component = g.identity_component;
    d.kind = g.kind == "site_shift" ? FieldDiscrete::Kind::site_shift : FieldDiscrete::Kind::fiber_affine;
    d.sites = g.sites;
    d.scale = g.scale;
    if (d.kind == FieldDiscrete::Kind::fiber_affine) d.chi = lattice_samples(lat, g.chi);
    auto a = *g.field_alpha;
    d.alpha = [lat, a](long n, const Vec& s) { return a.eval(lat, s, static_cast<double>(n)); };
    discrete.push_back(std::move(d));
  }
  std::vector<FieldLie> lies;
  for (const auto& l : sc.lie) {
    FieldLie X;
    X.label = l.label;
    X.kind = l.kind == "shift" ? FieldLie::Kind::shift : FieldLie::Kind::fiber;
    if (X.kind == FieldLie::Kind::fiber) X.chi = lattice_samples(lat, l.chi);
    auto a = *l.field_alpha;
    X.alpha = [lat, a](double t, const Vec& s) { return a.eval(lat, s, t); };
    lies.push_back(std::move(X));
  }
  Connection c = sc.rho_density ? Connection{sc.rho_density->form(lat)} : Connection::flat(lat.sites());
  // relations need the action to resolve labels; build once without, then parse
  FieldBundle probe = FieldBundle::make(lat, sc.locality->jet_order, discrete, lies, {}, c, sc.rho_density,
                                        sc.locality->field_range);
  std::vector<Word> rels;
  for (const auto& r : sc.relations) rels.push_back(probe.bundle.action().parse_word(r));
  if (rels.empty()) return probe;
  return FieldBundle::make(lat, sc.locality->jet_order, std::move(discrete), std::move(lies), std::move(rels), c,
                           sc.rho_density, sc.locality->field_range);
}

inline EquivariantBundle build_bundle(const Scenario& sc) {
  using namespace detail;
  if (sc.lattice()) return build_field_bundle(sc).bundle;
  std::vector<DiscreteGenerator> gens;
  for (const auto& g : sc.generators) {
    if (g.family) {
      DiscreteGenerator d;
      d.label = g.label;
      d.in_identity_component = g.identity_component;
      auto map = g.map, inv = g.inverse;
      auto alpha = g.alpha;
      d.power = [map](long n, const Vec& x) {
        auto env = at_point(x);
        env.n = static_cast<double>(n);
        return eval_vector(map, env);
      };
      d.power_inverse = [inv](long n, const Vec& x) {
        auto env = at_point(x);
        env.n = static_cast<double>(n);
        return eval_vector(inv, env);
      };
      d.alpha = [alpha](long n, const Vec& x) {
        auto env = at_point(x);
        env.n = static_cast<double>(n);
        return alpha.eval(env);
      };
      gens.push_back(std::move(d));
    } else {
      auto map = g.map, inv = g.inverse;
      auto alpha = g.alpha;
      gens.push_back(DiscreteGenerator::from_step(
          g.label, [map](const Vec& x) { return eval_vector(map, at_point(x)); },
          [inv](const Vec& x) { return eval_vector(inv, at_point(x)); },
          [alpha](const Vec& x) { return alpha.eval(at_point(x)); }, g.identity_component));
    }
  }
  std::vector<LieGenerator> lies;
  for (const auto& l : sc.lie) {
    LieGenerator X;
    X.label = l.label;
    X.field = VectorField::from_exprs(l.field);
    if (l.flow.empty()) {
      X.flow = LieGenerator::rk4_flow(X.field);
    } else {
      auto flow = l.flow;
      X.flow = [flow](double t, const Vec& x) {
        auto env = at_point(x);
        env.t = t;
        return eval_vector(flow, env);
      };
    }
    auto alpha = l.alpha;
    X.alpha = [alpha](double t, const Vec& x) {
      auto env = at_point(x);
      env.t = t;
      return alpha.eval(env);
    };
    if (l.moment) X.declared_moment = ScalarField::from_expr(*l.moment);
    lies.push_back(std::move(X));
  }
  GroupAction probe(gens, lies);
  std::vector<Word> rels;
  for (const auto& r : sc.relations) rels.push_back(probe.parse_word(r));
  return EquivariantBundle(build_space(sc), GroupAction(std::move(gens), std::move(lies), std::move(rels)));
}

inline Connection build_connection(const Scenario& sc) {
  if (sc.lattice()) return build_field_bundle(sc).connection;
  if (sc.rho.empty()) return Connection::flat(sc.space->dimension);
  return Connection{OneForm::from_exprs(sc.rho)};
}

inline Section build_section(const Scenario& sc) {
  if (sc.lattice()) {
    if (!sc.lambda_density) return Section::reference();
    return Section::from(LocalFunctional{build_lattice(sc), *sc.lambda_density}.field());
  }
  if (!sc.lambda) return Section::reference();
  return Section::from(ScalarField::from_expr(*sc.lambda));
}

inline SolverConfig build_solver_config(const Scenario& sc) {
  SolverConfig c;
  c.seed = sc.solver.seed;
  c.fit_probes = static_cast<std::size_t>(sc.solver.fit_probes);
  c.held_out_probes = static_cast<std::size_t>(sc.solver.held_out_probes);
  c.fit_tol = sc.solver.fit_tol;
  c.held_out_tol = sc.solver.held_out_tol;
  c.condition_limit = sc.solver.condition_limit;
  return c;
}

inline VerdictConfig build_verdict_config(const Scenario& sc) {
  ParameterSpace s = build_space(sc);
  VerdictConfig v = VerdictConfig::defaults(s, sc.solver.degree);
  v.solver = build_solver_config(sc);
  if (!sc.solver.primitive_basis.empty()) {
    std::vector<std::string> names;
    for (const auto& f : sc.solver.primitive_basis) names.push_back(detail::form_text(f));
    std::string desc = "{";
    for (std::size_t i = 0; i < names.size(); ++i) desc += (i ? ", " : "") + names[i];
    v.primitive_basis = FormBasis::from_exprs(sc.solver.primitive_basis, desc + "}");
  }
  if (!sc.solver.sigma_basis.empty()) {
    std::string desc = "{";
    for (std::size_t i = 0; i < sc.solver.sigma_basis.size(); ++i) desc += (i ? ", " : "") + sc.solver.sigma_basis[i].print();
    v.sigma_basis = ScalarBasis::from_exprs(sc.solver.sigma_basis, desc + "}");
  }
  v.candidates.clear();
  v.candidate_names.clear();
  for (const auto& f : sc.solver.candidates) {
    v.candidates.push_back(OneForm::from_exprs(f));
    v.candidate_names.push_back(detail::form_text(f));
  }
  if (sc.solver.basepoint) v.basepoint = Eigen::Map<const Vec>(sc.solver.basepoint->data(), static_cast<Eigen::Index>(sc.solver.basepoint->size()));
  return v;
}

inline Path build_path(const Scenario& sc, const std::string& name) {
  for (const auto& p : sc.paths) {
    if (p.name != name) continue;
    auto point = p.point;
    return Path::from_function(
        [point](double t) {
          expr::Env env;
          env.t = t;
          return detail::eval_vector(point, env);
        },
        static_cast<std::size_t>(p.samples));
  }
  std::string known;
  for (const auto& p : sc.paths) known += (known.empty() ? "" : ", ") + p.name;
  fail(ErrorKind::usage, "unknown path '" + name + "'" + (known.empty() ? std::string(" (scenario defines no paths)") : " (known: " + known + ")"));
}

inline std::vector<LocalDensity> density_ansatz(const Scenario& sc) {
  const auto& l = *sc.locality;
  auto names = l.density_ansatz.empty() ? default_density_terms(l.jet_order, l.degree) : l.density_ansatz;
  std::vector<LocalDensity> out;
  for (const auto& n : names) out.push_back(LocalDensity::parse(n, l.jet_order));
  return out;
}

inline std::vector<LocalOneForm> one_form_ansatz(const Scenario& sc) {
  const auto& l = *sc.locality;
  auto names = l.one_form_ansatz.empty() ? default_one_form_terms(l.jet_order, std::min(l.degree, 2)) : l.one_form_ansatz;
  std::vector<LocalOneForm> out;
  for (const auto& n : names) out.push_back(LocalOneForm::parse(n, l.jet_order));
  return out;
}

}  // namespace eqhol::scenario

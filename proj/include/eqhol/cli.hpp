#pragma once

// Commands behind the eqhol executable. Each command returns a Report: a
// structured document (schema "eqhol.report/1"), a few human-readable lines
// and the process exit code. Nothing here reads the clock, so equal inputs
// give byte-identical reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqhol/local_verdict.hpp"
#include "eqhol/scenario.hpp"

namespace eqhol::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "eqhol.report/1";

struct RunOptions {
  std::string scenario_file;
  std::string scenario_dir;  // selftest
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> probes;
  std::optional<int> max_word_len;
  std::string word;
  std::string path;
  std::string base;  // "x1,x2,..." for --path auto
  bool local = false;
};

struct Report {
  json doc;
  std::vector<std::string> lines;
  int exit_code = 0;

  std::string render(const std::string& format) const {
    if (format == "text") {
      std::string out;
      for (const auto& l : lines) out += l + "\n";
      return out;
    }
    return doc.dump(2) + "\n";
  }
};

namespace detail {

inline json vec(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json certificate(const Certificate& c) {
  json j;
  j["found"] = c.found;
  j["unknown"] = c.unknown;
  j["expression"] = c.found ? json(c.expression) : json(nullptr);
  j["basis"] = c.basis_description;
  j["basis_size"] = c.basis_size;
  j["coefficients"] = vec(c.coefficients);
  j["fit_residual"] = c.fit_residual;
  j["fit_rms"] = c.fit_rms;
  j["held_out_residual"] = c.held_out_residual;
  j["condition_number"] = c.condition_number;
  j["text"] = c.describe();
  return j;
}

inline json stage(const StageReport& s) {
  json j;
  j["name"] = s.name;
  j["status"] = s.status;
  j["detail"] = s.detail;
  j["certificate"] = s.certificate ? certificate(*s.certificate) : json(nullptr);
  return j;
}

inline json verdict(const Verdict& v) {
  json j;
  j["verdict"] = verdict_name(v.kind);
  j["stage"] = v.stage;
  j["witness"] = v.witness;
  json st = json::array();
  for (const auto& s : v.stages) st.push_back(stage(s));
  j["stages"] = st;
  j["beta"] = v.beta ? json(v.beta_expression) : json(nullptr);
  if (v.kappa) {
    json k = json::array();
    for (std::size_t i = 0; i < v.kappa->labels.size(); ++i)
      k.push_back(json{{"generator", v.kappa->labels[i]}, {"value", v.kappa->values[i].value()}});
    j["kappa"] = k;
  } else {
    j["kappa"] = nullptr;
  }
  if (v.membership) {
    const auto& m = *v.membership;
    json mj;
    mj["member"] = m.member;
    mj["candidates"] = m.candidates;
    mj["lambda"] = vec(m.lambda);
    mj["slack"] = m.slack;
    mj["residual"] = m.residual;
    mj["text"] = m.describe();
    j["k_membership"] = mj;
  } else {
    j["k_membership"] = nullptr;
  }
  if (v.revalidation) {
    const auto& r = *v.revalidation;
    j["revalidation"] = json{{"primitive", r.primitive}, {"holonomy", r.holonomy}, {"section", r.section},
                             {"pairs", r.pairs}, {"note", r.note}};
  } else {
    j["revalidation"] = nullptr;
  }
  return j;
}

inline void apply_overrides(scenario::Scenario& sc, const RunOptions& o) {
  if (o.seed) sc.solver.seed = *o.seed;
  if (o.tol) sc.solver.fit_tol = *o.tol;
  if (o.probes) {
    sc.solver.probes = *o.probes;
    sc.solver.fit_probes = *o.probes;
    sc.solver.held_out_probes = *o.probes;
  }
  if (o.max_word_len) sc.solver.word_length = *o.max_word_len;
}

inline json resolved_config(const scenario::Scenario& sc) {
  const auto& s = sc.solver;
  json c;
  c["seed"] = s.seed;
  c["tol"] = s.fit_tol;
  c["held_out_tol"] = s.held_out_tol;
  c["probes"] = s.probes;
  c["fit_probes"] = s.fit_probes;
  c["held_out_probes"] = s.held_out_probes;
  c["max_word_len"] = s.word_length;
  c["condition_limit"] = s.condition_limit;
  c["degree"] = s.degree;
  if (sc.lattice()) {
    const auto& l = *sc.locality;
    c["lattice"] = json{{"sites", l.sites}, {"period", l.period}, {"jet_order", l.jet_order}, {"degree", l.degree},
                        {"field_range", l.field_range}, {"paths_per_generator", l.paths}};
    json dens = json::array(), forms = json::array();
    for (const auto& d : scenario::density_ansatz(sc)) dens.push_back(d.expr.print());
    for (const auto& f : scenario::one_form_ansatz(sc)) forms.push_back(f.expr.print());
    c["ansatz"] = json{{"densities", dens}, {"one_forms", forms}};
  } else {
    const auto& sp = *sc.space;
    json space{{"topology", sp.topology}, {"dimension", sp.dimension}, {"fd_step", sp.fd_step}};
    if (sp.topology == "torus")
      space["period"] = sp.period;
    else {
      space["lower"] = sp.lower;
      space["upper"] = sp.upper;
    }
    c["space"] = space;
    auto v = scenario::build_verdict_config(sc);
    c["ansatz"] = json{{"primitive_basis", v.primitive_basis.description},
                       {"sigma_basis", v.sigma_basis.description},
                       {"candidates", v.candidate_names}};
  }
  return c;
}

inline json scenario_echo(const scenario::Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["description"] = sc.description;
  j["kind"] = sc.lattice() ? "lattice" : "manifold";
  j["assumptions"] = json{{"A1", sc.assumptions.a1}, {"A2", sc.assumptions.a2}, {"A3", sc.assumptions.a3}};
  return j;
}

inline Report envelope(const std::string& command) {
  Report r;
  r.doc["schema"] = kReportSchema;
  r.doc["command"] = command;
  return r;
}

inline void attach(Report& r, const scenario::Scenario& sc) {
  r.doc["scenario"] = scenario_echo(sc);
  r.doc["config"] = resolved_config(sc);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline Vec parse_point(const std::string& text, int dim) {
  std::vector<double> xs;
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream is(t);
  double x;
  while (is >> x) xs.push_back(x);
  if (!is.eof() || static_cast<int>(xs.size()) != dim)
    fail(ErrorKind::usage, "--base needs " + std::to_string(dim) + " comma-separated numbers");
  return Eigen::Map<const Vec>(xs.data(), dim);
}

// --- commands --------------------------------------------------------------

inline Report check_cocycle_cmd(const scenario::Scenario& sc) {
  Report r = envelope("check-cocycle");
  attach(r, sc);
  auto b = scenario::build_bundle(sc);
  CocycleConfig cfg;
  cfg.word_length = sc.solver.word_length;
  cfg.probes = sc.solver.probes;
  cfg.seed = sc.solver.seed;
  cfg.tol = sc.solver.fit_tol;
  CocycleReport rep = check_cocycle(b, cfg);
  bool ok = rep.ok(cfg.tol);
  json res;
  res["ok"] = ok;
  res["checks"] = rep.checks;
  res["max_residual"] = rep.max_residual;
  res["witness"] = ok ? json(nullptr)
                      : json{{"kind", rep.witness_kind}, {"words", rep.witness_words}, {"point", vec(rep.witness_point)}};
  r.doc["result"] = res;
  r.lines.push_back(std::string("cocycle ") + (ok ? "OK" : "FAILED") + ": " + std::to_string(rep.checks) +
                    " checks, max residual " + fmt(rep.max_residual));
  if (!ok) r.lines.push_back("witness: " + rep.describe());
  r.exit_code = ok ? 0 : 1;
  return r;
}

inline Report anomaly_cmd(const scenario::Scenario& sc) {
  Report r = envelope("anomaly");
  attach(r, sc);
  auto b = scenario::build_bundle(sc);
  auto c = scenario::build_connection(sc);
  auto sec = scenario::build_section(sc);
  const auto& lie = b.action().lie();
  if (lie.empty()) fail(ErrorKind::usage, "scenario '" + sc.name + "' has no Lie generators");
  auto probes = HaltonProbes(b.space(), sc.solver.seed, 0.2).take(static_cast<std::size_t>(std::min(sc.solver.probes, 32)));
  json gens = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < lie.size(); ++k) {
    ScalarField flow = anomaly_flow(b, sec, k);
    ScalarField mom = anomaly_moment(b, c, sec, k);
    double diff = 0.0, sup = 0.0;
    json samples = json::array();
    for (std::size_t p = 0; p < probes.size(); ++p) {
      double a = flow(probes[p]);
      diff = std::max(diff, std::abs(a - mom(probes[p])));
      sup = std::max(sup, std::abs(a));
      if (p < 3) samples.push_back(json{{"point", vec(probes[p])}, {"value", a}});
    }
    worst = std::max(worst, diff);
    gens.push_back(json{{"generator", lie[k].label}, {"sup", sup}, {"flow_vs_moment", diff}, {"samples", samples}});
    r.lines.push_back("a(" + lie[k].label + "): sup " + fmt(sup) + ", flow vs moment " + fmt(diff));
  }
  json closure = json::array();
  for (std::size_t i = 0; i < lie.size(); ++i)
    for (std::size_t j = i + 1; j < lie.size(); ++j) {
      double res = sup_norm(lie_cocycle_residual(b, sec, i, j, probes), probes);
      worst = std::max(worst, res);
      closure.push_back(json{{"pair", {lie[i].label, lie[j].label}}, {"residual", res}});
      r.lines.push_back("closure [" + lie[i].label + ", " + lie[j].label + "]: " + fmt(res));
    }
  bool ok = worst <= 1e-5;
  r.doc["result"] = json{{"ok", ok}, {"generators", gens}, {"closure", closure}};
  r.exit_code = ok ? 0 : 1;
  return r;
}

inline Report holonomy_cmd(const scenario::Scenario& sc, const RunOptions& o) {
  Report r = envelope("holonomy");
  attach(r, sc);
  if (o.word.empty() || o.path.empty()) fail(ErrorKind::usage, "holonomy needs --word and --path");
  auto b = scenario::build_bundle(sc);
  auto c = scenario::build_connection(sc);
  auto sec = scenario::build_section(sc);
  Word w = b.action().parse_word(o.word);
  Path path = [&] {
    if (o.path != "auto") return scenario::build_path(sc, o.path);
    Vec x = o.base.empty() ? Vec(Vec::Zero(b.space().dimension())) : parse_point(o.base, b.space().dimension());
    return path_in_c_phi(b, w, x, Vec::Zero(b.space().dimension()));
  }();
  HolonomyResult h = equivariant_holonomy(b, c, sec, w, path, o.path);
  r.doc["result"] = json{{"word", h.word}, {"path", o.path}, {"value", h.value.value()}, {"formula", h.formula.value()},
                         {"lift", h.lift.value()}, {"cross_check", h.cross_check}};
  r.lines.push_back("hol(" + h.word + ", " + o.path + ") = " + fmt(h.value.value()) + " mod 1 (lift cross-check " +
                    fmt(h.cross_check) + ")");
  return r;
}

inline Report curvature_cmd(const scenario::Scenario& sc) {
  Report r = envelope("curvature");
  attach(r, sc);
  auto b = scenario::build_bundle(sc);
  auto c = scenario::build_connection(sc);
  auto sec = scenario::build_section(sc);
  auto probes = HaltonProbes(b.space(), sc.solver.seed, 0.2).take(static_cast<std::size_t>(std::min(sc.solver.probes, 32)));
  ConnectionReport rep = connection_report(b, c, sec, probes);
  double curv = 0.0;
  for (const Vec& x : probes) curv = std::max(curv, rep.curv.at(x).cwiseAbs().maxCoeff());
  json res;
  res["closedness_residual"] = rep.closedness_residual;
  res["moment_residual"] = rep.moment_residual;
  res["curvature_sup"] = curv;
  json mu = json::array();
  for (std::size_t k = 0; k < rep.moment.size(); ++k)
    mu.push_back(json{{"generator", b.action().lie()[k].label}, {"sup", sup_norm(rep.moment[k], probes)}});
  res["moment"] = mu;
  json inv = json::array();
  for (std::size_t g = 0; g < b.action().generators().size(); ++g) {
    Word w = single(Letter::Kind::discrete, g, 1.0);
    inv.push_back(json{{"generator", b.action().generators()[g].label}, {"residual", sup_norm(invariance_residual(b, c, w), probes)}});
  }
  res["invariance"] = inv;
  r.doc["result"] = res;
  r.lines.push_back("curvature: sup |curv| " + fmt(curv) + ", d(omega) " + fmt(rep.closedness_residual) +
                    ", i_X omega - d mu " + fmt(rep.moment_residual));
  for (const auto& m : mu) r.lines.push_back("mu(" + m["generator"].get<std::string>() + "): sup " + fmt(m["sup"].get<double>()));
  return r;
}

inline Report verdict_cmd(const scenario::Scenario& sc, bool local) {
  Report r = envelope(local ? "verdict --local" : "verdict");
  attach(r, sc);
  Verdict v;
  if (local) {
    if (!sc.lattice()) fail(ErrorKind::usage, "verdict --local needs a lattice scenario ([locality] table)");
    auto fb = scenario::build_field_bundle(sc);
    LocalVerdictConfig cfg;
    cfg.solver = scenario::build_solver_config(sc);
    cfg.density_ansatz = scenario::density_ansatz(sc);
    cfg.one_form_ansatz = scenario::one_form_ansatz(sc);
    cfg.paths_per_generator = sc.locality->paths;
    bool all = !sc.lie.empty();
    for (const auto& l : sc.lie) all = all && l.moment_density.has_value();
    if (all)
      for (const auto& l : sc.lie) cfg.moment_densities.push_back(*l.moment_density);
    v = local_verdict_pipeline(fb, scenario::build_section(sc), cfg);
  } else {
    if (sc.lattice()) fail(ErrorKind::usage, "lattice scenarios are decided by verdict --local");
    auto b = scenario::build_bundle(sc);
    v = verdict_pipeline(b, scenario::build_connection(sc), scenario::build_verdict_config(sc));
  }
  r.doc["result"] = verdict(v);
  r.lines.push_back(v.summary());
  for (const auto& s : v.stages) r.lines.push_back("  " + s.name + ": " + s.status + (s.detail.empty() ? "" : " (" + s.detail + ")"));
  if (v.kappa && !v.kappa->labels.empty()) {
    std::string k;
    for (std::size_t i = 0; i < v.kappa->labels.size(); ++i)
      k += (i ? ", " : "") + std::string("kappa(") + v.kappa->labels[i] + "^n) = " + fmt(v.kappa->values[i].value()) + " n";
    r.lines.push_back("  " + k);
  }
  r.exit_code = exit_code(v.kind);
  return r;
}

// --- selftest ----------------------------------------------------------------

struct Check {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string note;
  bool pass() const { return residual <= tolerance; }
};

inline Word random_word(const GroupAction& a, std::mt19937_64& rng) {
  std::vector<Letter> letters;
  for (std::size_t g = 0; g < a.generators().size(); ++g) letters.push_back(Letter{Letter::Kind::discrete, g, 1.0});
  for (std::size_t l = 0; l < a.lie().size(); ++l) letters.push_back(Letter{Letter::Kind::lie, l, 1.0});
  std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
  std::uniform_int_distribution<int> len(1, 2), expo(-2, 2);
  std::uniform_real_distribution<double> time(-0.8, 0.8);
  Word w;
  for (int i = len(rng); i > 0; --i) {
    Letter l = letters[pick(rng)];
    if (l.kind == Letter::Kind::discrete) {
      int e = expo(rng);
      l.param = e == 0 ? 1.0 : e;
    } else {
      l.param = time(rng);
    }
    w.letters.push_back(l);
  }
  return w;
}

inline Word first_letter(const GroupAction& a) {
  if (!a.generators().empty()) return single(Letter::Kind::discrete, 0, 1.0);
  return single(Letter::Kind::lie, 0, 0.4);
}

/// A section change that is invariant under nothing in the bundled scenarios.
inline ScalarField probe_section(const ParameterSpace& s, bool lattice) {
  int d = s.dimension();
  if (lattice)
    return ScalarField([d](const Vec& f) { return 0.05 * f.squaredNorm() / d + 0.02 * std::sin(f[0]); });
  return ScalarField([d](const Vec& x) { return 0.1 * x[0] * x[0] + 0.05 * std::sin(x[d - 1]); });
}

inline std::vector<Check> selftest_scenario(const scenario::Scenario& sc, std::uint64_t seed, int draws) {
  std::vector<Check> out;
  auto reparsed = scenario::parse_document(scenario::print_document(sc.document));
  out.push_back(Check{"round-trip", reparsed == sc.document ? 0.0 : 1.0, 0.0, ""});

  auto b = scenario::build_bundle(sc);
  auto c = scenario::build_connection(sc);
  auto sec = scenario::build_section(sc);
  const auto& s = b.space();
  const auto& a = b.action();

  CocycleConfig cc;
  cc.word_length = std::min(sc.solver.word_length, 3);
  cc.probes = 8;
  cc.seed = seed;
  auto cr = check_cocycle(b, cc);
  out.push_back(Check{"cocycle", cr.max_residual, 1e-6, cr.describe()});

  std::mt19937_64 rng(seed * 1315423911ULL + 17);
  HaltonProbes bases(s, seed + 3, 0.35);
  double dual = 0.0;
  Check escape{"dual-holonomy", 0.0, kDualMethodTolerance, ""};
  int done = 0;
  for (int attempt = 0; done < draws && attempt < 8 * draws; ++attempt) {
    Word w = random_word(a, rng);
    Vec bend = sc.lattice() ? Vec(0.05 * Vec::Ones(s.dimension())) : random_bend(s, rng);
    // long words can carry the path out of the chart; such draws are redrawn
    try {
      Path g = path_in_c_phi(b, w, bases(static_cast<std::size_t>(attempt)), bend, 256);
      bool inside = true;
      for (const Vec& p : g.points()) inside = inside && s.contains(p);
      if (!inside) continue;
      double lift = holonomy_by_lift(b, c, sec, w, g).value();
      double formula = holonomy_formula_lift(b, c, sec, w, g);
      dual = std::max(dual, circle_distance(lift, formula));
      ++done;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::domain) throw;
    }
  }
  escape.residual = done == draws ? dual : 1.0;
  escape.note = std::to_string(done) + " draws";
  out.push_back(escape);

  auto probes = HaltonProbes(s, seed + 5, 0.25).take(sc.lattice() ? 8 : 16);
  ScalarField lam = probe_section(s, sc.lattice());
  Section moved = sec.is_reference ? Section::from(lam) : sec.shifted(lam);

  // section change: alpha^S' is again a cocycle and differs by the coboundary of Lambda
  {
    double law = 0.0, cob = 0.0;
    for (int k = 0; k < 6; ++k) {
      Word w1 = random_word(a, rng), w2 = random_word(a, rng);
      for (const Vec& x : probes) {
        Vec y = b.apply(w1, x);
        if (!s.contains(y)) continue;
        double lhs = section_alpha_lift(b, moved, w2 * w1)(x);
        double rhs = section_alpha_lift(b, moved, w1)(x) + section_alpha_lift(b, moved, w2)(y);
        law = std::max(law, circle_distance(lhs, rhs));
        double diff = section_alpha_lift(b, moved, w1)(x) - section_alpha_lift(b, sec, w1)(x);
        cob = std::max(cob, circle_distance(diff, lam(x) - lam(y)));
      }
    }
    out.push_back(Check{"section-change", std::max(law, cob), 1e-6, ""});
  }

  {
    TwoForm d_ref = exterior_derivative(s, section_rho(s, c, sec));
    TwoForm d_moved = exterior_derivative(s, section_rho(s, c, moved));
    double diff = 0.0;
    for (const Vec& x : probes) diff = std::max(diff, (d_ref.at(x) - d_moved.at(x)).cwiseAbs().maxCoeff());
    out.push_back(Check{"curvature-section-independent", diff, 1e-4, ""});
  }

  if (!a.lie().empty()) {
    double shift = 0.0, closure = 0.0;
    OneForm dlam = exterior_derivative(s, lam);
    for (std::size_t k = 0; k < a.lie().size(); ++k) {
      // a^S'(X) = a^S(X) - X(Lambda)
      ScalarField shifted = anomaly_flow(b, moved, k) - anomaly_flow(b, sec, k) + interior(a.lie()[k].field, dlam);
      shift = std::max(shift, sup_norm(shifted, probes));
    }
    for (std::size_t i = 0; i < a.lie().size(); ++i)
      for (std::size_t j = i + 1; j < a.lie().size(); ++j)
        closure = std::max(closure, sup_norm(lie_cocycle_residual(b, moved, i, j, probes), probes));
    out.push_back(Check{"anomaly-section-shift", shift, 1e-5, ""});
    out.push_back(Check{"anomaly-closure", closure, 1e-5, a.lie().size() < 2 ? "one Lie generator, nothing to pair" : ""});
  }

  if (sc.lattice()) {
    auto fb = scenario::build_field_bundle(sc);
    if (fb.rho_density) {
      std::vector<LocalDensity> mds;
      for (const auto& l : sc.lie)
        if (l.moment_density) mds.push_back(*l.moment_density);
      if (mds.size() != sc.lie.size()) mds.clear();
      auto lr = local_connection_check(fb, mds, seed, 6);
      out.push_back(Check{"locality-declaration",
                          std::max({lr.rho_residual, lr.curvature_residual, lr.moment_residual}), 1e-6, ""});
    }
    Vec f = HaltonProbes(s, seed + 7, 0.3)(0);
    for (const auto& X : fb.lie) {
      auto ld = lie_derivative_local(fb.lattice, LocalDensity::parse("u^2 + x*u1^2", fb.jet_order), X, f);
      out.push_back(Check{"lie-derivative-" + X.label, std::abs(ld.by_flow - ld.by_density), 1e-6, ""});
    }
  }

  // without A2 the scenario claims no invariant connection, and the
  // identities below would only measure that
  if (!sc.assumptions.a2) {
    out.push_back(Check{"invariant-connection-identities", 0.0, 0.0, "skipped: A2 = false"});
    return out;
  }

  ConnectionReport rep = connection_report(b, c, sec, probes);
  out.push_back(Check{"equivariant-curvature-closed", std::max(rep.closedness_residual, rep.moment_residual), 1e-4, ""});

  if (!a.lie().empty()) {
    double moment_id = 0.0, desc = 0.0;
    for (std::size_t k = 0; k < a.lie().size(); ++k)
      for (const Section* S : {&sec, &moved}) {
        moment_id = std::max(moment_id, sup_norm(anomaly_flow(b, *S, k) - anomaly_moment(b, c, *S, k), probes));
        desc = std::max(desc, sup_norm(descent_residual(b, c, *S, k), probes));
      }
    out.push_back(Check{"anomaly-moment", moment_id, 1e-5, ""});
    out.push_back(Check{"descent", desc, 1e-4, ""});
  }

  double inv = 0.0;
  for (std::size_t g = 0; g < a.generators().size(); ++g)
    inv = std::max(inv, sup_norm(invariance_residual(b, c, single(Letter::Kind::discrete, g, 1.0)), probes));
  for (std::size_t l = 0; l < a.lie().size(); ++l)
    inv = std::max(inv, sup_norm(invariance_residual(b, c, single(Letter::Kind::lie, l, 0.3)), probes));
  out.push_back(Check{"connection-invariance", inv, 1e-5, ""});

  Word phi = first_letter(a);
  Vec x = bases(0);
  Vec bend = sc.lattice() ? Vec(0.05 * Vec::Ones(s.dimension())) : random_bend(s, rng);
  Path gamma = path_in_c_phi(b, phi, x, bend);
  Path zeta = Path::from_function([x, s](double t) -> Vec { return x + (1.0 - t) * 0.1 * Vec::Ones(s.dimension()); });
  auto ir = holonomy_invariance_suite(b, c, moved, phi, phi, gamma, zeta);
  out.push_back(Check{"holonomy-invariance", ir.max_residual(), 1e-5, ir.translate_note});
  return out;
}

inline Report selftest_cmd(const RunOptions& o) {
  Report r = envelope("selftest");
  std::uint64_t seed = o.seed.value_or(1);
  std::string dir = o.scenario_dir.empty() ? std::string(EQHOL_SCENARIO_DIR) : o.scenario_dir;
  std::vector<std::string> files;
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::usage, "scenario directory '" + dir + "' not found");
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".scn") files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::usage, "no .scn files in '" + dir + "'");

  r.doc["config"] = json{{"seed", seed}, {"draws_per_scenario", 12}};
  json list = json::array();
  bool all = true;
  std::size_t total = 0, passed = 0;
  for (const auto& f : files) {
    json sj;
    sj["file"] = f;
    std::vector<Check> checks;
    try {
      auto sc = scenario::load_scenario(dir + "/" + f);
      sj["name"] = sc.name;
      checks = selftest_scenario(sc, seed, 12);
    } catch (const Error& e) {
      checks.push_back(Check{"error", 1.0, 0.0, e.what()});
    }
    json cj = json::array();
    for (const auto& c : checks) {
      cj.push_back(json{{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", c.pass()},
                        {"note", c.note}});
      ++total;
      passed += c.pass();
      all = all && c.pass();
      r.lines.push_back(std::string(c.pass() ? "PASS " : "FAIL ") + f + " " + c.name + " (" + fmt(c.residual) + " <= " +
                        fmt(c.tolerance) + ")");
    }
    sj["checks"] = cj;
    list.push_back(sj);
  }
  r.doc["scenarios"] = list;
  r.doc["result"] = json{{"ok", all}, {"checks", total}, {"passed", passed}};
  r.lines.push_back(std::to_string(passed) + "/" + std::to_string(total) + " checks passed");
  r.exit_code = all ? 0 : 1;
  return r;
}

}  // namespace detail

inline Report error_report(const std::string& command, const Error& e) {
  Report r = detail::envelope(command);
  r.doc["error"] = json{{"kind", kind_name(e.kind())}, {"stage", e.stage()}, {"message", e.detail()}};
  r.lines.push_back(std::string("error") + (e.stage().empty() ? "" : " in stage " + e.stage()) + ": " + e.what());
  r.exit_code = 1;
  return r;
}

namespace detail {

inline Report run_unstamped(const std::string& command, const RunOptions& o) {
  std::optional<scenario::Scenario> sc;
  try {
    if (command == "selftest") return selftest_cmd(o);
    if (o.scenario_file.empty()) fail(ErrorKind::usage, command + " needs a scenario file");
    sc = scenario::load_scenario(o.scenario_file);
    apply_overrides(*sc, o);
    if (command == "check-cocycle") return check_cocycle_cmd(*sc);
    if (command == "anomaly") return anomaly_cmd(*sc);
    if (command == "holonomy") return holonomy_cmd(*sc, o);
    if (command == "curvature") return curvature_cmd(*sc);
    if (command == "verdict") return verdict_cmd(*sc, o.local);
    fail(ErrorKind::usage, "unknown command '" + command + "'");
  } catch (const Error& e) {
    Report r = error_report(command, e);
    if (sc) {
      r.doc.erase("error");
      attach(r, *sc);
      r.doc["error"] = json{{"kind", kind_name(e.kind())}, {"stage", e.stage()}, {"message", e.detail()}};
    }
    return r;
  }
}

}  // namespace detail

/// Runs one command; library errors become an error report with exit code 1.
inline Report run(const std::string& command, const RunOptions& o) {
  Report r = detail::run_unstamped(command, o);
  r.doc["exit_code"] = r.exit_code;
  return r;
}

}  // namespace eqhol::cli

#pragma once

// The lattice pipeline: declared local densities are checked against the
// generic evaluators, then a local section and a local invariant primitive
// are searched for. Certificates are re-checked through the generic
// machinery, which knows nothing about locality.

#include <string>
#include <vector>

#include "eqhol/locality.hpp"
#include "eqhol/verdict.hpp"

namespace eqhol {

struct LocalVerdictConfig {
  SolverConfig solver;
  std::vector<LocalDensity> density_ansatz;
  std::vector<LocalOneForm> one_form_ansatz;
  std::vector<LocalDensity> moment_densities;  // one per Lie generator, or none
  int paths_per_generator = 3;
  int revalidation_paths = 20;
};

inline Verdict local_verdict_pipeline(const FieldBundle& fb, const Section& sec, const LocalVerdictConfig& cfg) {
  Verdict v;
  const auto& lat = fb.lattice;

  if (fb.rho_density) {
    auto r = detail::in_stage("local-connection", [&] { return local_connection_check(fb, cfg.moment_densities, cfg.solver.seed); });
    std::ostringstream os;
    os << "declared densities match on " << r.probes << " probe pairs (rho " << r.rho_residual << ", curvature "
       << r.curvature_residual << ", moment " << r.moment_residual << ")";
    v.stages.push_back(StageReport{"local-connection", "measured", os.str(), std::nullopt});
  } else {
    v.stages.push_back(StageReport{"local-connection", "skipped", "flat connection, nothing declared", std::nullopt});
  }

  if (!fb.lie.empty()) {
    auto cert = detail::in_stage("local-section", [&] { return local_section_search_lie(fb, sec, cfg.density_ansatz, cfg.solver); });
    if (!cert.found) {
      v.stages.push_back(StageReport{"local-section", "no-certificate", cert.describe(), cert});
      v.kind = VerdictKind::inconclusive;
      v.stage = "local-section";
      v.witness = "ansatz-limited: " + cert.describe();
      return v;
    }
    v.stages.push_back(StageReport{"local-section", "certificate", "local section S exp(2 pi i " + cert.expression + ")", cert});
  }

  auto paths = detail::in_stage("local-global", [&] { return field_paths(fb, cfg.paths_per_generator, cfg.solver.seed); });
  auto cert = detail::in_stage("local-global", [&] { return local_global_search(fb, cfg.one_form_ansatz, paths, cfg.solver); });
  if (!cert.found) {
    v.stages.push_back(StageReport{"local-global", "no-certificate", cert.describe(), cert});
    v.kind = VerdictKind::inconclusive;
    v.stage = "local-global";
    v.witness = "ansatz-limited: " + cert.describe();
    return v;
  }
  v.stages.push_back(StageReport{"local-global", "certificate", "beta = " + cert.expression, cert});
  v.beta = cert.form;
  v.beta_expression = cert.expression;

  // generic re-check on fresh paths and probe fields
  detail::in_stage("revalidation", [&] {
    Revalidation rv;
    const auto& b = fb.bundle;
    int per = std::max(1, cfg.revalidation_paths / std::max<int>(1, static_cast<int>(fb.discrete.size())));
    if (!fb.discrete.empty()) {
      for (const auto& [w, path] : field_paths(fb, per, cfg.solver.seed + 5000)) {
        CircleValue hol = equivariant_holonomy(b, fb.connection, Section::reference(), w, path).value;
        rv.holonomy = std::max(rv.holonomy, CircleValue(line_integral(b.space(), cert.form, path)).distance(hol));
        ++rv.pairs;
      }
    }
    auto probes = HaltonProbes(b.space(), cfg.solver.seed + 6000, 0.3).take(16);
    auto rep = connection_report(b, fb.connection, Section::reference(), probes);
    rv.primitive = detail::primitive_residual(b, rep.equivariant, cert.form, probes, true).max();
    rv.note = "lattice with " + std::to_string(lat.sites()) + " sites";
    if (rv.primitive > 1e-4 || rv.holonomy > 1e-5) {
      std::ostringstream os;
      os << "local certificate fails the generic re-check (primitive " << rv.primitive << ", holonomy " << rv.holonomy << ")";
      fail(ErrorKind::consistency, os.str());
    }
    v.revalidation = rv;
    return 0;
  });

  v.kind = VerdictKind::cancels;
  v.stage = "local-global";
  v.witness = "local invariant primitive beta = " + cert.expression;
  return v;
}

}  // namespace eqhol

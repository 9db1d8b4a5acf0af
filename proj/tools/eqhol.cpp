#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "eqhol/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"eqhol: equivariant holonomy and anomaly cancellation checks"};
  app.require_subcommand(1);

  eqhol::cli::RunOptions opts;
  std::string out, format = "json-like";
  std::uint64_t seed = 0;
  double tol = 0.0;
  int probes = 0, max_word_len = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed for probes and paths");
    sub->add_option("--tol", tol, "fit tolerance");
    sub->add_option("--probes", probes, "probe count")->check(CLI::PositiveNumber);
    sub->add_option("--max-word-len", max_word_len, "longest word in cocycle checks")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "write the report here instead of stdout");
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"json-like", "json", "text"}));
  };
  auto with_scenario = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("scenario", opts.scenario_file, "scenario file (.scn)")->required();
    common(sub);
    return sub;
  };

  with_scenario("check-cocycle", "check the cocycle law on words up to --max-word-len");
  with_scenario("anomaly", "infinitesimal anomaly per Lie generator, flow vs moment");
  auto* hol = with_scenario("holonomy", "equivariant holonomy of one word along one path");
  hol->add_option("--word", opts.word, "group word, e.g. g^1 or g^2*h^-1")->required();
  hol->add_option("--path", opts.path, "named [[path]] from the scenario, or auto")->required();
  hol->add_option("--base", opts.base, "base point for --path auto, comma separated");
  with_scenario("curvature", "curvature, moment and invariance residuals");
  auto* ver = with_scenario("verdict", "run the obstruction pipeline");
  ver->add_flag("--local", opts.local, "use the lattice locality pipeline");
  auto* self = app.add_subcommand("selftest", "run the invariant suites on every bundled scenario");
  self->add_option("--scenarios", opts.scenario_dir, "directory of .scn files");
  common(self);

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--tol")) opts.tol = tol;
  if (sub->count("--probes")) opts.probes = probes;
  if (sub->count("--max-word-len")) opts.max_word_len = max_word_len;

  eqhol::cli::Report report = eqhol::cli::run(sub->get_name(), opts);
  std::string text = report.render(format);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) {
      std::cerr << "cannot write " << out << "\n";
      return 1;
    }
    f << text;
    if (format != "text")
      for (const auto& l : report.lines) std::cerr << l << "\n";
  }
  return report.exit_code;
}

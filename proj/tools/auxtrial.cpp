// auxtrial command-line driver.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "auxtrial/auxtrial.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(name);
    return x;
  } catch (const std::exception&) {
    throw auxtrial::ConfigError(name, "not an unsigned integer");
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "JSON experiment configuration");
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, "master seed (overrides config and AUXTRIAL_SEED)");
  sub->add_option("--replicates", c.replicates, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  sub->add_option("--workers", c.workers, "worker threads; 0 = all cores (overrides AUXTRIAL_WORKERS)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", c.out, "output directory");
}

// Modes each subcommand accepts from a config file.
bool accepts(const std::string& sub, auxtrial::Mode m) {
  using auxtrial::Mode;
  if (sub == "simulate") return m == Mode::multitest_sim || m == Mode::groupseq_sim;
  if (sub == "optimize") return m == Mode::optimize;
  if (sub == "calibrate") return m == Mode::calibrate;
  if (sub == "boundaries") return m == Mode::boundaries;
  if (sub == "prior-report") return m == Mode::prior_report;
  if (sub == "enumerate-example") return m == Mode::enumerate_example;
  if (sub == "retro") return m == Mode::retro_sim;
  return false;
}

int run(const std::string& sub, const Common& c) {
  using namespace auxtrial;
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = load_config(c.config);
  } else if (sub == "enumerate-example") {
    cfg = parse_config(json{{"mode", "enumerate-example"}, {"name", "example"}});
  } else if (sub == "boundaries") {
    cfg = parse_config(json{{"mode", "boundaries"}, {"name", "boundaries"}});
  } else {
    throw ConfigError("--config", "required for '" + sub + "'");
  }
  if (!accepts(sub, cfg.mode)) {
    throw ConfigError("mode", "'" + to_string(cfg.mode) + "' cannot be run by '" + sub + "'");
  }

  RunOptions opt;
  opt.seed = c.seed ? c.seed : env_u64("AUXTRIAL_SEED");
  if (c.workers) {
    opt.workers = *c.workers;
  } else if (const auto w = env_u64("AUXTRIAL_WORKERS")) {
    opt.workers = static_cast<int>(*w);
  }
  opt.replicates = c.replicates;
  opt.out_dir = c.out;

  const auto res = run_experiment(cfg, opt);
  if (!res.oc.rows.empty()) {
    std::ostringstream sink;
    emit_table(res.oc, TableLayout::scenario_rows, sink, &std::cout);
  }
  for (const auto& a : res.artifacts) std::cerr << "wrote " << a << '\n';
  if (res.manifest.contains("warning")) std::cerr << "warning: " << res.manifest["warning"].get<std::string>() << '\n';
  for (const auto& r : res.oc.rows) {
    const int total = r.replicates + r.failures;
    if (r.failures > 0.01 * total) {
      std::cerr << "warning: " << r.scenario << " / " << r.method << ": " << r.failures << " of " << total
                << " replicates failed and were excluded\n";
    }
  }
  return res.partial_failure ? kExitPartial : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgroup and group-sequential trial designs with auxiliary outcomes"};
  app.require_subcommand(1);
  Common common;
  const char* subs[][2] = {{"simulate", "operating characteristics of subgroup tests or sequential designs"},
                           {"optimize", "select decision-rule parameters by expected utility"},
                           {"calibrate", "bootstrap-calibrated subgroup testing"},
                           {"boundaries", "efficacy boundaries from the spending function"},
                           {"prior-report", "prior-predictive summary of the Bayesian model"},
                           {"enumerate-example", "exhaustive enumeration of the stylized two-outcome example"},
                           {"retro", "resampling study from a control-arm pool"}};
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s[0], s[1]);
    add_common(sub, common, std::string(s[0]) != "enumerate-example" && std::string(s[0]) != "boundaries");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run(name, common);
  } catch (const auxtrial::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

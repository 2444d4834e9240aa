#pragma once

// JSON experiment configuration. Every field error is reported as ConfigError
// with the dotted path of the offending field.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auxtrial/errors.hpp"
#include "auxtrial/group_seq.hpp"
#include "auxtrial/multitest.hpp"
#include "auxtrial/optimize.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/scenario.hpp"
#include "auxtrial/utility.hpp"

namespace auxtrial {

using json = nlohmann::json;

enum class Mode {
  multitest_sim,
  groupseq_sim,
  optimize,
  calibrate,
  boundaries,
  prior_report,
  enumerate_example,
  retro_sim
};

inline Mode parse_mode(const std::string& s, const std::string& field = "mode") {
  if (s == "multitest-sim") return Mode::multitest_sim;
  if (s == "groupseq-sim") return Mode::groupseq_sim;
  if (s == "optimize") return Mode::optimize;
  if (s == "calibrate") return Mode::calibrate;
  if (s == "boundaries") return Mode::boundaries;
  if (s == "prior-report") return Mode::prior_report;
  if (s == "enumerate-example") return Mode::enumerate_example;
  if (s == "retro-sim") return Mode::retro_sim;
  throw ConfigError(field, "unknown mode '" + s + "'");
}

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::multitest_sim: return "multitest-sim";
    case Mode::groupseq_sim: return "groupseq-sim";
    case Mode::optimize: return "optimize";
    case Mode::calibrate: return "calibrate";
    case Mode::boundaries: return "boundaries";
    case Mode::prior_report: return "prior-report";
    case Mode::enumerate_example: return "enumerate-example";
    case Mode::retro_sim: return "retro-sim";
  }
  return "?";
}

// Multitest methods, including the bootstrap-calibrated variant of the weighted procedure.
struct MultitestMethod {
  TestMethod base = TestMethod::bonferroni;
  bool calibrated = false;

  std::string name() const { return to_string(base) + (calibrated ? "-B" : ""); }
};

inline MultitestMethod parse_multitest_method(const std::string& s, const std::string& field) {
  if (s == "auxiliary-augmented-b" || s == "Auxiliary-Augmented-B") return {TestMethod::auxiliary_augmented, true};
  try {
    return {parse_test_method(s), false};
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

struct MultitestSettings {
  double alpha = 0.05;
  std::vector<double> beta{4.45};
  std::vector<double> prior_weights;
  std::vector<MultitestMethod> methods{{TestMethod::auxiliary_augmented, false},
                                       {TestMethod::bonferroni, false},
                                       {TestMethod::holm, false},
                                       {TestMethod::auxiliary_only, false}};
  int calibration_resamples = 2000;

  WeightedBonfConfig weighted() const {
    WeightedBonfConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.prior_weights = prior_weights;
    return c;
  }
};

struct OptimizeSettings {
  UtilityKind engine = UtilityKind::multitest;
  std::string search = "grid";
  Bounds bounds{{0.0}, {20.0}};
  std::vector<int> points{41};
  LoessOptions loess{};
  AnnealingOptions annealing{};
  int n_total = 200;
  std::vector<double> prevalence{0.6, 0.4};
};

struct RetroSettings {
  std::string pool_path;
  double p_y = 0.0;
  double p_s = 0.0;
  int n_total = 200;
};

struct PriorReportSettings {
  int n_total = 200;
  std::vector<double> prevalence{0.6, 0.4};
};

struct ExperimentConfig {
  Mode mode = Mode::multitest_sim;
  std::optional<std::uint64_t> seed;
  int replicates = 1000;
  int workers = 0;
  std::string out_dir = "out";
  std::string name = "experiment";
  std::vector<ScenarioSpec> scenarios;
  PriorHyperparams prior = PriorHyperparams::standard(2);
  MultitestSettings multitest;
  GroupSeqConfig groupseq;
  std::vector<DesignKind> designs{DesignKind::auxiliary_augmented, DesignKind::primary_only,
                                  DesignKind::auxiliary_only};
  UtilitySpec utility;
  OptimizeSettings optimize;
  RetroSettings retro;
  PriorReportSettings prior_report;
  std::optional<std::string> dataset_path;  // calibrate a single observed trial
  bool trace = false;                       // JSON-lines sequential traces
  json source = json::object();

  std::uint64_t master_seed() const {
    if (!seed) throw ConfigError("seed", "a master seed is required");
    return *seed;
  }
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(join(path, key), std::string("wrong type: ") + e.what());
  }
}

template <class T>
T get_required(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(join(path, key), "required field is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(join(path, key), std::string("wrong type: ") + e.what());
  }
}

inline void check(bool cond, const std::string& field, const std::string& msg) {
  if (!cond) throw ConfigError(field, msg);
}

inline std::vector<std::array<double, 2>> per_arm(const json& j, const std::string& key, const std::string& path,
                                                  std::size_t k) {
  const auto v = get_required<std::vector<std::vector<double>>>(j, key, path);
  check(v.size() == k, join(path, key), "need one [control, treated] pair per group");
  std::vector<std::array<double, 2>> out;
  for (const auto& p : v) {
    check(p.size() == 2, join(path, key), "each entry must be [control, treated]");
    out.push_back({p[0], p[1]});
  }
  return out;
}

inline ScenarioSpec parse_scenario(const json& j, const std::string& path) {
  check(j.is_object(), path, "scenario must be an object");
  ScenarioSpec s;
  try {
    if (j.contains("preset")) {
      const auto preset = get_required<std::string>(j, "preset", path);
      const int configuration = get_required<int>(j, "configuration", path);
      const double r = get_field<double>(j, "odds_ratio", path, 1.0);
      check(configuration >= 1 && configuration <= 5, join(path, "configuration"), "must be 1..5");
      check(r > 0.0, join(path, "odds_ratio"), "must be > 0");
      if (preset == "two-group") {
        s = two_group_scenario(configuration, r);
      } else if (preset == "six-group") {
        s = six_group_scenario(configuration, r);
      } else if (preset == "single") {
        s = single_population_scenario(configuration, r);
      } else {
        throw ConfigError(join(path, "preset"), "unknown preset '" + preset + "' (two-group, six-group, single)");
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "scenario%d R=%g", configuration, r);
      s.name = get_field<std::string>(j, "name", path, buf);
      if (j.contains("n_total")) s.n_total = get_required<int>(j, "n_total", path);
    } else {
      s.prevalence = get_required<std::vector<double>>(j, "prevalence", path);
      const auto k = s.prevalence.size();
      s.name = get_field<std::string>(j, "name", path, "scenario");
      s.p_primary = per_arm(j, "p_primary", path, k);
      s.p_auxiliary = per_arm(j, "p_auxiliary", path, k);
      s.odds_ratio = per_arm(j, "odds_ratio", path, k);
      s.n_total = get_required<int>(j, "n_total", path);
    }
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

inline GroupPrior parse_group_prior(const json& j, const std::string& path, GroupPrior g = {}) {
  g.intercept_y_mean = get_field(j, "intercept_y_mean", path, g.intercept_y_mean);
  g.intercept_y_sd = get_field(j, "intercept_y_sd", path, g.intercept_y_sd);
  g.intercept_s_mean = get_field(j, "intercept_s_mean", path, g.intercept_s_mean);
  g.intercept_s_sd = get_field(j, "intercept_s_sd", path, g.intercept_s_sd);
  g.sigma2 = get_field(j, "sigma2", path, g.sigma2);
  g.slab_mean = get_field(j, "slab_mean", path, g.slab_mean);
  g.slab_var = get_field(j, "slab_var", path, g.slab_var);
  g.beta_v = get_field(j, "beta_v", path, g.beta_v);
  g.beta_o = get_field(j, "beta_o", path, g.beta_o);
  g.primary_slab_mean = get_field(j, "primary_slab_mean", path, g.primary_slab_mean);
  g.primary_slab_var = get_field(j, "primary_slab_var", path, g.primary_slab_var);
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
  return g;
}

// "groups": [...] gives one entry per group; otherwise the top-level fields
// (or "group") apply to all `k` groups.
inline PriorHyperparams parse_prior(const json& j, const std::string& path, int k) {
  PriorHyperparams h;
  h.xi = get_field(j, "xi", path, h.xi);
  h.cy_spike = get_field(j, "cy_spike", path, h.cy_spike);
  if (j.contains("groups")) {
    const auto& arr = j.at("groups");
    check(arr.is_array() && !arr.empty(), join(path, "groups"), "must be a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      h.groups.push_back(parse_group_prior(arr[i], join(path, "groups[" + std::to_string(i) + "]")));
    }
  } else {
    const auto g = parse_group_prior(j.contains("group") ? j.at("group") : j, path);
    h.groups.assign(static_cast<std::size_t>(k), g);
  }
  check(h.xi >= 0.0 && h.xi <= 1.0, join(path, "xi"), "must lie in [0,1]");
  check(h.cy_spike >= 0.0 && h.cy_spike <= 1.0, join(path, "cy_spike"), "must lie in [0,1]");
  return h;
}

inline SamplerConfig parse_sampler(const json& j, const std::string& path) {
  SamplerConfig s;
  s.draws = get_field(j, "draws", path, s.draws);
  s.burn_in = get_field(j, "burn_in", path, s.burn_in);
  check(s.draws >= 1, join(path, "draws"), "must be >= 1");
  check(s.burn_in >= 0, join(path, "burn_in"), "must be >= 0");
  return s;
}

inline GroupSeqConfig parse_groupseq(const json& j, const std::string& path) {
  GroupSeqConfig g;
  g.n_schedule = get_field(j, "n_schedule", path, g.n_schedule);
  g.m_schedule = get_field(j, "m_schedule", path, g.m_schedule);
  g.alpha = get_field(j, "alpha", path, g.alpha);
  g.beta_e = get_field(j, "beta_e", path, g.beta_e);
  g.beta_f = get_field(j, "beta_f", path, g.beta_f);
  const auto order = get_field<std::string>(j, "interim_order", path, to_string(g.order));
  try {
    g.order = parse_interim_order(order);
  } catch (const InvalidArgument& e) {
    throw ConfigError(join(path, "interim_order"), e.what());
  }
  if (j.contains("sampler")) g.sampler = parse_sampler(j.at("sampler"), join(path, "sampler"));
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
  return g;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  check(j.is_object(), "", "configuration must be a JSON object");
  ExperimentConfig c;
  c.source = j;
  c.mode = parse_mode(get_required<std::string>(j, "mode", ""));
  if (j.contains("seed")) c.seed = get_required<std::uint64_t>(j, "seed", "");
  c.replicates = get_field(j, "replicates", "", c.replicates);
  check(c.replicates >= 1, "replicates", "must be >= 1");
  c.workers = get_field(j, "workers", "", c.workers);
  check(c.workers >= 0, "workers", "must be >= 0");
  c.name = get_field<std::string>(j, "name", "", c.name);
  c.out_dir = get_field<std::string>(j, "out", "", c.out_dir);
  c.trace = get_field(j, "trace", "", c.trace);

  if (j.contains("scenarios")) {
    const auto& arr = j.at("scenarios");
    check(arr.is_array(), "scenarios", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.scenarios.push_back(parse_scenario(arr[i], "scenarios[" + std::to_string(i) + "]"));
    }
  }

  int k = 1;
  if (!c.scenarios.empty()) {
    k = c.scenarios.front().groups();
  } else if (c.mode == Mode::optimize) {
    const auto prev = j.contains("optimize") ? get_field<std::vector<double>>(j.at("optimize"), "prevalence",
                                                                              "optimize", {0.6, 0.4})
                                             : std::vector<double>{0.6, 0.4};
    const auto engine = j.contains("optimize") ? get_field<std::string>(j.at("optimize"), "engine", "optimize",
                                                                        "multitest")
                                               : std::string("multitest");
    k = engine == "sequential" ? 1 : static_cast<int>(prev.size());
  } else if (c.mode == Mode::prior_report) {
    const auto prev = j.contains("prior_report")
                          ? get_field<std::vector<double>>(j.at("prior_report"), "prevalence", "prior_report",
                                                           {0.6, 0.4})
                          : std::vector<double>{0.6, 0.4};
    k = static_cast<int>(prev.size());
  }
  c.prior = parse_prior(j.contains("prior") ? j.at("prior") : json::object(), "prior", k);

  if (j.contains("multitest")) {
    const auto& m = j.at("multitest");
    c.multitest.alpha = get_field(m, "alpha", "multitest", c.multitest.alpha);
    check(c.multitest.alpha > 0.0 && c.multitest.alpha < 1.0, "multitest.alpha", "must lie in (0,1)");
    c.multitest.beta = get_field(m, "beta", "multitest", c.multitest.beta);
    c.multitest.prior_weights = get_field(m, "prior_weights", "multitest", c.multitest.prior_weights);
    c.multitest.calibration_resamples =
        get_field(m, "calibration_resamples", "multitest", c.multitest.calibration_resamples);
    check(c.multitest.calibration_resamples >= 1, "multitest.calibration_resamples", "must be >= 1");
    if (m.contains("methods")) {
      c.multitest.methods.clear();
      const auto names = get_required<std::vector<std::string>>(m, "methods", "multitest");
      for (std::size_t i = 0; i < names.size(); ++i) {
        c.multitest.methods.push_back(parse_multitest_method(names[i], "multitest.methods[" + std::to_string(i) + "]"));
      }
    }
  }
  if (j.contains("groupseq")) {
    const auto& g = j.at("groupseq");
    c.groupseq = parse_groupseq(g, "groupseq");
    if (g.contains("designs")) {
      c.designs.clear();
      const auto names = get_required<std::vector<std::string>>(g, "designs", "groupseq");
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          c.designs.push_back(parse_design_kind(names[i]));
        } catch (const InvalidArgument& e) {
          throw ConfigError("groupseq.designs[" + std::to_string(i) + "]", e.what());
        }
      }
    }
  }
  if (j.contains("utility")) {
    const auto& u = j.at("utility");
    if (u.contains("lambda") && u["lambda"].is_number()) {
      c.utility.lambda = {u["lambda"].get<double>()};
    } else {
      c.utility.lambda = get_field(u, "lambda", "utility", c.utility.lambda);
    }
    c.utility.stage_rewards = get_field(u, "stage_rewards", "utility", c.utility.stage_rewards);
    c.utility.per_patient_cost = get_field(u, "per_patient_cost", "utility", c.utility.per_patient_cost);
    try {
      c.utility.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("utility", e.what());
    }
  }
  if (j.contains("optimize")) {
    const auto& o = j.at("optimize");
    const auto engine = get_field<std::string>(o, "engine", "optimize", "multitest");
    check(engine == "multitest" || engine == "sequential", "optimize.engine", "must be multitest or sequential");
    c.optimize.engine = engine == "sequential" ? UtilityKind::sequential : UtilityKind::multitest;
    c.utility.kind = c.optimize.engine;
    c.optimize.search = get_field<std::string>(o, "search", "optimize", c.optimize.search);
    check(c.optimize.search == "grid" || c.optimize.search == "annealing", "optimize.search",
          "must be grid or annealing");
    c.optimize.bounds.lower = get_field(o, "lower", "optimize", c.optimize.bounds.lower);
    c.optimize.bounds.upper = get_field(o, "upper", "optimize", c.optimize.bounds.upper);
    try {
      c.optimize.bounds.validate();
    } catch (const BoundsEmpty& e) {
      throw ConfigError("optimize.lower", e.what());
    }
    c.optimize.points = get_field(o, "points", "optimize", std::vector<int>(c.optimize.bounds.lower.size(), 41));
    check(c.optimize.points.size() == c.optimize.bounds.lower.size(), "optimize.points",
          "need one resolution per coordinate");
    c.optimize.loess.span = get_field(o, "loess_span", "optimize", c.optimize.loess.span);
    c.optimize.loess.degree = get_field(o, "loess_degree", "optimize", c.optimize.loess.degree);
    check(c.optimize.loess.degree == 1 || c.optimize.loess.degree == 2, "optimize.loess_degree", "must be 1 or 2");
    c.optimize.annealing.epochs = get_field(o, "epochs", "optimize", c.optimize.annealing.epochs);
    c.optimize.annealing.moves_per_epoch =
        get_field(o, "moves_per_epoch", "optimize", c.optimize.annealing.moves_per_epoch);
    c.optimize.annealing.cooling = get_field(o, "cooling", "optimize", c.optimize.annealing.cooling);
    c.optimize.annealing.restarts = get_field(o, "restarts", "optimize", c.optimize.annealing.restarts);
    c.optimize.n_total = get_field(o, "n_total", "optimize", c.optimize.n_total);
    c.optimize.prevalence = get_field(o, "prevalence", "optimize", c.optimize.prevalence);
    if (c.optimize.engine == UtilityKind::sequential) c.optimize.prevalence = {1.0};
    const std::size_t dims = c.optimize.engine == UtilityKind::sequential ? 2 : 1;
    check(c.optimize.bounds.lower.size() == dims || (c.optimize.engine == UtilityKind::multitest &&
                                                    c.optimize.bounds.lower.size() == c.optimize.prevalence.size()),
          "optimize.lower",
          c.optimize.engine == UtilityKind::sequential ? "sequential search is over (beta_E, beta_F)"
                                                       : "multitest search is over a shared beta or one per group");
  }
  if (j.contains("retro")) {
    const auto& r = j.at("retro");
    c.retro.pool_path = get_required<std::string>(r, "pool", "retro");
    c.retro.p_y = get_field(r, "p_y", "retro", c.retro.p_y);
    c.retro.p_s = get_field(r, "p_s", "retro", c.retro.p_s);
    c.retro.n_total = get_field(r, "n_total", "retro", c.retro.n_total);
    check(c.retro.p_y >= 0.0 && c.retro.p_y <= 1.0, "retro.p_y", "must lie in [0,1]");
    check(c.retro.p_s >= 0.0 && c.retro.p_s <= 1.0, "retro.p_s", "must lie in [0,1]");
    check(c.retro.n_total >= 1, "retro.n_total", "must be >= 1");
  }
  if (j.contains("prior_report")) {
    const auto& p = j.at("prior_report");
    c.prior_report.n_total = get_field(p, "n_total", "prior_report", c.prior_report.n_total);
    c.prior_report.prevalence = get_field(p, "prevalence", "prior_report", c.prior_report.prevalence);
  }
  if (j.contains("dataset")) c.dataset_path = get_required<std::string>(j, "dataset", "");

  // cross-field checks
  switch (c.mode) {
    case Mode::multitest_sim:
    case Mode::calibrate:
      check(!c.scenarios.empty() || c.dataset_path, "scenarios", "at least one scenario is required");
      for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
        check(c.prior.k() == c.scenarios[i].groups(), "scenarios[" + std::to_string(i) + "]",
              "all scenarios must have the same number of groups");
      }
      break;
    case Mode::groupseq_sim:
      check(!c.scenarios.empty(), "scenarios", "at least one scenario is required");
      for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
        check(c.scenarios[i].groups() == 1, "scenarios[" + std::to_string(i) + "]",
              "sequential designs require a single population");
        check(c.scenarios[i].n_total >= c.groupseq.n_schedule.back(), "scenarios[" + std::to_string(i) + "].n_total",
              "must be at least the final n in groupseq.n_schedule");
      }
      break;
    case Mode::retro_sim:
      check(j.contains("retro"), "retro", "retro-sim needs a retro section");
      check(c.retro.n_total >= c.groupseq.n_schedule.back(), "retro.n_total",
            "must be at least the final n in groupseq.n_schedule");
      c.prior = parse_prior(j.contains("prior") ? j.at("prior") : json::object(), "prior", 1);
      break;
    case Mode::optimize:
      check(j.contains("optimize"), "optimize", "optimize mode needs an optimize section");
      if (c.optimize.engine == UtilityKind::multitest) {
        check(static_cast<int>(c.optimize.prevalence.size()) == c.prior.k(), "optimize.prevalence",
              "must have one entry per prior group");
      }
      check(c.optimize.engine == UtilityKind::multitest ||
                c.utility.stage_rewards.size() == c.groupseq.n_schedule.size(),
            "utility.stage_rewards", "need one reward per stage");
      break;
    case Mode::prior_report:
      check(static_cast<int>(c.prior_report.prevalence.size()) == c.prior.k(), "prior_report.prevalence",
            "must have one entry per prior group");
      break;
    default: break;
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace auxtrial

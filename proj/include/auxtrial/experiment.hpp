#pragma once

// Experiment orchestration: scenario sweeps, replicate parallelism, operating
// characteristic tables and the run manifest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auxtrial/calibration.hpp"
#include "auxtrial/config.hpp"
#include "auxtrial/stylized_example.hpp"
#include "auxtrial/group_seq.hpp"
#include "auxtrial/multitest.hpp"
#include "auxtrial/optimize.hpp"
#include "auxtrial/parallel.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/scenario.hpp"
#include "auxtrial/spending.hpp"
#include "auxtrial/trial_data.hpp"
#include "auxtrial/utility.hpp"

namespace auxtrial {

inline constexpr const char* kVersion = "0.1.0";

// One (scenario, method) cell of an operating-characteristics table.
struct OcRow {
  std::string scenario;
  std::string method;
  int replicates = 0;
  int failures = 0;
  std::vector<double> rejection;     // per group
  std::vector<double> rejection_se;  // per group
  double fwer = 0.0;                 // multitest: any primary-null rejection; sequential: any rejection
  double fwer_se = 0.0;
  double interim = 0.0;              // sequential only
  double final_share = 0.0;
  double expected_n = 0.0;
  double expected_n_se = 0.0;
  int non_convergence = 0;
};

struct OperatingCharacteristics {
  bool sequential = false;
  std::vector<OcRow> rows;

  int failures() const {
    int f = 0;
    for (const auto& r : rows) f += r.failures;
    return f;
  }
};

enum class TableLayout { scenario_rows, method_rows };

namespace detail {

inline double prop_se(double p, int n) { return n > 0 ? std::sqrt(std::max(0.0, p * (1.0 - p)) / n) : 0.0; }

inline std::string fmt(double x, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline std::vector<std::string> table_header(const OperatingCharacteristics& oc) {
  if (oc.sequential) {
    return {"scenario", "design", "replicates", "failures", "reject", "reject_se",
            "interim", "final", "expected_n", "expected_n_se"};
  }
  std::vector<std::string> h{"scenario", "method", "replicates", "failures", "fwer", "fwer_se"};
  const std::size_t k = oc.rows.empty() ? 0 : oc.rows.front().rejection.size();
  for (std::size_t g = 0; g < k; ++g) {
    h.push_back("reject_g" + std::to_string(g + 1));
    h.push_back("se_g" + std::to_string(g + 1));
  }
  return h;
}

inline std::vector<std::string> table_cells(const OperatingCharacteristics& oc, const OcRow& r) {
  std::vector<std::string> c{r.scenario, r.method, std::to_string(r.replicates), std::to_string(r.failures)};
  if (oc.sequential) {
    for (double v : {r.fwer, r.fwer_se, r.interim, r.final_share}) c.push_back(fmt(v, 4));
    c.push_back(fmt(r.expected_n, 1));
    c.push_back(fmt(r.expected_n_se, 1));
    return c;
  }
  c.push_back(fmt(r.fwer, 4));
  c.push_back(fmt(r.fwer_se, 4));
  for (std::size_t g = 0; g < r.rejection.size(); ++g) {
    c.push_back(fmt(r.rejection[g], 4));
    c.push_back(fmt(r.rejection_se[g], 4));
  }
  return c;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

/// Writes the table as CSV and, when `text` is given, as an aligned plain-text
/// rendering. An empty table produces the header only.
inline void emit_table(const OperatingCharacteristics& oc, TableLayout layout, std::ostream& csv,
                       std::ostream* text = nullptr) {
  std::vector<const OcRow*> order;
  for (const auto& r : oc.rows) order.push_back(&r);
  if (layout == TableLayout::method_rows) {
    std::stable_sort(order.begin(), order.end(),
                     [](const OcRow* a, const OcRow* b) { return a->method < b->method; });
  }
  const auto header = detail::table_header(oc);
  std::vector<std::vector<std::string>> body;
  for (const auto* r : order) body.push_back(detail::table_cells(oc, *r));
  auto reorder = [&](std::vector<std::string> row) {
    if (layout == TableLayout::method_rows) std::swap(row[0], row[1]);
    return row;
  };
  const auto head = reorder(header);
  for (std::size_t i = 0; i < head.size(); ++i) csv << (i ? "," : "") << detail::csv_field(head[i]);
  csv << '\n';
  for (const auto& row : body) {
    const auto r = reorder(row);
    for (std::size_t i = 0; i < r.size(); ++i) csv << (i ? "," : "") << detail::csv_field(r[i]);
    csv << '\n';
  }
  if (!text) return;
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& row : body) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) *text << "  ";
      if (i < 2) {
        *text << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      } else {
        *text << std::right << std::setw(static_cast<int>(width[i])) << r[i];
      }
    }
    *text << '\n';
  };
  line(head);
  for (const auto& row : body) line(reorder(row));
}

// ---------------------------------------------------------------------------

struct RunOptions {
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<std::string> out_dir;
};

struct RunResult {
  OperatingCharacteristics oc;
  std::vector<std::string> artifacts;
  nlohmann::json manifest;
  bool partial_failure = false;
};

/// FNV-1a over the canonical JSON dump of the configuration.
inline std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Replicate r of every scenario uses seed derive_seed(seed, r); all methods see
// the same simulated trials.
inline OperatingCharacteristics simulate_multitest(const ExperimentConfig& cfg, std::uint64_t seed, int replicates,
                                                   int workers) {
  OperatingCharacteristics oc;
  const auto& mt = cfg.multitest;
  const auto base = mt.weighted();
  const std::size_t nm = mt.methods.size();
  for (const auto& spec : cfg.scenarios) {
    const std::size_t k = static_cast<std::size_t>(spec.groups());
    // per replicate: [method][group] rejection flags, flattened
    auto flags = parallel_map<std::vector<char>>(static_cast<std::size_t>(replicates), workers, [&](std::size_t r) {
      const auto rs = derive_seed(seed, r);
      Rng rng = make_rng(rs);
      const auto data = simulate_trial(spec, rng);
      const auto summaries = compute_summaries(data);
      std::vector<char> out(nm * k, 0);
      for (std::size_t m = 0; m < nm; ++m) {
        TestDecision d;
        if (mt.methods[m].calibrated) {
          auto c = base;
          c.calibrated_alpha = calibrate_from_summaries(summaries, base, mt.calibration_resamples,
                                                        derive_seed(rs, 0xca1bULL))
                                   .alpha_prime;
          d = auxiliary_augmented_test(summaries, c);
        } else {
          d = apply_test(mt.methods[m].base, summaries, base);
        }
        for (std::size_t g = 0; g < k; ++g) out[m * k + g] = d[g].reject ? 1 : 0;
      }
      return out;
    });
    for (std::size_t m = 0; m < nm; ++m) {
      OcRow row;
      row.scenario = spec.name;
      row.method = mt.methods[m].name();
      row.replicates = replicates;
      std::vector<long> count(k, 0);
      long any_false = 0;
      for (const auto& f : flags) {
        bool fp = false;
        for (std::size_t g = 0; g < k; ++g) {
          count[g] += f[m * k + g];
          if (f[m * k + g] && spec.primary_null(static_cast<int>(g))) fp = true;
        }
        any_false += fp ? 1 : 0;
      }
      for (std::size_t g = 0; g < k; ++g) {
        const double p = static_cast<double>(count[g]) / replicates;
        row.rejection.push_back(p);
        row.rejection_se.push_back(detail::prop_se(p, replicates));
      }
      row.fwer = static_cast<double>(any_false) / replicates;
      row.fwer_se = detail::prop_se(row.fwer, replicates);
      oc.rows.push_back(std::move(row));
    }
  }
  return oc;
}

inline OcRow summarize_sequential(const std::string& scenario, const std::string& design,
                                  const std::vector<std::optional<SequentialOutcome>>& outcomes, int stages) {
  OcRow row;
  row.scenario = scenario;
  row.method = design;
  long rej = 0, interim = 0, fin = 0, nc = 0;
  std::vector<double> n_used;
  for (const auto& o : outcomes) {
    if (!o) {
      ++row.failures;
      continue;
    }
    n_used.push_back(o->n_used);
    if (o->rejected) {
      ++rej;
      (o->stop_stage < stages ? interim : fin) += 1;
    }
    for (const auto& s : o->stages) nc += s.non_convergence ? 1 : 0;
  }
  const int n = static_cast<int>(n_used.size());
  row.replicates = n;
  row.non_convergence = static_cast<int>(nc);
  if (n == 0) return row;
  row.fwer = static_cast<double>(rej) / n;
  row.fwer_se = detail::prop_se(row.fwer, n);
  row.interim = static_cast<double>(interim) / n;
  row.final_share = static_cast<double>(fin) / n;
  row.rejection = {row.fwer};
  row.rejection_se = {row.fwer_se};
  row.expected_n = mean(n_used);
  row.expected_n_se = n > 1 ? sample_sd(n_used) / std::sqrt(static_cast<double>(n)) : 0.0;
  return row;
}

// Generates the full trial for replicate r; shared by every design.
using TrialGenerator = std::function<TrialDataset(std::uint64_t replicate_seed)>;

inline std::vector<OcRow> simulate_sequential_block(const std::string& scenario, const TrialGenerator& gen,
                                                    const ExperimentConfig& cfg, const PriorHyperparams& hyper,
                                                    std::uint64_t seed, int replicates, int workers,
                                                    std::ostream* trace) {
  const auto bounds = boundary_thresholds(cfg.groupseq.n_schedule, cfg.groupseq.beta_e, cfg.groupseq.alpha);
  const std::size_t nd = cfg.designs.size();
  auto per_rep = parallel_map<std::vector<std::optional<SequentialOutcome>>>(
      static_cast<std::size_t>(replicates), workers, [&](std::size_t r) {
        const auto rs = derive_seed(seed, r);
        const auto data = gen(rs);
        std::vector<std::optional<SequentialOutcome>> out(nd);
        for (std::size_t d = 0; d < nd; ++d) {
          auto gs = cfg.groupseq;
          gs.design = cfg.designs[d];
          try {
            out[d] = run_sequential_trial(data, gs, hyper, bounds, derive_seed(rs, 0x5eedULL));
          } catch (const std::exception&) {
            out[d].reset();
          }
        }
        return out;
      });
  std::vector<OcRow> rows;
  for (std::size_t d = 0; d < nd; ++d) {
    std::vector<std::optional<SequentialOutcome>> col;
    col.reserve(per_rep.size());
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
      col.push_back(per_rep[r][d]);
      if (trace && per_rep[r][d]) {
        *trace << "{\"scenario\":" << nlohmann::json(scenario).dump() << ",\"design\":\""
               << to_string(cfg.designs[d]) << "\",\"trial\":";
        write_trace_json_line(*trace, static_cast<long>(r), *per_rep[r][d]);
      }
    }
    rows.push_back(summarize_sequential(scenario, to_string(cfg.designs[d]), col, cfg.groupseq.stages()));
  }
  return rows;
}

inline OperatingCharacteristics simulate_groupseq(const ExperimentConfig& cfg, std::uint64_t seed, int replicates,
                                                  int workers, std::ostream* trace = nullptr) {
  OperatingCharacteristics oc;
  oc.sequential = true;
  for (const auto& spec : cfg.scenarios) {
    const TrialGenerator gen = [&spec](std::uint64_t rs) {
      Rng rng = make_rng(rs);
      return simulate_trial(spec, rng);
    };
    auto rows = simulate_sequential_block(spec.name, gen, cfg, cfg.prior, seed, replicates, workers, trace);
    oc.rows.insert(oc.rows.end(), rows.begin(), rows.end());
  }
  return oc;
}

/// Pool patients are folded into a single population.
inline OperatingCharacteristics simulate_retro(const ExperimentConfig& cfg, const TrialDataset& pool_data,
                                               std::uint64_t seed, int replicates, int workers,
                                               std::ostream* trace = nullptr) {
  OperatingCharacteristics oc;
  oc.sequential = true;
  std::vector<PatientRecord> pool = pool_data.patients;
  for (auto& p : pool) p.group = 0;
  if (pool.empty()) throw EmptyPool("retro: control pool is empty");
  const TrialGenerator gen = [&](std::uint64_t rs) {
    Rng rng = make_rng(rs);
    return resample_perturb(pool, cfg.retro.p_y, cfg.retro.p_s, cfg.retro.n_total, rng);
  };
  char name[96];
  std::snprintf(name, sizeof name, "retro p_y=%g p_s=%g", cfg.retro.p_y, cfg.retro.p_s);
  oc.rows = simulate_sequential_block(name, gen, cfg, cfg.prior, seed, replicates, workers, trace);
  return oc;
}

/// Utility objective over the prior model. Multitest parameters are a shared
/// beta or one per group; sequential parameters are (beta_E, beta_F). Every
/// candidate is evaluated on the same replicates.
struct UtilitySearch {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  int replicates;
  int workers;

  std::vector<MultitestReplicate> mt_reps;
  std::vector<SequentialReplicate> seq_reps;
  std::map<double, std::vector<std::optional<SequentialTrace>>> trace_cache;

  UtilitySearch(const ExperimentConfig& c, std::uint64_t s, int r, int w) : cfg(c), seed(s), replicates(r), workers(w) {
    if (cfg.optimize.engine == UtilityKind::multitest) {
      mt_reps = multitest_prior_replicates(cfg.prior, cfg.optimize.n_total, cfg.optimize.prevalence, replicates, seed,
                                           workers);
    } else {
      seq_reps = sequential_prior_replicates(cfg.prior, cfg.optimize.n_total, replicates, seed);
    }
  }

  McEstimate operator()(const std::vector<double>& p) {
    if (cfg.optimize.engine == UtilityKind::multitest) {
      auto c = cfg.multitest.weighted();
      c.beta = p;
      return mc_estimate(multitest_utilities(mt_reps, TestMethod::auxiliary_augmented, c, cfg.utility));
    }
    const double beta_e = p.at(0);
    const double beta_f = p.at(1);
    auto it = trace_cache.find(beta_e);
    if (it == trace_cache.end()) {
      auto gs = cfg.groupseq;
      gs.beta_e = beta_e;
      it = trace_cache.emplace(beta_e, sequential_traces(seq_reps, gs, cfg.prior, workers)).first;
    }
    return mc_estimate(sequential_utilities(seq_reps, it->second, beta_f, cfg.groupseq.order, cfg.utility));
  }
};

inline UtilityCurve run_optimize(const ExperimentConfig& cfg, std::uint64_t seed, int replicates, int workers) {
  UtilitySearch search(cfg, seed, replicates, workers);
  const UtilityObjective objective = [&](const std::vector<double>& p) { return search(p); };
  UtilityCurve curve;
  if (cfg.optimize.search == "grid") {
    curve = grid_search(grid_points(cfg.optimize.bounds, cfg.optimize.points), objective, cfg.optimize.loess);
  } else {
    // a fresh replicate set for the final re-evaluation
    UtilitySearch fresh(cfg, derive_seed(seed, 0xf2e5ULL), replicates, workers);
    const UtilityObjective re = [&](const std::vector<double>& p) { return fresh(p); };
    curve = anneal(cfg.optimize.bounds, objective, derive_seed(seed, 0xa22eULL), cfg.optimize.annealing, re);
  }
  if (cfg.optimize.engine == UtilityKind::sequential) {
    curve.param_names = {"beta_e", "beta_f"};
  } else if (cfg.optimize.bounds.lower.size() == 1) {
    curve.param_names = {"beta"};
  } else {
    for (std::size_t g = 0; g < cfg.optimize.bounds.lower.size(); ++g) {
      curve.param_names.push_back("beta_g" + std::to_string(g + 1));
    }
  }
  curve.provenance["replicates"] = replicates;
  curve.provenance["seed"] = seed;
  return curve;
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::string write_file(const std::filesystem::path& dir, const std::string& name,
                              const std::function<void(std::ostream&)>& body) {
  const auto path = dir / name;
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  body(os);
  return path.string();
}

}  // namespace detail

/// Runs the configured mode and writes its artifacts plus manifest.json into
/// the output directory. Results do not depend on the worker count.
inline RunResult run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  if (opt.seed) cfg.seed = opt.seed;
  if (opt.replicates) cfg.replicates = *opt.replicates;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  const int workers = opt.workers > 0 ? opt.workers : cfg.workers;
  const bool needs_seed = cfg.mode != Mode::boundaries && cfg.mode != Mode::enumerate_example;
  const std::uint64_t seed = needs_seed ? cfg.master_seed() : cfg.seed.value_or(0);
  if (cfg.replicates < 1) throw ConfigError("replicates", "must be >= 1");

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  RunResult res;
  const std::string stem = cfg.name;

  auto emit_oc = [&](const OperatingCharacteristics& oc) {
    res.oc = oc;
    res.artifacts.push_back(detail::write_file(dir, stem + ".csv", [&](std::ostream& os) {
      emit_table(oc, TableLayout::scenario_rows, os);
    }));
    res.artifacts.push_back(detail::write_file(dir, stem + ".txt", [&](std::ostream& os) {
      std::ostringstream sink;
      emit_table(oc, TableLayout::scenario_rows, sink, &os);
    }));
    res.partial_failure = oc.failures() > 0;
  };

  nlohmann::json extra = nlohmann::json::object();
  switch (cfg.mode) {
    case Mode::multitest_sim:
      emit_oc(simulate_multitest(cfg, seed, cfg.replicates, workers));
      break;
    case Mode::calibrate:
      if (cfg.dataset_path) {
        const auto data = read_dataset_csv(*cfg.dataset_path);
        const auto summaries = compute_summaries(data);
        const auto base = cfg.multitest.weighted();
        const auto cal = calibrate_from_summaries(summaries, base, cfg.multitest.calibration_resamples, seed);
        auto calibrated = base;
        calibrated.calibrated_alpha = cal.alpha_prime;
        const auto decisions = auxiliary_augmented_test(summaries, calibrated);
        extra["alpha_prime"] = cal.alpha_prime;
        extra["resamples"] = cal.resamples;
        res.artifacts.push_back(detail::write_file(dir, stem + ".csv", [&](std::ostream& os) {
          os << "group,pvalue,weight,threshold,reject\n";
          for (const auto& d : decisions) {
            os << d.group + 1 << ',' << detail::fmt(d.pvalue, 6) << ',' << detail::fmt(d.weight, 6) << ','
               << detail::fmt(d.threshold, 6) << ',' << (d.reject ? 1 : 0) << '\n';
          }
        }));
        res.artifacts.push_back(detail::write_file(dir, stem + ".json", [&](std::ostream& os) {
          os << nlohmann::json{{"alpha", base.alpha},
                               {"alpha_prime", cal.alpha_prime},
                               {"resamples", cal.resamples},
                               {"seed", seed}}
                    .dump(2)
             << '\n';
        }));
      } else {
        auto c = cfg;
        bool has_b = false;
        for (const auto& m : c.multitest.methods) has_b = has_b || m.calibrated;
        if (!has_b) {
          c.multitest.methods = {{TestMethod::auxiliary_augmented, false}, {TestMethod::auxiliary_augmented, true}};
        }
        emit_oc(simulate_multitest(c, seed, c.replicates, workers));
      }
      break;
    case Mode::groupseq_sim: {
      std::optional<std::ofstream> trace;
      if (cfg.trace) {
        trace.emplace(dir / (stem + ".trace.jsonl"));
        res.artifacts.push_back((dir / (stem + ".trace.jsonl")).string());
      }
      emit_oc(simulate_groupseq(cfg, seed, cfg.replicates, workers, trace ? &*trace : nullptr));
      break;
    }
    case Mode::retro_sim: {
      const auto pool = read_dataset_csv(cfg.retro.pool_path);
      std::optional<std::ofstream> trace;
      if (cfg.trace) {
        trace.emplace(dir / (stem + ".trace.jsonl"));
        res.artifacts.push_back((dir / (stem + ".trace.jsonl")).string());
      }
      emit_oc(simulate_retro(cfg, pool, seed, cfg.replicates, workers, trace ? &*trace : nullptr));
      break;
    }
    case Mode::optimize: {
      const auto curve = run_optimize(cfg, seed, cfg.replicates, workers);
      res.artifacts.push_back(
          detail::write_file(dir, stem + ".csv", [&](std::ostream& os) { write_curve_csv(os, curve); }));
      res.artifacts.push_back(detail::write_file(
          dir, stem + ".json", [&](std::ostream& os) { os << curve_sidecar(curve).dump(2) << '\n'; }));
      extra["argmax"] = curve.best_params;
      break;
    }
    case Mode::boundaries: {
      const auto b = boundary_thresholds(cfg.groupseq.n_schedule, cfg.groupseq.beta_e, cfg.groupseq.alpha);
      res.artifacts.push_back(
          detail::write_file(dir, stem + ".csv", [&](std::ostream& os) { write_boundaries_csv(os, b); }));
      if (b.schedule_too_fine()) extra["warning"] = "schedule too fine: some thresholds are capped";
      break;
    }
    case Mode::prior_report: {
      const auto rep = prior_predictive_report(cfg.prior, cfg.prior_report.n_total, cfg.prior_report.prevalence,
                                               cfg.replicates, seed);
      res.artifacts.push_back(
          detail::write_file(dir, stem + ".csv", [&](std::ostream& os) { write_report_csv(os, rep); }));
      break;
    }
    case Mode::enumerate_example: {
      const auto rows = enumerate_stylized_example();
      res.artifacts.push_back(
          detail::write_file(dir, stem + ".csv", [&](std::ostream& os) { write_example_csv(os, rows); }));
      break;
    }
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.manifest = {{"version", kVersion},
                  {"mode", to_string(cfg.mode)},
                  {"config", cfg.source},
                  {"config_hash", config_hash(cfg.source)},
                  {"seed", seed},
                  {"replicates", cfg.replicates},
                  {"workers", resolve_workers(workers)},
                  {"wall_time_seconds", wall},
                  {"artifacts", res.artifacts},
                  {"partial_failure", res.partial_failure}};
  for (auto it = extra.begin(); it != extra.end(); ++it) res.manifest[it.key()] = it.value();
  detail::write_file(dir, stem + ".manifest.json", [&](std::ostream& os) { os << res.manifest.dump(2) << '\n'; });
  return res;
}

}  // namespace auxtrial

#pragma once

// Trial records and the data-summary layer shared by every decision rule:
// arm means, effect estimates, plug-in variances, Z statistics and p-values.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/numerics.hpp"

namespace auxtrial {

struct PatientRecord {
  int group = 0;      // 0-based subgroup index
  int arm = 0;        // 0 = standard of care, 1 = experimental
  int primary = 0;    // binary
  int auxiliary = 0;  // binary
  long enroll_order = 0;
  bool primary_observed = true;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct TrialDataset {
  std::vector<PatientRecord> patients;
  int k_count = 1;
  std::optional<std::vector<int>> stage_schedule;

  std::size_t size() const { return patients.size(); }

  int primary_observed_count() const {
    return static_cast<int>(std::count_if(patients.begin(), patients.end(),
                                          [](const PatientRecord& p) { return p.primary_observed; }));
  }

  void validate() const {
    require(k_count >= 1, "TrialDataset: k_count must be >= 1");
    std::unordered_set<long> orders;
    orders.reserve(patients.size());
    for (const auto& p : patients) {
      require(p.group >= 0 && p.group < k_count, "TrialDataset: group index out of range");
      require(p.arm == 0 || p.arm == 1, "TrialDataset: arm must be 0 or 1");
      require(p.primary == 0 || p.primary == 1, "TrialDataset: primary must be binary");
      require(p.auxiliary == 0 || p.auxiliary == 1, "TrialDataset: auxiliary must be binary");
      require(p.enroll_order >= 0, "TrialDataset: enroll_order must be nonnegative");
      require(orders.insert(p.enroll_order).second, "TrialDataset: duplicate enroll_order");
    }
    if (stage_schedule) {
      for (std::size_t i = 1; i < stage_schedule->size(); ++i) {
        require((*stage_schedule)[i] > (*stage_schedule)[i - 1],
                "TrialDataset: stage_schedule must be strictly increasing");
      }
    }
  }

  friend bool operator==(const TrialDataset&, const TrialDataset&) = default;
};

// Binary outcome tallies for one arm.
struct ArmTally {
  int n = 0;
  int x = 0;
  double rate() const { return n > 0 ? static_cast<double>(x) / n : 0.0; }
};

struct DifferenceTest {
  double diff = 0.0;
  double var = 0.0;
  double z = 0.0;
  double pvalue = 0.5;
};

// Difference in proportions (treated - control) with the unpooled plug-in variance.
// When the plug-in variance is zero, the proportions entering the variance are
// replaced by (x + 0.5) / (n + 1). Both arms must be non-empty.
inline DifferenceTest difference_test(ArmTally treated, ArmTally control) {
  require(treated.n > 0 && control.n > 0, "difference_test: empty arm");
  DifferenceTest out;
  const double p1 = treated.rate(), p0 = control.rate();
  out.diff = p1 - p0;
  out.var = p1 * (1.0 - p1) / treated.n + p0 * (1.0 - p0) / control.n;
  if (out.var <= 0.0) {
    const double c1 = (treated.x + 0.5) / (treated.n + 1.0);
    const double c0 = (control.x + 0.5) / (control.n + 1.0);
    out.var = c1 * (1.0 - c1) / treated.n + c0 * (1.0 - c0) / control.n;
  }
  out.z = out.diff / std::sqrt(out.var);
  out.pvalue = 1.0 - norm_cdf(out.z);
  return out;
}

enum class SummaryStatus { ok, empty_arm };

struct GroupSummary {
  int group = 0;
  SummaryStatus status = SummaryStatus::ok;
  // primary, among primary-observed patients
  int n0 = 0, n1 = 0;
  double ybar_diff = 0.0;
  double var_hat = 0.0;
  double z = 0.0;
  double pvalue = 1.0;
  // auxiliary, among all patients in the dataset
  int ns0 = 0, ns1 = 0;
  double sbar_diff = 0.0;
  double s_var_hat = 0.0;
  double s_z = 0.0;
  double s_pvalue = 1.0;
  // plug-in Cov(sbar_diff, ybar_diff)
  double cov_sy = 0.0;

  bool ok() const { return status == SummaryStatus::ok; }
};

namespace detail {

struct GroupCounts {
  ArmTally y[2];   // primary-observed
  ArmTally s[2];   // auxiliary (all patients)
  int ys11[2] = {0, 0};  // Y = S = 1 among primary-observed
  int s_on_y[2] = {0, 0};  // S = 1 among primary-observed
};

}  // namespace detail

/// One summary per group. Groups with an empty arm are flagged as
/// SummaryStatus::empty_arm with pvalue = 1 so they can never be rejected;
/// other groups are unaffected.
inline std::vector<GroupSummary> compute_summaries(const TrialDataset& data) {
  std::vector<detail::GroupCounts> counts(static_cast<std::size_t>(data.k_count));
  for (const auto& p : data.patients) {
    require(p.group >= 0 && p.group < data.k_count, "compute_summaries: group out of range");
    auto& g = counts[p.group];
    g.s[p.arm].n += 1;
    g.s[p.arm].x += p.auxiliary;
    if (p.primary_observed) {
      g.y[p.arm].n += 1;
      g.y[p.arm].x += p.primary;
      g.ys11[p.arm] += p.primary * p.auxiliary;
      g.s_on_y[p.arm] += p.auxiliary;
    }
  }

  std::vector<GroupSummary> out;
  out.reserve(counts.size());
  for (int k = 0; k < data.k_count; ++k) {
    const auto& g = counts[k];
    GroupSummary s;
    s.group = k;
    s.n0 = g.y[0].n;
    s.n1 = g.y[1].n;
    s.ns0 = g.s[0].n;
    s.ns1 = g.s[1].n;
    if (g.s[0].n > 0 && g.s[1].n > 0) {
      const auto st = difference_test(g.s[1], g.s[0]);
      s.sbar_diff = st.diff;
      s.s_var_hat = st.var;
      s.s_z = st.z;
      s.s_pvalue = st.pvalue;
    }
    if (g.y[0].n > 0 && g.y[1].n > 0) {
      const auto yt = difference_test(g.y[1], g.y[0]);
      s.ybar_diff = yt.diff;
      s.var_hat = yt.var;
      s.z = yt.z;
      s.pvalue = yt.pvalue;
      double cov = 0.0;
      for (int a = 0; a < 2; ++a) {
        const double n = g.y[a].n;
        const double sxy = g.ys11[a] / n - (g.y[a].x / n) * (g.s_on_y[a] / n);
        cov += sxy / g.s[a].n;
      }
      s.cov_sy = cov;
    } else {
      s.status = SummaryStatus::empty_arm;
    }
    if (g.s[0].n == 0 || g.s[1].n == 0) s.status = SummaryStatus::empty_arm;
    out.push_back(s);
  }
  return out;
}

/// First `m_enrolled` patients by enrollment order; primary outcomes beyond the
/// first `n_primary` of them are marked pending.
inline TrialDataset restrict_to_stage(const TrialDataset& data, int n_primary, int m_enrolled) {
  if (n_primary < 0 || n_primary > m_enrolled) {
    throw BadStage("restrict_to_stage: need 0 <= n_primary <= m_enrolled");
  }
  if (static_cast<std::size_t>(m_enrolled) > data.patients.size()) {
    throw BadStage("restrict_to_stage: m_enrolled exceeds dataset size");
  }
  TrialDataset out;
  out.k_count = data.k_count;
  out.patients = data.patients;
  std::stable_sort(out.patients.begin(), out.patients.end(),
                   [](const PatientRecord& a, const PatientRecord& b) {
                     return a.enroll_order < b.enroll_order;
                   });
  out.patients.resize(static_cast<std::size_t>(m_enrolled));
  for (int i = n_primary; i < m_enrolled; ++i) out.patients[i].primary_observed = false;
  return out;
}

// Swap primary and auxiliary outcomes (used when the auxiliary outcome drives all
// decisions). Pending flags are kept.
inline TrialDataset swap_outcomes(TrialDataset data) {
  for (auto& p : data.patients) std::swap(p.primary, p.auxiliary);
  return data;
}

inline constexpr const char* kDatasetCsvHeader =
    "group,arm,primary,auxiliary,enroll_order,primary_observed";

inline void write_dataset_csv(std::ostream& os, const TrialDataset& data) {
  os << kDatasetCsvHeader << '\n';
  for (const auto& p : data.patients) {
    os << p.group << ',' << p.arm << ',' << p.primary << ',' << p.auxiliary << ','
       << p.enroll_order << ',' << (p.primary_observed ? 1 : 0) << '\n';
  }
}

inline TrialDataset read_dataset_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "dataset csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kDatasetCsvHeader, "dataset csv: unexpected header '" + line + "'");
  TrialDataset data;
  int max_group = 0;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long vals[6];
    const char* first = line.data();
    const char* last = line.data() + line.size();
    for (int c = 0; c < 6; ++c) {
      auto [ptr, ec] = std::from_chars(first, last, vals[c]);
      require(ec == std::errc{}, "dataset csv: bad number on line " + std::to_string(lineno));
      first = ptr;
      if (c < 5) {
        require(first < last && *first == ',', "dataset csv: expected 6 columns on line " +
                                                    std::to_string(lineno));
        ++first;
      }
    }
    require(first == last, "dataset csv: trailing data on line " + std::to_string(lineno));
    PatientRecord p;
    p.group = static_cast<int>(vals[0]);
    p.arm = static_cast<int>(vals[1]);
    p.primary = static_cast<int>(vals[2]);
    p.auxiliary = static_cast<int>(vals[3]);
    p.enroll_order = vals[4];
    require(vals[5] == 0 || vals[5] == 1, "dataset csv: primary_observed must be 0/1");
    p.primary_observed = vals[5] == 1;
    max_group = std::max(max_group, p.group);
    data.patients.push_back(p);
  }
  data.k_count = max_group + 1;
  data.validate();
  return data;
}

inline TrialDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open dataset csv '" + path + "'");
  return read_dataset_csv(in);
}

}  // namespace auxtrial

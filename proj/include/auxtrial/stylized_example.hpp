#pragma once

// Exact enumeration of the 16 non-randomized decision functions of a one-patient,
// single-arm trial with binary (Y, S). H0: theta_Y <= 0.05. Prior: theta_Y
// uniform, theta_S = 0 below the null boundary and 1 above it.

#include <algorithm>
#include <array>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace auxtrial {

struct StylizedDecision {
  // decision for (y, s) in the order (0,0), (0,1), (1,0), (1,1)
  std::array<int, 4> action{};
  std::string name;
  double max_type1 = 0.0;
  bool level_alpha = false;
  double expected_utility = 0.0;

  int at(int y, int s) const { return action[2 * y + s]; }
};

struct StylizedExampleParams {
  double null_bound = 0.05;  // a
  double alpha = 0.05;
  double lambda = 100.0;
};

inline std::string stylized_name(const std::array<int, 4>& a) {
  if (a == std::array<int, 4>{0, 0, 0, 0}) return "0";
  if (a == std::array<int, 4>{1, 1, 1, 1}) return "1";
  if (a == std::array<int, 4>{0, 0, 1, 1}) return "Y";
  if (a == std::array<int, 4>{1, 1, 0, 0}) return "1-Y";
  if (a == std::array<int, 4>{0, 1, 0, 1}) return "S";
  if (a == std::array<int, 4>{1, 0, 1, 0}) return "1-S";
  if (a == std::array<int, 4>{0, 0, 0, 1}) return "Y*S";
  if (a == std::array<int, 4>{0, 0, 1, 0}) return "Y*(1-S)";
  if (a == std::array<int, 4>{0, 1, 0, 0}) return "(1-Y)*S";
  if (a == std::array<int, 4>{1, 0, 0, 0}) return "(1-Y)*(1-S)";
  std::string s = "phi[";
  for (int i = 0; i < 4; ++i) s += static_cast<char>('0' + a[i]);
  return s + "]";
}

/// All 16 decision functions in bit order, with the worst-case type-I error
/// over theta_Y <= a and every theta_S, and the exact expected utility.
inline std::vector<StylizedDecision> enumerate_stylized_example(const StylizedExampleParams& p = {}) {
  const double a = p.null_bound;
  // prior integrals of theta and 1 - theta over the alternative and the null
  const double alt_theta = (1.0 - a * a) / 2.0;
  const double alt_one_minus = (1.0 - a) * (1.0 - a) / 2.0;
  const double null_theta = a * a / 2.0;
  const double null_one_minus = a - a * a / 2.0;

  std::vector<StylizedDecision> out;
  for (int mask = 0; mask < 16; ++mask) {
    StylizedDecision d;
    for (int i = 0; i < 4; ++i) d.action[i] = (mask >> (3 - i)) & 1;
    d.name = stylized_name(d.action);
    // P(reject) is bilinear in (theta_Y, theta_S): the supremum sits at a corner.
    for (double ty : {0.0, a}) {
      for (double ts : {0.0, 1.0}) {
        double pr = 0.0;
        for (int y = 0; y < 2; ++y) {
          for (int s = 0; s < 2; ++s) {
            pr += d.at(y, s) * (y ? ty : 1.0 - ty) * (s ? ts : 1.0 - ts);
          }
        }
        d.max_type1 = std::max(d.max_type1, pr);
      }
    }
    d.level_alpha = d.max_type1 <= p.alpha;
    d.expected_utility = d.at(1, 1) * alt_theta + d.at(0, 1) * alt_one_minus -
                         p.lambda * (d.at(1, 0) * null_theta + d.at(0, 0) * null_one_minus);
    out.push_back(d);
  }
  return out;
}

inline void write_example_csv(std::ostream& os, const std::vector<StylizedDecision>& rows) {
  os << "function,phi00,phi01,phi10,phi11,max_type1,level_alpha,expected_utility\n";
  char buf[64];
  for (const auto& d : rows) {
    os << '"' << d.name << "\"," << d.action[0] << ',' << d.action[1] << ',' << d.action[2] << ','
       << d.action[3] << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%d,%.6f", d.max_type1, d.level_alpha ? 1 : 0, d.expected_utility);
    os << buf << '\n';
  }
}

}  // namespace auxtrial

#include <array>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "voteflow/reliability/reliability.hpp"

namespace voteflow::reliability {
namespace {

ReferencePoint make_point(std::string label, std::string source, double claimed, double resolution,
                          double computed) {
  ReferencePoint pt{std::move(label), std::move(source), claimed, resolution, computed, false};
  pt.discrepant = std::abs(claimed - computed) > resolution;
  return pt;
}

struct PlottedSeries {
  double p;
  std::array<double, 7> values;  // odd n = 1..13
};

// Plotted scaling-curve coordinates, n = 1, 3, ..., 13.
constexpr std::array<PlottedSeries, 4> kPlotted{{
    {0.10, {0.1, 0.028, 0.00856, 0.00257, 0.000748, 0.000212, 0.0000588}},
    {0.05, {0.05, 0.00725, 0.00116, 0.00018, 0.0000274, 0.00000409, 0.000000603}},
    {0.02, {0.02, 0.00118, 0.0000769, 0.0000052, 0.00000035, 0.000000024, 0.0000000016}},
    {0.01, {0.01, 0.000297, 0.0000098, 0.00000033, 0.000000011, 0.00000000037, 0.000000000012}},
}};

// Half a unit in the last significant digit of a value printed with `digits`
// significant digits.
double half_ulp_of(double value, int digits) {
  if (value == 0.0) return 0.0;
  const double exponent = std::floor(std::log10(std::abs(value)));
  return 0.5 * std::pow(10.0, exponent - (digits - 1));
}

int significant_digits(double value) {
  for (int digits = 1; digits <= 6; ++digits) {
    const double scale = std::pow(10.0, digits - 1 - std::floor(std::log10(value)));
    if (std::abs(std::round(value * scale) - value * scale) < 1e-6) return digits;
  }
  return 6;
}

}  // namespace

std::optional<ReferencePoint> plotted_point(int n, double p) {
  if (n < 1 || n > 13 || n % 2 == 0) return std::nullopt;
  for (const auto& series : kPlotted) {
    if (std::abs(series.p - p) > 1e-12) continue;
    const double claimed = series.values[static_cast<std::size_t>(n / 2)];
    return make_point(fmt::format("P_sys(n={}, p={})", n, series.p), "plotted scaling curve", claimed,
                      half_ulp_of(claimed, significant_digits(claimed)), consensus_error(n, series.p));
  }
  return std::nullopt;
}

std::vector<ReferencePoint> reference_points() {
  std::vector<ReferencePoint> points;

  points.push_back(make_point("P_sys(n=5, p=0.05)", "worked example", 0.00116, half_ulp_of(0.00116, 3),
                              consensus_error(5, 0.05)));

  for (const auto& series : kPlotted) {
    for (int n = 1; n <= 13; n += 2) points.push_back(*plotted_point(n, series.p));
  }

  points.push_back(make_point("P_sys(n=13, p=0.05)", "six sigma defect table", 3.4e-6, half_ulp_of(3.4e-6, 2),
                              consensus_error(13, 0.05)));

  // Tabulated DPMO per method, base error 5% unless single-agent.
  points.push_back(make_point("DPMO single agent p=0.05", "DPMO table", 50000, 0.5, dpmo(0.05)));
  points.push_back(make_point("DPMO single agent p=0.01", "DPMO table", 10000, 0.5, dpmo(0.01)));
  points.push_back(
      make_point("DPMO n=5, p=0.05", "DPMO table", 1100, half_ulp_of(1100, 2), dpmo(consensus_error(5, 0.05))));
  points.push_back(
      make_point("DPMO n=9, p=0.05", "DPMO table", 80, half_ulp_of(80, 1), dpmo(consensus_error(9, 0.05))));
  points.push_back(
      make_point("DPMO n=13, p=0.05", "DPMO table", 3.4, half_ulp_of(3.4, 2), dpmo(consensus_error(13, 0.05))));

  constexpr std::array<std::pair<double, int>, 4> kRequirement{{{0.01, 9}, {0.02, 11}, {0.05, 13}, {0.10, 21}}};
  for (const auto& [p, n] : kRequirement) {
    points.push_back(make_point(fmt::format("n*(p={}) for 3.4e-6", p), "agent requirement", n, 0.5,
                                min_agents_for_target(p, kSixSigmaTarget)));
  }

  const auto tolerance = max_correlation(11, 0.05, kSixSigmaTarget);
  points.push_back(make_point("rho_max(n=11, p=0.05)", "correlation tolerance", 0.99, half_ulp_of(0.99, 2),
                              tolerance.rho_max));
  if (tolerance.saturated) points.back().discrepant = true;

  points.push_back(make_point("success (1-0.01)^10", "compound error", 0.904, half_ulp_of(0.904, 3),
                              compound_success(0.01, 10)));
  points.push_back(make_point("success (1-0.01)^100", "compound error", 0.366, half_ulp_of(0.366, 3),
                              compound_success(0.01, 100)));
  points.push_back(make_point("success (1-0.01)^1000", "compound error", 0.00004, half_ulp_of(0.00004, 1),
                              compound_success(0.01, 1000)));
  points.push_back(make_point("success (1-0.001)^100", "compound error", 0.905, half_ulp_of(0.905, 3),
                              compound_success(0.001, 100)));

  points.push_back(make_point("m_max(R=0.9999, p_a=3.4e-6)", "workflow length bound", 29400, half_ulp_of(29400, 3),
                              static_cast<double>(max_workflow_length(0.9999, kSixSigmaTarget))));
  points.push_back(make_point("m_max(R=0.999, p_a=3.4e-6)", "workflow length bound", 294000,
                              half_ulp_of(294000, 3),
                              static_cast<double>(max_workflow_length(0.999, kSixSigmaTarget))));
  return points;
}

}  // namespace voteflow::reliability

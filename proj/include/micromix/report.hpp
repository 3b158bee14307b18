// Per-variant mixing reports (particle mixing index + reacted-area fraction
// per period) and cross-variant comparison with per-period ratios and the
// first period crossing the 0.8 target.
#pragma once

#include <map>
#include <optional>

#include "micromix/csv.hpp"
#include "micromix/geometry.hpp"
#include "micromix/tracer.hpp"
#include "micromix/transport.hpp"

namespace micromix {

struct PeriodRecord {
  int period = 0;
  double y_um = 0;
  double mixing_index = 0;
  double fret_factor = 0;
};

struct RunConditions {
  double q_total_ul_min = 0;
  double reynolds = 0;
  double h_um = 0;

  bool matches(const RunConditions& o) const {
    auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1.0});
    };
    return close(q_total_ul_min, o.q_total_ul_min) &&
           close(reynolds, o.reynolds) && close(h_um, o.h_um);
  }
};

struct MixingReport {
  std::string variant;
  RunConditions conditions;
  std::vector<PeriodRecord> records;
  // Run metadata echoed for provenance (tolerances, defaults in effect).
  std::map<std::string, std::string> metadata;
};

// Assemble one record per period plane from precomputed per-plane metrics.
inline MixingReport build_report(const std::string& variant,
                                 const RunConditions& cond,
                                 std::span<const double> planes_um,
                                 std::span<const double> mixing_series,
                                 std::span<const double> fret_series) {
  if (planes_um.size() != mixing_series.size() ||
      planes_um.size() != fret_series.size())
    throw std::invalid_argument("build_report: mismatched period counts");
  MixingReport r;
  r.variant = variant;
  r.conditions = cond;
  for (size_t k = 0; k < planes_um.size(); ++k)
    r.records.push_back({static_cast<int>(k + 1), planes_um[k],
                         mixing_series[k], fret_series[k]});
  return r;
}

// Convenience overload: computes the metrics from a traced ensemble and a
// solved species field on the same grid/config.
inline MixingReport build_report(const MixerConfig& cfg,
                                 const RunConditions& cond,
                                 const ParticleEnsemble& ens,
                                 const SpeciesFields& sf, const VoxelGrid& g,
                                 const TransportParams& params, int bins_x,
                                 int bins_z) {
  const auto planes = period_planes(cfg);
  if (ens.plane_y_um.size() != planes.size())
    throw std::invalid_argument("build_report: mismatched period counts");
  std::vector<double> mix, fret;
  for (size_t k = 0; k < planes.size(); ++k) {
    mix.push_back(mixing_index(ens.period_snapshots[k], bins_x, bins_z,
                               cfg.channel_width_um, cfg.channel_height_um));
    fret.push_back(fret_factor(sf, g, planes[k], params));
  }
  return build_report(to_string(cfg.variant), cond, planes, mix, fret);
}

struct PairwiseComparison {
  std::string variant_a, variant_b;
  std::vector<double> fret_ratio;       // a over b, per period
  std::vector<double> fret_difference;  // a minus b, per period
};

struct ComparisonReport {
  std::vector<MixingReport> reports;
  std::vector<PairwiseComparison> pairs;
  // First period with fret_factor >= threshold per report; -1 = none.
  std::vector<int> crossing_period;
  double crossing_threshold = 0.8;
};

// Cross-variant comparison. All reports must share conditions and period
// count; mismatches are refused with a listing of the differing values.
inline ComparisonReport compare(std::span<const MixingReport> reports,
                                double crossing_threshold = 0.8) {
  if (reports.size() < 2)
    throw std::invalid_argument("compare: need at least 2 reports");
  std::string diffs;
  for (size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[0];
    const auto& b = reports[i];
    if (!a.conditions.matches(b.conditions))
      diffs += strfmt(
          "  %s vs %s: Q %.17g vs %.17g ul/min, Re %.17g vs %.17g, h %.17g "
          "vs %.17g um\n",
          a.variant.c_str(), b.variant.c_str(), a.conditions.q_total_ul_min,
          b.conditions.q_total_ul_min, a.conditions.reynolds,
          b.conditions.reynolds, a.conditions.h_um, b.conditions.h_um);
    if (a.records.size() != b.records.size())
      diffs += strfmt("  %s has %zu periods, %s has %zu\n", a.variant.c_str(),
                      a.records.size(), b.variant.c_str(), b.records.size());
  }
  if (!diffs.empty())
    throw std::invalid_argument("compare: reports not comparable:\n" + diffs);

  ComparisonReport cr;
  cr.crossing_threshold = crossing_threshold;
  cr.reports.assign(reports.begin(), reports.end());
  for (const auto& r : reports) {
    int crossing = -1;
    for (const auto& rec : r.records)
      if (rec.fret_factor >= crossing_threshold) {
        crossing = rec.period;
        break;
      }
    cr.crossing_period.push_back(crossing);
  }
  for (size_t i = 0; i < reports.size(); ++i)
    for (size_t j = 0; j < reports.size(); ++j) {
      if (i == j) continue;
      PairwiseComparison pc;
      pc.variant_a = reports[i].variant;
      pc.variant_b = reports[j].variant;
      for (size_t k = 0; k < reports[i].records.size(); ++k) {
        const double fa = reports[i].records[k].fret_factor;
        const double fb = reports[j].records[k].fret_factor;
        pc.fret_ratio.push_back(fa / fb);
        pc.fret_difference.push_back(fa - fb);
      }
      cr.pairs.push_back(std::move(pc));
    }
  return cr;
}

inline CsvTable report_to_csv(const MixingReport& r) {
  CsvTable t;
  t.header = {"variant", "period", "y_um", "mixing_index", "fret_factor"};
  for (const auto& rec : r.records)
    t.rows.push_back({r.variant, std::to_string(rec.period), num17(rec.y_um),
                      num17(rec.mixing_index), num17(rec.fret_factor)});
  return t;
}

inline MixingReport report_from_csv(const CsvTable& t) {
  if (t.header != std::vector<std::string>{"variant", "period", "y_um",
                                           "mixing_index", "fret_factor"})
    throw std::invalid_argument("report_from_csv: unexpected header");
  MixingReport r;
  for (const auto& row : t.rows) {
    if (row.size() != 5)
      throw std::invalid_argument("report_from_csv: bad row width");
    if (r.variant.empty()) r.variant = row[0];
    r.records.push_back({std::stoi(row[1]), std::stod(row[2]),
                         std::stod(row[3]), std::stod(row[4])});
  }
  return r;
}

inline CsvTable comparison_to_csv(const ComparisonReport& cr) {
  CsvTable t;
  t.header = {"period", "y_um"};
  for (const auto& r : cr.reports) {
    t.header.push_back("mixing_" + r.variant);
    t.header.push_back("fret_" + r.variant);
  }
  for (const auto& pc : cr.pairs)
    t.header.push_back("fret_ratio_" + pc.variant_a + "_over_" + pc.variant_b);
  const size_t n_periods = cr.reports.front().records.size();
  for (size_t k = 0; k < n_periods; ++k) {
    std::vector<std::string> row;
    row.push_back(std::to_string(cr.reports.front().records[k].period));
    row.push_back(num17(cr.reports.front().records[k].y_um));
    for (const auto& r : cr.reports) {
      row.push_back(num17(r.records[k].mixing_index));
      row.push_back(num17(r.records[k].fret_factor));
    }
    for (const auto& pc : cr.pairs) row.push_back(num17(pc.fret_ratio[k]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace micromix

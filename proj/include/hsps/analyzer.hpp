// ============================================================================
// analyzer.hpp -- time-gated coincidence analysis of trigger records
//
// A record is kept by a gate when its trigger-to-clock delay lies within
// gate_width/2 of the gate centre.  A signal detection counts as a coincidence
// when present and |t_S| <= coincidence_window/2.  Both intervals are closed.
// ============================================================================
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsps/errors.hpp"
#include "hsps/event_io.hpp"
#include "hsps/fock_model.hpp"
#include "hsps/parallel.hpp"
#include "hsps/rng.hpp"

namespace hsps {

struct GateConfig {
  double gate_width = 300e-12;          ///< seconds
  std::optional<double> scan_start;     ///< seconds; default: earliest t_clk
  std::optional<double> scan_stop;      ///< seconds; default: latest t_clk
  std::optional<double> scan_step;      ///< seconds; default: gate_width / 4
  double coincidence_window = 1.1e-9;   ///< seconds, full width
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    detail::require(gate_width > 0.0, "gate_width must be positive");
    detail::require(coincidence_window > 0.0, "coincidence_window must be positive");
    if (scan_step) detail::require(*scan_step > 0.0, "scan_step must be positive");
    if (scan_start && scan_stop) detail::require(*scan_start <= *scan_stop, "scan_start must not exceed scan_stop");
  }

  [[nodiscard]] double width_ps() const { return gate_width * 1e12; }
  [[nodiscard]] double window_ps() const { return coincidence_window * 1e12; }
};

enum class EventClass { outside_gate, trigger_only, double_12, double_13, triple };

inline const char* to_string(EventClass c) {
  switch (c) {
    case EventClass::outside_gate:
      return "outside-gate";
    case EventClass::trigger_only:
      return "trigger-only";
    case EventClass::double_12:
      return "double-12";
    case EventClass::double_13:
      return "double-13";
    case EventClass::triple:
      return "triple";
  }
  return "?";
}

/// Signal-channel class of a record, ignoring the gate.
inline EventClass coincidence_class(const TriggerRecord& rec, double window_ps) {
  auto counts = [window_ps](const std::optional<std::int64_t>& t) {
    return t && 2.0 * std::abs(static_cast<double>(*t)) <= window_ps;
  };
  const bool s1 = counts(rec.t_s1);
  const bool s2 = counts(rec.t_s2);
  if (s1 && s2) return EventClass::triple;
  if (s1) return EventClass::double_12;
  if (s2) return EventClass::double_13;
  return EventClass::trigger_only;
}

inline bool inside_gate(std::int64_t t_clk, double gate_width_ps, double centre_ps) {
  return 2.0 * std::abs(static_cast<double>(t_clk) - centre_ps) <= gate_width_ps;
}

inline EventClass classify(const TriggerRecord& rec, const GateConfig& gate, double centre_ps) {
  if (!inside_gate(rec.t_clk, gate.width_ps(), centre_ps)) return EventClass::outside_gate;
  return coincidence_class(rec, gate.window_ps());
}

/// Trigger, double and triple counts in one gate.
struct GateCounts {
  std::uint64_t n1 = 0;
  std::uint64_t n12 = 0;
  std::uint64_t n13 = 0;
  std::uint64_t n123 = 0;

  void add(EventClass c) {
    if (c == EventClass::outside_gate) return;
    ++n1;
    n12 += c == EventClass::double_12 || c == EventClass::triple;
    n13 += c == EventClass::double_13 || c == EventClass::triple;
    n123 += c == EventClass::triple;
  }

  void validate() const {
    detail::require(n123 <= std::min(n12, n13), "N123 exceeds a double-coincidence count");
    detail::require(std::max(n12, n13) <= n1, "doubles exceed the trigger count");
    detail::require(n12 + n13 - n123 <= n1, "inconsistent counts: N12 + N13 - N123 exceeds N1");
  }

  [[nodiscard]] ClickRates rates() const {
    return ClickRates::from_counts(static_cast<double>(n1), static_cast<double>(n12), static_cast<double>(n13),
                                   static_cast<double>(n123), n1);
  }

  friend bool operator==(const GateCounts&, const GateCounts&) = default;
};

struct Uncertainties {
  std::optional<double> b_norm;
  std::optional<double> alpha;
  std::optional<double> g2;
  std::optional<double> eff2;
  std::optional<double> eff3;
};

struct CountSummary {
  GateCounts counts;
  NonclassicalityReport report;  ///< sigma fields hold the bootstrap values
  std::optional<double> eff2;
  std::optional<double> eff3;
  Uncertainties bootstrap;
  Uncertainties poisson;  ///< first-order propagation, exclusive classes Poisson
};

namespace detail {

struct MetricValues {
  std::optional<double> b_norm, alpha, g2, eff2, eff3;
};

inline MetricValues metric_values(double n1, double n12, double n13, double n123) {
  const auto rep = nonclassicality_metrics(ClickRates::from_counts(n1, n12, n13, n123));
  MetricValues v{rep.b_norm, rep.alpha, rep.g2, std::nullopt, std::nullopt};
  if (n1 > 0.0) {
    v.eff2 = n12 / n1;
    v.eff3 = n13 / n1;
  }
  return v;
}

class RunningSpread {
public:
  void add(const std::optional<double>& v) {
    if (!v) return;
    ++n_;
    const double d = *v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (*v - mean_);
  }

  [[nodiscard]] std::optional<double> stddev() const {
    if (n_ < 2) return std::nullopt;
    return std::sqrt(m2_ / static_cast<double>(n_ - 1));
  }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Propagates independent Poisson errors of the exclusive classes
/// (trigger-only, 12-only, 13-only, triple) through a metric whose gradient
/// with respect to (N1, N12, N13, N123) is `grad`.
inline double poisson_sigma(const GateCounts& c, const std::array<double, 4>& grad) {
  const double only1 = static_cast<double>(c.n1 - c.n12 - c.n13 + c.n123);
  const double only12 = static_cast<double>(c.n12 - c.n123);
  const double only13 = static_cast<double>(c.n13 - c.n123);
  const double triple = static_cast<double>(c.n123);
  const double d_only1 = grad[0];
  const double d_only12 = grad[0] + grad[1];
  const double d_only13 = grad[0] + grad[2];
  const double d_triple = grad[0] + grad[1] + grad[2] + grad[3];
  return std::sqrt(d_only1 * d_only1 * only1 + d_only12 * d_only12 * only12 + d_only13 * d_only13 * only13 +
                   d_triple * d_triple * triple);
}

inline Uncertainties poisson_uncertainties(const GateCounts& c) {
  Uncertainties u;
  const double n1 = static_cast<double>(c.n1), n12 = static_cast<double>(c.n12),
               n13 = static_cast<double>(c.n13), n123 = static_cast<double>(c.n123);
  if (n1 <= 0.0) return u;
  const double n1sq = n1 * n1;
  u.b_norm = poisson_sigma(c, {-n123 / n1sq + 2.0 * n12 * n13 / (n1sq * n1), -n13 / n1sq, -n12 / n1sq, 1.0 / n1});
  u.eff2 = poisson_sigma(c, {-n12 / n1sq, 1.0 / n1, 0.0, 0.0});
  u.eff3 = poisson_sigma(c, {-n13 / n1sq, 0.0, 1.0 / n1, 0.0});
  if (n12 > 0.0 && n13 > 0.0) {
    const double alpha = n1 * n123 / (n12 * n13);
    u.alpha = poisson_sigma(c, {alpha / n1, -alpha / n12, -alpha / n13, n1 / (n12 * n13)});
  }
  const double s = n12 + n13;
  if (s > 0.0) {
    const double g2 = 2.0 * n1 * n123 / (s * s);
    u.g2 = poisson_sigma(c, {g2 / n1, -2.0 * g2 / s, -2.0 * g2 / s, 2.0 * n1 / (s * s)});
  }
  return u;
}

/// Nonparametric bootstrap over the records of one gate.  Each resample draws
/// N1 records with replacement; only the class of a record matters, so the
/// draw maps a uniform index onto the class boundaries.
inline Uncertainties bootstrap_uncertainties(const GateCounts& c, std::size_t resamples, std::uint64_t seed) {
  Uncertainties u;
  if (c.n1 == 0 || resamples < 2) return u;
  const std::uint64_t triple_end = c.n123;
  const std::uint64_t only12_end = triple_end + (c.n12 - c.n123);
  const std::uint64_t only13_end = only12_end + (c.n13 - c.n123);
  rng::Stream rng(seed);
  RunningSpread sb, sa, sg, s2, s3;
  for (std::size_t k = 0; k < resamples; ++k) {
    std::uint64_t t = 0, a = 0, b = 0;
    for (std::uint64_t i = 0; i < c.n1; ++i) {
      const std::uint64_t j = rng.below(c.n1);
      if (j < triple_end)
        ++t;
      else if (j < only12_end)
        ++a;
      else if (j < only13_end)
        ++b;
    }
    const auto v = metric_values(static_cast<double>(c.n1), static_cast<double>(a + t), static_cast<double>(b + t),
                                 static_cast<double>(t));
    sb.add(v.b_norm);
    sa.add(v.alpha);
    sg.add(v.g2);
    s2.add(v.eff2);
    s3.add(v.eff3);
  }
  u.b_norm = sb.stddev();
  u.alpha = sa.stddev();
  u.g2 = sg.stddev();
  u.eff2 = s2.stddev();
  u.eff3 = s3.stddev();
  return u;
}

}  // namespace detail

/// Metrics of one set of counts, with bootstrap and Poisson uncertainties.
inline CountSummary summarize(const GateCounts& counts, std::size_t resamples = 1000, std::uint64_t seed = 1) {
  counts.validate();
  CountSummary s;
  s.counts = counts;
  s.report = nonclassicality_metrics(counts.rates());
  if (counts.n1 > 0) {
    s.eff2 = static_cast<double>(counts.n12) / static_cast<double>(counts.n1);
    s.eff3 = static_cast<double>(counts.n13) / static_cast<double>(counts.n1);
  }
  s.bootstrap = detail::bootstrap_uncertainties(counts, resamples, seed);
  s.poisson = detail::poisson_uncertainties(counts);
  s.report.sigma_b = s.bootstrap.b_norm;
  s.report.sigma_alpha = s.bootstrap.alpha;
  s.report.sigma_g2 = s.bootstrap.g2;
  return s;
}

struct GateScanRow {
  double centre_ps = 0.0;
  CountSummary summary;
};

/// Counts in every record, no gate on t_clk.
inline GateCounts ungated_counts(const std::vector<TriggerRecord>& records, double coincidence_window) {
  GateCounts c;
  const double w = coincidence_window * 1e12;
  for (const auto& r : records) c.add(coincidence_class(r, w));
  return c;
}

inline GateCounts gate_counts(const std::vector<TriggerRecord>& records, const GateConfig& gate, double centre_ps) {
  GateCounts c;
  for (const auto& r : records) c.add(classify(r, gate, centre_ps));
  return c;
}

/// Gate centres in picoseconds.
inline std::vector<double> scan_centres(const std::vector<TriggerRecord>& records, const GateConfig& gate) {
  gate.validate();
  std::vector<double> centres;
  if (records.empty() && !(gate.scan_start && gate.scan_stop)) return centres;
  double lo = 0.0, hi = 0.0;
  if (!records.empty()) {
    const auto [mn, mx] = std::minmax_element(records.begin(), records.end(),
                                              [](const auto& a, const auto& b) { return a.t_clk < b.t_clk; });
    lo = static_cast<double>(mn->t_clk);
    hi = static_cast<double>(mx->t_clk);
  }
  const double start = gate.scan_start ? *gate.scan_start * 1e12 : lo;
  const double stop = gate.scan_stop ? *gate.scan_stop * 1e12 : hi;
  const double step = gate.scan_step ? *gate.scan_step * 1e12 : gate.width_ps() / 4.0;
  detail::require(start <= stop, "scan_start must not exceed scan_stop");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  detail::require(n <= 10'000'000, "scan grid too fine");
  centres.reserve(n);
  for (std::size_t k = 0; k < n; ++k) centres.push_back(start + static_cast<double>(k) * step);
  return centres;
}

/// One row per gate centre, ordered by centre.  Bootstrap streams are seeded
/// per gate index, so rows do not depend on record order or thread count.
inline std::vector<GateScanRow> gate_scan(const std::vector<TriggerRecord>& records, const GateConfig& gate,
                                          unsigned threads = 1) {
  gate.validate();
  if (records.empty()) return {};
  const auto centres = scan_centres(records, gate);

  // Sort (t_clk, class) once; a gate is then a contiguous range.
  struct Keyed {
    std::int64_t t_clk;
    EventClass cls;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(records.size());
  for (const auto& r : records) keyed.push_back({r.t_clk, coincidence_class(r, gate.window_ps())});
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.t_clk != b.t_clk ? a.t_clk < b.t_clk : static_cast<int>(a.cls) < static_cast<int>(b.cls);
  });
  std::vector<GateCounts> prefix(keyed.size() + 1);
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    prefix[i + 1] = prefix[i];
    prefix[i + 1].add(keyed[i].cls);
  }

  std::vector<GateScanRow> rows(centres.size());
  const double half = gate.width_ps() / 2.0;
  parallel_for(centres.size(), threads, [&](std::size_t g) {
    const double c = centres[g];
    const auto lo = static_cast<std::int64_t>(std::ceil(c - half));
    const auto hi = static_cast<std::int64_t>(std::floor(c + half));
    const auto first = std::lower_bound(keyed.begin(), keyed.end(), lo,
                                        [](const Keyed& k, std::int64_t v) { return k.t_clk < v; });
    const auto last = std::upper_bound(keyed.begin(), keyed.end(), hi,
                                       [](std::int64_t v, const Keyed& k) { return v < k.t_clk; });
    const auto& a = prefix[static_cast<std::size_t>(first - keyed.begin())];
    const auto& b = prefix[static_cast<std::size_t>(last - keyed.begin())];
    const GateCounts counts{b.n1 - a.n1, b.n12 - a.n12, b.n13 - a.n13, b.n123 - a.n123};
    rows[g] = {c, summarize(counts, gate.bootstrap_resamples, rng::derive_seed(gate.seed, g))};
  });
  return rows;
}

/// Row with the most triples; ties go to the most triggers, then the earliest.
inline std::optional<std::size_t> peak_gate(const std::vector<GateScanRow>& rows) {
  if (rows.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i].summary.counts;
    const auto& b = rows[best].summary.counts;
    if (c.n123 > b.n123 || (c.n123 == b.n123 && c.n1 > b.n1)) best = i;
  }
  return best;
}

inline void write_gate_scan_csv(std::ostream& os, const std::vector<GateScanRow>& rows) {
  os << "gate_center_ps,n1,n12,n13,n123,eff2,eff3,b_norm,sigma_b,alpha,sigma_alpha,g2,sigma_g2\n";
  for (const auto& row : rows) {
    const auto& s = row.summary;
    os << format_g17(row.centre_ps) << ',' << s.counts.n1 << ',' << s.counts.n12 << ',' << s.counts.n13 << ','
       << s.counts.n123 << ',' << format_g17(s.eff2) << ',' << format_g17(s.eff3) << ','
       << format_g17(s.report.b_norm) << ',' << format_g17(s.bootstrap.b_norm) << ','
       << format_g17(s.report.alpha) << ',' << format_g17(s.bootstrap.alpha) << ',' << format_g17(s.report.g2)
       << ',' << format_g17(s.bootstrap.g2) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const CountSummary& s) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v && std::isfinite(*v) ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  auto unc = [&](const Uncertainties& u) {
    return nlohmann::ordered_json{{"b_norm", opt(u.b_norm)}, {"alpha", opt(u.alpha)}, {"g2", opt(u.g2)},
                                  {"eff2", opt(u.eff2)},     {"eff3", opt(u.eff3)}};
  };
  return {{"counts", {{"N1", s.counts.n1}, {"N12", s.counts.n12}, {"N13", s.counts.n13}, {"N123", s.counts.n123}}},
          {"B_raw", s.report.b_raw},
          {"B_norm", opt(s.report.b_norm)},
          {"alpha", opt(s.report.alpha)},
          {"g2", opt(s.report.g2)},
          {"eff2", opt(s.eff2)},
          {"eff3", opt(s.eff3)},
          {"overall_transmission", opt(s.report.eta_overall)},
          {"sigma_B", opt(s.report.sigma_b)},
          {"sigma_alpha", opt(s.report.sigma_alpha)},
          {"sigma_g2", opt(s.report.sigma_g2)},
          {"bootstrap_sigma", unc(s.bootstrap)},
          {"poisson_sigma", unc(s.poisson)}};
}

}  // namespace hsps

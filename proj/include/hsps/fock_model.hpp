// ============================================================================
// fock_model.hpp -- click statistics of a lossy pulsed pair source
//
// A single-mode two-mode-squeezed source emits n pairs with probability
// (1 - lambda^2) lambda^(2n).  One photon of each pair goes to the trigger
// detector, the other to a beamsplitter feeding two signal detectors.  All
// detectors are binary: a click means at least one photon was registered.
//
// Click probabilities follow from the pair-number generating function
//   G(x) = sum_n P(n) x^n = (1 - lambda^2) / (1 - lambda^2 x)
// evaluated at the per-photon "no click" probabilities of each detector set.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hsps/errors.hpp"
#include "hsps/parallel.hpp"

namespace hsps {

/// How a binary detector responds to n incident photons.
enum class DetectorForm {
  povm,         ///< 1 - (1 - eta)^n : independent per-photon detection
  exponential,  ///< 1 - exp(-eta n) : literal exponential operator
};

inline const char* to_string(DetectorForm form) {
  return form == DetectorForm::povm ? "povm" : "exponential";
}

inline DetectorForm detector_form_from_string(const std::string& s) {
  if (s == "povm") return DetectorForm::povm;
  if (s == "exponential") return DetectorForm::exponential;
  throw DomainError("unknown detector form '" + s + "' (expected povm|exponential)");
}

struct SourceParams {
  double lambda = 0.0;  ///< parametric gain, 0 <= lambda < 1
  double eta_T = 1.0;   ///< lumped trigger-arm transmission incl. detector
  double eta_s = 1.0;   ///< signal-arm optical transmission before the splitter
  double r = 0.5;       ///< splitter power reflectance (towards detector 2)
  double t = 0.5;       ///< splitter power transmittance (towards detector 3)
  double eta_2 = 1.0;
  double eta_3 = 1.0;
  // Per-pulse dark-click probabilities, OR-ed with photon clicks.
  double dark_T = 0.0;
  double dark_2 = 0.0;
  double dark_3 = 0.0;

  /// Per-photon probability that a signal photon fires detector 2.
  [[nodiscard]] double q2() const noexcept { return eta_s * r * eta_2; }
  [[nodiscard]] double q3() const noexcept { return eta_s * t * eta_3; }

  void validate() const {
    detail::require(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1)");
    for (double v : {eta_T, eta_s, r, t, eta_2, eta_3, dark_T, dark_2, dark_3})
      detail::require(detail::in_unit_interval(v), "efficiencies and probabilities must lie in [0, 1]");
    detail::require(std::abs(r + t - 1.0) <= 1e-12, "beamsplitter requires r + t = 1");
    detail::require(q2() + q3() <= 1.0 + 1e-12, "q2 + q3 must not exceed 1");
  }
};

enum class RateKind { probability, counts };

/// Single, double and triple click rates.  Either per-trial probabilities or
/// raw event counts, never a mix; `kind` records which.
struct ClickRates {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r12 = 0.0;
  double r13 = 0.0;
  double r123 = 0.0;
  std::uint64_t n_trials = 0;
  RateKind kind = RateKind::probability;

  static ClickRates from_counts(double n1, double n12, double n13, double n123,
                                std::uint64_t n_trials = 0) {
    ClickRates c;
    c.r1 = n1;
    c.r12 = n12;
    c.r13 = n13;
    c.r123 = n123;
    c.n_trials = n_trials;
    c.kind = RateKind::counts;
    return c;
  }

  /// Checks 0 <= r123 <= min(r12, r13), max(r12, r13) <= r1 (and <= 1 for
  /// probabilities).  `slack` absorbs round-off in computed probabilities.
  void validate(double slack = 0.0) const {
    detail::require(r123 >= -slack && r12 >= -slack && r13 >= -slack && r2 >= -slack && r3 >= -slack,
                    "click rates must be non-negative");
    detail::require(r123 <= std::min(r12, r13) + slack, "triples exceed a double-coincidence rate");
    detail::require(std::max(r12, r13) <= r1 + slack, "doubles exceed the trigger rate");
    if (kind == RateKind::probability)
      detail::require(r1 <= 1.0 + slack && r2 <= 1.0 + slack && r3 <= 1.0 + slack,
                      "probabilities exceed 1");
  }
};

/// P(n) = (1 - lambda^2) lambda^(2n).
inline double pair_number_pmf(double lambda, long long n) {
  detail::require(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1)");
  detail::require(n >= 0, "pair number must be non-negative");
  const double L = lambda * lambda;
  if (n == 0) return 1.0 - L;
  return (1.0 - L) * std::pow(L, static_cast<double>(n));
}

/// Smallest N with (lambda^2)^(N+1) / (1 - lambda^2) < 1e-15, capped at 1e5.
inline long long truncation_cutoff(double lambda) {
  const double L = lambda * lambda;
  if (L == 0.0) return 0;
  constexpr long long cap = 100000;
  double tail = L / (1.0 - L);
  long long n = 0;
  while (tail >= 1e-15 && n < cap) {
    tail *= L;
    ++n;
  }
  return n;
}

namespace detail {

/// Per-photon no-click probabilities for the trigger (a), detector 2 (b),
/// detector 3 (c) and for both signal detectors jointly (d).
struct NoClickFactors {
  double a, b, c, d;
};

inline NoClickFactors no_click_factors(const SourceParams& p, DetectorForm form) {
  const double q2 = p.q2();
  const double q3 = p.q3();
  if (form == DetectorForm::povm) {
    // A photon leaves the splitter through exactly one port.
    return {1.0 - p.eta_T, 1.0 - q2, 1.0 - q3, std::max(0.0, 1.0 - q2 - q3)};
  }
  return {std::exp(-p.eta_T), std::exp(-q2), std::exp(-q3), std::exp(-(q2 + q3))};
}

}  // namespace detail

/// Closed-form per-pulse click probabilities.
inline ClickRates click_probabilities(const SourceParams& p, DetectorForm form = DetectorForm::povm) {
  p.validate();
  const double L = p.lambda * p.lambda;
  const auto [a, b, c, d] = detail::no_click_factors(p, form);

  // 1 - G(x) = L (1 - x) / (1 - L x) has no cancellation for small L.
  auto one_minus_G = [L](double x) { return L * (1.0 - x) / (1.0 - L * x); };
  // Probability that at least one detector of a set fires, given the set's
  // joint photon no-click factor and its product of dark no-click factors.
  auto any_click = [&](double x, double dark_keep) {
    return (1.0 - dark_keep) + dark_keep * one_minus_G(x);
  };
  const double kT = 1.0 - p.dark_T;
  const double k2 = 1.0 - p.dark_2;
  const double k3 = 1.0 - p.dark_3;

  const double fT = any_click(a, kT);
  const double f2 = any_click(b, k2);
  const double f3 = any_click(c, k3);
  const double fT2 = any_click(a * b, kT * k2);
  const double fT3 = any_click(a * c, kT * k3);
  const double f23 = any_click(d, k2 * k3);
  const double fT23 = any_click(a * d, kT * k2 * k3);

  ClickRates out;
  out.kind = RateKind::probability;
  out.n_trials = 1;
  out.r1 = fT;
  out.r2 = f2;
  out.r3 = f3;
  out.r12 = fT + f2 - fT2;
  out.r13 = fT + f3 - fT3;
  out.r123 = fT + f2 + f3 - fT2 - fT3 - f23 + fT23;
  return out;
}

/// Truncated-sum oracle for click_probabilities.  Walks n = 0..cutoff and
/// tracks the joint (fired 2, fired 3) state of the signal detectors photon by
/// photon, so it shares no algebra with the closed form.  cutoff < 0 selects
/// truncation_cutoff(lambda).
inline ClickRates click_probabilities_truncated(const SourceParams& p,
                                                DetectorForm form = DetectorForm::povm,
                                                long long cutoff = -1) {
  p.validate();
  if (cutoff < 0) cutoff = truncation_cutoff(p.lambda);

  // Per-photon outcome probabilities at the signal detectors.
  double only2, only3, both, none;
  double trig_miss;
  if (form == DetectorForm::povm) {
    only2 = p.q2();
    only3 = p.q3();
    both = 0.0;
    none = 1.0 - only2 - only3;
    trig_miss = 1.0 - p.eta_T;
  } else {
    const double m2 = std::exp(-p.q2());
    const double m3 = std::exp(-p.q3());
    only2 = (1.0 - m2) * m3;
    only3 = m2 * (1.0 - m3);
    both = (1.0 - m2) * (1.0 - m3);
    none = m2 * m3;
    trig_miss = std::exp(-p.eta_T);
  }

  // State probabilities: s[0] none fired, s[1] only 2, s[2] only 3, s[3] both.
  double s[4] = {1.0, 0.0, 0.0, 0.0};
  double trig_none = 1.0;
  const double L = p.lambda * p.lambda;
  double pn = 1.0 - L;

  ClickRates acc;
  acc.kind = RateKind::probability;
  acc.n_trials = 1;
  for (long long n = 0; n <= cutoff; ++n) {
    if (n > 0) {
      const double t0 = s[0] * none;
      const double t1 = s[0] * only2 + s[1] * (none + only2);
      const double t2 = s[0] * only3 + s[2] * (none + only3);
      const double t3 = s[0] * both + s[1] * (only3 + both) + s[2] * (only2 + both) + s[3];
      s[0] = t0;
      s[1] = t1;
      s[2] = t2;
      s[3] = t3;
      trig_none *= trig_miss;
      pn *= L;
    }
    const double pT = 1.0 - trig_none * (1.0 - p.dark_T);
    const double fired2 = s[1] + s[3];
    const double fired3 = s[2] + s[3];
    const double p2 = fired2 + (1.0 - fired2) * p.dark_2;
    const double p3 = fired3 + (1.0 - fired3) * p.dark_3;
    const double p23 = s[3] + s[1] * p.dark_3 + s[2] * p.dark_2 + s[0] * p.dark_2 * p.dark_3;
    acc.r1 += pn * pT;
    acc.r2 += pn * p2;
    acc.r3 += pn * p3;
    acc.r12 += pn * pT * p2;
    acc.r13 += pn * pT * p3;
    acc.r123 += pn * pT * p23;
  }
  return acc;
}

struct NonclassicalityReport {
  double b_raw = 0.0;                 ///< R1 R123 - R12 R13 in the input's units
  std::optional<double> b_norm;       ///< b_raw / R1^2
  std::optional<double> alpha;        ///< R1 R123 / (R12 R13)
  std::optional<double> g2;           ///< 2 p2 / p1^2
  std::optional<double> eta_overall;  ///< (R12 + R13) / R1
  std::optional<double> sigma_b;
  std::optional<double> sigma_alpha;
  std::optional<double> sigma_g2;
};

/// Derived metrics.  A metric whose denominator vanishes is left empty.
inline NonclassicalityReport nonclassicality_metrics(const ClickRates& rates) {
  NonclassicalityReport rep;
  const double r1 = rates.r1, r12 = rates.r12, r13 = rates.r13, r123 = rates.r123;
  rep.b_raw = r1 * r123 - r12 * r13;
  if (r1 > 0.0) {
    rep.b_norm = r123 / r1 - (r12 / r1) * (r13 / r1);
    rep.eta_overall = (r12 + r13) / r1;
    const double p1 = (r12 + r13) / r1;
    if (p1 > 0.0) rep.g2 = 2.0 * (r123 / r1) / (p1 * p1);
  }
  if (r12 > 0.0 && r13 > 0.0) rep.alpha = (r1 / r12) * (r123 / r13);
  return rep;
}

// ----------------------------------------------------------------------------
// Parameter scans
// ----------------------------------------------------------------------------

struct ScanRow {
  double lambda = 0.0;
  double eta_s = 0.0;
  double eta_T = 0.0;
  double r = 0.0;
  double b_raw = 0.0;
  std::optional<double> b_norm;
  std::optional<double> alpha;
  std::optional<double> g2;
  std::optional<double> eta_overall;
};

/// B over the lambda x eta_s grid; rows ordered lambda-major.
inline std::vector<ScanRow> scan_B(const std::vector<double>& lambdas, const std::vector<double>& eta_s_values,
                                   const SourceParams& base, DetectorForm form = DetectorForm::povm,
                                   unsigned threads = 1) {
  detail::require(!lambdas.empty() && !eta_s_values.empty(), "scan grid must not be empty");
  for (double l : lambdas) {
    SourceParams p = base;
    p.lambda = l;
    for (double e : eta_s_values) {
      p.eta_s = e;
      p.validate();
    }
  }
  std::vector<ScanRow> rows(lambdas.size() * eta_s_values.size());
  parallel_for(rows.size(), threads, [&](std::size_t idx) {
    SourceParams p = base;
    p.lambda = lambdas[idx / eta_s_values.size()];
    p.eta_s = eta_s_values[idx % eta_s_values.size()];
    const auto rep = nonclassicality_metrics(click_probabilities(p, form));
    rows[idx] = {p.lambda, p.eta_s, p.eta_T, p.r, rep.b_raw, rep.b_norm, rep.alpha, rep.g2, rep.eta_overall};
  });
  return rows;
}

inline std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_g17(const std::optional<double>& v) {
  return v ? format_g17(*v) : std::string("nan");
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanRow>& rows) {
  os << "lambda,eta_s,eta_T,r,B_raw,B_norm,alpha,g2\n";
  for (const auto& row : rows) {
    os << format_g17(row.lambda) << ',' << format_g17(row.eta_s) << ',' << format_g17(row.eta_T) << ','
       << format_g17(row.r) << ',' << format_g17(row.b_raw) << ',' << format_g17(row.b_norm) << ','
       << format_g17(row.alpha) << ',' << format_g17(row.g2) << '\n';
  }
}

// ----------------------------------------------------------------------------
// Gain estimation
// ----------------------------------------------------------------------------

struct GainEstimate {
  double lambda_hat = 0.0;
  double f = 0.0;
  double rep_rate = 0.0;
  double signal_singles_rate = 0.0;  ///< R2 + R3, events/s
  double eta_s = 0.0;
};

/// lambda^2 = (R2 + R3) / (eta_s R_rep (1 + f)), valid when uncorrelated
/// trigger-arm photons are suppressed.
inline GainEstimate estimate_lambda(double signal_singles_rate, double eta_s, double rep_rate, double f) {
  detail::require(signal_singles_rate >= 0.0, "signal singles rate must be non-negative");
  detail::require(eta_s > 0.0 && eta_s <= 1.0, "eta_s must lie in (0, 1]");
  detail::require(rep_rate > 0.0, "repetition rate must be positive");
  detail::require(f >= 0.0, "background fraction f must be non-negative");
  const double lambda_sq = signal_singles_rate / (eta_s * rep_rate * (1.0 + f));
  if (!(lambda_sq < 1.0))
    throw DomainError("estimated lambda^2 >= 1: source is not in the weak-gain regime");
  return {std::sqrt(lambda_sq), f, rep_rate, signal_singles_rate, eta_s};
}

}  // namespace hsps

// ============================================================================
// pulse_sim.hpp -- pulse-by-pulse Monte Carlo of the heralding experiment
//
// Each pump pulse emits n pairs (geometric in lambda^2) plus Poissonian
// uncorrelated photons in the three detection branches.  Pair photons arrive
// at the pulse epoch; detector jitter is Gaussian.  Background photons and
// dark clicks arrive uniformly over the pulse period.  A detector fires at most once per pulse,
// at its earliest registered photon.  Whenever the trigger fires and the
// acquisition is live, a TriggerRecord is emitted.
//
// Most pulses are empty at realistic gains, so the sampler jumps straight to
// the next pulse holding any pair, detected background photon or dark click (a
// geometric gap) and then draws that pulse's content conditioned on it being
// non-empty.  The joint distribution is the same as drawing every pulse.
// ============================================================================
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsps/errors.hpp"
#include "hsps/event_io.hpp"
#include "hsps/fock_model.hpp"
#include "hsps/parallel.hpp"
#include "hsps/rng.hpp"

namespace hsps {

inline constexpr double fwhm_per_sigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

struct SimConfig {
  SourceParams source;
  double rep_rate = 87e6;       ///< pulses per second
  std::uint64_t n_pulses = 100'000'000;
  /// Signal-arm uncorrelated intensity as a fraction of the mean pair number.
  double background_f = 0.0;
  /// Trigger-arm uncorrelated intensity relative to the signal-arm one.
  double trigger_background_ratio = 1.0;
  double jitter_fwhm = 300e-12;  ///< seconds
  double dead_time = 1e-6;       ///< seconds, after each recorded trigger
  double quantization = 1e-12;   ///< timestamp step, seconds
  std::uint64_t seed = 1;
  std::uint64_t batch_pulses = 1ULL << 24;

  [[nodiscard]] double period_ps() const { return 1e12 / rep_rate; }

  /// Mean pair number per pulse.
  [[nodiscard]] double mean_pairs() const {
    const double L = source.lambda * source.lambda;
    return L / (1.0 - L);
  }

  struct BackgroundMeans {
    double trigger = 0.0;  ///< photons per pulse entering the trigger arm
    double signal2 = 0.0;  ///< photons per pulse routed towards detector 2
    double signal3 = 0.0;
  };

  /// Uncorrelated photons per pulse, on the same footing as pair photons
  /// (before optical and detector losses).
  [[nodiscard]] BackgroundMeans background_means() const {
    const double signal = background_f * mean_pairs();
    return {trigger_background_ratio * signal, signal * source.r, signal * source.t};
  }

  void validate() const {
    source.validate();
    detail::require(rep_rate > 0.0 && std::isfinite(rep_rate), "rep_rate must be positive");
    detail::require(n_pulses > 0, "n_pulses must be positive");
    detail::require(background_f >= 0.0 && std::isfinite(background_f), "background_f must be >= 0");
    detail::require(trigger_background_ratio >= 0.0 && std::isfinite(trigger_background_ratio),
                    "trigger_background_ratio must be >= 0");
    detail::require(jitter_fwhm >= 0.0, "jitter_fwhm must be >= 0");
    detail::require(dead_time >= 0.0, "dead_time must be >= 0");
    detail::require(quantization > 0.0, "quantization step must be positive");
    detail::require(batch_pulses > 0, "batch_pulses must be positive");
    const auto bg = background_means();
    detail::require(bg.trigger + bg.signal2 + bg.signal3 < 500.0, "background means too large for per-pulse sampling");
  }
};

struct RunSummary {
  std::uint64_t n_pulses = 0;
  std::uint64_t n1 = 0;  ///< trigger clicks (= triggers generated)
  std::uint64_t n2 = 0;
  std::uint64_t n3 = 0;
  // Same-pulse coincidences, no windows applied.
  std::uint64_t n12 = 0;
  std::uint64_t n13 = 0;
  std::uint64_t n123 = 0;
  std::uint64_t records_written = 0;
  std::uint64_t dead_time_discarded = 0;
};

struct SimResult {
  std::vector<TriggerRecord> records;
  RunSummary summary;
};

namespace detail {

struct PulseClicks {
  std::optional<double> trigger;  // ps relative to the pulse epoch
  std::optional<double> signal2;
  std::optional<double> signal3;
};

struct Candidate {
  std::uint64_t pulse;
  double t_trigger;  // quantized ps relative to epoch
  TriggerRecord record;
};

struct BatchOutput {
  std::vector<Candidate> candidates;
  RunSummary counts;
};

inline void earliest(std::optional<double>& slot, double t) {
  if (!slot || t < *slot) slot = t;
}

class PulseSampler {
public:
  explicit PulseSampler(const SimConfig& cfg) : cfg_(cfg) {
    const auto& s = cfg.source;
    L_ = s.lambda * s.lambda;
    q2_ = s.q2();
    q3_ = s.q3();
    sigma_ = cfg.jitter_fwhm * 1e12 / fwhm_per_sigma;
    period_ = cfg.period_ps();
    step_ = cfg.quantization * 1e12;
    const auto bg = cfg.background_means();
    m1_ = bg.trigger * s.eta_T;
    m2_ = bg.signal2 * s.eta_s * s.eta_2;
    m3_ = bg.signal3 * s.eta_s * s.eta_3;
    m_ = m1_ + m2_ + m3_;
    dark_ = {s.dark_T, s.dark_2, s.dark_3};
    const double log_no_dark = std::log1p(-s.dark_T) + std::log1p(-s.dark_2) + std::log1p(-s.dark_3);
    p_dark_ = -std::expm1(log_no_dark);
    p_background_ = -std::expm1(-m_);
    p_active_ = -std::expm1(std::log1p(-L_) - m_ + log_no_dark);
  }

  [[nodiscard]] double p_active() const { return p_active_; }

  /// Content of a pulse known to be non-empty.
  PulseClicks active_pulse(rng::Stream& rng) const {
    // Walk the three sources in order, each conditioned on none of the
    // earlier ones having produced anything.
    std::uint64_t pairs = 0;
    std::uint64_t background = 0;
    std::array<bool, 3> dark{};
    const bool pairs_only = p_background_ == 0.0 && p_dark_ == 0.0;
    if (rng.uniform() * p_active_ < L_ || pairs_only) {
      pairs = 1 + rng.geometric(1.0 - L_);
      background = rng.poisson(m_);
      draw_darks(rng, dark, false);
    } else if (rng.uniform() * (1.0 - (1.0 - p_background_) * (1.0 - p_dark_)) < p_background_) {
      background = rng.poisson_nonzero(m_);
      draw_darks(rng, dark, false);
    } else {
      draw_darks(rng, dark, true);
    }

    PulseClicks out;
    if (dark[0]) earliest(out.trigger, uniform_in_period(rng));
    if (dark[1]) earliest(out.signal2, uniform_in_period(rng));
    if (dark[2]) earliest(out.signal3, uniform_in_period(rng));
    const double eta_T = cfg_.source.eta_T;
    for (std::uint64_t i = 0; i < pairs; ++i) {
      if (rng.uniform() < eta_T) earliest(out.trigger, jitter(rng));
      const double u = rng.uniform();
      if (u < q2_)
        earliest(out.signal2, jitter(rng));
      else if (u < q2_ + q3_)
        earliest(out.signal3, jitter(rng));
    }
    for (std::uint64_t i = 0; i < background; ++i) {
      const double u = rng.uniform() * m_;
      const double t = uniform_in_period(rng);
      if (u < m1_)
        earliest(out.trigger, t);
      else if (u < m1_ + m2_)
        earliest(out.signal2, t);
      else
        earliest(out.signal3, t);
    }
    return out;
  }

  [[nodiscard]] double quantize(double t_ps) const { return std::round(std::round(t_ps / step_) * step_); }

  [[nodiscard]] std::int64_t fold(double t_ps) const {
    return static_cast<std::int64_t>(std::llround(t_ps - period_ * std::round(t_ps / period_)));
  }

private:
  double jitter(rng::Stream& rng) const { return sigma_ == 0.0 ? 0.0 : sigma_ * rng.normal(); }

  double uniform_in_period(rng::Stream& rng) const { return (rng.uniform() - 0.5) * period_; }

  /// Independent dark clicks, optionally conditioned on at least one.
  void draw_darks(rng::Stream& rng, std::array<bool, 3>& fired, bool at_least_one) const {
    bool need = at_least_one;
    for (std::size_t i = 0; i < 3; ++i) {
      double p = dark_[i];
      if (need) {
        double rest = 1.0;
        for (std::size_t j = i; j < 3; ++j) rest *= 1.0 - dark_[j];
        p = i == 2 ? 1.0 : dark_[i] / (1.0 - rest);
      }
      fired[i] = rng.uniform() < p;
      if (fired[i]) need = false;
    }
  }

  const SimConfig& cfg_;
  double L_, q2_, q3_, sigma_, period_, step_;
  double m1_, m2_, m3_, m_;
  std::array<double, 3> dark_{};
  double p_dark_, p_background_, p_active_;
};

inline BatchOutput simulate_batch(const SimConfig& cfg, const PulseSampler& sampler, std::uint64_t batch) {
  BatchOutput out;
  const std::uint64_t first = batch * cfg.batch_pulses;
  const std::uint64_t last = std::min(cfg.n_pulses, first + cfg.batch_pulses);
  if (sampler.p_active() <= 0.0) return out;
  rng::Stream rng(cfg.seed, batch);
  std::uint64_t pulse = first;
  for (;;) {
    const std::uint64_t gap = rng.geometric(sampler.p_active());
    if (gap >= last - pulse) break;
    pulse += gap;
    const PulseClicks c = sampler.active_pulse(rng);
    out.counts.n1 += c.trigger.has_value();
    out.counts.n2 += c.signal2.has_value();
    out.counts.n3 += c.signal3.has_value();
    if (c.trigger) {
      out.counts.n12 += c.signal2.has_value();
      out.counts.n13 += c.signal3.has_value();
      out.counts.n123 += c.signal2 && c.signal3;
      const double trig = sampler.quantize(*c.trigger);
      TriggerRecord rec;
      rec.t_clk = sampler.fold(trig);
      if (c.signal2) rec.t_s1 = static_cast<std::int64_t>(sampler.quantize(*c.signal2) - trig);
      if (c.signal3) rec.t_s2 = static_cast<std::int64_t>(sampler.quantize(*c.signal3) - trig);
      out.candidates.push_back({pulse, trig, rec});
    }
    ++pulse;
    if (pulse >= last) break;
  }
  return out;
}

}  // namespace detail

/// Runs the simulation.  Output is a pure function of the config; `threads`
/// only changes wall-clock time.
inline SimResult simulate(const SimConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const detail::PulseSampler sampler(cfg);
  const std::uint64_t n_batches = (cfg.n_pulses + cfg.batch_pulses - 1) / cfg.batch_pulses;
  std::vector<detail::BatchOutput> batches(n_batches);
  parallel_for(n_batches, threads, [&](std::size_t b) { batches[b] = detail::simulate_batch(cfg, sampler, b); });

  SimResult res;
  res.summary.n_pulses = cfg.n_pulses;
  const double period = cfg.period_ps();
  const double dead_ps = cfg.dead_time * 1e12;
  std::optional<double> last_recorded;
  for (const auto& b : batches) {
    res.summary.n1 += b.counts.n1;
    res.summary.n2 += b.counts.n2;
    res.summary.n3 += b.counts.n3;
    res.summary.n12 += b.counts.n12;
    res.summary.n13 += b.counts.n13;
    res.summary.n123 += b.counts.n123;
    // Dead time is a sequential pass over the ordered trigger stream.
    for (const auto& c : b.candidates) {
      const double abs_time = static_cast<double>(c.pulse) * period + c.t_trigger;
      if (last_recorded && abs_time < *last_recorded + dead_ps) {
        ++res.summary.dead_time_discarded;
        continue;
      }
      last_recorded = abs_time;
      res.records.push_back(c.record);
    }
  }
  res.summary.records_written = res.records.size();
  return res;
}

inline nlohmann::ordered_json to_json(const SimConfig& cfg) {
  const auto& s = cfg.source;
  return {{"lambda", s.lambda},
          {"eta_T", s.eta_T},
          {"eta_s", s.eta_s},
          {"r", s.r},
          {"t", s.t},
          {"eta_2", s.eta_2},
          {"eta_3", s.eta_3},
          {"dark_T", s.dark_T},
          {"dark_2", s.dark_2},
          {"dark_3", s.dark_3},
          {"rep_rate", cfg.rep_rate},
          {"n_pulses", cfg.n_pulses},
          {"background_f", cfg.background_f},
          {"trigger_background_ratio", cfg.trigger_background_ratio},
          {"jitter_fwhm", cfg.jitter_fwhm},
          {"dead_time", cfg.dead_time},
          {"quantization", cfg.quantization},
          {"seed", cfg.seed},
          {"batch_pulses", cfg.batch_pulses}};
}

inline constexpr int sidecar_format_version = 1;

inline nlohmann::ordered_json sidecar_json(const RunSummary& s, const SimConfig& cfg) {
  return {{"format_version", sidecar_format_version},
          {"n_pulses", s.n_pulses},
          {"N1", s.n1},
          {"N2", s.n2},
          {"N3", s.n3},
          {"N12", s.n12},
          {"N13", s.n13},
          {"N123", s.n123},
          {"records_written", s.records_written},
          {"dead_time_discarded", s.dead_time_discarded},
          {"config", to_json(cfg)}};
}

inline void write_sidecar(const std::string& path, const RunSummary& s, const SimConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << sidecar_json(s, cfg).dump(2) << '\n';
  if (!out) throw IoError(path, "write failed");
}

}  // namespace hsps

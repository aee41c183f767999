#include <gtest/gtest.h>

#include <cmath>

#include "hsps/fock_model.hpp"
#include "hsps/pulse_sim.hpp"
#include "hsps/rng.hpp"

using namespace hsps;

namespace {

SimConfig base_config(double lambda = 0.03) {
  SimConfig cfg;
  cfg.source.lambda = lambda;
  cfg.source.eta_T = 0.02;
  cfg.source.eta_s = 0.345;
  cfg.n_pulses = 10'000'000;
  cfg.dead_time = 0.0;
  return cfg;
}

// |observed - expected| in binomial standard errors.
double binomial_z(std::uint64_t count, std::uint64_t n, double p) {
  const double nd = static_cast<double>(n);
  const double se = std::sqrt(std::max(p * (1.0 - p), 1.0 / nd) / nd);
  return std::abs(static_cast<double>(count) / nd - p) / se;
}

}  // namespace

TEST(Simulate, ZeroGainGivesNoRecords) {
  auto cfg = base_config(0.0);
  const auto res = simulate(cfg);
  EXPECT_TRUE(res.records.empty());
  EXPECT_EQ(res.summary.n1, 0u);
  EXPECT_EQ(res.summary.n2 + res.summary.n3, 0u);
  EXPECT_EQ(res.summary.n_pulses, cfg.n_pulses);
}

TEST(Simulate, TriggerRateMatchesModel) {
  auto cfg = base_config();
  cfg.n_pulses = 1'000'000'000;
  const auto res = simulate(cfg, default_threads());
  const auto model = click_probabilities(cfg.source);
  EXPECT_LT(binomial_z(res.summary.n1, cfg.n_pulses, model.r1), 4.0);
  EXPECT_LT(binomial_z(res.summary.n12, cfg.n_pulses, model.r12), 4.0);
  EXPECT_LT(binomial_z(res.summary.n13, cfg.n_pulses, model.r13), 4.0);
}

TEST(Simulate, StatisticalFidelityAtRandomPoints) {
  rng::Stream pick(2024);
  for (int i = 0; i < 10; ++i) {
    SimConfig cfg;
    cfg.source.lambda = 0.05 + 0.35 * pick.uniform();
    cfg.source.eta_T = 0.01 + 0.5 * pick.uniform();
    cfg.source.eta_s = 0.05 + 0.9 * pick.uniform();
    cfg.source.r = 0.2 + 0.6 * pick.uniform();
    cfg.source.t = 1.0 - cfg.source.r;
    cfg.source.eta_2 = 0.5 + 0.5 * pick.uniform();
    cfg.source.eta_3 = 0.5 + 0.5 * pick.uniform();
    cfg.source.dark_T = 1e-4 * pick.uniform();
    cfg.source.dark_2 = 1e-4 * pick.uniform();
    cfg.source.dark_3 = 1e-4 * pick.uniform();
    cfg.n_pulses = 100'000'000;
    cfg.dead_time = 0.0;
    cfg.seed = 100 + i;
    const auto res = simulate(cfg, default_threads());
    const auto m = click_probabilities(cfg.source);
    const auto& s = res.summary;
    SCOPED_TRACE("point " + std::to_string(i) + " lambda=" + std::to_string(cfg.source.lambda));
    EXPECT_LT(binomial_z(s.n1, s.n_pulses, m.r1), 4.0);
    EXPECT_LT(binomial_z(s.n2, s.n_pulses, m.r2), 4.0);
    EXPECT_LT(binomial_z(s.n3, s.n_pulses, m.r3), 4.0);
    EXPECT_LT(binomial_z(s.n12, s.n_pulses, m.r12), 4.0);
    EXPECT_LT(binomial_z(s.n13, s.n_pulses, m.r13), 4.0);
    EXPECT_LT(binomial_z(s.n123, s.n_pulses, m.r123), 4.0);
  }
}

TEST(Simulate, DarkCountsAlone) {
  auto cfg = base_config(0.0);
  cfg.source.dark_T = 1e-3;
  cfg.source.dark_2 = 2e-3;
  cfg.n_pulses = 20'000'000;
  const auto res = simulate(cfg);
  EXPECT_LT(binomial_z(res.summary.n1, cfg.n_pulses, 1e-3), 4.0);
  EXPECT_LT(binomial_z(res.summary.n2, cfg.n_pulses, 2e-3), 4.0);
  EXPECT_EQ(res.summary.n3, 0u);
  EXPECT_LT(binomial_z(res.summary.n12, cfg.n_pulses, 2e-6), 4.0);
}

TEST(Simulate, JitterWidth) {
  auto cfg = base_config(0.1);
  cfg.source.eta_T = 0.5;
  cfg.source.eta_s = 0.8;
  cfg.n_pulses = 20'000'000;
  const auto res = simulate(cfg);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& r : res.records) {
    if (!r.t_s1) continue;
    const double x = static_cast<double>(*r.t_s1);
    sum += x;
    sum2 += x * x;
    ++n;
  }
  ASSERT_GT(n, 10000u);
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(sd * fwhm_per_sigma, std::sqrt(2.0) * 300.0, 0.1 * std::sqrt(2.0) * 300.0);
  EXPECT_NEAR(mean, 0.0, 5.0);
}

TEST(Simulate, ClockDelayFolded) {
  auto cfg = base_config(0.2);
  cfg.background_f = 1.0;
  cfg.n_pulses = 1'000'000;
  const auto res = simulate(cfg);
  ASSERT_FALSE(res.records.empty());
  const double half = cfg.period_ps() / 2.0;
  for (const auto& r : res.records) EXPECT_LE(std::abs(static_cast<double>(r.t_clk)), half + 1.0);
}

TEST(Simulate, DeterministicAcrossThreads) {
  auto cfg = base_config(0.1);
  cfg.n_pulses = 5'000'000;
  cfg.batch_pulses = 1'000'000;
  cfg.background_f = 0.5;
  cfg.dead_time = 1e-6;
  cfg.source.dark_2 = 1e-4;
  const auto a = simulate(cfg, 1);
  const auto b = simulate(cfg, 4);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.summary.n123, b.summary.n123);
  cfg.seed = 2;
  EXPECT_NE(simulate(cfg, 4).records, a.records);
}

TEST(Simulate, DeadTimeOnlyDropsRecords) {
  auto cfg = base_config(0.3);
  cfg.source.eta_T = 0.5;
  cfg.n_pulses = 2'000'000;
  const auto live = simulate(cfg);
  cfg.dead_time = 1e-6;
  const auto dead = simulate(cfg);
  EXPECT_EQ(live.summary.n1, dead.summary.n1);
  EXPECT_EQ(live.summary.n2, dead.summary.n2);
  EXPECT_EQ(live.summary.n3, dead.summary.n3);
  EXPECT_GT(dead.summary.dead_time_discarded, 0u);
  EXPECT_EQ(dead.summary.records_written + dead.summary.dead_time_discarded, dead.summary.n1);
  EXPECT_EQ(dead.records.size(), dead.summary.records_written);
  EXPECT_LT(dead.records.size(), live.records.size());
}

TEST(Simulate, TriggerBackgroundLowersHeraldingEfficiency) {
  auto cfg = base_config(0.1);
  cfg.n_pulses = 20'000'000;
  const auto clean = simulate(cfg, default_threads());
  cfg.background_f = 2.0;
  const auto noisy = simulate(cfg, default_threads());
  const auto eff = [](const RunSummary& s) {
    return static_cast<double>(s.n12 + s.n13) / static_cast<double>(s.n1);
  };
  EXPECT_GT(noisy.summary.n1, clean.summary.n1);
  EXPECT_LT(eff(noisy.summary), 0.9 * eff(clean.summary));
}

TEST(SimConfig, Validation) {
  auto cfg = base_config();
  cfg.rep_rate = 0.0;
  EXPECT_THROW(simulate(cfg), DomainError);
  cfg = base_config();
  cfg.n_pulses = 0;
  EXPECT_THROW(simulate(cfg), DomainError);
  cfg = base_config();
  cfg.background_f = -1.0;
  EXPECT_THROW(simulate(cfg), DomainError);
  cfg = base_config();
  cfg.quantization = 0.0;
  EXPECT_THROW(simulate(cfg), DomainError);
  cfg = base_config();
  cfg.source.lambda = 1.0;
  EXPECT_THROW(simulate(cfg), DomainError);
}

TEST(SimConfig, BackgroundMeans) {
  auto cfg = base_config(0.5);
  cfg.background_f = 2.0;
  cfg.trigger_background_ratio = 0.5;
  const auto bg = cfg.background_means();
  const double nbar = 0.25 / 0.75;
  EXPECT_DOUBLE_EQ(bg.signal2, 2.0 * nbar * 0.5);
  EXPECT_DOUBLE_EQ(bg.signal3, 2.0 * nbar * 0.5);
  EXPECT_DOUBLE_EQ(bg.trigger, nbar);
  EXPECT_NEAR(cfg.period_ps(), 11494.25, 0.01);
}

TEST(Sidecar, Fields) {
  auto cfg = base_config();
  cfg.n_pulses = 1000;
  const auto res = simulate(cfg);
  const auto j = sidecar_json(res.summary, cfg);
  EXPECT_EQ(j["format_version"], 1);
  EXPECT_EQ(j["n_pulses"], 1000u);
  for (const char* k : {"N1", "N2", "N3", "N12", "N13", "N123", "records_written", "dead_time_discarded"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_DOUBLE_EQ(j["config"]["lambda"].get<double>(), 0.03);
}

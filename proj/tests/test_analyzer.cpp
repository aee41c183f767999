#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "hsps/analyzer.hpp"
#include "hsps/classical_oracle.hpp"
#include "hsps/rng.hpp"

using namespace hsps;

namespace {

GateConfig gate_300() {
  GateConfig g;
  g.gate_width = 300e-12;
  g.coincidence_window = 1.1e-9;
  return g;
}

const GateCounts measured_counts{30629, 5329, 5067, 2};

}  // namespace

TEST(Classify, Examples) {
  const auto g = gate_300();
  EXPECT_EQ(classify({150, 0, std::nullopt}, g, 0.0), EventClass::double_12);
  EXPECT_EQ(classify({-150, std::nullopt, std::nullopt}, g, 0.0), EventClass::trigger_only);
  EXPECT_EQ(classify({151, 0, 0}, g, 0.0), EventClass::outside_gate);
  EXPECT_EQ(classify({0, 550, -550}, g, 0.0), EventClass::triple);
  EXPECT_EQ(classify({0, 100, 600}, g, 0.0), EventClass::double_12);
  EXPECT_EQ(classify({0, 600, 100}, g, 0.0), EventClass::double_13);
  EXPECT_EQ(classify({1000, 0, 0}, g, 1000.0), EventClass::triple);
  EXPECT_STREQ(to_string(EventClass::double_13), "double-13");
}

TEST(GateCounts, Consistency) {
  GateCounts c;
  for (auto cls : {EventClass::triple, EventClass::double_12, EventClass::trigger_only, EventClass::outside_gate})
    c.add(cls);
  EXPECT_EQ(c, (GateCounts{3, 2, 1, 1}));
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW((GateCounts{10, 3, 3, 4}.validate()), DomainError);
  EXPECT_THROW((GateCounts{10, 11, 3, 1}.validate()), DomainError);
  EXPECT_THROW((GateCounts{10, 8, 8, 1}.validate()), DomainError);
}

TEST(Summarize, MeasuredCounts) {
  const auto s = summarize(measured_counts, 1000, 7);
  ASSERT_TRUE(s.report.b_norm && s.report.alpha && s.report.g2);
  EXPECT_NEAR(*s.report.b_norm, -0.029, 5e-4);
  EXPECT_NEAR(*s.report.alpha, 2.3e-3, 0.1e-3);
  EXPECT_NEAR(*s.report.g2, 1.1e-3, 0.1e-3);
  EXPECT_NEAR(*s.report.eta_overall, 0.339, 1e-3);
  EXPECT_NEAR(*s.eff2, 5329.0 / 30629.0, 1e-15);
  ASSERT_TRUE(s.bootstrap.b_norm && s.poisson.b_norm);
  EXPECT_GT(*s.report.sigma_b, 4e-4);
  EXPECT_LT(*s.report.sigma_b, 1e-3);
  EXPECT_NEAR(*s.bootstrap.b_norm / *s.poisson.b_norm, 1.0, 0.3);
  EXPECT_NEAR(*s.bootstrap.eff2 / *s.poisson.eff2, 1.0, 0.3);
  EXPECT_NEAR(*s.bootstrap.alpha / *s.poisson.alpha, 1.0, 0.3);
}

TEST(Summarize, Deterministic) {
  const auto a = summarize(measured_counts, 200, 3);
  const auto b = summarize(measured_counts, 200, 3);
  EXPECT_EQ(*a.bootstrap.b_norm, *b.bootstrap.b_norm);
  EXPECT_NE(*a.bootstrap.b_norm, *summarize(measured_counts, 200, 4).bootstrap.b_norm);
}

TEST(Summarize, TriggersOnly) {
  const auto s = summarize({1000, 0, 0, 0});
  EXPECT_EQ(*s.report.b_norm, 0.0);
  EXPECT_FALSE(s.report.alpha);
  EXPECT_FALSE(s.report.g2);
  EXPECT_FALSE(s.poisson.alpha);
}

TEST(Summarize, AllTriples) {
  const auto s = summarize({500, 500, 500, 500});
  EXPECT_EQ(*s.eff2, 1.0);
  EXPECT_EQ(*s.eff3, 1.0);
  EXPECT_EQ(*s.report.alpha, 1.0);
  EXPECT_EQ(*s.report.b_norm, 0.0);
  EXPECT_EQ(*s.bootstrap.b_norm, 0.0);
}

TEST(Summarize, EmptyCounts) {
  const auto s = summarize({0, 0, 0, 0});
  EXPECT_FALSE(s.report.b_norm);
  EXPECT_FALSE(s.eff2);
  EXPECT_FALSE(s.bootstrap.b_norm);
  const auto j = to_json(s);
  EXPECT_TRUE(j["B_norm"].is_null());
}

TEST(GateScan, AdditivityAndWindowMonotonicity) {
  rng::Stream rng(11);
  std::vector<TriggerRecord> recs(20000);
  for (auto& r : recs) {
    r.t_clk = static_cast<std::int64_t>(rng.below(2000)) - 1000;
    if (rng.bernoulli(0.4)) r.t_s1 = static_cast<std::int64_t>(rng.below(3000)) - 1500;
    if (rng.bernoulli(0.4)) r.t_s2 = static_cast<std::int64_t>(rng.below(3000)) - 1500;
  }
  // Two adjacent closed gates share only the boundary tick.
  GateConfig g = gate_300();
  g.gate_width = 200e-12;
  const auto left = gate_counts(recs, g, -100.0);
  const auto right = gate_counts(recs, g, 100.0);
  g.gate_width = 400e-12;
  const auto both = gate_counts(recs, g, 0.0);
  const auto shared = std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.t_clk == 0; });
  EXPECT_EQ(left.n1 + right.n1 - static_cast<std::uint64_t>(shared), both.n1);

  GateCounts previous;
  for (double w : {0.2e-9, 0.5e-9, 1.1e-9, 2e-9, 4e-9}) {
    g.coincidence_window = w;
    const auto c = gate_counts(recs, g, 0.0);
    EXPECT_GE(c.n12, previous.n12);
    EXPECT_GE(c.n13, previous.n13);
    EXPECT_GE(c.n123, previous.n123);
    EXPECT_EQ(c.n1, both.n1);
    previous = c;
  }
}

TEST(GateScan, MatchesDirectCountingAndIsOrderIndependent) {
  rng::Stream rng(12);
  std::vector<TriggerRecord> recs(5000);
  for (auto& r : recs) {
    r.t_clk = static_cast<std::int64_t>(std::llround(200.0 * rng.normal()));
    if (rng.bernoulli(0.3)) r.t_s1 = static_cast<std::int64_t>(rng.below(2000)) - 1000;
    if (rng.bernoulli(0.3)) r.t_s2 = static_cast<std::int64_t>(rng.below(2000)) - 1000;
  }
  auto g = gate_300();
  g.bootstrap_resamples = 50;
  const auto rows = gate_scan(recs, g, 1);
  ASSERT_FALSE(rows.empty());
  for (std::size_t i = 0; i < rows.size(); i += 7)
    EXPECT_EQ(rows[i].summary.counts, gate_counts(recs, g, rows[i].centre_ps));

  auto shuffled = recs;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[0], shuffled[2500]);
  const auto rows2 = gate_scan(shuffled, g, 3);
  ASSERT_EQ(rows.size(), rows2.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].summary.counts, rows2[i].summary.counts);
    EXPECT_EQ(rows[i].summary.bootstrap.b_norm, rows2[i].summary.bootstrap.b_norm);
  }

  const auto peak = peak_gate(rows);
  ASSERT_TRUE(peak);
  EXPECT_NEAR(rows[*peak].centre_ps, 0.0, 150.0);
}

TEST(GateScan, ExplicitGrid) {
  std::vector<TriggerRecord> recs = {{0, 0, 0}};
  auto g = gate_300();
  g.scan_start = -1e-9;
  g.scan_stop = 1e-9;
  g.scan_step = 0.5e-9;
  const auto centres = scan_centres(recs, g);
  ASSERT_EQ(centres.size(), 5u);
  EXPECT_DOUBLE_EQ(centres.front(), -1000.0);
  EXPECT_DOUBLE_EQ(centres.back(), 1000.0);
  g.scan_step = -1.0;
  EXPECT_THROW(scan_centres(recs, g), DomainError);
  EXPECT_TRUE(gate_scan({}, gate_300()).empty());
  EXPECT_FALSE(peak_gate({}));
}

TEST(GateScan, FlatBackgroundScalesWithWidth) {
  rng::Stream rng(13);
  std::vector<TriggerRecord> recs(200000);
  for (auto& r : recs) {
    r.t_clk = static_cast<std::int64_t>(rng.below(11494)) - 5747;
    if (rng.bernoulli(0.01)) r.t_s1 = static_cast<std::int64_t>(rng.below(11494)) - 5747;
  }
  auto g = gate_300();
  const auto narrow = gate_counts(recs, g, 0.0);
  g.gate_width = 3000e-12;
  const auto wide = gate_counts(recs, g, 0.0);
  EXPECT_NEAR(static_cast<double>(wide.n1) / static_cast<double>(narrow.n1), 3001.0 / 301.0, 1.0);
  // Accidental doubles are ~1% x window/period.
  EXPECT_LT(static_cast<double>(wide.n12) / static_cast<double>(wide.n1), 0.002);
  EXPECT_EQ(wide.n123, 0u);
}

TEST(GateScan, ClassicalInputIsNotNonclassical) {
  // Records generated from a classical intensity model with a thermal beam.
  const auto model = IntensityModel::common_thermal(1.0);
  const auto resp = DetectorResponse::exponential(0.3);
  rng::Stream rng(14);
  std::vector<TriggerRecord> recs;
  for (int i = 0; i < 2'000'000; ++i) {
    const auto [wa, wb] = model.sample(rng);
    if (!rng.bernoulli(resp(wa))) continue;
    TriggerRecord r{static_cast<std::int64_t>(std::llround(100.0 * rng.normal())), std::nullopt, std::nullopt};
    if (rng.bernoulli(resp(0.5 * wb))) r.t_s1 = 0;
    if (rng.bernoulli(resp(0.5 * wb))) r.t_s2 = 0;
    recs.push_back(r);
  }
  auto g = gate_300();
  g.scan_start = 0.0;
  g.scan_stop = 0.0;
  g.bootstrap_resamples = 300;
  const auto rows = gate_scan(recs, g);
  ASSERT_EQ(rows.size(), 1u);
  const auto& s = rows[0].summary;
  EXPECT_GE(*s.report.b_norm, -3.0 * *s.report.sigma_b);
}

TEST(GateScanCsv, Header) {
  std::ostringstream os;
  auto g = gate_300();
  g.bootstrap_resamples = 10;
  g.scan_start = 0.0;
  g.scan_stop = 0.0;
  write_gate_scan_csv(os, gate_scan({{0, 0, std::nullopt}, {10, std::nullopt, std::nullopt}}, g));
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "gate_center_ps,n1,n12,n13,n123,eff2,eff3,b_norm,sigma_b,alpha,sigma_alpha,g2,sigma_g2");
  EXPECT_EQ(row.substr(0, 11), "0,2,1,0,0,0");
  EXPECT_NE(row.find("nan"), std::string::npos);
}

TEST(Ungated, CountsEveryRecord) {
  const std::vector<TriggerRecord> recs = {{-5000, 0, 0}, {5000, std::nullopt, 10}, {0, 700, std::nullopt}};
  EXPECT_EQ(ungated_counts(recs, 1.1e-9), (GateCounts{3, 1, 2, 1}));
}

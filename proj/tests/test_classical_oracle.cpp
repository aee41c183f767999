#include <gtest/gtest.h>

#include <cmath>

#include "hsps/classical_oracle.hpp"

using namespace hsps;

namespace {

ClassicalSetup setup(IntensityModel m, DetectorResponse p, double r = 0.5) {
  return {std::move(m), p, p, p, r, 1.0 - r};
}

const auto ex1 = DetectorResponse::exponential(1.0);

}  // namespace

TEST(DetectorResponse, Shapes) {
  EXPECT_NEAR(ex1(1.0), 1.0 - std::exp(-1.0), 1e-15);
  const auto lin = DetectorResponse::clipped_linear(0.8);
  EXPECT_DOUBLE_EQ(lin(0.5), 0.4);
  EXPECT_DOUBLE_EQ(lin(5.0), 1.0);
  const auto pw = DetectorResponse::piecewise({{1.0, 0.1}, {2.0, 0.5}, {4.0, 0.9}});
  EXPECT_DOUBLE_EQ(pw(0.0), 0.1);
  EXPECT_DOUBLE_EQ(pw(1.5), 0.3);
  EXPECT_DOUBLE_EQ(pw(3.0), 0.7);
  EXPECT_DOUBLE_EQ(pw(10.0), 0.9);
}

TEST(DetectorResponse, RejectsNonMonotoneKnots) {
  EXPECT_THROW(DetectorResponse::piecewise({{1.0, 0.5}, {2.0, 0.4}}), DomainError);
  EXPECT_THROW(DetectorResponse::piecewise({{1.0, 0.5}, {1.0, 0.6}}), DomainError);
  EXPECT_THROW(DetectorResponse::piecewise({{1.0, 1.5}}), DomainError);
  EXPECT_THROW(DetectorResponse::exponential(0.0), DomainError);
}

TEST(IntensityModel, Validation) {
  EXPECT_THROW(IntensityModel::deterministic(-1.0, 0.0), DomainError);
  EXPECT_THROW(IntensityModel::correlated_lognormal(0, 0, 1, 1, 1.5), DomainError);
  EXPECT_THROW(IntensityModel::mixture({{0.3, IntensityModel::common_thermal(1.0)}}), DomainError);
  EXPECT_THROW(IntensityModel::mixture({{-0.5, IntensityModel::common_thermal(1.0)},
                                        {1.5, IntensityModel::common_thermal(1.0)}}),
               DomainError);
}

// Direct check of the pointwise inequality behind the bound: for monotone
// responses the two bracketed differences always share a sign.
TEST(PairwiseInequality, HoldsOnRandomGrid) {
  rng::Stream rng(11);
  const std::vector<DetectorResponse> responses{
      DetectorResponse::exponential(0.3), DetectorResponse::exponential(2.0), DetectorResponse::clipped_linear(0.7),
      DetectorResponse::piecewise({{0.0, 0.05}, {0.5, 0.2}, {1.0, 0.2}, {3.0, 0.95}})};
  for (int i = 0; i < 20000; ++i) {
    const auto& a = responses[rng.below(responses.size())];
    const auto& b = responses[rng.below(responses.size())];
    const double r = rng.uniform();
    const double w = 5.0 * rng.uniform();
    const double w2 = 5.0 * rng.uniform();
    EXPECT_GE(pairwise_product(a, b, r, 1.0 - r, w, w2), 0.0);
  }
}

TEST(SampleRates, DeterministicIsFactorized) {
  const auto res = sample_rates(setup(IntensityModel::deterministic(1.0, 1.0), ex1), 100000, 1);
  EXPECT_LE(std::abs(res.b_raw), 1e-15);
  EXPECT_GT(res.standard_error_b, 0.0);
  const double p = 1.0 - std::exp(-1.0);
  const double ph = 1.0 - std::exp(-0.5);
  EXPECT_NEAR(res.rates.r1, p, 1e-14);
  EXPECT_NEAR(res.rates.r123, p * ph * ph, 1e-14);
}

TEST(SampleRates, ThermalLightIsBunched) {
  const auto res = sample_rates(setup(IntensityModel::common_thermal(1.0), ex1), 1'000'000, 42);
  EXPECT_GT(res.b_raw, 0.0);
  EXPECT_GT(res.z_score, 5.0);
  // Quadrature of the same 1-D integral is the reference.
  const auto quad = quadrature_rates(setup(IntensityModel::common_thermal(1.0), ex1));
  EXPECT_NEAR(res.b_raw, quad.b_raw, 4.0 * res.standard_error_b);
}

TEST(SampleRates, IndependentBeamsFactorise) {
  // B = <p1>^2 (<p2 p3> - <p2><p3>) when W_A and W_B are independent.
  const double p1 = 0.5;
  const double p2 = 1.0 - 1.0 / 1.5;
  const double p23 = 1.0 - 2.0 / 1.5 + 1.0 / 2.0;
  const double expected = p1 * p1 * (p23 - p2 * p2);
  const auto s = setup(IntensityModel::independent_exponential(1.0, 1.0), ex1);
  const auto quad = quadrature_rates(s);
  EXPECT_NEAR(quad.b_raw, expected, 1e-12);
  const auto res = sample_rates(s, 1'000'000, 5);
  EXPECT_NEAR(res.b_raw, expected, 4.0 * res.standard_error_b);
  EXPECT_GT(res.z_score, 3.0);
}

TEST(SampleRates, ConstantInputGivesZero) {
  const auto res = sample_rates(setup(IntensityModel::deterministic(0.7, 1.3), ex1), 1'000'000, 5);
  EXPECT_LE(std::abs(res.b_raw), 1e-14);
  EXPECT_LE(std::abs(res.z_score), 3.0);
}

TEST(SampleRates, ReproducibleAndThreadIndependent) {
  const auto s = setup(IntensityModel::correlated_lognormal(0.0, 0.2, 0.5, 0.7, 0.6), ex1);
  const auto a = sample_rates(s, 200000, 77, 1);
  const auto b = sample_rates(s, 200000, 77, 1);
  const auto c = sample_rates(s, 200000, 77, 4);
  EXPECT_EQ(a.b_raw, b.b_raw);
  EXPECT_EQ(a.standard_error_b, b.standard_error_b);
  EXPECT_EQ(a.b_raw, c.b_raw);
  EXPECT_EQ(a.rates.r123, c.rates.r123);
  const auto d = sample_rates(s, 200000, 78, 1);
  EXPECT_NE(a.b_raw, d.b_raw);
}

TEST(SampleRates, Preconditions) {
  EXPECT_THROW(sample_rates(setup(IntensityModel::common_thermal(1.0), ex1), 100, 1), DomainError);
  auto bad = setup(IntensityModel::common_thermal(1.0), ex1);
  bad.t = 0.7;
  EXPECT_THROW(sample_rates(bad, 100000, 1), DomainError);
}

TEST(QuadratureRates, ThermalMeanTwo) {
  const auto half = DetectorResponse::exponential(0.5);
  const auto quad = quadrature_rates(setup(IntensityModel::common_thermal(2.0), half));
  EXPECT_GT(quad.b_raw, 0.0);
  EXPECT_LE(quad.abs_error_b, 1e-10);
  const auto mc = sample_rates(setup(IntensityModel::common_thermal(2.0), half), 1'000'000, 9);
  EXPECT_NEAR(mc.b_raw, quad.b_raw, 4.0 * mc.standard_error_b);
}

TEST(QuadratureRates, ThermalClosedForm) {
  // <1 - e^{-aW}> over Exp(mean m) is a m / (1 + a m); products of
  // exponential responses reduce to sums of such terms.
  const double m = 1.0;
  auto E = [m](double a) { return a * m / (1.0 + a * m); };
  auto noclick = [&](double a) { return 1.0 - E(a); };  // <e^{-aW}>
  const double R1 = E(1.0);
  const double R12 = 1.0 - noclick(1.0) - noclick(0.5) + noclick(1.5);
  const double R123 = 1.0 - noclick(1.0) - 2 * noclick(0.5) + 2 * noclick(1.5) + noclick(1.0) - noclick(2.0);
  const double B = R1 * R123 - R12 * R12;
  const auto quad = quadrature_rates(setup(IntensityModel::common_thermal(m), ex1));
  EXPECT_NEAR(quad.rates.r1, R1, 1e-13);
  EXPECT_NEAR(quad.rates.r12, R12, 1e-13);
  EXPECT_NEAR(quad.rates.r123, R123, 1e-13);
  EXPECT_NEAR(quad.b_raw, B, 1e-13);
}

TEST(QuadratureRates, DeterministicIsZero) {
  const auto quad = quadrature_rates(setup(IntensityModel::deterministic(1.0, 1.0), ex1));
  EXPECT_LE(std::abs(quad.b_raw), 1e-12);
}

TEST(QuadratureRates, TwoPointMixtureByEnumeration) {
  const auto lin = DetectorResponse::clipped_linear(0.8);
  // With W = 0 the trigger never fires, so only the (1, 1) point contributes
  // and the rates factorize: B = 0.4 * 0.064 - 0.16^2 = 0.
  const auto m0 = IntensityModel::mixture({{0.5, IntensityModel::deterministic(0.0, 0.0)},
                                           {0.5, IntensityModel::deterministic(1.0, 1.0)}});
  const auto q0 = quadrature_rates(setup(m0, lin));
  EXPECT_NEAR(q0.rates.r1, 0.4, 1e-15);
  EXPECT_NEAR(q0.rates.r12, 0.16, 1e-15);
  EXPECT_NEAR(q0.rates.r123, 0.064, 1e-15);
  EXPECT_NEAR(q0.b_raw, 0.0, 1e-15);

  // Both points trigger: R1 = 0.7, R12 = R13 = 0.44, R123 = 0.328, B = 0.036.
  const auto m1 = IntensityModel::mixture({{0.5, IntensityModel::deterministic(0.5, 0.5)},
                                           {0.5, IntensityModel::deterministic(2.0, 2.0)}});
  const auto q1 = quadrature_rates(setup(m1, lin));
  EXPECT_NEAR(q1.rates.r1, 0.7, 1e-15);
  EXPECT_NEAR(q1.rates.r12, 0.44, 1e-15);
  EXPECT_NEAR(q1.rates.r123, 0.328, 1e-15);
  EXPECT_NEAR(q1.b_raw, 0.036, 1e-15);
}

TEST(QuadratureRates, AgreesWithSamplingOnAllFamilies) {
  const std::vector<ClassicalSetup> cases{
      setup(IntensityModel::independent_exponential(0.7, 2.0), DetectorResponse::clipped_linear(0.6), 0.3),
      setup(IntensityModel::common_thermal(3.0), DetectorResponse::piecewise({{0.0, 0.0}, {1.0, 0.3}, {4.0, 0.9}})),
      setup(IntensityModel::correlated_lognormal(0.0, 0.0, 0.5, 0.5, 0.9), ex1),
      setup(IntensityModel::correlated_lognormal(-0.5, 0.3, 0.8, 0.4, -0.4), DetectorResponse::clipped_linear(0.5)),
      setup(IntensityModel::correlated_lognormal(0.0, 0.0, 0.5, 0.5, 1.0), ex1),
      setup(IntensityModel::mixture({{0.3, IntensityModel::common_thermal(1.0)},
                                     {0.7, IntensityModel::correlated_lognormal(0.1, 0.1, 0.3, 0.3, 0.5)}}),
            ex1),
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto quad = quadrature_rates(cases[i]);
    const auto mc = sample_rates(cases[i], 400'000, 1000 + i);
    const double combined = std::hypot(mc.standard_error_b, quad.abs_error_b);
    EXPECT_NEAR(mc.b_raw, quad.b_raw, 4.0 * combined) << cases[i].model.to_string();
    EXPECT_GE(quad.b_raw, -1e-10) << cases[i].model.to_string();
  }
}

TEST(Suite, DefaultSuitePasses) {
  const auto report = verify_classical_suite(default_classical_suite(), 200'000, 3);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.outcomes.size(), 12u);
}

TEST(Suite, EmptySuiteIsAnError) {
  EXPECT_THROW(verify_classical_suite({}, 100000, 1), DomainError);
}

TEST(Suite, InjectedQuantumRatesFail) {
  SourceParams q;
  q.lambda = 0.03;
  q.eta_T = 0.02;
  q.eta_s = 0.345;
  auto suite = default_classical_suite();
  suite.push_back({"heralded", std::nullopt, click_probabilities(q), false, false});
  const auto report = verify_classical_suite(suite, 100'000, 3);
  EXPECT_FALSE(report.passed());
  const auto failures = report.failures();
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_EQ(failures[0], "heralded [injected]");
  EXPECT_LT(*report.outcomes.back().b_norm, -0.02);
}

TEST(Parser, ModelsAndResponses) {
  const auto m = parse_intensity_model("mixture(0.25 * deterministic(0, 1); 0.75 * lognormal(0, 0.1, 0.5, 0.5, 0.9))");
  EXPECT_EQ(m.kind(), IntensityModel::Kind::mixture);
  EXPECT_EQ(parse_intensity_model(m.to_string()).to_string(), m.to_string());
  EXPECT_EQ(parse_intensity_model(" common-thermal( 2 ) ").kind(), IntensityModel::Kind::common_thermal);
  const auto pw = parse_detector_response("piecewise(0:0, 1:0.5, 2:1)");
  EXPECT_DOUBLE_EQ(pw(1.5), 0.75);
  EXPECT_DOUBLE_EQ(parse_detector_response("linear(0.8)")(0.5), 0.4);
  EXPECT_THROW(parse_intensity_model("gaussian(1)"), FormatError);
  EXPECT_THROW(parse_intensity_model("common-thermal(1"), FormatError);
  EXPECT_THROW(parse_detector_response("exponential(1) x"), FormatError);
  EXPECT_THROW(parse_detector_response("piecewise(1:0.5, 0.5:0.6)"), DomainError);
}

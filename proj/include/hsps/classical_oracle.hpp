// ============================================================================
// classical_oracle.hpp -- numerical certification of B >= 0 for classical light
//
// Classical light is a joint distribution of two non-negative integrated
// intensities (W_A, W_B).  W_A illuminates detector 1; W_B is split r:t onto
// detectors 2 and 3.  Each detector clicks with a monotone probability p_i(W).
// The rates are averages over the intensity distribution:
//   R1 = <p1(W_A)>,  R12 = <p1(W_A) p2(r W_B)>,  R13 = <p1(W_A) p3(t W_B)>,
//   R123 = <p1(W_A) p2(r W_B) p3(t W_B)>.
// Two routes evaluate them: probability-weighted Monte Carlo (sample_rates) and
// adaptive Gauss-Kronrod quadrature (quadrature_rates).
// ============================================================================
#pragma once

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsps/errors.hpp"
#include "hsps/fock_model.hpp"
#include "hsps/parallel.hpp"
#include "hsps/rng.hpp"

namespace hsps {

// ----------------------------------------------------------------------------
// Detector responses
// ----------------------------------------------------------------------------

class DetectorResponse {
public:
  enum class Kind { exponential, clipped_linear, piecewise };

  /// p(W) = 1 - exp(-eta W)
  static DetectorResponse exponential(double eta) {
    detail::require(eta > 0.0 && std::isfinite(eta), "response eta must be positive");
    return DetectorResponse(Kind::exponential, eta, {});
  }

  /// p(W) = min(eta W, 1)
  static DetectorResponse clipped_linear(double eta) {
    detail::require(eta > 0.0 && std::isfinite(eta), "response eta must be positive");
    return DetectorResponse(Kind::clipped_linear, eta, {});
  }

  /// Linear interpolation between knots, constant outside them.
  static DetectorResponse piecewise(std::vector<std::pair<double, double>> knots) {
    detail::require(!knots.empty(), "piecewise response needs at least one knot");
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const auto [w, p] = knots[i];
      detail::require(w >= 0.0 && std::isfinite(w), "knot intensities must be finite and >= 0");
      detail::require(detail::in_unit_interval(p), "knot probabilities must lie in [0, 1]");
      if (i > 0) {
        detail::require(w > knots[i - 1].first, "knot intensities must be strictly increasing");
        detail::require(p >= knots[i - 1].second, "piecewise response must be non-decreasing");
      }
    }
    return DetectorResponse(Kind::piecewise, 1.0, std::move(knots));
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double eta() const noexcept { return eta_; }
  [[nodiscard]] const std::vector<std::pair<double, double>>& knots() const noexcept { return knots_; }

  [[nodiscard]] double operator()(double w) const {
    switch (kind_) {
      case Kind::exponential:
        return -std::expm1(-eta_ * w);
      case Kind::clipped_linear:
        return std::min(eta_ * w, 1.0);
      case Kind::piecewise: {
        if (w <= knots_.front().first) return knots_.front().second;
        if (w >= knots_.back().first) return knots_.back().second;
        auto hi = std::upper_bound(knots_.begin(), knots_.end(), w,
                                   [](double x, const auto& k) { return x < k.first; });
        auto lo = hi - 1;
        const double frac = (w - lo->first) / (hi->first - lo->first);
        return lo->second + frac * (hi->second - lo->second);
      }
    }
    return 0.0;
  }

  /// Intensities where p is not smooth.
  [[nodiscard]] std::vector<double> kinks() const {
    if (kind_ == Kind::clipped_linear) return {1.0 / eta_};
    std::vector<double> out;
    for (const auto& k : knots_) out.push_back(k.first);
    return out;
  }

  [[nodiscard]] std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::exponential:
        os << "exponential(" << eta_ << ")";
        break;
      case Kind::clipped_linear:
        os << "linear(" << eta_ << ")";
        break;
      case Kind::piecewise:
        os << "piecewise(";
        for (std::size_t i = 0; i < knots_.size(); ++i)
          os << (i ? ", " : "") << knots_[i].first << ':' << knots_[i].second;
        os << ")";
        break;
    }
    return os.str();
  }

private:
  DetectorResponse(Kind kind, double eta, std::vector<std::pair<double, double>> knots)
      : kind_(kind), eta_(eta), knots_(std::move(knots)) {}

  Kind kind_;
  double eta_;
  std::vector<std::pair<double, double>> knots_;
};

// ----------------------------------------------------------------------------
// Classical intensity models
// ----------------------------------------------------------------------------

class IntensityModel {
public:
  enum class Kind { deterministic, independent_exponential, common_thermal, correlated_lognormal, mixture };

  static IntensityModel deterministic(double w_a, double w_b) {
    detail::require(w_a >= 0.0 && w_b >= 0.0 && std::isfinite(w_a) && std::isfinite(w_b),
                    "deterministic intensities must be finite and >= 0");
    IntensityModel m(Kind::deterministic);
    m.a_ = w_a;
    m.b_ = w_b;
    return m;
  }

  static IntensityModel independent_exponential(double mean_a, double mean_b) {
    detail::require(mean_a > 0.0 && mean_b > 0.0, "exponential means must be positive");
    IntensityModel m(Kind::independent_exponential);
    m.a_ = mean_a;
    m.b_ = mean_b;
    return m;
  }

  /// W_A = W_B = W with W exponentially distributed.
  static IntensityModel common_thermal(double mean) {
    detail::require(mean > 0.0, "thermal mean must be positive");
    IntensityModel m(Kind::common_thermal);
    m.a_ = mean;
    return m;
  }

  /// (ln W_A, ln W_B) bivariate normal.
  static IntensityModel correlated_lognormal(double mu_a, double mu_b, double sigma_a, double sigma_b, double rho) {
    detail::require(sigma_a >= 0.0 && sigma_b >= 0.0, "lognormal sigmas must be >= 0");
    detail::require(rho >= -1.0 && rho <= 1.0, "rho must lie in [-1, 1]");
    IntensityModel m(Kind::correlated_lognormal);
    m.a_ = mu_a;
    m.b_ = mu_b;
    m.sigma_a_ = sigma_a;
    m.sigma_b_ = sigma_b;
    m.rho_ = rho;
    return m;
  }

  static IntensityModel mixture(std::vector<std::pair<double, IntensityModel>> components) {
    detail::require(!components.empty(), "mixture needs at least one component");
    double total = 0.0;
    for (const auto& [w, c] : components) {
      detail::require(w >= 0.0, "mixture weights must be non-negative");
      total += w;
    }
    detail::require(std::abs(total - 1.0) <= 1e-9, "mixture weights must sum to 1");
    IntensityModel m(Kind::mixture);
    m.components_ = std::make_shared<const std::vector<std::pair<double, IntensityModel>>>(std::move(components));
    return m;
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

  /// One draw of (W_A, W_B).
  [[nodiscard]] std::pair<double, double> sample(rng::Stream& rng) const {
    switch (kind_) {
      case Kind::deterministic:
        return {a_, b_};
      case Kind::independent_exponential: {
        const double wa = rng.exponential(a_);
        return {wa, rng.exponential(b_)};
      }
      case Kind::common_thermal: {
        const double w = rng.exponential(a_);
        return {w, w};
      }
      case Kind::correlated_lognormal: {
        const double za = rng.normal();
        const double zb = rng.normal();
        const double zb_corr = rho_ * za + std::sqrt(std::max(0.0, 1.0 - rho_ * rho_)) * zb;
        return {std::exp(a_ + sigma_a_ * za), std::exp(b_ + sigma_b_ * zb_corr)};
      }
      case Kind::mixture: {
        const double u = rng.uniform();
        double cum = 0.0;
        for (const auto& [w, c] : *components_) {
          cum += w;
          if (u < cum) return c.sample(rng);
        }
        return components_->back().second.sample(rng);
      }
    }
    return {0.0, 0.0};
  }

  struct Estimate {
    double value = 0.0;
    double error = 0.0;
  };

  /// <g(W_A) h(W_B)> by adaptive quadrature.  `g_kinks`/`h_kinks` list the
  /// intensities where g and h are not smooth.
  [[nodiscard]] Estimate expect_product(const std::function<double(double)>& g, const std::vector<double>& g_kinks,
                                        const std::function<double(double)>& h, const std::vector<double>& h_kinks,
                                        double tol) const;

  [[nodiscard]] std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::deterministic:
        os << "deterministic(" << a_ << ", " << b_ << ")";
        break;
      case Kind::independent_exponential:
        os << "independent-exponential(" << a_ << ", " << b_ << ")";
        break;
      case Kind::common_thermal:
        os << "common-thermal(" << a_ << ")";
        break;
      case Kind::correlated_lognormal:
        os << "lognormal(" << a_ << ", " << b_ << ", " << sigma_a_ << ", " << sigma_b_ << ", " << rho_ << ")";
        break;
      case Kind::mixture:
        os << "mixture(";
        for (std::size_t i = 0; i < components_->size(); ++i)
          os << (i ? "; " : "") << (*components_)[i].first << " * " << (*components_)[i].second.to_string();
        os << ")";
        break;
    }
    return os.str();
  }

private:
  explicit IntensityModel(Kind kind) : kind_(kind) {}

  Kind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  double sigma_a_ = 0.0;
  double sigma_b_ = 0.0;
  double rho_ = 0.0;
  std::shared_ptr<const std::vector<std::pair<double, IntensityModel>>> components_;
};

namespace detail {

using boost::math::quadrature::gauss_kronrod;

constexpr unsigned quad_depth = 24;

/// Integrates f over [a, b] (b may be +inf) split at interior breakpoints.
template <class F>
IntensityModel::Estimate integrate_pieces(F&& f, double a, double b, std::vector<double> breaks, double tol) {
  std::vector<double> edges{a};
  std::sort(breaks.begin(), breaks.end());
  for (double x : breaks)
    if (std::isfinite(x) && x > edges.back() && x < b) edges.push_back(x);
  edges.push_back(b);
  IntensityModel::Estimate total;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    double err = 0.0;
    total.value += gauss_kronrod<double, 61>::integrate(f, edges[i], edges[i + 1], quad_depth, tol, &err);
    total.error += err;
  }
  return total;
}

inline std::vector<double> scaled_kinks(const DetectorResponse& resp, double scale) {
  std::vector<double> out;
  if (scale <= 0.0) return out;
  for (double k : resp.kinks()) out.push_back(k / scale);
  return out;
}

}  // namespace detail

inline IntensityModel::Estimate IntensityModel::expect_product(const std::function<double(double)>& g,
                                                               const std::vector<double>& g_kinks,
                                                               const std::function<double(double)>& h,
                                                               const std::vector<double>& h_kinks,
                                                               double tol) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind_) {
    case Kind::deterministic:
      return {g(a_) * h(b_), 0.0};
    case Kind::independent_exponential: {
      const double ma = a_, mb = b_;
      const auto eg = detail::integrate_pieces([&](double w) { return std::exp(-w / ma) / ma * g(w); }, 0.0, inf,
                                               g_kinks, tol);
      const auto eh = detail::integrate_pieces([&](double w) { return std::exp(-w / mb) / mb * h(w); }, 0.0, inf,
                                               h_kinks, tol);
      return {eg.value * eh.value, std::abs(eg.value) * eh.error + std::abs(eh.value) * eg.error};
    }
    case Kind::common_thermal: {
      const double m = a_;
      std::vector<double> kinks = g_kinks;
      kinks.insert(kinks.end(), h_kinks.begin(), h_kinks.end());
      return detail::integrate_pieces([&](double w) { return std::exp(-w / m) / m * g(w) * h(w); }, 0.0, inf, kinks,
                                      tol);
    }
    case Kind::correlated_lognormal: {
      // Gaussian coordinates; |z| <= 12 leaves < 1e-32 of the mass out.
      constexpr double zmax = 12.0;
      const double s = std::sqrt(std::max(0.0, 1.0 - rho_ * rho_));
      auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
      auto to_z = [](const std::vector<double>& kinks, double mu, double sigma) {
        std::vector<double> out;
        if (sigma == 0.0) return out;
        for (double k : kinks)
          if (k > 0.0) out.push_back((std::log(k) - mu) / sigma);
        return out;
      };
      double inner_err_max = 0.0;
      auto inner = [&](double za) {
        const double centre = b_ + sigma_b_ * rho_ * za;
        if (s == 0.0 || sigma_b_ == 0.0) return h(std::exp(centre));
        const auto est = detail::integrate_pieces([&](double zb) { return phi(zb) * h(std::exp(centre + sigma_b_ * s * zb)); },
                                                  -zmax, zmax, to_z(h_kinks, centre, sigma_b_ * s), tol);
        inner_err_max = std::max(inner_err_max, est.error);
        return est.value;
      };
      std::vector<double> outer_kinks = to_z(g_kinks, a_, sigma_a_);
      if (s == 0.0 && sigma_b_ * rho_ != 0.0) {
        const auto hk = to_z(h_kinks, b_, sigma_b_ * rho_);
        outer_kinks.insert(outer_kinks.end(), hk.begin(), hk.end());
      }
      if (sigma_a_ == 0.0 && (sigma_b_ == 0.0 || rho_ == 0.0)) {
        // Nothing depends on z_A.
        return {g(std::exp(a_)) * inner(0.0), inner_err_max};
      }
      auto est = detail::integrate_pieces([&](double za) { return phi(za) * g(std::exp(a_ + sigma_a_ * za)) * inner(za); },
                                          -zmax, zmax, outer_kinks, tol);
      est.error += inner_err_max;
      return est;
    }
    case Kind::mixture: {
      Estimate total;
      for (const auto& [w, c] : *components_) {
        if (w == 0.0) continue;
        const auto e = c.expect_product(g, g_kinks, h, h_kinks, tol);
        total.value += w * e.value;
        total.error += w * e.error;
      }
      return total;
    }
  }
  return {};
}

// ----------------------------------------------------------------------------
// Oracle results
// ----------------------------------------------------------------------------

enum class OracleMethod { sampled, quadrature, injected };

inline const char* to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::sampled:
      return "sampled";
    case OracleMethod::quadrature:
      return "quadrature";
    case OracleMethod::injected:
      return "injected";
  }
  return "?";
}

struct OracleResult {
  ClickRates rates;
  double b_raw = 0.0;
  double standard_error_b = 0.0;  ///< sampled: jackknife standard error
  double abs_error_b = 0.0;       ///< quadrature: propagated error bound
  double z_score = 0.0;           ///< b_raw / standard_error_b (sampled only)
  OracleMethod method = OracleMethod::sampled;
};

struct ClassicalSetup {
  IntensityModel model;
  DetectorResponse resp1;
  DetectorResponse resp2;
  DetectorResponse resp3;
  double r = 0.5;
  double t = 0.5;

  void validate() const {
    detail::require(r >= 0.0 && t >= 0.0, "r and t must be non-negative");
    detail::require(std::abs(r + t - 1.0) <= 1e-12, "beamsplitter requires r + t = 1");
  }
};

namespace detail {

/// Neumaier compensated sum.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }

  [[nodiscard]] double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct RateSums {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s12 = 0.0, s13 = 0.0, s123 = 0.0;
  std::uint64_t n = 0;

  [[nodiscard]] RateSums minus(const RateSums& o) const {
    return {s1 - o.s1, s2 - o.s2, s3 - o.s3, s12 - o.s12, s13 - o.s13, s123 - o.s123, n - o.n};
  }

  [[nodiscard]] double b_raw() const {
    const double inv = 1.0 / static_cast<double>(n);
    return (s1 * inv) * (s123 * inv) - (s12 * inv) * (s13 * inv);
  }
};

struct RateAccumulator {
  CompensatedSum s1, s2, s3, s12, s13, s123;
  std::uint64_t n = 0;

  void add(const RateSums& x) {
    s1.add(x.s1);
    s2.add(x.s2);
    s3.add(x.s3);
    s12.add(x.s12);
    s13.add(x.s13);
    s123.add(x.s123);
    n += x.n;
  }

  void add(double p1, double p2, double p3) {
    s1.add(p1);
    s2.add(p2);
    s3.add(p3);
    s12.add(p1 * p2);
    s13.add(p1 * p3);
    s123.add(p1 * p2 * p3);
    ++n;
  }

  [[nodiscard]] RateSums sums() const {
    return {s1.value(), s2.value(), s3.value(), s12.value(), s13.value(), s123.value(), n};
  }
};

}  // namespace detail

inline constexpr std::size_t jackknife_blocks = 100;

/// Probability-weighted Monte Carlo estimate of the classical rates.  Trials
/// are split into jackknife_blocks blocks, each drawn from its own stream, so
/// the result depends only on (seed, n_trials).
inline OracleResult sample_rates(const ClassicalSetup& setup, std::uint64_t n_trials, std::uint64_t seed,
                                 unsigned threads = 1) {
  setup.validate();
  detail::require(n_trials >= 10000, "sample_rates needs at least 1e4 trials");

  std::vector<detail::RateSums> blocks(jackknife_blocks);
  parallel_for(jackknife_blocks, threads, [&](std::size_t k) {
    const std::uint64_t n_block =
        n_trials / jackknife_blocks + (k < n_trials % jackknife_blocks ? 1 : 0);
    rng::Stream rng(seed, k);
    detail::RateAccumulator acc;
    for (std::uint64_t i = 0; i < n_block; ++i) {
      const auto [wa, wb] = setup.model.sample(rng);
      acc.add(setup.resp1(wa), setup.resp2(setup.r * wb), setup.resp3(setup.t * wb));
    }
    blocks[k] = acc.sums();
  });

  detail::RateAccumulator all;
  for (const auto& b : blocks) all.add(b);
  const detail::RateSums total = all.sums();

  OracleResult res;
  res.method = OracleMethod::sampled;
  const double inv = 1.0 / static_cast<double>(total.n);
  res.rates = {total.s1 * inv, total.s2 * inv, total.s3 * inv, total.s12 * inv, total.s13 * inv,
               total.s123 * inv, total.n, RateKind::probability};
  res.b_raw = total.b_raw();

  // Delete-one-block jackknife.
  std::vector<double> loo(jackknife_blocks);
  double mean_loo = 0.0;
  for (std::size_t k = 0; k < jackknife_blocks; ++k) {
    loo[k] = total.minus(blocks[k]).b_raw();
    mean_loo += loo[k];
  }
  mean_loo /= static_cast<double>(jackknife_blocks);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean_loo) * (v - mean_loo);
  const double kk = static_cast<double>(jackknife_blocks);
  double se = std::sqrt((kk - 1.0) / kk * ss);

  // Deterministic inputs give a zero spread; floor at the round-off scale of B.
  const double roundoff = 16.0 * std::numeric_limits<double>::epsilon() *
                          (std::abs(res.rates.r1 * res.rates.r123) + std::abs(res.rates.r12 * res.rates.r13));
  se = std::max({se, roundoff, std::numeric_limits<double>::min()});
  res.standard_error_b = se;
  res.z_score = res.b_raw / se;
  return res;
}

/// Same averages by adaptive quadrature; abs_error_b bounds |B - B_exact|.
inline OracleResult quadrature_rates(const ClassicalSetup& setup, double abs_tol = 1e-10) {
  setup.validate();
  detail::require(abs_tol > 0.0, "abs_tol must be positive");
  const auto& s = setup;
  const double tol = 1e-13;
  auto one = [](double) { return 1.0; };
  auto p1 = [&](double w) { return s.resp1(w); };
  auto p2 = [&](double w) { return s.resp2(s.r * w); };
  auto p3 = [&](double w) { return s.resp3(s.t * w); };
  auto p23 = [&](double w) { return s.resp2(s.r * w) * s.resp3(s.t * w); };
  const auto k1 = s.resp1.kinks();
  const auto k2 = detail::scaled_kinks(s.resp2, s.r);
  const auto k3 = detail::scaled_kinks(s.resp3, s.t);
  auto k23 = k2;
  k23.insert(k23.end(), k3.begin(), k3.end());

  const auto e1 = s.model.expect_product(p1, k1, one, {}, tol);
  const auto e2 = s.model.expect_product(one, {}, p2, k2, tol);
  const auto e3 = s.model.expect_product(one, {}, p3, k3, tol);
  const auto e12 = s.model.expect_product(p1, k1, p2, k2, tol);
  const auto e13 = s.model.expect_product(p1, k1, p3, k3, tol);
  const auto e123 = s.model.expect_product(p1, k1, p23, k23, tol);

  OracleResult res;
  res.method = OracleMethod::quadrature;
  res.rates = {e1.value, e2.value, e3.value, e12.value, e13.value, e123.value, 0, RateKind::probability};
  res.b_raw = e1.value * e123.value - e12.value * e13.value;
  res.abs_error_b = std::abs(e123.value) * e1.error + std::abs(e1.value) * e123.error +
                    std::abs(e13.value) * e12.error + std::abs(e12.value) * e13.error +
                    e1.error * e123.error + e12.error * e13.error;
  if (res.abs_error_b > abs_tol)
    throw DomainError("quadrature did not reach abs_tol: achieved error bound " + std::to_string(res.abs_error_b));
  return res;
}

/// [p2(rW) - p2(rW')][p3(tW) - p3(tW')], non-negative for monotone responses.
inline double pairwise_product(const DetectorResponse& resp2, const DetectorResponse& resp3, double r, double t,
                               double w, double w_prime) {
  return (resp2(r * w) - resp2(r * w_prime)) * (resp3(t * w) - resp3(t * w_prime));
}

// ----------------------------------------------------------------------------
// Suites
// ----------------------------------------------------------------------------

struct SuiteCase {
  std::string name;
  std::optional<ClassicalSetup> setup;  ///< classical model to certify
  std::optional<ClickRates> injected;   ///< externally supplied rates, evaluated as exact
  bool sampled = true;
  bool quadrature = true;
};

struct CaseOutcome {
  std::string name;
  std::string description;
  OracleResult result;
  std::optional<double> b_norm;
  bool passed = false;
};

struct SuiteReport {
  std::vector<CaseOutcome> outcomes;
  std::uint64_t n_trials = 0;
  std::uint64_t seed = 0;
  double abs_tol = 0.0;

  [[nodiscard]] bool passed() const {
    return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.passed; });
  }

  [[nodiscard]] std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& o : outcomes)
      if (!o.passed) out.push_back(o.name + " [" + to_string(o.result.method) + "]");
    return out;
  }
};

/// Runs every case; a sampled result passes when B >= -3 SE, a quadrature
/// result when B >= -abs_tol, an injected result when B >= 0.
inline SuiteReport verify_classical_suite(const std::vector<SuiteCase>& suite, std::uint64_t n_trials,
                                          std::uint64_t seed, double abs_tol = 1e-10, unsigned threads = 1) {
  detail::require(!suite.empty(), "classical suite must not be empty");
  SuiteReport report;
  report.n_trials = n_trials;
  report.seed = seed;
  report.abs_tol = abs_tol;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& c = suite[i];
    detail::require(c.setup.has_value() != c.injected.has_value(),
                    "suite case '" + c.name + "' needs exactly one of a classical setup or injected rates");
    if (c.injected) {
      CaseOutcome o;
      o.name = c.name;
      o.description = "injected rates";
      o.result.method = OracleMethod::injected;
      o.result.rates = *c.injected;
      const auto rep = nonclassicality_metrics(*c.injected);
      o.result.b_raw = rep.b_raw;
      o.b_norm = rep.b_norm;
      o.passed = rep.b_raw >= 0.0;
      report.outcomes.push_back(o);
      continue;
    }
    const auto desc = c.setup->model.to_string() + " | " + c.setup->resp1.to_string() + ", " +
                      c.setup->resp2.to_string() + ", " + c.setup->resp3.to_string();
    if (c.sampled) {
      CaseOutcome o;
      o.name = c.name;
      o.description = desc;
      // Each case gets its own stream family so reordering cases is harmless.
      o.result = sample_rates(*c.setup, n_trials, rng::derive_seed(seed, 0x5ca1ab1e + i), threads);
      o.b_norm = nonclassicality_metrics(o.result.rates).b_norm;
      o.passed = o.result.b_raw >= -3.0 * o.result.standard_error_b;
      report.outcomes.push_back(o);
    }
    if (c.quadrature) {
      CaseOutcome o;
      o.name = c.name;
      o.description = desc;
      o.result = quadrature_rates(*c.setup, abs_tol);
      o.b_norm = nonclassicality_metrics(o.result.rates).b_norm;
      o.passed = o.result.b_raw >= -abs_tol;
      report.outcomes.push_back(o);
    }
  }
  return report;
}

/// Six classical cases spanning the model families.
inline std::vector<SuiteCase> default_classical_suite() {
  const auto ex = DetectorResponse::exponential(1.0);
  const auto half = DetectorResponse::exponential(0.5);
  const auto lin = DetectorResponse::clipped_linear(0.8);
  std::vector<SuiteCase> suite;
  auto add = [&](std::string name, IntensityModel m, const DetectorResponse& p) {
    suite.push_back({std::move(name), ClassicalSetup{std::move(m), p, p, p, 0.5, 0.5}, std::nullopt, true, true});
  };
  add("deterministic", IntensityModel::deterministic(1.0, 1.0), ex);
  add("independent-exponential", IntensityModel::independent_exponential(1.0, 1.0), ex);
  add("thermal-mean-1", IntensityModel::common_thermal(1.0), ex);
  add("thermal-mean-2", IntensityModel::common_thermal(2.0), half);
  add("lognormal-rho-0.9", IntensityModel::correlated_lognormal(0.0, 0.0, 0.5, 0.5, 0.9), ex);
  add("mixture", IntensityModel::mixture({{0.5, IntensityModel::deterministic(0.5, 0.5)},
                                          {0.5, IntensityModel::deterministic(2.0, 2.0)}}),
      lin);
  return suite;
}

// ----------------------------------------------------------------------------
// Text forms used by suite config files
//
//   deterministic(wA, wB)        independent-exponential(meanA, meanB)
//   common-thermal(mean)         lognormal(muA, muB, sigmaA, sigmaB, rho)
//   mixture(w1 * <model>; w2 * <model>; ...)
//   exponential(eta)   linear(eta)   piecewise(W1:p1, W2:p2, ...)
// ----------------------------------------------------------------------------

namespace detail {

class SpecParser {
public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  IntensityModel model() {
    const auto name = ident();
    expect('(');
    IntensityModel m = [&] {
      if (name == "deterministic") {
        const auto v = numbers(2);
        return IntensityModel::deterministic(v[0], v[1]);
      }
      if (name == "independent-exponential") {
        const auto v = numbers(2);
        return IntensityModel::independent_exponential(v[0], v[1]);
      }
      if (name == "common-thermal") {
        const auto v = numbers(1);
        return IntensityModel::common_thermal(v[0]);
      }
      if (name == "lognormal") {
        const auto v = numbers(5);
        return IntensityModel::correlated_lognormal(v[0], v[1], v[2], v[3], v[4]);
      }
      if (name == "mixture") {
        std::vector<std::pair<double, IntensityModel>> parts;
        for (;;) {
          const double w = number();
          expect('*');
          parts.emplace_back(w, model());
          if (!accept(';')) break;
        }
        return IntensityModel::mixture(std::move(parts));
      }
      fail("unknown intensity model '" + name + "'");
    }();
    expect(')');
    return m;
  }

  DetectorResponse response() {
    const auto name = ident();
    expect('(');
    DetectorResponse r = [&] {
      if (name == "exponential") return DetectorResponse::exponential(numbers(1)[0]);
      if (name == "linear") return DetectorResponse::clipped_linear(numbers(1)[0]);
      if (name == "piecewise") {
        std::vector<std::pair<double, double>> knots;
        for (;;) {
          const double w = number();
          expect(':');
          knots.emplace_back(w, number());
          if (!accept(',')) break;
        }
        return DetectorResponse::piecewise(std::move(knots));
      }
      fail("unknown detector response '" + name + "'");
    }();
    expect(')');
    return r;
  }

  void finish() {
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("cannot parse '" + std::string(text_) + "' at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string ident() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '-' ||
                                   text_[pos_] == '_'))
      ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    skip_ws();
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    pos_ += used;
    return v;
  }

  std::vector<double> numbers(std::size_t n) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) expect(',');
      v.push_back(number());
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline IntensityModel parse_intensity_model(std::string_view text) {
  detail::SpecParser p(text);
  auto m = p.model();
  p.finish();
  return m;
}

inline DetectorResponse parse_detector_response(std::string_view text) {
  detail::SpecParser p(text);
  auto r = p.response();
  p.finish();
  return r;
}

}  // namespace hsps

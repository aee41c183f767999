// ============================================================================
// suite_config.hpp -- classical-bound suites from key/value files
//
//   trials  = 1000000          # sampled trials per case
//   seed    = 1
//   abs_tol = 1e-10            # quadrature acceptance tolerance
//   cases   = thermal, quantum # evaluation order
//
//   case.thermal.model     = common-thermal(1)
//   case.thermal.response  = exponential(1)   # all three detectors, or
//   case.thermal.response1 = ...               # per detector overrides
//   case.thermal.r         = 0.5               # t = 1 - r
//   case.thermal.methods   = sampled, quadrature
//
//   case.quantum.kind   = quantum              # heralded-source rates
//   case.quantum.lambda = 0.03                 # plus eta_T, eta_s, r,
//                                              # eta_2, eta_3
//   case.counts.kind    = counts
//   case.counts.counts  = N1, N12, N13, N123
// ============================================================================
#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "hsps/classical_oracle.hpp"
#include "hsps/config.hpp"
#include "hsps/fock_model.hpp"

namespace hsps {

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

struct SuiteConfig {
  std::vector<SuiteCase> cases;
  std::uint64_t n_trials = 1'000'000;
  std::uint64_t seed = 1;
  double abs_tol = 1e-10;
};

inline SuiteConfig load_suite(KeyValueConfig& kv) {
  SuiteConfig out;
  out.n_trials = kv.get_u64("trials", out.n_trials);
  out.seed = kv.get_u64("seed", out.seed);
  out.abs_tol = kv.get_double("abs_tol", out.abs_tol);

  const auto names = detail::split_list(kv.get_string("cases", ""));
  detail::require(!names.empty(), "suite config lists no cases");

  for (const auto& name : names) {
    const std::string p = "case." + name + ".";
    const auto kind = kv.get_string(p + "kind", "classical");
    SuiteCase c;
    c.name = name;
    if (kind == "classical") {
      detail::require(kv.has(p + "model"), "case '" + name + "' has no model");
      auto model = parse_intensity_model(kv.get_string(p + "model", ""));
      const auto shared = kv.get_string(p + "response", "exponential(1)");
      auto resp = [&](const char* which) { return parse_detector_response(kv.get_string(p + which, shared)); };
      const double r = kv.get_double(p + "r", 0.5);
      c.setup = ClassicalSetup{std::move(model), resp("response1"), resp("response2"), resp("response3"), r, 1.0 - r};
      c.sampled = c.quadrature = false;
      for (const auto& m : detail::split_list(kv.get_string(p + "methods", "sampled, quadrature"))) {
        if (m == "sampled")
          c.sampled = true;
        else if (m == "quadrature")
          c.quadrature = true;
        else
          throw DomainError("case '" + name + "': unknown method '" + m + "'");
      }
      detail::require(c.sampled || c.quadrature, "case '" + name + "' selects no method");
    } else if (kind == "quantum") {
      SourceParams s;
      s.lambda = kv.get_double(p + "lambda", 0.03);
      s.eta_T = kv.get_double(p + "eta_T", 0.02);
      s.eta_s = kv.get_double(p + "eta_s", 0.345);
      s.r = kv.get_double(p + "r", 0.5);
      s.t = 1.0 - s.r;
      s.eta_2 = kv.get_double(p + "eta_2", 1.0);
      s.eta_3 = kv.get_double(p + "eta_3", 1.0);
      c.injected = click_probabilities(s);
    } else if (kind == "counts") {
      const auto v = KeyValueConfig::parse_grid(p + "counts", kv.get_string(p + "counts", ""));
      detail::require(v.size() == 4, "case '" + name + "': counts needs N1, N12, N13, N123");
      c.injected = ClickRates::from_counts(v[0], v[1], v[2], v[3]);
      c.injected->validate();
    } else {
      throw DomainError("case '" + name + "': unknown kind '" + kind + "'");
    }
    out.cases.push_back(std::move(c));
  }
  kv.require_all_used();
  return out;
}

}  // namespace hsps

// hsps -- heralded single-photon statistics toolkit
//
//   hsps model-scan      --config scan.conf      --out DIR
//   hsps simulate        --config simulate.conf  --out DIR [--format csv|binary]
//   hsps analyze         --config analyze.conf   --out DIR
//   hsps summarize       --set counts=N1,N12,N13,N123
//   hsps classical-check --config suite.conf     --out DIR
//   hsps estimate-gain   --set rate=70000        --out DIR
//   hsps replay          DIR/manifest.json       --out DIR2
//
// Exit codes: 0 ok, 2 validation error, 3 classical bound violated,
// 4 I/O or format error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsps/analyzer.hpp"
#include "hsps/classical_oracle.hpp"
#include "hsps/config.hpp"
#include "hsps/event_io.hpp"
#include "hsps/fock_model.hpp"
#include "hsps/parallel.hpp"
#include "hsps/pulse_sim.hpp"
#include "hsps/suite_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hsps;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_violation = 3;
constexpr int exit_io = 4;

struct Run {
  std::string subcommand;
  KeyValueConfig kv;
  fs::path out_dir;
  unsigned threads = 1;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json extra = json::object();
};

void write_file(Run& run, const std::string& name, const std::string& content) {
  const fs::path path = run.out_dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << content;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
  run.outputs.push_back(path.string());
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
}

template <class T>
T json_field(const json& j, const std::string& key, const std::string& source) {
  if (!j.contains(key)) throw FormatError(source + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(source + ": field '" + key + "' has the wrong type");
  }
}

/// Stores an input path in absolute form so a replay finds the same file.
std::string input_path(Run& run, const std::string& key, const std::string& fallback) {
  if (run.kv.has(key) && !run.kv.values().at(key).empty())
    run.kv.set(key, fs::absolute(run.kv.values().at(key)).lexically_normal().string());
  return run.kv.get_string(key, fallback);
}

SourceParams read_source(KeyValueConfig& kv) {
  SourceParams s;
  s.lambda = kv.get_double("lambda", 0.03);
  s.eta_T = kv.get_double("eta_T", 0.02);
  s.eta_s = kv.get_double("eta_s", 0.345);
  s.r = kv.get_double("r", s.r);
  s.t = 1.0 - s.r;
  s.eta_2 = kv.get_double("eta_2", s.eta_2);
  s.eta_3 = kv.get_double("eta_3", s.eta_3);
  s.dark_T = kv.get_double("dark_T", s.dark_T);
  s.dark_2 = kv.get_double("dark_2", s.dark_2);
  s.dark_3 = kv.get_double("dark_3", s.dark_3);
  return s;
}

// ---------------------------------------------------------------------------

int cmd_model_scan(Run& run) {
  auto& kv = run.kv;
  const auto lambdas = kv.get_grid("lambda", "0.001:0.9:30");
  const auto etas = kv.get_grid("eta_s", "0.05:1:20");
  SourceParams base;
  base.eta_T = kv.get_double("eta_T", 0.02);
  base.r = kv.get_double("r", base.r);
  base.t = 1.0 - base.r;
  base.eta_2 = kv.get_double("eta_2", base.eta_2);
  base.eta_3 = kv.get_double("eta_3", base.eta_3);
  base.dark_T = kv.get_double("dark_T", base.dark_T);
  base.dark_2 = kv.get_double("dark_2", base.dark_2);
  base.dark_3 = kv.get_double("dark_3", base.dark_3);
  const auto form = detector_form_from_string(kv.get_string("detector_form", "povm"));
  kv.ignore("seed");
  kv.require_all_used();

  const auto rows = scan_B(lambdas, etas, base, form, run.threads);
  std::ostringstream csv;
  write_scan_csv(csv, rows);
  write_file(run, "b_scan.csv", csv.str());
  std::cout << "model-scan: " << rows.size() << " grid points\n";
  return exit_ok;
}

int cmd_simulate(Run& run) {
  auto& kv = run.kv;
  SimConfig cfg;
  cfg.source = read_source(kv);
  cfg.rep_rate = kv.get_double("rep_rate", cfg.rep_rate);
  cfg.n_pulses = kv.get_u64("n_pulses", cfg.n_pulses);
  cfg.background_f = kv.get_double("background_f", cfg.background_f);
  cfg.trigger_background_ratio = kv.get_double("trigger_background_ratio", cfg.trigger_background_ratio);
  cfg.jitter_fwhm = kv.get_double("jitter_fwhm", cfg.jitter_fwhm);
  cfg.dead_time = kv.get_double("dead_time", cfg.dead_time);
  cfg.quantization = kv.get_double("quantization", cfg.quantization);
  cfg.batch_pulses = kv.get_u64("batch_pulses", cfg.batch_pulses);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  const auto format = event_format_from_string(kv.get_string("format", "csv"));
  kv.require_all_used();

  const auto res = simulate(cfg, run.threads);
  std::ostringstream events(std::ios::binary);
  if (format == EventFormat::csv)
    write_events_csv(events, res.records);
  else
    write_events_binary(events, res.records);
  write_file(run, format == EventFormat::csv ? "events.csv" : "events.bin", events.str());
  write_file(run, "summary.json", sidecar_json(res.summary, cfg).dump(2) + "\n");

  const auto& s = res.summary;
  std::cout << "pulses            " << s.n_pulses << "\n"
            << "N1                " << s.n1 << "\n"
            << "N2                " << s.n2 << "\n"
            << "N3                " << s.n3 << "\n"
            << "N12               " << s.n12 << "\n"
            << "N13               " << s.n13 << "\n"
            << "N123              " << s.n123 << "\n"
            << "records written   " << s.records_written << "\n"
            << "dead-time dropped " << s.dead_time_discarded << "\n";
  return exit_ok;
}

json per_second(const GateCounts& c, double seconds) {
  return {{"N1", static_cast<double>(c.n1) / seconds},
          {"N12", static_cast<double>(c.n12) / seconds},
          {"N13", static_cast<double>(c.n13) / seconds},
          {"N123", static_cast<double>(c.n123) / seconds}};
}

int cmd_analyze(Run& run) {
  auto& kv = run.kv;
  const auto events = input_path(run, "events", "");
  if (events.empty()) throw DomainError("analyze needs 'events' (path to an event file)");
  const fs::path next_to = fs::path(events).parent_path() / "summary.json";
  if (!kv.has("sidecar") && fs::exists(next_to)) kv.set("sidecar", next_to.string());
  const auto sidecar = input_path(run, "sidecar", "");

  GateConfig gate;
  gate.gate_width = kv.get_double("gate_width", gate.gate_width);
  gate.scan_start = kv.get_optional_double("scan_start");
  gate.scan_stop = kv.get_optional_double("scan_stop");
  gate.scan_step = kv.get_optional_double("scan_step");
  gate.coincidence_window = kv.get_double("coincidence_window", gate.coincidence_window);
  gate.bootstrap_resamples = kv.get_u64("bootstrap_resamples", gate.bootstrap_resamples);
  gate.seed = kv.get_u64("seed", gate.seed);
  kv.require_all_used();
  gate.validate();

  const auto records = load_events(events);
  run.inputs.push_back(events);
  std::optional<json> side;
  if (!sidecar.empty()) {
    side = read_json(sidecar);
    run.inputs.push_back(sidecar);
  }

  const auto rows = gate_scan(records, gate, run.threads);
  std::ostringstream csv;
  write_gate_scan_csv(csv, rows);
  write_file(run, "gate_scan.csv", csv.str());

  const auto ungated = summarize(ungated_counts(records, gate.coincidence_window), gate.bootstrap_resamples,
                                 rng::derive_seed(gate.seed, 0xfeedULL << 32));
  json out;
  out["n_records"] = records.size();
  out["gate_width"] = gate.gate_width;
  out["coincidence_window"] = gate.coincidence_window;
  out["n_gates"] = rows.size();
  const auto peak = peak_gate(rows);
  if (peak) {
    json p = to_json(rows[*peak].summary);
    p["gate_center_ps"] = rows[*peak].centre_ps;
    out["peak_gate"] = p;
  } else {
    out["peak_gate"] = nullptr;
  }
  out["ungated"] = to_json(ungated);
  if (side) {
    const auto n_pulses = json_field<double>(*side, "n_pulses", sidecar);
    const json& config = side->contains("config") ? side->at("config") : json::object();
    const double rep = config.contains("rep_rate") ? config.at("rep_rate").get<double>() : 87e6;
    const double seconds = n_pulses / rep;
    json rates;
    rates["acquisition_time_s"] = seconds;
    rates["singles"] = {{"N1", json_field<double>(*side, "N1", sidecar) / seconds},
                        {"N2", json_field<double>(*side, "N2", sidecar) / seconds},
                        {"N3", json_field<double>(*side, "N3", sidecar) / seconds}};
    if (peak) rates["peak_gate"] = per_second(rows[*peak].summary.counts, seconds);
    rates["ungated"] = per_second(ungated.counts, seconds);
    out["rates_per_second"] = rates;
  }
  write_file(run, "analysis.json", out.dump(2) + "\n");

  std::cout << "records " << records.size() << ", gates " << rows.size() << "\n";
  if (peak) {
    const auto& s = rows[*peak].summary;
    std::cout << "peak gate at " << rows[*peak].centre_ps << " ps: N1=" << s.counts.n1 << " N12=" << s.counts.n12
              << " N13=" << s.counts.n13 << " N123=" << s.counts.n123 << " B_norm=" << format_g17(s.report.b_norm)
              << " +- " << format_g17(s.report.sigma_b) << "\n";
  }
  return exit_ok;
}

int cmd_summarize(Run& run) {
  auto& kv = run.kv;
  const auto v = KeyValueConfig::parse_grid("counts", kv.get_string("counts", ""));
  if (v.size() != 4) throw DomainError("counts needs N1, N12, N13, N123");
  GateCounts counts;
  std::uint64_t* fields[] = {&counts.n1, &counts.n12, &counts.n13, &counts.n123};
  for (std::size_t i = 0; i < 4; ++i) {
    if (v[i] < 0.0 || v[i] != std::floor(v[i])) throw DomainError("counts must be non-negative integers");
    *fields[i] = static_cast<std::uint64_t>(v[i]);
  }
  const auto resamples = kv.get_u64("bootstrap_resamples", 1000);
  const auto seed = kv.get_u64("seed", 1);
  kv.require_all_used();

  const auto s = summarize(counts, resamples, seed);
  write_file(run, "summary.json", to_json(s).dump(2) + "\n");
  std::cout << "B_norm " << format_g17(s.report.b_norm) << " +- " << format_g17(s.report.sigma_b) << "\n"
            << "alpha  " << format_g17(s.report.alpha) << " +- " << format_g17(s.report.sigma_alpha) << "\n"
            << "g2     " << format_g17(s.report.g2) << " +- " << format_g17(s.report.sigma_g2) << "\n";
  return exit_ok;
}

json rates_json(const ClickRates& r) {
  return {{"R1", r.r1}, {"R2", r.r2}, {"R3", r.r3}, {"R12", r.r12}, {"R13", r.r13}, {"R123", r.r123}};
}

int cmd_classical_check(Run& run) {
  auto& kv = run.kv;
  SuiteConfig suite;
  if (kv.has("cases")) {
    suite = load_suite(kv);
  } else {
    suite.n_trials = kv.get_u64("trials", suite.n_trials);
    suite.seed = kv.get_u64("seed", suite.seed);
    suite.abs_tol = kv.get_double("abs_tol", suite.abs_tol);
    kv.get_string("cases", "default");
    kv.require_all_used();
    suite.cases = default_classical_suite();
  }

  const auto report = verify_classical_suite(suite.cases, suite.n_trials, suite.seed, suite.abs_tol, run.threads);
  json cases = json::array();
  for (const auto& o : report.outcomes) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    cases.push_back({{"name", o.name},
                     {"description", o.description},
                     {"method", to_string(o.result.method)},
                     {"passed", o.passed},
                     {"B_raw", o.result.b_raw},
                     {"B_norm", opt(o.b_norm)},
                     {"standard_error_B", o.result.standard_error_b},
                     {"abs_error_B", o.result.abs_error_b},
                     {"z_score", o.result.z_score},
                     {"rates", rates_json(o.result.rates)}});
  }
  json out = {{"passed", report.passed()},
              {"n_trials", report.n_trials},
              {"seed", report.seed},
              {"abs_tol", report.abs_tol},
              {"failures", report.failures()},
              {"cases", cases}};
  write_file(run, "classical_report.json", out.dump(2) + "\n");

  for (const auto& o : report.outcomes)
    std::cout << (o.passed ? "ok    " : "FAIL  ") << o.name << " [" << to_string(o.result.method)
              << "] B_raw=" << o.result.b_raw << "\n";
  if (!report.passed()) {
    std::cerr << "classical bound violated by:";
    for (const auto& f : report.failures()) std::cerr << ' ' << f;
    std::cerr << '\n';
    return exit_violation;
  }
  return exit_ok;
}

int cmd_estimate_gain(Run& run) {
  auto& kv = run.kv;
  const auto summary = input_path(run, "summary", "");
  const auto rate_given = kv.get_optional_double("rate");
  if (summary.empty() == !rate_given) throw DomainError("estimate-gain needs exactly one of 'rate' or 'summary'");

  double rate = rate_given.value_or(0.0);
  double rep_default = 87e6;
  if (!summary.empty()) {
    const auto side = read_json(summary);
    run.inputs.push_back(summary);
    const auto n_pulses = json_field<double>(side, "n_pulses", summary);
    if (side.contains("config") && side.at("config").contains("rep_rate"))
      rep_default = side.at("config").at("rep_rate").get<double>();
    if (n_pulses <= 0.0) throw FormatError(summary + ": n_pulses must be positive");
    rate = (json_field<double>(side, "N2", summary) + json_field<double>(side, "N3", summary)) * rep_default /
           n_pulses;
  }
  const double eta_s = kv.get_double("eta_s", 0.345);
  const double rep = kv.get_double("rep_rate", rep_default);
  const double f = kv.get_double("background_f", 0.0);
  kv.ignore("seed");
  kv.require_all_used();

  const auto g = estimate_lambda(rate, eta_s, rep, f);
  const json out = {{"lambda_hat", g.lambda_hat},
                    {"signal_singles_rate", g.signal_singles_rate},
                    {"eta_s", g.eta_s},
                    {"rep_rate", g.rep_rate},
                    {"background_f", g.f}};
  write_file(run, "gain.json", out.dump(2) + "\n");
  std::cout << "lambda_hat " << format_g17(g.lambda_hat) << "\n";
  return exit_ok;
}

using Command = int (*)(Run&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"model-scan", cmd_model_scan},       {"simulate", cmd_simulate},
      {"analyze", cmd_analyze},             {"summarize", cmd_summarize},
      {"classical-check", cmd_classical_check}, {"estimate-gain", cmd_estimate_gain}};
  return table;
}

int execute(Run& run) {
  std::error_code ec;
  fs::create_directories(run.out_dir, ec);
  if (ec) throw IoError(run.out_dir.string(), "cannot create output directory: " + ec.message());

  const auto start = std::chrono::steady_clock::now();
  const int code = commands().at(run.subcommand)(run);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  json config = json::object();
  for (const auto& [k, v] : run.kv.resolved()) config[k] = v;
  json manifest = {{"tool", "hsps"},
                   {"version", HSPS_VERSION},
                   {"subcommand", run.subcommand},
                   {"seed", run.kv.resolved().count("seed") ? json(KeyValueConfig::to_u64("seed", run.kv.resolved().at("seed")))
                                                          : json(nullptr)},
                   {"config", config},
                   {"inputs", run.inputs},
                   {"outputs", run.outputs},
                   {"threads", run.threads},
                   {"exit_code", code},
                   {"duration_s", elapsed.count()}};
  for (const auto& [k, v] : run.extra.items()) manifest[k] = v;
  const fs::path path = run.out_dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
  return code;
}

void apply_override(KeyValueConfig& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw DomainError("--set expects key=value, got '" + assignment + "'");
  kv.set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heralded single-photon statistics: model, simulate, analyze, certify."};
  app.set_version_flag("--version", std::string(HSPS_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::string> format;
  unsigned threads = default_threads();
  std::vector<std::string> overrides;
  std::string manifest_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--set", overrides, "override one config key, key=value (repeatable)");
  };

  for (const auto& [name, fn] : commands()) {
    auto* sub = app.add_subcommand(name);
    add_common(sub);
    if (name == "simulate")
      sub->add_option("--format", format, "event file format")->check(CLI::IsMember({"csv", "binary"}));
  }
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  replay->add_option("--out", out_dir, "output directory")->capture_default_str();
  replay->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    Run run;
    run.out_dir = out_dir;
    run.threads = threads;
    if (replay->parsed()) {
      const auto manifest = read_json(manifest_path);
      run.subcommand = json_field<std::string>(manifest, "subcommand", manifest_path);
      if (!commands().count(run.subcommand))
        throw FormatError(manifest_path + ": unknown subcommand '" + run.subcommand + "'");
      const auto config = json_field<json>(manifest, "config", manifest_path);
      for (const auto& [k, v] : config.items()) {
        if (!v.is_string()) throw FormatError(manifest_path + ": config values must be strings");
        run.kv.set(k, v.get<std::string>());
      }
      run.extra["replayed_from"] = fs::absolute(manifest_path).lexically_normal().string();
    } else {
      for (const auto* sub : app.get_subcommands()) run.subcommand = sub->get_name();
      if (!config_path.empty()) run.kv = KeyValueConfig::load(config_path);
      for (const auto& o : overrides) apply_override(run.kv, o);
      if (seed) run.kv.set("seed", std::to_string(*seed));
      if (format) run.kv.set("format", *format);
      if (!config_path.empty()) run.extra["config_file"] = fs::absolute(config_path).lexically_normal().string();
    }
    return execute(run);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return exit_io;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return exit_io;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return exit_io;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  }
}

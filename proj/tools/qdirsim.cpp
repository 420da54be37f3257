#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdirsim/adversary.hpp"
#include "qdirsim/metrics.hpp"
#include "qdirsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace qdirsim;
using oj = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> events;
  std::string attack;
};

ScenarioConfig load(const Options& o) {
  auto c = load_config(o.config);
  if (!o.out.empty()) c.run.output_dir = o.out;
  if (o.seed) c.run.seed = *o.seed;
  if (o.events) c.run.n_events = *o.events;
  if (c.run.n_events < 1) throw ConfigError("config", "run.n_events must be >= 1");
  return c;
}

fs::path out_dir(const ScenarioConfig& c) {
  fs::path p(c.run.output_dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cli", "cannot create output directory '" + p.string() + "': " + ec.message());
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cli", "cannot write '" + p.string() + "'");
  f << text;
}

void write_json(const fs::path& p, const oj& j) { write_text(p, j.dump(2) + "\n"); }

oj null_or(double v) { return std::isfinite(v) ? oj(v) : oj(nullptr); }

void write_manifest(const fs::path& dir, const ScenarioConfig& c, const std::string& command,
                    const std::vector<std::string>& outputs) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, config_hash(c));
  oj m;
  m["tool"] = "qdirsim";
  m["command"] = command;
  m["scenario"] = c.name;
  m["config_hash"] = hash;
  m["seed"] = c.run.seed;
  m["n_events"] = c.run.n_events;
  m["defaults_version"] = kDefaultsVersion;
  m["outputs"] = outputs;
  m["config"] = to_json(c);
  write_json(dir / "manifest.json", m);
}

oj verdict_json(const FeasibilityVerdict& v) {
  oj j;
  j["feasible"] = v.feasible;
  j["margin_lower"] = v.margin_lower;
  j["margin_upper"] = v.margin_upper;
  j["margin_propagation"] = v.margin_propagation;
  j["required_margin"] = v.required_margin;
  j["lower_ok"] = v.lower_ok;
  j["upper_ok"] = v.upper_ok;
  j["propagation_ok"] = v.propagation_ok;
  return j;
}

int cmd_feasibility(const Options& o) {
  const auto c = load(o);
  const auto v = check_feasibility(c.system_geometry(), c.geometry.margin);
  const auto j = verdict_json(v);
  std::cout << j.dump(2) << "\n";
  const auto dir = out_dir(c);
  write_json(dir / "feasibility.json", j);
  write_manifest(dir, c, "feasibility", {"feasibility.json"});
  return v.feasible ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(c);
  const auto grid = c.transverse_grid();
  const auto geom = c.system_geometry();
  const auto state = c.make_state();
  const auto channel = c.measurement_channel();

  auto events = sample_events(state, channel, c.run.n_events, derive_seed(c.run.seed, 0), c.run.workers);
  const auto policy = c.noise_policy(state);
  events = inject_noise(events, policy, grid, derive_seed(c.run.seed, 1));

  std::ostringstream csv;
  write_events_csv(csv, events, false);
  write_text(dir / "events.csv", csv.str());

  oj s;
  s["scenario"] = c.name;
  s["seed"] = c.run.seed;
  s["n_events"] = c.run.n_events;
  s["events_written"] = events.size();
  s["feasibility"] = verdict_json(check_feasibility(geom, c.geometry.margin));

  const auto img = c.image();
  std::size_t pairs = 0;
  for (const auto& e : events) pairs += e.is_single() ? 0 : 1;
  if (channel.kind == MeasurementChannel::Kind::biphoton && img.dot_positions.size() >= 2 && pairs > 0) {
    s["contrast"] = image_contrast(relative_image_from_events(events, grid), img);
  } else {
    s["contrast"] = nullptr;
  }
  if (pairs >= 2) {
    const auto r = recoil_direction(events, geom.axial_momentum);
    s["recoil"] = {{"angle", r.angle}, {"standard_error", r.standard_error}, {"events", r.events}};
  } else {
    s["recoil"] = nullptr;
  }

  // Single-photon view of the same source: the recorded stream for a
  // single-photon channel, otherwise a wide-acceptance run of equal size.
  std::vector<DetectionEvent> singles;
  if (channel.kind == MeasurementChannel::Kind::single_photon) {
    singles = events;
  } else {
    singles = sample_events(state, MeasurementChannel::wide_single(channel.chain), c.run.n_events,
                            derive_seed(c.run.seed, 2), c.run.workers);
    singles = inject_noise(singles, policy, grid, derive_seed(c.run.seed, 3));
  }
  const auto counts = single_photon_counts(singles, grid);
  s["marginal_uniformity_p"] = stats::chi_square_uniformity(counts).p_value;
  try {
    const auto d = estimate_source_directions(singles, grid, geom.axial_momentum,
                                              DirectionStrategy::single_photon_ml,
                                              derive_seed(c.run.seed, 4));
    s["direction_estimate"] = {{"identifiable", true},
                               {"angles", d.angles},
                               {"std_error", d.std_error}};
  } catch (const NonIdentifiableError& e) {
    s["direction_estimate"] = {{"identifiable", false}, {"reason", e.what()}};
  } catch (const InsufficientDataError& e) {
    s["direction_estimate"] = {{"identifiable", false}, {"reason", e.what()}};
  }
  write_json(dir / "summary.json", s);
  write_manifest(dir, c, "simulate", {"events.csv", "summary.json"});

  std::printf("%s: %zu events, contrast %s\n", c.name.c_str(), events.size(),
              s["contrast"].is_null() ? "n/a" : s["contrast"].dump().c_str());
  return kExitOk;
}

int cmd_attack(const Options& o) {
  static const std::vector<std::string> kAttacks{"blocking", "ensemble"};
  if (std::find(kAttacks.begin(), kAttacks.end(), o.attack) == kAttacks.end()) {
    throw Error("cli", "unknown attack '" + o.attack + "'; valid attacks: blocking, ensemble");
  }
  const auto c = load(o);
  const auto dir = out_dir(c);
  const auto grid = c.transverse_grid();
  const auto state = c.make_state();
  AttackReport report;
  if (o.attack == "blocking") {
    const auto transmitted = apply_chain(state, c.channel.chain).state;
    report = blocking_attack(transmitted, c.system_geometry(), c.mask_width(), c.run.n_events,
                             derive_seed(c.run.seed, 0), {c.attack.centers, c.attack.threshold});
  } else {
    auto events = sample_events(state, c.measurement_channel(), c.run.n_events,
                                derive_seed(c.run.seed, 0), c.run.workers);
    events = inject_noise(events, c.noise_policy(state), grid, derive_seed(c.run.seed, 1));
    EnsembleOptions opts;
    opts.significance = c.attack.significance;
    report = ensemble_statistics_attack(events, c.attack.window, grid, opts);
  }
  const auto j = report.to_json();
  const std::string file = "attack_" + o.attack + ".json";
  write_json(dir / file, j);
  write_manifest(dir, c, "attack " + o.attack, {file});
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_tradeoff(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(c);
  TradeoffInputs in;
  in.scenario_id = c.name;
  in.make_state = [&c](const ImageSpec& img) { return c.make_state(img); };
  in.image = c.image();
  in.alphabet = c.alphabet();
  in.chain = c.channel.chain;
  in.axial_momentum = c.system_geometry().axial_momentum;
  const auto reports = tradeoff_scan(in, c.tradeoff.cutoffs, c.run.n_events, c.run.seed);

  std::ostringstream csv;
  write_tradeoff_csv(csv, reports);
  write_text(dir / "tradeoff.csv", csv.str());
  auto summary = tradeoff_summary(reports);
  write_json(dir / "tradeoff.json", summary);
  write_manifest(dir, c, "tradeoff", {"tradeoff.csv", "tradeoff.json"});

  if (reports.empty()) {
    std::printf("%s: no cutoffs\n", c.name.c_str());
  } else {
    const auto& b = summary["largest_identifiable_cutoff"];
    std::printf("%s: %zu points, contrast %.4f..%.4f, spearman %.3f, directions identifiable up to cutoff %s\n",
                c.name.c_str(), reports.size(), summary["min_contrast"].get<double>(),
                summary["max_contrast"].get<double>(),
                summary["spearman_cutoff_contrast"].is_number()
                    ? summary["spearman_cutoff_contrast"].get<double>()
                    : std::nan(""),
                b.is_null() ? "none" : b.dump().c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-transmitter biphoton direction-privacy simulator"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Scenario config (JSON)")->required();
    sub->add_option("--out", o.out, "Output directory (overrides run.output_dir)");
    sub->add_option("--seed", o.seed, "Seed (overrides run.seed)");
    sub->add_option("--events", o.events, "Event count (overrides run.n_events)");
  };
  auto* feas = app.add_subcommand("feasibility", "Check the image-size window and propagation bound");
  auto* sim = app.add_subcommand("simulate", "Sample detection events and summarize them");
  auto* att = app.add_subcommand("attack", "Run an attack: blocking or ensemble");
  auto* trd = app.add_subcommand("tradeoff", "Sweep the aperture cutoff");
  for (auto* s : {feas, sim, att, trd}) add_common(s);
  att->add_option("name", o.attack, "Attack name (blocking, ensemble)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*feas) return cmd_feasibility(o);
    if (*sim) return cmd_simulate(o);
    if (*att) return cmd_attack(o);
    if (*trd) return cmd_tradeoff(o);
  } catch (const qdirsim::Error& e) {
    std::cerr << "qdirsim: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "qdirsim: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

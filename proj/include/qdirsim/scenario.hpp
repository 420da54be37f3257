#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdirsim/adversary.hpp"
#include "qdirsim/error.hpp"
#include "qdirsim/geometry.hpp"
#include "qdirsim/grid.hpp"
#include "qdirsim/measurement.hpp"
#include "qdirsim/optics.hpp"
#include "qdirsim/state.hpp"

namespace qdirsim {

/// Bumped whenever a default below changes meaning; recorded in run manifests.
inline constexpr int kDefaultsVersion = 1;

/// A complete, file-describable run. Every field has a default so a config
/// file only needs to state what differs.
struct ScenarioConfig {
  std::string name = "unnamed";

  struct Geometry {
    double transmitter_separation = 1.0;
    double range = 10.0;
    double opening_angle_narrow = 1e-3;
    double image_separation = 4.0;
    double pump_wavelength = 0.5;
    double margin = 5.0;
  } geometry;

  struct Grid {
    std::size_t n_points = 256;
    double q_max = 8.0 * std::numbers::pi;
  } grid;

  struct State {
    enum class Kind { difference, narrow_beams };
    Kind kind = Kind::difference;
    std::optional<std::vector<double>> dots;  // default: +-Y0/2
    double dot_width = 0.5;
    ImageEncoding encoding = ImageEncoding::relative;
    SumEnvelope envelope = SumEnvelope::uniform();
    std::optional<double> relative_offset;  // default: P_Z dTheta0
    double beam_width = 0.0628;             // narrow_beams: |amplitude|^2 std in q
    std::vector<std::vector<double>> alphabet;
  } state;

  struct Channel {
    MeasurementChannel::Kind kind = MeasurementChannel::Kind::biphoton;
    std::optional<double> acceptance_cutoff;
    std::vector<TransferFunction> chain;
  } channel;

  struct Noise {
    double background_rate = 0.0;
    bool offset = false;  // compensate the single-photon bias of the state
  } noise;

  struct Run {
    std::size_t n_events = 10000;
    std::uint64_t seed = 42;
    std::string output_dir = "out";
    ArrivalProcess arrival{};
    unsigned workers = 1;
  } run;

  struct Attack {
    std::optional<double> mask_width;  // default: dTheta0
    std::size_t centers = 21;
    double threshold = 0.1;
    std::uint64_t window = 40;
    double significance = 0.01;
  } attack;

  struct Tradeoff {
    std::vector<double> cutoffs{0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
  } tradeoff;

  SystemGeometry system_geometry() const {
    return SystemGeometry::from_separation(geometry.transmitter_separation, geometry.range,
                                           geometry.opening_angle_narrow, geometry.image_separation,
                                           geometry.pump_wavelength);
  }

  TransverseGrid transverse_grid() const { return TransverseGrid(grid.n_points, grid.q_max); }

  ImageSpec image() const {
    const double y0 = geometry.image_separation;
    return ImageSpec{state.dots.value_or(std::vector<double>{-0.5 * y0, 0.5 * y0}), state.dot_width,
                     state.encoding};
  }

  std::vector<ImageSpec> alphabet() const {
    std::vector<ImageSpec> out;
    for (const auto& d : state.alphabet) out.push_back(ImageSpec{d, state.dot_width, state.encoding});
    return out;
  }

  double relative_offset() const {
    if (state.relative_offset) return *state.relative_offset;
    const auto g = system_geometry();
    return g.axial_momentum * g.opening_angle_full;
  }

  BiphotonState make_state(const ImageSpec& img) const {
    const auto g = transverse_grid();
    if (state.kind == State::Kind::narrow_beams) {
      // One well-collimated beam per transmitter; no image is carried.
      const auto geom = system_geometry();
      const double ca = geom.axial_momentum * geom.source_angle_a();
      const double cb = geom.axial_momentum * geom.source_angle_b();
      const double w = state.beam_width;
      if (!(w > 0.0)) throw ConfigError("config", "state.beam_width must be positive");
      return make_separable_state(
          g, [&](double q) { return cplx{std::exp(-(q - ca) * (q - ca) / (4.0 * w * w)), 0.0}; },
          [&](double q) { return cplx{std::exp(-(q - cb) * (q - cb) / (4.0 * w * w)), 0.0}; });
    }
    return make_difference_correlated_state(g, img, {state.envelope, relative_offset()});
  }

  BiphotonState make_state() const { return make_state(image()); }

  MeasurementChannel measurement_channel() const {
    MeasurementChannel c;
    c.kind = channel.kind;
    c.acceptance_cutoff = channel.acceptance_cutoff;
    c.chain = channel.chain;
    c.arrival = run.arrival;
    return c;
  }

  NoisePolicy noise_policy(const BiphotonState& s) const {
    NoisePolicy p;
    p.background_rate = noise.background_rate;
    if (noise.offset) p.single_photon_offset = compute_marginal_bias(s);
    return p;
  }

  double mask_width() const {
    return attack.mask_width.value_or(system_geometry().opening_angle_full);
  }
};

namespace detail {

/// Walks a JSON object and remembers which keys were read, so leftovers can
/// be reported as unknown.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config", where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const nlohmann::json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const auto* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config", "key '" + key_path(key) + "' has the wrong type");
      }
    }
  }

  void read_number(const std::string& key, double& out) {
    if (const auto* v = get(key)) {
      if (!v->is_number()) throw ConfigError("config", "key '" + key_path(key) + "' must be a number");
      out = v->get<double>();
    }
  }

  template <class U>
  void read_count(const std::string& key, U& out) {
    if (const auto* v = get(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0)) {
        throw ConfigError("config", "key '" + key_path(key) + "' must be a non-negative integer");
      }
      out = static_cast<U>(v->get<std::uint64_t>());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("config", "unknown key '" + key_path(it.key()) + "'");
      }
    }
  }

  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Arm parse_arm(const std::string& s, const std::string& path) {
  if (s == "signal") return Arm::signal;
  if (s == "idler") return Arm::idler;
  if (s == "both") return Arm::both;
  throw ConfigError("config", "key '" + path + "' must be signal, idler or both");
}

inline TransferFunction parse_transfer(const nlohmann::json& j, const std::string& path) {
  ConfigReader r(j, path);
  std::string kind, arm = "both";
  r.read("kind", kind);
  r.read("arm", arm);
  TransferFunction t;
  t.arm = parse_arm(arm, r.key_path("arm"));
  if (kind == "free_propagation") {
    t.kind = TransferFunction::Kind::free_propagation;
    r.read_number("distance", t.distance);
    std::string model = "exact";
    r.read("model", model);
    if (model == "exact") {
      t.model = PropagationModel::exact;
    } else if (model == "paraxial") {
      t.model = PropagationModel::paraxial;
    } else {
      throw ConfigError("config", "key '" + r.key_path("model") + "' must be exact or paraxial");
    }
    r.read_number("signal_wavelength", t.wavelengths.signal);
    r.read_number("idler_wavelength", t.wavelengths.idler);
  } else if (kind == "hard_aperture") {
    t.kind = TransferFunction::Kind::hard_aperture;
    r.read_number("cutoff", t.cutoff);
  } else if (kind == "mask") {
    t.kind = TransferFunction::Kind::mask;
    r.read_number("angle_low", t.angle_low);
    r.read_number("angle_high", t.angle_high);
  } else {
    throw ConfigError("config", "key '" + r.key_path("kind") +
                                    "' must be free_propagation, hard_aperture or mask");
  }
  r.finish();
  return t;
}

inline nlohmann::ordered_json transfer_to_json(const TransferFunction& t) {
  nlohmann::ordered_json j;
  switch (t.kind) {
    case TransferFunction::Kind::free_propagation:
      j["kind"] = "free_propagation";
      j["arm"] = to_string(t.arm);
      j["distance"] = t.distance;
      j["model"] = t.model == PropagationModel::exact ? "exact" : "paraxial";
      j["signal_wavelength"] = t.wavelengths.signal;
      j["idler_wavelength"] = t.wavelengths.idler;
      break;
    case TransferFunction::Kind::hard_aperture:
      j["kind"] = "hard_aperture";
      j["arm"] = to_string(t.arm);
      j["cutoff"] = t.cutoff;
      break;
    case TransferFunction::Kind::mask:
      j["kind"] = "mask";
      j["arm"] = to_string(t.arm);
      j["angle_low"] = t.angle_low;
      j["angle_high"] = t.angle_high;
      break;
  }
  return j;
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& doc) {
  using detail::ConfigReader;
  ScenarioConfig c;
  ConfigReader top(doc, "");
  top.read("name", c.name);

  if (const auto* g = top.get("geometry")) {
    ConfigReader r(*g, "geometry");
    r.read_number("transmitter_separation", c.geometry.transmitter_separation);
    r.read_number("range", c.geometry.range);
    r.read_number("opening_angle_narrow", c.geometry.opening_angle_narrow);
    r.read_number("image_separation", c.geometry.image_separation);
    r.read_number("pump_wavelength", c.geometry.pump_wavelength);
    r.read_number("margin", c.geometry.margin);
    r.finish();
  }

  if (const auto* g = top.get("grid")) {
    ConfigReader r(*g, "grid");
    r.read_count("n_points", c.grid.n_points);
    r.read_number("q_max", c.grid.q_max);
    r.finish();
  }

  if (const auto* s = top.get("state")) {
    ConfigReader r(*s, "state");
    std::string kind = "difference";
    r.read("kind", kind);
    if (kind == "difference") {
      c.state.kind = ScenarioConfig::State::Kind::difference;
    } else if (kind == "narrow_beams") {
      c.state.kind = ScenarioConfig::State::Kind::narrow_beams;
    } else {
      throw ConfigError("config", "key 'state.kind' must be difference or narrow_beams");
    }
    if (const auto* img = r.get("image")) {
      ConfigReader ir(*img, "state.image");
      if (ir.has("dots")) {
        std::vector<double> d;
        ir.read("dots", d);
        c.state.dots = d;
      } else {
        ir.get("dots");
      }
      ir.read_number("dot_width", c.state.dot_width);
      std::string enc = "relative";
      ir.read("encoding", enc);
      if (enc == "relative") {
        c.state.encoding = ImageEncoding::relative;
      } else if (enc == "center_of_mass") {
        c.state.encoding = ImageEncoding::center_of_mass;
      } else {
        throw ConfigError("config", "key 'state.image.encoding' must be relative or center_of_mass");
      }
      ir.finish();
    }
    if (const auto* env = r.get("sum_envelope")) {
      ConfigReader er(*env, "state.sum_envelope");
      std::string ek = "uniform";
      er.read("kind", ek);
      if (ek == "uniform") {
        c.state.envelope = SumEnvelope::uniform();
      } else if (ek == "gaussian") {
        double w = 0.0, ctr = 0.0;
        er.read_number("width", w);
        er.read_number("center", ctr);
        c.state.envelope = SumEnvelope::gaussian(w, ctr);
      } else {
        throw ConfigError("config", "key 'state.sum_envelope.kind' must be uniform or gaussian");
      }
      er.finish();
    }
    if (const auto* off = r.get("relative_offset")) {
      if (off->is_string() && off->get<std::string>() == "auto") {
        c.state.relative_offset.reset();
      } else if (off->is_number()) {
        c.state.relative_offset = off->get<double>();
      } else {
        throw ConfigError("config", "key 'state.relative_offset' must be a number or \"auto\"");
      }
    }
    r.read_number("beam_width", c.state.beam_width);
    r.read("alphabet", c.state.alphabet);
    r.finish();
  }

  if (const auto* ch = top.get("channel")) {
    ConfigReader r(*ch, "channel");
    std::string kind = "biphoton";
    r.read("kind", kind);
    if (kind == "biphoton") {
      c.channel.kind = MeasurementChannel::Kind::biphoton;
    } else if (kind == "single_photon") {
      c.channel.kind = MeasurementChannel::Kind::single_photon;
    } else if (kind == "recoil_integrating") {
      c.channel.kind = MeasurementChannel::Kind::recoil_integrating;
    } else {
      throw ConfigError("config",
                        "key 'channel.kind' must be biphoton, single_photon or recoil_integrating");
    }
    if (const auto* a = r.get("acceptance_cutoff")) {
      if (a->is_null()) {
        c.channel.acceptance_cutoff.reset();
      } else if (a->is_number()) {
        c.channel.acceptance_cutoff = a->get<double>();
      } else {
        throw ConfigError("config", "key 'channel.acceptance_cutoff' must be a number or null");
      }
    }
    if (const auto* chain = r.get("chain")) {
      if (!chain->is_array()) throw ConfigError("config", "key 'channel.chain' must be a list");
      for (std::size_t i = 0; i < chain->size(); ++i) {
        c.channel.chain.push_back(
            detail::parse_transfer((*chain)[i], "channel.chain[" + std::to_string(i) + "]"));
      }
    }
    r.finish();
  }

  if (const auto* n = top.get("noise")) {
    ConfigReader r(*n, "noise");
    r.read_number("background_rate", c.noise.background_rate);
    std::string offset = "none";
    r.read("offset", offset);
    if (offset == "auto") {
      c.noise.offset = true;
    } else if (offset == "none") {
      c.noise.offset = false;
    } else {
      throw ConfigError("config", "key 'noise.offset' must be auto or none");
    }
    r.finish();
  }

  if (const auto* rb = top.get("run")) {
    ConfigReader r(*rb, "run");
    r.read_count("n_events", c.run.n_events);
    r.read_count("seed", c.run.seed);
    r.read("output_dir", c.run.output_dir);
    std::string arrival = "geometric";
    r.read("arrival", arrival);
    if (arrival == "geometric") {
      c.run.arrival.kind = ArrivalProcess::Kind::geometric;
    } else if (arrival == "periodic") {
      c.run.arrival.kind = ArrivalProcess::Kind::periodic;
    } else {
      throw ConfigError("config", "key 'run.arrival' must be geometric or periodic");
    }
    r.read_number("mean_interval", c.run.arrival.mean_interval);
    r.read_count("workers", c.run.workers);
    r.finish();
  }

  if (const auto* a = top.get("attack")) {
    ConfigReader r(*a, "attack");
    if (const auto* mw = r.get("mask_width")) {
      if (mw->is_string() && mw->get<std::string>() == "auto") {
        c.attack.mask_width.reset();
      } else if (mw->is_number()) {
        c.attack.mask_width = mw->get<double>();
      } else {
        throw ConfigError("config", "key 'attack.mask_width' must be a number or \"auto\"");
      }
    }
    r.read_count("centers", c.attack.centers);
    r.read_number("threshold", c.attack.threshold);
    r.read_count("window", c.attack.window);
    r.read_number("significance", c.attack.significance);
    r.finish();
  }

  if (const auto* t = top.get("tradeoff")) {
    ConfigReader r(*t, "tradeoff");
    r.read("cutoffs", c.tradeoff.cutoffs);
    r.finish();
  }
  top.finish();
  return c;
}

/// Parses config text. Syntax errors carry nlohmann's line/column report.
inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(doc);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError("config", path + ": " + std::string(e.what()).substr(8));
  }
}

/// Canonical form: every field spelled out in a fixed order.
inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["name"] = c.name;
  j["geometry"] = {{"transmitter_separation", c.geometry.transmitter_separation},
                   {"range", c.geometry.range},
                   {"opening_angle_narrow", c.geometry.opening_angle_narrow},
                   {"image_separation", c.geometry.image_separation},
                   {"pump_wavelength", c.geometry.pump_wavelength},
                   {"margin", c.geometry.margin}};
  j["grid"] = {{"n_points", c.grid.n_points}, {"q_max", c.grid.q_max}};

  oj st;
  st["kind"] = c.state.kind == ScenarioConfig::State::Kind::difference ? "difference" : "narrow_beams";
  oj img;
  if (c.state.dots) img["dots"] = *c.state.dots;
  img["dot_width"] = c.state.dot_width;
  img["encoding"] = c.state.encoding == ImageEncoding::relative ? "relative" : "center_of_mass";
  st["image"] = img;
  if (c.state.envelope.kind == SumEnvelope::Kind::uniform) {
    st["sum_envelope"] = {{"kind", "uniform"}};
  } else {
    st["sum_envelope"] = {{"kind", "gaussian"},
                          {"width", c.state.envelope.width},
                          {"center", c.state.envelope.center}};
  }
  st["relative_offset"] = c.state.relative_offset ? oj(*c.state.relative_offset) : oj("auto");
  st["beam_width"] = c.state.beam_width;
  st["alphabet"] = c.state.alphabet;
  j["state"] = st;

  oj ch;
  switch (c.channel.kind) {
    case MeasurementChannel::Kind::biphoton: ch["kind"] = "biphoton"; break;
    case MeasurementChannel::Kind::single_photon: ch["kind"] = "single_photon"; break;
    case MeasurementChannel::Kind::recoil_integrating: ch["kind"] = "recoil_integrating"; break;
  }
  ch["acceptance_cutoff"] = c.channel.acceptance_cutoff ? oj(*c.channel.acceptance_cutoff) : oj(nullptr);
  ch["chain"] = oj::array();
  for (const auto& t : c.channel.chain) ch["chain"].push_back(detail::transfer_to_json(t));
  j["channel"] = ch;

  j["noise"] = {{"background_rate", c.noise.background_rate},
                {"offset", c.noise.offset ? "auto" : "none"}};
  j["run"] = {{"n_events", c.run.n_events},
              {"seed", c.run.seed},
              {"output_dir", c.run.output_dir},
              {"arrival", c.run.arrival.kind == ArrivalProcess::Kind::geometric ? "geometric" : "periodic"},
              {"mean_interval", c.run.arrival.mean_interval},
              {"workers", c.run.workers}};
  j["attack"] = {{"mask_width", c.attack.mask_width ? oj(*c.attack.mask_width) : oj("auto")},
                 {"centers", c.attack.centers},
                 {"threshold", c.attack.threshold},
                 {"window", c.attack.window},
                 {"significance", c.attack.significance}};
  j["tradeoff"] = {{"cutoffs", c.tradeoff.cutoffs}};
  return j;
}

/// 64-bit FNV-1a of the canonical JSON text.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace qdirsim

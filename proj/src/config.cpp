#include "wigprobe/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "wigprobe/errors.hpp"

namespace wigprobe {

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + num(v[k]);
  return s + "]";
}

const char* selection_name(PatternSelection s) {
  return s == PatternSelection::uniform ? "uniform" : "frequency_weighted";
}

const char* weighting_name(PatternWeighting w) { return w == PatternWeighting::none ? "none" : "poisson"; }

void emit_detector(std::ostringstream& o, const char* name, const DetectorParams& d) {
  o << name << ":\n"
    << "  bins_per_mode: " << d.bins_per_mode << "  # time-multiplexed bins per mode\n"
    << "  apds: " << d.apds << "  # click detectors; bin b sits on APD b % apds\n"
    << "  split_weights: " << list(d.split_weights) << "  # routing weight per bin; empty = uniform\n"
    << "  eta_d: " << num(d.eta_d) << "  # APD detection efficiency, probability\n"
    << "  dark: " << num(d.dark) << "  # dark-click probability per bin and shot\n"
    << "  p_ap: " << num(d.p_ap) << "  # afterpulse probability per click\n"
    << "  ap_horizon: " << d.ap_horizon << "  # slots an afterpulse can land in\n"
    << "  photon_cap: " << d.photon_cap << "  # largest photon number in the exact model\n";
}

// Reads a node into typed fields, tracking the path for error messages and
// rejecting keys that nothing consumed.
class Reader {
 public:
  Reader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) throw ConfigError(where() + "expected a mapping");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!node_) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  void sub(const char* key, const std::function<void(Reader&)>& fn) {
    seen_.insert(key);
    Reader r(node_ ? node_[key] : YAML::Node(), field(key));
    fn(r);
    r.finish();
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(field(key.c_str()) + ": unknown key");
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_detector(Reader& r, DetectorParams& d) {
  r.get("bins_per_mode", d.bins_per_mode);
  r.get("apds", d.apds);
  r.get("split_weights", d.split_weights);
  r.get("eta_d", d.eta_d);
  r.get("dark", d.dark);
  r.get("p_ap", d.p_ap);
  r.get("ap_horizon", d.ap_horizon);
  r.get("photon_cap", d.photon_cap);
}

void check_detector(const DetectorParams& d, const char* name) {
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + "." + e.what());
  }
}

}  // namespace

SourceParams ExperimentConfig::source_at(double overlap) const {
  SourceParams s = source;
  s.overlap = overlap;
  return s;
}

void ExperimentConfig::validate() const {
  source.validate();
  check_detector(detector_s, "detector_s");
  check_detector(detector_i, "detector_i");
  try {
    tmd().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("detector: ") + e.what());
  }
  if (n_max < 1) throw ConfigError("n_max: must be >= 1");
  if (shots < 1) throw ConfigError("shots: must be >= 1");
  if (amps.size() < 3) throw ConfigError("amps: need at least 3 displacements for the afterpulse fit");
  for (double a : amps) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("amps: entries must be finite and >= 0");
  }
  if (!std::is_sorted(amps.begin(), amps.end())) throw ConfigError("amps: must be sorted ascending");
  if (std::adjacent_find(amps.begin(), amps.end()) != amps.end()) throw ConfigError("amps: duplicate entry");
  for (double a : pn_amps) {
    if (std::find(amps.begin(), amps.end(), a) == amps.end()) throw ConfigError("pn_amps: every entry must be in amps");
  }
  if (overlaps.empty()) throw ConfigError("overlaps: need at least one value");
  for (double m : overlaps) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("overlaps: entries must lie in [0, 1]");
  }
  if (probe_grid.n_s < 1 || probe_grid.n_i < 1) throw ConfigError("probe_grid: counts must be >= 1");
  if (!(probe_grid.max_s >= 0.0) || !(probe_grid.max_i >= 0.0)) throw ConfigError("probe_grid: ranges must be >= 0");
  if (probe_grid.shots < 1) throw ConfigError("probe_grid.shots: must be >= 1");
  if (reconstruction.n_patterns < 1) throw ConfigError("reconstruction.n_patterns: must be >= 1");
  if (reconstruction.n_boot < 1) throw ConfigError("reconstruction.n_boot: must be >= 1");
  if (reconstruction.n_i < 1) throw ConfigError("reconstruction.n_i: must be >= 1 for heralding");
  if (reconstruction.response_n_max < 1 || reconstruction.response_n_max > detector_s.photon_cap) {
    throw ConfigError("reconstruction.response_n_max: must lie in 1..detector_s.photon_cap");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

std::string serialize(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "source:\n"
    << "  r: " << num(c.source.r) << "  # squeezing parameter, dimensionless\n"
    << "  eta_s: " << num(c.source.eta_s) << "  # signal coupling efficiency, probability\n"
    << "  eta_i: " << num(c.source.eta_i) << "  # idler coupling efficiency, probability\n"
    << "  splitter_t: " << num(c.source.splitter_t)
    << "  # displacement splitter transmission; 1 when amplitudes are referred to the detector input\n";
  o << "overlaps: " << list(c.overlaps) << "  # mode overlap M with the reference, one series each\n";
  emit_detector(o, "detector_s", c.detector_s);
  emit_detector(o, "detector_i", c.detector_i);
  o << "cross_mode_afterpulse: " << (c.cross_mode_afterpulse ? "true" : "false")
    << "  # last signal slot can afterpulse into the first idler slot\n"
    << "n_max: " << c.n_max << "  # Fock ladder, photons\n"
    << "shots: " << c.shots << "  # shots per displaced-state record\n"
    << "seed: " << c.seed << "  # master seed\n"
    << "amps: " << list(c.amps) << "  # signal displacements |alpha|, sqrt(photons), ascending\n"
    << "pn_amps: " << list(c.pn_amps) << "  # subset of amps shown as photon-number tables\n"
    << "probe_grid:\n"
    << "  n_s: " << c.probe_grid.n_s << "  # signal probe amplitudes\n"
    << "  max_s: " << num(c.probe_grid.max_s) << "  # largest signal probe amplitude, sqrt(photons)\n"
    << "  n_i: " << c.probe_grid.n_i << "  # idler probe amplitudes\n"
    << "  max_i: " << num(c.probe_grid.max_i) << "  # largest idler probe amplitude, sqrt(photons)\n"
    << "  shots: " << c.probe_grid.shots << "  # shots per probe and mode\n"
    << "reconstruction:\n"
    << "  n_patterns: " << c.reconstruction.n_patterns << "  # patterns per bootstrap fit\n"
    << "  n_boot: " << c.reconstruction.n_boot << "  # bootstrap replicas\n"
    << "  n_i: " << c.reconstruction.n_i << "  # idler ladder, photons\n"
    << "  selection: " << selection_name(c.reconstruction.selection) << "  # uniform | frequency_weighted\n"
    << "  weighting: " << weighting_name(c.reconstruction.weighting) << "  # none | poisson (shot-noise row weights)\n"
    << "  response_n_max: " << c.reconstruction.response_n_max << "  # detector response ladder, photons\n"
    << "  model_cross_mode: " << (c.reconstruction.model_cross_mode ? "true" : "false")
    << "  # include cross-mode afterpulsing in the state fit\n"
    << "output_dir: \"" << c.output_dir << "\"\n";
  return o.str();
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  Reader r(root, "");
  r.sub("source", [&](Reader& s) {
    s.get("r", c.source.r);
    s.get("eta_s", c.source.eta_s);
    s.get("eta_i", c.source.eta_i);
    s.get("splitter_t", c.source.splitter_t);
  });
  r.get("overlaps", c.overlaps);
  r.sub("detector_s", [&](Reader& d) { read_detector(d, c.detector_s); });
  r.sub("detector_i", [&](Reader& d) { read_detector(d, c.detector_i); });
  r.get("cross_mode_afterpulse", c.cross_mode_afterpulse);
  r.get("n_max", c.n_max);
  r.get("shots", c.shots);
  r.get("seed", c.seed);
  r.get("amps", c.amps);
  r.get("pn_amps", c.pn_amps);
  r.sub("probe_grid", [&](Reader& g) {
    g.get("n_s", c.probe_grid.n_s);
    g.get("max_s", c.probe_grid.max_s);
    g.get("n_i", c.probe_grid.n_i);
    g.get("max_i", c.probe_grid.max_i);
    g.get("shots", c.probe_grid.shots);
  });
  r.sub("reconstruction", [&](Reader& g) {
    g.get("n_patterns", c.reconstruction.n_patterns);
    g.get("n_boot", c.reconstruction.n_boot);
    g.get("n_i", c.reconstruction.n_i);
    std::string sel = selection_name(c.reconstruction.selection);
    g.get("selection", sel);
    if (sel == "uniform") {
      c.reconstruction.selection = PatternSelection::uniform;
    } else if (sel == "frequency_weighted") {
      c.reconstruction.selection = PatternSelection::frequency_weighted;
    } else {
      throw ConfigError("reconstruction.selection: expected uniform or frequency_weighted");
    }
    std::string wt = weighting_name(c.reconstruction.weighting);
    g.get("weighting", wt);
    if (wt == "none") {
      c.reconstruction.weighting = PatternWeighting::none;
    } else if (wt == "poisson") {
      c.reconstruction.weighting = PatternWeighting::poisson;
    } else {
      throw ConfigError("reconstruction.weighting: expected none or poisson");
    }
    g.get("response_n_max", c.reconstruction.response_n_max);
    g.get("model_cross_mode", c.reconstruction.model_cross_mode);
  });
  r.get("output_dir", c.output_dir);
  r.finish();
  // Unsigned fields accept "-1" in yaml-cpp by wrapping; catch that explicitly.
  for (const char* key : {"shots", "seed"}) {
    if (root[key] && root[key].as<std::string>().starts_with("-")) throw ConfigError(std::string(key) + ": must be >= 0");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace wigprobe

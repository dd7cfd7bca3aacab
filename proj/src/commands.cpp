#include "wigprobe/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "wigprobe/calib.hpp"
#include "wigprobe/errors.hpp"
#include "wigprobe/io.hpp"
#include "wigprobe/pipeline.hpp"
#include "wigprobe/rng.hpp"

namespace wigprobe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Stream numbers under the master seed; states use kStateSeries + overlap index.
constexpr std::uint64_t kReferenceSeries = 1;
constexpr std::uint64_t kSourceSeries = 2;
constexpr std::uint64_t kStateSeries = 10;

std::string idx2(std::size_t k) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02zu", k);
  return buf;
}

std::string probe_name(std::size_t k) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "probes/probe_%03zu.csv", k);
  return buf;
}

std::string reference_stem(std::size_t k) { return "reference/a" + idx2(k); }
std::string state_stem(std::size_t series, std::size_t k) { return "states/m" + std::to_string(series) + "_a" + idx2(k); }

json detector_json(const DetectorParams& d) {
  return {{"bins_per_mode", d.bins_per_mode}, {"apds", d.apds},         {"split_weights", d.split_weights},
          {"eta_d", d.eta_d},                 {"dark", d.dark},         {"p_ap", d.p_ap},
          {"ap_horizon", d.ap_horizon},       {"photon_cap", d.photon_cap}};
}

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  void operator()(const std::string& line) {
    if (!out_) return;
    std::lock_guard lock(mutex_);
    *out_ << line << '\n';
  }

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

// Collects relative path -> hash for a manifest.
class Writer {
 public:
  explicit Writer(fs::path root) : root_(std::move(root)) {}

  void put(const std::string& rel, const std::string& text) {
    write_text(root_ / rel, text);
    std::lock_guard lock(mutex_);
    hashes_[rel] = sha256_hex(text);
  }

  json manifest() const {
    json files = json::object();
    for (const auto& [k, v] : hashes_) files[k] = v;
    return files;
  }

 private:
  fs::path root_;
  std::mutex mutex_;
  std::map<std::string, std::string> hashes_;
};

// JSON sidecar: shots, seed and detector parameters; bin 0 is the least significant bit.
void put_record(Writer& w, const ExperimentConfig& cfg, const std::string& stem, const ClickRecord& rec,
                std::uint64_t seed, json meta) {
  meta["shots"] = rec.shots;
  meta["seed"] = seed;
  meta["distinct_patterns"] = rec.counts.size();
  meta["bit_order"] = "bin b of the signal is bit b, bin b of the idler is bit b + signal bins";
  meta["detector_s"] = detector_json(cfg.detector_s);
  meta["detector_i"] = detector_json(cfg.detector_i);
  meta["cross_mode_afterpulse"] = cfg.cross_mode_afterpulse;
  w.put(stem + ".csv", record_to_csv(rec));
  w.put(stem + ".json", meta.dump(2) + "\n");
}

ClickRecord load_record(const fs::path& data, const std::string& stem) {
  const fs::path path = data / (stem + ".csv");
  if (!fs::exists(path)) {
    throw DataError("missing stage input " + path.string() + " (run simulate first)");
  }
  return record_from_csv(read_text(path), path.string());
}

ProbeSet load_probes(const fs::path& data, const ExperimentConfig& cfg) {
  const fs::path lib_path = data / "library.json";
  if (!fs::exists(lib_path)) throw DataError("missing stage input " + lib_path.string() + " (run simulate first)");
  json lib;
  try {
    lib = json::parse(read_text(lib_path));
  } catch (const json::exception& e) {
    throw DataError(lib_path.string() + ": " + e.what());
  }
  ProbeSet set;
  set.tmd = cfg.tmd();
  try {
    const auto shots = lib.at("shots").get<std::uint64_t>();
    for (const auto& f : lib.at("files")) {
      const fs::path p = data / f.get<std::string>();
      set.probes.push_back(probe_from_csv(read_text(p), p.string(), set.tmd.signal.bins_per_mode,
                                          set.tmd.idler.bins_per_mode, shots));
    }
    if (lib.at("detector_s") != detector_json(cfg.detector_s) || lib.at("detector_i") != detector_json(cfg.detector_i)) {
      throw ConfigError("probe library was recorded with different detector parameters than the config");
    }
  } catch (const json::exception& e) {
    throw DataError(lib_path.string() + ": " + e.what());
  }
  try {
    set.validate();
  } catch (const ConfigError& e) {
    throw DataError(lib_path.string() + ": " + e.what());
  }
  return set;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  Logger log(opt.log);
  const fs::path root = cfg.output_dir;
  Writer data(root / "data");

  log("probes: " + std::to_string(cfg.probe_grid.n_s * cfg.probe_grid.n_i));
  const ProbeSet probes = simulate_probes(cfg);
  json files = json::array();
  std::vector<std::string> names(probes.probes.size());
  parallel_for(
      probes.probes.size(),
      [&](std::size_t k) {
        names[k] = probe_name(k);
        data.put(names[k], probe_to_csv(probes.probes[k]));
      },
      opt.threads);
  for (const auto& n : names) files.push_back(n);
  json lib = {{"shots", cfg.probe_grid.shots},
              {"probes", probes.probes.size()},
              {"detector_s", detector_json(cfg.detector_s)},
              {"detector_i", detector_json(cfg.detector_i)},
              {"cross_mode_afterpulse", cfg.cross_mode_afterpulse},
              {"files", files}};
  data.put("library.json", lib.dump(2) + "\n");

  log("reference beams and source");
  parallel_for(
      cfg.amps.size() + 1,
      [&](std::size_t k) {
        if (k == cfg.amps.size()) {
          const std::uint64_t seed = point_seed(cfg.seed, kSourceSeries, 0);
          const auto rec = simulate_state(cfg, 0.0, 0.0, seed);
          put_record(data, cfg, "pdc", rec, seed, {{"kind", "undisplaced source"}});
          return;
        }
        const std::uint64_t seed = point_seed(cfg.seed, kReferenceSeries, k);
        const auto rec = simulate_reference(cfg, cfg.amps[k], seed);
        put_record(data, cfg, reference_stem(k), rec, seed, {{"kind", "reference"}, {"amp", cfg.amps[k]}});
      },
      opt.threads);

  log("displaced states");
  const std::size_t na = cfg.amps.size();
  parallel_for(
      cfg.overlaps.size() * na,
      [&](std::size_t job) {
        const std::size_t s = job / na;
        const std::size_t k = job % na;
        const std::uint64_t seed = point_seed(cfg.seed, kStateSeries + s, k);
        const auto rec = simulate_state(cfg, cfg.overlaps[s], cfg.amps[k], derive_seed(seed, 0));
        put_record(data, cfg, state_stem(s, k), rec, derive_seed(seed, 0),
                   {{"kind", "displaced state"}, {"overlap", cfg.overlaps[s]}, {"amp", cfg.amps[k]}});
      },
      opt.threads);

  const std::string yaml = serialize(cfg);
  write_text(root / "config.yaml", yaml);
  json manifest = {{"command", "simulate"},
                   {"seed", cfg.seed},
                   {"config_sha256", sha256_hex(yaml)},
                   {"config", yaml},
                   {"files", data.manifest()}};
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  log("wrote " + root.string());
}

void cmd_reconstruct(const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  Logger log(opt.log);
  const fs::path root = cfg.output_dir;
  const fs::path data = root / "data";
  const Tmd tmd = cfg.tmd();
  const auto& spec = cfg.reconstruction;
  const std::size_t na = cfg.amps.size();

  log("response from probe library");
  const ProbeSet probes = load_probes(data, cfg);
  const ResponseEstimate resp = estimate_shared_response(probes, spec.response_n_max);

  log("displacement calibration");
  std::vector<double> amp_cal(na);
  std::vector<double> p0(na);
  for (std::size_t k = 0; k < na; ++k) {
    const auto rec = load_record(data, reference_stem(k));
    p0[k] = zero_click_fraction(rec, tmd, 0);
    amp_cal[k] = estimate_displacement(p0[k], probes, 0);
  }

  log("source fit");
  const SourceFit sfit = fit_source(load_record(data, "pdc"), tmd);

  // Records of every series, loaded once.
  std::vector<ClickRecord> records(cfg.overlaps.size() * na);
  parallel_for(
      records.size(), [&](std::size_t job) { records[job] = load_record(data, state_stem(job / na, job % na)); },
      opt.threads);

  log("afterpulse fit");
  std::vector<std::pair<double, double>> singles;
  for (std::size_t k = 0; k < na; ++k) singles.emplace_back(amp_cal[k] * amp_cal[k], idler_singles_rate(records[k], tmd));
  const AfterpulseFit ap = fit_afterpulse(singles);
  if (!ap.warning.empty()) log("warning: " + ap.warning);

  log("pattern tomography");
  std::vector<Reconstruction> recs(records.size());
  parallel_for(
      records.size(),
      [&](std::size_t job) {
        const std::size_t s = job / na;
        const std::size_t k = job % na;
        const std::uint64_t seed = point_seed(cfg.seed, kStateSeries + s, k);
        recs[job] = reconstruct_record(records[job], resp, spec, tmd, amp_cal[k], derive_seed(seed, 1));
      },
      opt.threads);

  Writer out(root / "results");
  std::string fig3 =
      "overlap,amp,amp_nominal,parity_reconstructed,std,parity_forward_model,parity_forward_model_afterpulse,"
      "wigner_reconstructed\n";
  std::string fig5 = fig3;
  std::string fig6 = "overlap,amp,amp_nominal,n,p_reconstructed,std,p_forward_model,p_forward_model_afterpulse\n";
  for (std::size_t s = 0; s < cfg.overlaps.size(); ++s) {
    const double m = cfg.overlaps[s];
    SourceParams fitted = cfg.source_at(m);
    fitted.r = sfit.r_hat;
    fitted.eta_s = sfit.eta_hat;
    fitted.eta_i = sfit.eta_i_hat;
    for (std::size_t k = 0; k < na; ++k) {
      const Reconstruction& rec = recs[s * na + k];
      const double a = amp_cal[k];
      const double x = ap.x(a);
      const std::string head = fmt(m) + "," + fmt(a) + "," + fmt(cfg.amps[k]) + ",";

      const auto two = parity_from_reconstruction(rec);
      const double fwd_two = forward_two_mode_parity(fitted, a, cfg.n_max);
      fig3 += head + fmt(two.value) + "," + fmt(two.std) + "," + fmt(fwd_two) + "," + fmt(fwd_two) + "," +
              fmt(wigner_point(two.value)) + "\n";

      const auto her = heralded_parity(rec, x);
      const auto h0 = forward_heralded(fitted, a, 0.0, cfg.n_max);
      const auto hx = forward_heralded(fitted, a, x, cfg.n_max);
      fig5 += head + fmt(her.value) + "," + fmt(her.std) + "," + fmt(parity(h0)) + "," + fmt(parity(hx)) + "," +
              fmt(wigner_point(her.value, WignerConvention::single_mode)) + "\n";

      if (std::find(cfg.pn_amps.begin(), cfg.pn_amps.end(), cfg.amps[k]) != cfg.pn_amps.end()) {
        const auto hd = heralded_distribution(rec, x);
        for (int n = 0; n <= hd.mean.n_max(); ++n) {
          fig6 += head + std::to_string(n) + "," + fmt(hd.mean.probs[n]) + "," + fmt(hd.std[n]) + "," + fmt(h0[n]) +
                  "," + fmt(hx[n]) + "\n";
        }
      }

      json rj = {{"overlap", m},
                 {"amp", a},
                 {"amp_nominal", cfg.amps[k]},
                 {"residual", rec.residual},
                 {"n_patterns_used", rec.n_patterns_used},
                 {"trace", rec.trace},
                 {"P", matrix_json(rec.p.probs)},
                 {"bootstrap_std", matrix_json(rec.bootstrap_std)}};
      out.put("reconstructions/m" + std::to_string(s) + "_a" + idx2(k) + ".json", rj.dump(2) + "\n");
    }
  }
  std::string fig4 = "amp,amp2,idler_singles_rate,fit_rate,x\n";
  for (std::size_t k = 0; k < na; ++k) {
    const double a2 = singles[k].first;
    fig4 += fmt(amp_cal[k]) + "," + fmt(a2) + "," + fmt(singles[k].second) + "," + fmt(ap.c + ap.s * a2) + "," +
            fmt(ap.x(amp_cal[k])) + "\n";
  }
  out.put("fig3_parity.csv", fig3);
  out.put("fig4_idler_singles.csv", fig4);
  out.put("fig5_heralded_parity.csv", fig5);
  out.put("fig6_pn.csv", fig6);

  json fits = {{"afterpulse", {{"c", ap.c}, {"s", ap.s}, {"r_squared", ap.r_squared}, {"warning", ap.warning}}},
               {"source",
                {{"r_hat", sfit.r_hat},
                 {"eta_hat", sfit.eta_hat},
                 {"eta_i_hat", sfit.eta_i_hat},
                 {"fit_residual", sfit.fit_residual},
                 {"on_boundary", sfit.on_boundary},
                 {"eta_unidentified", sfit.eta_unidentified}}},
               {"displacement", {{"amp_nominal", cfg.amps}, {"zero_click", p0}, {"amp_calibrated", amp_cal}}},
               {"response",
                {{"n_max", resp.n_max()},
                 {"ridge", resp.ridge},
                 {"smallest_sv", resp.smallest_sv},
                 {"rank", resp.rank}}}};
  out.put("fits.json", fits.dump(2) + "\n");
  json manifest = {{"command", "reconstruct"},
                   {"seed", cfg.seed},
                   {"config_sha256", sha256_hex(serialize(cfg))},
                   {"files", out.manifest()}};
  write_text(root / "results" / "manifest.json", manifest.dump(2) + "\n");
  log("wrote " + (root / "results").string());
}

}  // namespace wigprobe

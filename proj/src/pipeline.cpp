#include "wigprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "wigprobe/errors.hpp"
#include "wigprobe/rng.hpp"

namespace wigprobe {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

std::uint64_t point_seed(std::uint64_t master, std::uint64_t series, std::size_t index) {
  return derive_seed(derive_seed(master, series), index);
}

ClickRecord simulate_state(const ExperimentConfig& cfg, double overlap, double amp, std::uint64_t seed) {
  const auto p = prepare_state(cfg.source_at(overlap), amp, 0.0, cfg.n_max);
  return sample_patterns(p, cfg.tmd(), cfg.shots, seed);
}

ClickRecord simulate_reference(const ExperimentConfig& cfg, double amp, std::uint64_t seed) {
  const auto p = JointDist::product(poisson_dist(amp * amp, cfg.n_max), PhotonDist::vacuum(0));
  return sample_patterns(p, cfg.tmd(), cfg.shots, seed);
}

FitOptions fit_options(const ReconstructionSpec& spec, double amp, int response_n_max, const Tmd& tmd) {
  FitOptions opt;
  opt.n_patterns = spec.n_patterns;
  opt.n_boot = spec.n_boot;
  opt.selection = spec.selection;
  opt.weighting = spec.weighting;
  opt.n_s = std::min(recommended_ladder(amp), response_n_max);
  opt.n_i = std::min(spec.n_i, response_n_max);
  if (spec.model_cross_mode && tmd.cross_mode_afterpulse) opt.cross_mode = tmd;
  return opt;
}

Reconstruction reconstruct_record(const ClickRecord& rec, const ResponseEstimate& resp, const ReconstructionSpec& spec,
                                  const Tmd& tmd, double amp, std::uint64_t seed) {
  return fit_state(rec, resp, resp, fit_options(spec, amp, resp.n_max(), tmd), seed);
}

namespace {

// Heralded signal of every replica that has heralding weight.
std::vector<PhotonDist> heralded_replicas(const Reconstruction& rec, double x) {
  std::vector<PhotonDist> out;
  for (const auto& r : rec.replicas) {
    try {
      out.push_back(herald_signal(r, x));
    } catch (const NumericalError&) {
    }
  }
  return out;
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Estimate heralded_parity(const Reconstruction& rec, double x) {
  Estimate e;
  e.value = parity(herald_signal(rec.p, x));
  std::vector<double> v;
  for (const auto& h : heralded_replicas(rec, x)) v.push_back(parity(h));
  e.std = sample_std(v);
  return e;
}

HeraldedDist heralded_distribution(const Reconstruction& rec, double x) {
  HeraldedDist out;
  out.mean = herald_signal(rec.p, x);
  const auto reps = heralded_replicas(rec, x);
  out.std.assign(out.mean.probs.size(), 0.0);
  for (std::size_t m = 0; m < out.std.size(); ++m) {
    std::vector<double> v;
    for (const auto& h : reps) v.push_back(h.probs[m]);
    out.std[m] = sample_std(v);
  }
  return out;
}

double forward_two_mode_parity(const SourceParams& src, double amp, int n_max) {
  return joint_parity(prepare_state(src, amp, 0.0, n_max));
}

PhotonDist forward_heralded(const SourceParams& src, double amp, double x, int n_max) {
  return herald_signal(prepare_state(src, amp, 0.0, n_max), x);
}

std::vector<CurvePoint> parity_curve(const ExperimentConfig& cfg, const ResponseEstimate& resp,
                                     const std::vector<double>& amps, CurveMode mode, double overlap,
                                     const AfterpulseFit* ap, std::uint64_t series) {
  cfg.validate();
  const SourceParams src = cfg.source_at(overlap);
  src.validate();
  std::vector<CurvePoint> out(amps.size());
  parallel_for(amps.size(), [&](std::size_t k) {
    const double amp = amps[k];
    const std::uint64_t seed = point_seed(cfg.seed, series, k);
    const auto rec = simulate_state(cfg, overlap, amp, derive_seed(seed, 0));
    CurvePoint& pt = out[k];
    pt.amp = amp;
    pt.rec = reconstruct_record(rec, resp, cfg.reconstruction, cfg.tmd(), amp, derive_seed(seed, 1));
    if (mode == CurveMode::two_mode_displaced) {
      const auto e = parity_from_reconstruction(pt.rec);
      pt.parity = e.value;
      pt.std = e.std;
      pt.forward = forward_two_mode_parity(src, amp, cfg.n_max);
      pt.forward_afterpulse = pt.forward;
    } else {
      const double x = ap ? ap->x(amp) : 0.0;
      const auto e = heralded_parity(pt.rec, x);
      pt.parity = e.value;
      pt.std = e.std;
      const auto p = prepare_state(src, amp, 0.0, cfg.n_max);
      pt.forward = parity(herald_signal(p, 0.0));
      pt.forward_afterpulse = parity(herald_signal(p, x));
    }
  });
  return out;
}

ProbeSet simulate_probes(const ExperimentConfig& cfg) {
  const auto& g = cfg.probe_grid;
  return build_probe_library(probe_grid(g.n_s, g.max_s, g.n_i, g.max_i), cfg.tmd(), g.shots,
                             derive_seed(cfg.seed, 0x70726f6265ull), cfg.n_max);
}

}  // namespace wigprobe

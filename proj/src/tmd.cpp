#include "wigprobe/tmd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "wigprobe/rng.hpp"

namespace wigprobe {

namespace {

constexpr int kMaxBinsPerMode = 12;

void require_unit(double v, const char* name, bool allow_one) {
  const bool ok = allow_one ? (v >= 0.0 && v <= 1.0) : (v >= 0.0 && v < 1.0);
  if (!ok) throw ConfigError(std::string(name) + " out of range: " + std::to_string(v));
}

using Candidates = std::vector<std::pair<int, double>>;  // (bit, probability of being added)

// Calls emit(pattern, prob) for every way the candidate bits can be added to base.
template <class Emit>
void spread(Pattern base, const Candidates& cand, double mass, Emit&& emit) {
  const std::size_t k = cand.size();
  for (std::size_t sub = 0; sub < (std::size_t{1} << k); ++sub) {
    double p = mass;
    Pattern out = base;
    for (std::size_t j = 0; j < k; ++j) {
      if (sub >> j & 1u) {
        p *= cand[j].second;
        out |= Pattern{1} << cand[j].first;
      } else {
        p *= 1.0 - cand[j].second;
      }
    }
    if (p != 0.0) emit(out, p);
  }
}

// Afterpulse candidates on a line of `apds` APDs whose global slots are split
// into [0, slots_a) for the source mode and [slots_a, slots_a + slots_b) for a
// downstream mode. Bits of the downstream mode are offset by `offset_b`.
Candidates afterpulse_candidates(Pattern src, const DetectorParams& d, int slots_b, int offset_b, bool cross) {
  std::vector<double> keep(d.bins_per_mode + (cross ? slots_b * d.apds : 0), 1.0);
  const double q = d.p_ap / d.ap_horizon;
  const int slots_a = d.slots();
  for (int b = 0; b < d.bins_per_mode; ++b) {
    if (!(src >> b & 1u)) continue;
    const int apd = d.apd_of(b);
    for (int k = 1; k <= d.ap_horizon; ++k) {
      const int g = d.slot_of(b) + k;
      if (g < slots_a) {
        keep[d.bin_of(g, apd)] *= 1.0 - q;
      } else if (cross && g - slots_a < slots_b) {
        keep[d.bins_per_mode + (g - slots_a) * d.apds + apd] *= 1.0 - q;
      }
    }
  }
  Candidates cand;
  for (int b = 0; b < static_cast<int>(keep.size()); ++b) {
    if (keep[b] == 1.0) continue;
    if (b < d.bins_per_mode) {
      if (!(src >> b & 1u)) cand.emplace_back(b, 1.0 - keep[b]);
    } else {
      cand.emplace_back(offset_b + (b - d.bins_per_mode), 1.0 - keep[b]);
    }
  }
  return cand;
}

void apply_dark(std::vector<double>& v, int bins, double dark) {
  if (dark == 0.0) return;
  for (int b = 0; b < bins; ++b) {
    const Pattern bit = Pattern{1} << b;
    for (Pattern s = 0; s < v.size(); ++s) {
      if (s & bit) continue;
      const double m = v[s];
      v[s] = m * (1.0 - dark);
      v[s | bit] += m * dark;
    }
  }
}

// Adds one photon to the pattern distribution in place.
void add_photon(std::vector<double>& v, const DetectorParams& d, const std::vector<double>& w) {
  std::vector<double> next(v.size());
  for (Pattern s = 0; s < v.size(); ++s) {
    if (v[s] == 0.0) continue;
    next[s] += v[s] * (1.0 - d.eta_d);
    for (int b = 0; b < d.bins_per_mode; ++b) next[s | (Pattern{1} << b)] += v[s] * d.eta_d * w[b];
  }
  v = std::move(next);
}

}  // namespace

std::vector<double> DetectorParams::weights() const {
  if (split_weights.empty()) return std::vector<double>(bins_per_mode, 1.0 / bins_per_mode);
  return split_weights;
}

void DetectorParams::validate() const {
  if (bins_per_mode < 1 || bins_per_mode > kMaxBinsPerMode) {
    throw ConfigError("bins_per_mode must be in 1.." + std::to_string(kMaxBinsPerMode));
  }
  if (apds < 1 || bins_per_mode % apds != 0) throw ConfigError("bins_per_mode must be a multiple of apds");
  if (!split_weights.empty()) {
    if (static_cast<int>(split_weights.size()) != bins_per_mode) {
      throw ConfigError("split_weights needs one entry per bin");
    }
    double s = 0.0;
    for (double w : split_weights) {
      if (!(w >= 0.0)) throw ConfigError("split_weights entries must be >= 0");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ConfigError("split_weights must sum to 1");
  }
  require_unit(eta_d, "eta_d", true);
  require_unit(dark, "dark", false);
  require_unit(p_ap, "p_ap", false);
  if (ap_horizon < 1) throw ConfigError("ap_horizon must be >= 1");
  if (photon_cap < 0) throw ConfigError("photon_cap must be >= 0");
}

void Tmd::validate() const {
  signal.validate();
  idler.validate();
  if (cross_mode_afterpulse && signal.apds != idler.apds) {
    throw ConfigError("cross-mode afterpulsing needs the same APD count in both modes");
  }
  if (bins() > 2 * kMaxBinsPerMode) throw ConfigError("too many bins in total");
}

double PatternDist::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

PatternDist PatternDist::empty(int n_bins) {
  std::vector<double> p(std::size_t{1} << n_bins, 0.0);
  p[0] = 1.0;
  return PatternDist(std::move(p), n_bins);
}

void validate(const PatternDist& p, double tol) {
  if (p.probs.size() != (std::size_t{1} << p.bins)) throw ConfigError("pattern distribution has the wrong length");
  for (double v : p.probs) {
    if (!(v >= 0.0)) throw ConfigError("pattern distribution has a negative or NaN entry");
  }
  if (std::abs(p.total() - 1.0) > tol) throw ConfigError("pattern distribution does not sum to 1");
}

PatternDist mode_response(int n_photons, const DetectorParams& params) {
  params.validate();
  if (n_photons < 0) throw ConfigError("photon number must be >= 0");
  if (n_photons > params.photon_cap) {
    throw ConfigError("n=" + std::to_string(n_photons) + " exceeds the exact-model photon cap " +
                      std::to_string(params.photon_cap) + "; use sample_patterns for larger photon numbers");
  }
  const auto w = params.weights();
  std::vector<double> v(params.n_patterns(), 0.0);
  v[0] = 1.0;
  for (int k = 0; k < n_photons; ++k) add_photon(v, params, w);
  apply_dark(v, params.bins_per_mode, params.dark);
  return PatternDist(std::move(v), params.bins_per_mode);
}

PatternDist mode_response_inclusion_exclusion(int n_photons, const DetectorParams& params) {
  params.validate();
  if (n_photons < 0) throw ConfigError("photon number must be >= 0");
  if (n_photons > params.photon_cap) {
    throw ConfigError("n=" + std::to_string(n_photons) + " exceeds the exact-model photon cap " +
                      std::to_string(params.photon_cap) + "; use sample_patterns for larger photon numbers");
  }
  const int bins = params.bins_per_mode;
  const Pattern full = static_cast<Pattern>(params.n_patterns() - 1);
  const auto w = params.weights();

  // h[A] = P(clicks only inside A) = P(no click in the complement of A).
  std::vector<double> h(params.n_patterns());
  for (Pattern a = 0; a <= full; ++a) {
    const Pattern quiet = full & ~a;
    double wsum = 0.0;
    for (int b = 0; b < bins; ++b) {
      if (quiet >> b & 1u) wsum += w[b];
    }
    h[a] = std::pow(1.0 - params.eta_d * wsum, n_photons) * std::pow(1.0 - params.dark, std::popcount(quiet));
  }
  // Moebius inversion over the subset lattice.
  for (int b = 0; b < bins; ++b) {
    const Pattern bit = Pattern{1} << b;
    for (Pattern a = 0; a <= full; ++a) {
      if (a & bit) h[a] -= h[a ^ bit];
    }
  }
  return PatternDist(std::move(h), bins);
}

Eigen::MatrixXd afterpulse_transition(const DetectorParams& params) {
  params.validate();
  const std::size_t n = params.n_patterns();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Pattern s = 0; s < n; ++s) {
    const Candidates cand = afterpulse_candidates(s, params, 0, 0, false);
    spread(s, cand, 1.0, [&](Pattern d, double p) { t(s, d) += p; });
  }
  return t;
}

PatternDist apply_afterpulse(const PatternDist& p, const DetectorParams& params) {
  if (p.bins != params.bins_per_mode) throw ConfigError("pattern distribution and detector disagree on bin count");
  if (params.p_ap == 0.0) return p;
  std::vector<double> out(p.size(), 0.0);
  for (Pattern s = 0; s < p.size(); ++s) {
    if (p.probs[s] == 0.0) continue;
    spread(s, afterpulse_candidates(s, params, 0, 0, false), p.probs[s], [&](Pattern d, double q) { out[d] += q; });
  }
  return PatternDist(std::move(out), p.bins);
}

Eigen::MatrixXd response_matrix(const DetectorParams& params, int n_max, bool afterpulse) {
  params.validate();
  if (n_max > params.photon_cap) {
    throw ConfigError("n_max=" + std::to_string(n_max) + " exceeds the exact-model photon cap " +
                      std::to_string(params.photon_cap));
  }
  const auto w = params.weights();
  const Eigen::MatrixXd ap = afterpulse ? afterpulse_transition(params) : Eigen::MatrixXd();
  Eigen::MatrixXd r(params.n_patterns(), n_max + 1);
  std::vector<double> v(params.n_patterns(), 0.0);
  v[0] = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0) add_photon(v, params, w);
    std::vector<double> col = v;
    apply_dark(col, params.bins_per_mode, params.dark);
    const Eigen::Map<const Eigen::VectorXd> c(col.data(), col.size());
    if (afterpulse) {
      r.col(n) = ap.transpose() * c;
    } else {
      r.col(n) = c;
    }
  }
  return r;
}

PatternDist joint_response(const JointDist& p, const Tmd& tmd, double tail_tol) {
  tmd.validate();
  const DetectorParams& ds = tmd.signal;
  const DetectorParams& di = tmd.idler;

  const int ns = std::min(p.n_max_s(), ds.photon_cap);
  const int ni = std::min(p.n_max_i(), di.photon_cap);
  const double beyond = p.total() - p.probs.topLeftCorner(ns + 1, ni + 1).sum();
  if (beyond >= tail_tol) {
    throw ConfigError("joint distribution has mass " + std::to_string(beyond) +
                      " above the exact-model photon cap; use sample_patterns instead");
  }

  const Eigen::MatrixXd rs = response_matrix(ds, ns, false);
  const Eigen::MatrixXd ri = response_matrix(di, ni, false);
  Eigen::MatrixXd j = rs * p.probs.topLeftCorner(ns + 1, ni + 1) * ri.transpose();
  if (di.p_ap > 0.0) j = j * afterpulse_transition(di);

  const int bs = ds.bins_per_mode;
  const bool cross = tmd.cross_mode_afterpulse && ds.p_ap > 0.0;
  std::vector<double> out(std::size_t{1} << tmd.bins(), 0.0);
  for (Pattern s = 0; s < ds.n_patterns(); ++s) {
    const Candidates cand = ds.p_ap > 0.0 ? afterpulse_candidates(s, ds, di.slots(), bs, cross) : Candidates{};
    spread(s, cand, 1.0, [&](Pattern d, double q) {
      const Pattern s_out = d & static_cast<Pattern>(ds.n_patterns() - 1);
      const Pattern x = d >> bs;
      for (Pattern i = 0; i < di.n_patterns(); ++i) {
        const double v = j(s, i);
        if (v != 0.0) out[s_out | ((i | x) << bs)] += v * q;
      }
    });
  }
  return PatternDist(std::move(out), tmd.bins());
}

std::vector<std::pair<Pattern, double>> cross_mode_kernel(Pattern s, const Tmd& tmd) {
  const DetectorParams& ds = tmd.signal;
  std::vector<std::pair<Pattern, double>> out;
  if (!tmd.cross_mode_afterpulse || ds.p_ap == 0.0) {
    out.emplace_back(0, 1.0);
    return out;
  }
  const int bs = ds.bins_per_mode;
  Candidates cand;
  for (const auto& c : afterpulse_candidates(s, ds, tmd.idler.slots(), bs, true)) {
    if (c.first >= bs) cand.emplace_back(c.first - bs, c.second);
  }
  spread(0, cand, 1.0, [&](Pattern x, double q) { out.emplace_back(x, q); });
  return out;
}

PatternDist mode_marginal(const PatternDist& joint, const Tmd& tmd, int mode) {
  if (joint.bins != tmd.bins()) throw ConfigError("joint pattern distribution does not match the detector");
  const int bs = tmd.signal.bins_per_mode;
  const Pattern mask_s = static_cast<Pattern>(tmd.signal.n_patterns() - 1);
  const int bins = mode == 0 ? bs : tmd.idler.bins_per_mode;
  std::vector<double> out(std::size_t{1} << bins, 0.0);
  for (Pattern k = 0; k < joint.size(); ++k) out[mode == 0 ? (k & mask_s) : (k >> bs)] += joint.probs[k];
  return PatternDist(std::move(out), bins);
}

std::pair<PatternDist, PatternDist> product_response_marginals(const PhotonDist& s, const PhotonDist& i,
                                                               const Tmd& tmd, double tail_tol) {
  tmd.validate();
  const DetectorParams& ds = tmd.signal;
  const DetectorParams& di = tmd.idler;
  auto pre = [&](const PhotonDist& p, const DetectorParams& d) {
    const int n = std::min(p.n_max(), d.photon_cap);
    double beyond = 0.0;
    for (int k = n + 1; k <= p.n_max(); ++k) beyond += p.probs[k];
    if (beyond >= tail_tol) {
      throw ConfigError("photon distribution has mass " + std::to_string(beyond) +
                        " above the exact-model photon cap; use sample_patterns instead");
    }
    const Eigen::Map<const Eigen::VectorXd> v(p.probs.data(), n + 1);
    return Eigen::VectorXd(response_matrix(d, n, false) * v);
  };
  const Eigen::VectorXd sig_pre = pre(s, ds);
  Eigen::VectorXd idl = pre(i, di);
  if (di.p_ap > 0.0) idl = afterpulse_transition(di).transpose() * idl;

  const int bs = ds.bins_per_mode;
  std::vector<double> sig(ds.n_patterns(), 0.0);
  std::vector<double> cross(di.n_patterns(), 0.0);
  const bool with_cross = tmd.cross_mode_afterpulse && ds.p_ap > 0.0;
  for (Pattern p = 0; p < ds.n_patterns(); ++p) {
    if (sig_pre[p] == 0.0) continue;
    const Candidates cand = ds.p_ap > 0.0 ? afterpulse_candidates(p, ds, di.slots(), bs, with_cross) : Candidates{};
    spread(p, cand, sig_pre[p], [&](Pattern d, double q) {
      sig[d & static_cast<Pattern>(ds.n_patterns() - 1)] += q;
      cross[d >> bs] += q;
    });
  }
  std::vector<double> idler(di.n_patterns(), 0.0);
  for (Pattern x = 0; x < di.n_patterns(); ++x) {
    if (cross[x] == 0.0) continue;
    for (Pattern k = 0; k < di.n_patterns(); ++k) idler[k | x] += cross[x] * idl[k];
  }
  return {PatternDist(std::move(sig), bs), PatternDist(std::move(idler), di.bins_per_mode)};
}

void ClickRecord::add(Pattern p, std::uint64_t n) {
  counts[p] += n;
  shots += n;
}

void ClickRecord::merge(const ClickRecord& other) {
  for (const auto& [p, n] : other.counts) counts[p] += n;
  shots += other.shots;
}

PatternDist ClickRecord::frequencies(int bins) const {
  if (shots == 0) throw DataError("click record is empty");
  std::vector<double> f(std::size_t{1} << bins, 0.0);
  for (const auto& [p, n] : counts) {
    if (p >= f.size()) throw DataError("click pattern does not fit the detector");
    f[p] = static_cast<double>(n) / static_cast<double>(shots);
  }
  return PatternDist(std::move(f), bins);
}

ClickRecord sample_patterns(const JointDist& p, const Tmd& tmd, std::uint64_t shots, std::uint64_t seed) {
  tmd.validate();
  if (shots < 1) throw ConfigError("shots must be >= 1");
  const DetectorParams& ds = tmd.signal;
  const DetectorParams& di = tmd.idler;
  const int bs = ds.bins_per_mode;
  const int cols = static_cast<int>(p.probs.cols());

  std::vector<double> flat(p.probs.size());
  for (Eigen::Index m = 0; m < p.probs.rows(); ++m) {
    for (Eigen::Index n = 0; n < cols; ++n) flat[m * cols + n] = p.probs(m, n);
  }
  std::discrete_distribution<std::size_t> pick(flat.begin(), flat.end());

  auto cumulative = [](const DetectorParams& d) {
    auto w = d.weights();
    std::partial_sum(w.begin(), w.end(), w.begin());
    w.back() = 1.0;
    return w;
  };
  const auto cum_s = cumulative(ds);
  const auto cum_i = cumulative(di);

  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto detect = [&](long photons, const DetectorParams& d, const std::vector<double>& cum) {
    Pattern pat = 0;
    for (long k = 0; k < photons; ++k) {
      const double u = unif(rng);
      if (u < d.eta_d) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), u / d.eta_d);
        pat |= Pattern{1} << std::min<std::ptrdiff_t>(it - cum.begin(), d.bins_per_mode - 1);
      }
    }
    if (d.dark > 0.0) {
      for (int b = 0; b < d.bins_per_mode; ++b) {
        if (unif(rng) < d.dark) pat |= Pattern{1} << b;
      }
    }
    return pat;
  };

  ClickRecord rec;
  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    const std::size_t idx = pick(rng);
    const Pattern s = detect(static_cast<long>(idx / cols), ds, cum_s);
    const Pattern i = detect(static_cast<long>(idx % cols), di, cum_i);
    Pattern s_out = s;
    Pattern i_out = i;
    // Primary clicks only: afterpulses do not afterpulse.
    if (ds.p_ap > 0.0) {
      const double q = ds.p_ap / ds.ap_horizon;
      for (int b = 0; b < bs; ++b) {
        if (!(s >> b & 1u)) continue;
        for (int k = 1; k <= ds.ap_horizon; ++k) {
          const int g = ds.slot_of(b) + k;
          if (g < ds.slots()) {
            if (unif(rng) < q) s_out |= Pattern{1} << ds.bin_of(g, ds.apd_of(b));
          } else if (tmd.cross_mode_afterpulse && g - ds.slots() < di.slots()) {
            if (unif(rng) < q) i_out |= Pattern{1} << di.bin_of(g - ds.slots(), ds.apd_of(b));
          }
        }
      }
    }
    if (di.p_ap > 0.0) {
      const double q = di.p_ap / di.ap_horizon;
      for (int b = 0; b < di.bins_per_mode; ++b) {
        if (!(i >> b & 1u)) continue;
        for (int k = 1; k <= di.ap_horizon; ++k) {
          const int g = di.slot_of(b) + k;
          if (g < di.slots() && unif(rng) < q) i_out |= Pattern{1} << di.bin_of(g, di.apd_of(b));
        }
      }
    }
    rec.add(s_out | (i_out << bs));
  }
  return rec;
}

ClickRecord sample_from(const PatternDist& p, std::uint64_t shots, std::uint64_t seed) {
  if (shots < 1) throw ConfigError("shots must be >= 1");
  auto rng = make_rng(seed, 1);
  ClickRecord rec;
  std::uint64_t remaining = shots;
  double rest = p.total();
  std::size_t last = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p.probs[k] > 0.0) last = k;
  }
  for (std::size_t k = 0; k < p.size() && remaining > 0; ++k) {
    const double pk = p.probs[k];
    if (pk <= 0.0) continue;
    std::uint64_t n = remaining;
    if (k != last) {
      const double frac = std::clamp(pk / rest, 0.0, 1.0);
      std::binomial_distribution<unsigned long long> draw(remaining, frac);
      n = draw(rng);
    }
    if (n > 0) rec.add(static_cast<Pattern>(k), n);
    remaining -= n;
    rest -= pk;
  }
  return rec;
}

PhotonDist click_number_dist(const PatternDist& p) {
  std::vector<double> out(p.bins + 1, 0.0);
  for (Pattern k = 0; k < p.size(); ++k) out[std::popcount(k)] += p.probs[k];
  return PhotonDist(std::move(out));
}

std::vector<std::uint64_t> click_number_counts(const ClickRecord& rec, const Tmd& tmd, int mode) {
  const int bs = tmd.signal.bins_per_mode;
  const Pattern mask_s = static_cast<Pattern>(tmd.signal.n_patterns() - 1);
  std::vector<std::uint64_t> out((mode == 0 ? bs : tmd.idler.bins_per_mode) + 1, 0);
  for (const auto& [p, n] : rec.counts) out[std::popcount(mode == 0 ? (p & mask_s) : (p >> bs))] += n;
  return out;
}

}  // namespace wigprobe

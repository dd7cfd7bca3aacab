#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "wigprobe/fock.hpp"
#include "wigprobe/source.hpp"

namespace wigprobe {

using Pattern = std::uint32_t;

/// One mode of the time-multiplexed detector.
///
/// Bin b sits on APD `b % apds` in time slot `b / apds`. With the defaults
/// that is 2 APDs x 4 slots = 8 bins.
struct DetectorParams {
  int bins_per_mode = 8;
  int apds = 2;
  std::vector<double> split_weights;  ///< empty means uniform
  double eta_d = 0.20;
  double dark = 0.0;  ///< per-bin dark-click probability
  double p_ap = 0.07;
  int ap_horizon = 1;  ///< number of following slots an afterpulse can land in
  int photon_cap = 40;

  int slots() const { return bins_per_mode / apds; }
  int apd_of(int bin) const { return bin % apds; }
  int slot_of(int bin) const { return bin / apds; }
  int bin_of(int slot, int apd) const { return slot * apds + apd; }
  std::size_t n_patterns() const { return std::size_t{1} << bins_per_mode; }
  /// Routing weights, resolved to uniform when split_weights is empty.
  std::vector<double> weights() const;

  void validate() const;
  bool operator==(const DetectorParams&) const = default;
};

/// Both modes of the detector. The idler is delayed into the same APDs as the
/// signal and occupies the slots after it, so a click in the last signal slot
/// can afterpulse into the first idler slot.
struct Tmd {
  DetectorParams signal;
  DetectorParams idler;
  bool cross_mode_afterpulse = true;

  int bins() const { return signal.bins_per_mode + idler.bins_per_mode; }
  void validate() const;
  bool operator==(const Tmd&) const = default;
};

/// Probabilities over click bitmasks, bit b set when bin b clicked.
/// Joint patterns put the signal in the low bits: s | (i << signal bins).
struct PatternDist {
  std::vector<double> probs;
  int bins = 0;

  PatternDist() = default;
  PatternDist(std::vector<double> p, int n_bins) : probs(std::move(p)), bins(n_bins) {}

  std::size_t size() const { return probs.size(); }
  double total() const;
  static PatternDist empty(int n_bins);
};

void validate(const PatternDist& p, double tol = 1e-12);

/// Pattern distribution for exactly n photons, before afterpulsing. Each photon
/// is routed to bin b with weight w_b and detected with eta_d; each bin also
/// fires a dark click independently. Computed photon by photon over the
/// subset lattice, so every entry is a sum of nonnegative terms.
PatternDist mode_response(int n_photons, const DetectorParams& params);

/// Same distribution by Moebius inversion of the no-click probabilities
///   P(no click in S) = (1 - eta_d sum_{b in S} w_b)^n prod_{b in S} (1 - dark).
/// Loses accuracy to cancellation at large n; kept as a cross-check.
PatternDist mode_response_inclusion_exclusion(int n_photons, const DetectorParams& params);

/// Columns n = 0..n_max of pattern probabilities given n photons, afterpulsing included.
Eigen::MatrixXd response_matrix(const DetectorParams& params, int n_max, bool afterpulse = true);

/// Row-stochastic map T(src, dst) of single-mode afterpulsing: every click in
/// slot t adds, independently, a click in each of slots t+1..t+h of the same
/// APD with probability p_ap / h. Targets past the last slot are lost.
Eigen::MatrixXd afterpulse_transition(const DetectorParams& params);

PatternDist apply_afterpulse(const PatternDist& p, const DetectorParams& params);

/// Joint pattern distribution of P(m, n) through both modes, with per-mode and
/// (if enabled) cross-mode afterpulsing. Photon numbers with mass above the
/// exact-model cap raise ConfigError unless that mass is below tail_tol.
PatternDist joint_response(const JointDist& p, const Tmd& tmd, double tail_tol = kTailTol);

/// Signal (mode 0) or idler (mode 1) marginal of a joint pattern distribution.
PatternDist mode_marginal(const PatternDist& joint, const Tmd& tmd, int mode);

/// Both marginals of the joint response to a product state s x i, without
/// building the joint table. The cap check applies to each mode separately.
std::pair<PatternDist, PatternDist> product_response_marginals(const PhotonDist& s, const PhotonDist& i,
                                                               const Tmd& tmd, double tail_tol = kTailTol);

/// Idler bits added by cross-mode afterpulses when the signal mode shows
/// pattern s, as (bits, probability) pairs summing to 1. Every signal click is
/// treated as a primary click, which overcounts by O(p_ap^2).
std::vector<std::pair<Pattern, double>> cross_mode_kernel(Pattern s, const Tmd& tmd);

/// Synthetic counts over joint patterns.
struct ClickRecord {
  std::uint64_t shots = 0;
  std::map<Pattern, std::uint64_t> counts;

  void add(Pattern p, std::uint64_t n = 1);
  void merge(const ClickRecord& other);
  PatternDist frequencies(int bins) const;
};

/// Physical Monte Carlo: draws (m, n), routes and thins each photon, adds dark
/// clicks, then afterpulses in time order. Deterministic given seed. No photon cap.
ClickRecord sample_patterns(const JointDist& p, const Tmd& tmd, std::uint64_t shots, std::uint64_t seed);

/// Multinomial draw of `shots` outcomes from a pattern distribution.
ClickRecord sample_from(const PatternDist& p, std::uint64_t shots, std::uint64_t seed);

/// Number of clicked bins, k = 0..bins.
PhotonDist click_number_dist(const PatternDist& p);

/// Number of clicked bins in one mode of a joint record.
std::vector<std::uint64_t> click_number_counts(const ClickRecord& rec, const Tmd& tmd, int mode);

}  // namespace wigprobe

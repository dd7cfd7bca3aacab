#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "wigprobe/calib.hpp"
#include "wigprobe/commands.hpp"
#include "wigprobe/io.hpp"
#include "wigprobe/source.hpp"
#include "wigprobe/tmd.hpp"

namespace wigprobe {

int cmd_selftest(std::ostream& out) {
  struct Check {
    std::string name;
    std::function<bool()> run;
  };
  const DetectorParams det;
  const std::vector<Check> checks = {
      {"poisson normalised", [] { return std::abs(poisson_dist(4.0, 60).total() - 1.0) < 1e-10; }},
      {"coherent parity exp(-2a^2)",
       [] {
         const auto p = apply_displacement(PhotonDist::vacuum(60), displacement_kernel(1.3, 60));
         return std::abs(parity(p) - std::exp(-2 * 1.69)) < 1e-10;
       }},
      {"lossless squeezed vacuum has joint parity 1",
       [] { return std::abs(joint_parity(tmsv_joint(0.6, 60)) - 1.0) < 1e-9; }},
      {"detector response columns sum to 1",
       [&] {
         const auto r = response_matrix(det, 20);
         return (r.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12;
       }},
      {"subset and inclusion-exclusion responses agree",
       [&] {
         const auto a = mode_response(5, det);
         const auto b = mode_response_inclusion_exclusion(5, det);
         double d = 0.0;
         for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.probs[k] - b.probs[k]));
         return d < 1e-12;
       }},
      {"heralding a lossless pair gives one photon",
       [] {
         const auto h = herald_signal(tmsv_joint(0.4, 40), 0.0);
         return std::abs(h[1] - 1.0) < 1e-12;
       }},
      {"config round-trips through YAML",
       [] {
         ExperimentConfig c;
         c.seed = 77;
         c.amps = {0.0, 0.3, 0.9};
         c.pn_amps = {0.3};
         return parse_config(serialize(c)) == c;
       }},
      {"click record round-trips through CSV",
       [] {
         ClickRecord r;
         r.add(0x0, 10);
         r.add(0x1ff, 3);
         const auto back = record_from_csv(record_to_csv(r), "selftest");
         return back.counts == r.counts && back.shots == r.shots;
       }},
  };
  int failures = 0;
  for (const auto& c : checks) {
    bool ok = false;
    std::string why;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      why = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << c.name << why << '\n';
    failures += ok ? 0 : 1;
  }
  return failures;
}

}  // namespace wigprobe

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <sstream>

#include "wigprobe/commands.hpp"
#include "wigprobe/errors.hpp"
#include "wigprobe/io.hpp"
#include "wigprobe/pipeline.hpp"

using namespace wigprobe;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.shots = 100000;
  c.seed = 9;
  c.amps = {0.0, 1.0, 2.0};
  c.pn_amps = {0.0, 1.0, 2.0};
  c.probe_grid.shots = 100000;
  c.reconstruction.n_boot = 3;
  c.output_dir = out.string();
  return c;
}

std::map<std::string, std::string> csv_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().extension() == ".csv") out[fs::relative(e.path(), root).string()] = read_text(e.path());
  }
  return out;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), [&](std::size_t k) { hits[k]++; }, threads);
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(
                        20, [](std::size_t k) { if (k == 13) throw DataError("boom"); }, threads),
                    DataError);
  }
  parallel_for(0, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("point seeds are distinct across series and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (std::size_t k = 0; k < 50; ++k) seen.insert(point_seed(1, s, k));
  }
  CHECK(seen.size() == 1000);
  CHECK(point_seed(1, 2, 3) == point_seed(1, 2, 3));
  CHECK(point_seed(1, 2, 3) != point_seed(2, 2, 3));
}

TEST_CASE("forward heralded model reduces to Fock 1 for a lossless pair") {
  SourceParams src;
  src.eta_s = 1.0;
  src.eta_i = 1.0;
  const auto h = forward_heralded(src, 0.0, 0.0, 40);
  CHECK(h[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(parity(h) == doctest::Approx(-1.0).epsilon(1e-12));
}

// Two runs of the tiny config with different thread counts, made once.
struct TinyRuns {
  fs::path base = fs::temp_directory_path() / "wigprobe_pipeline_test";
  ExperimentConfig a = tiny_config(base / "a");
  ExperimentConfig b = tiny_config(base / "b");
  std::map<std::string, std::string> bytes_a;

  TinyRuns() {
    fs::remove_all(base);
    for (auto [cfg, threads] : {std::pair{&a, 1u}, std::pair{&b, 4u}}) {
      cmd_simulate(*cfg, {threads, nullptr});
      cmd_reconstruct(*cfg, {threads, nullptr});
      cmd_figures(cfg->output_dir);
    }
    bytes_a = csv_bytes(a.output_dir);
  }
  ~TinyRuns() { fs::remove_all(base); }

  // Private copy of run b for tests that damage files.
  ExperimentConfig scratch(const std::string& name) const {
    auto c = b;
    c.output_dir = (base / name).string();
    fs::remove_all(c.output_dir);
    fs::copy(b.output_dir, c.output_dir, fs::copy_options::recursive);
    return c;
  }
};

const TinyRuns& tiny_runs() {
  static const TinyRuns runs;
  return runs;
}

TEST_CASE("pipeline is byte-identical under a fixed seed") {
  const auto& t = tiny_runs();
  CHECK(t.bytes_a == csv_bytes(t.b.output_dir));
  CHECK(read_text(t.base / "a" / "data" / "library.json") == read_text(t.base / "b" / "data" / "library.json"));
}

TEST_CASE("pipeline output layout") {
  const auto& t = tiny_runs();
  std::size_t probes = 0;
  for (const auto& [k, v] : t.bytes_a) probes += k.starts_with("data/probes/probe_");
  CHECK(probes == 639);
  for (const char* f : {"results/fig3_parity.csv", "results/fig4_idler_singles.csv", "results/fig5_heralded_parity.csv",
                        "results/fig6_pn.csv", "figures/figures_long.csv"}) {
    CHECK(t.bytes_a.count(f) == 1);
  }
  for (const char* f : {"fig3.svg", "fig4.svg", "fig5.svg", "fig6.svg"}) {
    CHECK(read_text(t.base / "a" / "figures" / f).starts_with("<svg"));
  }
}

TEST_CASE("figure series: two overlaps in fig3, displacement x overlap panels in fig6") {
  const auto& t = tiny_runs();
  const auto table = parse_csv(t.bytes_a.at("figures/figures_long.csv"), "long", {"figure", "series", "kind"});
  std::set<std::string> fig3, fig6_panels;
  for (const auto& row : table.rows) {
    if (row[0] == "fig3" && row[5] == "data") fig3.insert(row[1]);
    if (row[0] == "fig6") fig6_panels.insert(row[1].substr(0, row[1].find(':')));
  }
  CHECK(fig3 == std::set<std::string>{"Two-mode parity: reconstructed M=0.7", "Two-mode parity: reconstructed M=0"});
  CHECK(fig6_panels.size() == 3 * 2);
}

TEST_CASE("manifest hashes every data file") {
  const auto& t = tiny_runs();
  const auto m = read_text(t.base / "a" / "manifest.json");
  CHECK(m.find(sha256_hex(t.bytes_a.at("data/pdc.csv"))) != std::string::npos);
  CHECK(m.find("\"probes/probe_638.csv\"") != std::string::npos);
}

TEST_CASE("reconstruct is idempotent") {
  const auto& t = tiny_runs();
  const auto c = t.scratch("idem");
  cmd_reconstruct(c, {2, nullptr});
  CHECK(csv_bytes(c.output_dir) == t.bytes_a);
}

TEST_CASE("corrupted probe file names the line") {
  const auto c = tiny_runs().scratch("corrupt");
  const auto p = fs::path(c.output_dir) / "data" / "probes" / "probe_010.csv";
  auto text = read_text(p);
  text.insert(text.find('\n') + 1, "0,0,0,zz,0.5\n");
  write_text(p, text);
  CHECK(error_text([&] { cmd_reconstruct(c, {1, nullptr}); }).find("probe_010.csv:2:") != std::string::npos);
}

TEST_CASE("missing stage inputs are named") {
  const auto c = tiny_runs().scratch("missing");
  fs::remove(fs::path(c.output_dir) / "data" / "pdc.csv");
  CHECK(error_text([&] { cmd_reconstruct(c, {1, nullptr}); }).find("pdc.csv") != std::string::npos);
  fs::remove_all(fs::path(c.output_dir) / "results");
  CHECK(error_text([&] { cmd_figures(c.output_dir); }).find("fig3_parity.csv") != std::string::npos);
}

TEST_CASE("empty results tables are rejected") {
  const auto dir = fs::temp_directory_path() / "wigprobe_empty_test";
  fs::remove_all(dir);
  write_text(dir / "results" / "fig3_parity.csv", "");
  CHECK_THROWS_AS(cmd_figures(dir), DataError);
  write_text(dir / "results" / "fig3_parity.csv",
             "overlap,amp,parity_reconstructed,std,parity_forward_model,parity_forward_model_afterpulse\n");
  CHECK_THROWS_AS(cmd_figures(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("selftest passes") {
  std::ostringstream out;
  CHECK(cmd_selftest(out) == 0);
  CHECK(out.str().find("FAIL") == std::string::npos);
}

TEST_CASE("simulate rejects an invalid config") {
  ExperimentConfig c;
  c.shots = 0;
  CHECK_THROWS_AS(cmd_simulate(c), ConfigError);
}

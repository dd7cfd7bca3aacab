#include <doctest.h>

#include <filesystem>

#include "generators.hpp"
#include "wigprobe/errors.hpp"
#include "wigprobe/io.hpp"

using namespace wigprobe;

namespace {

std::string data_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("click records round-trip through CSV") {
  auto g = gen::rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    ClickRecord rec;
    for (int k = gen::integer(g, 1, 40); k > 0; --k) {
      rec.add(static_cast<Pattern>(gen::integer(g, 0, 0xffff)), static_cast<std::uint64_t>(gen::integer(g, 1, 1000)));
    }
    const auto back = record_from_csv(record_to_csv(rec), "r.csv");
    CHECK(back.counts == rec.counts);
    CHECK(back.shots == rec.shots);
  }
  CHECK(record_to_csv([] {
          ClickRecord r;
          r.add(0x101, 2);
          return r;
        }()) == "pattern_hex,count\n0x101,2\n");
}

TEST_CASE("record parse errors name the file and line") {
  CHECK(data_error([] { record_from_csv("pattern,count\n0x1,2\n", "a.csv"); }).starts_with("a.csv:1:"));
  CHECK(data_error([] { record_from_csv("pattern_hex,count\n0x1,2\n0xq,3\n", "a.csv"); }).starts_with("a.csv:3:"));
  CHECK(data_error([] { record_from_csv("pattern_hex,count\n0x1,2,4\n", "a.csv"); }).starts_with("a.csv:2:"));
  CHECK(data_error([] { record_from_csv("pattern_hex,count\n0x1,2\n0x1,3\n", "a.csv"); }).starts_with("a.csv:3:"));
  CHECK(data_error([] { record_from_csv("pattern_hex,count\n0x1,-2\n", "a.csv"); }).starts_with("a.csv:2:"));
  CHECK_FALSE(data_error([] { record_from_csv("pattern_hex,count\n", "a.csv"); }).empty());
}

TEST_CASE("probes round-trip through CSV") {
  const auto lib = build_probe_library({{0.7, 1.3}}, Tmd{}, 1000, 4);
  const auto& p = lib.probes[0];
  const auto back = probe_from_csv(probe_to_csv(p), "p.csv", 8, 8, 1000);
  CHECK(back.amp_s == p.amp_s);
  CHECK(back.amp_i == p.amp_i);
  CHECK(back.freq_s == p.freq_s);
  CHECK(back.freq_i == p.freq_i);
  CHECK(data_error([] { probe_from_csv("amp_s,amp_i,mode,pattern_hex,frequency\n0,0,0,0x0,1\n0,0,2,0x0,1\n", "p.csv", 8, 8, 1); })
            .starts_with("p.csv:3:"));
  CHECK(data_error([] { probe_from_csv("amp_s,amp_i,mode,pattern_hex,frequency\n0,0,0,0x100,1\n", "p.csv", 8, 8, 1); })
            .starts_with("p.csv:2:"));
}

TEST_CASE("tables report missing columns and ragged rows") {
  CHECK(data_error([] { parse_csv("a,b\n1,2\n", "t.csv", {"c"}); }).find("'c'") != std::string::npos);
  CHECK(data_error([] { parse_csv("a,b\n1,2\n3\n", "t.csv"); }).starts_with("t.csv:3:"));
  CHECK_FALSE(data_error([] { parse_csv("", "t.csv"); }).empty());
  const auto t = parse_csv("a,b\n1,2.5\n", "t.csv", {"b"});
  CHECK(t.number(0, "b") == 2.5);
}

TEST_CASE("write_text creates directories and replaces files") {
  const auto dir = std::filesystem::temp_directory_path() / "wigprobe_io_test";
  std::filesystem::remove_all(dir);
  write_text(dir / "x" / "y.txt", "one");
  write_text(dir / "x" / "y.txt", "two");
  CHECK(read_text(dir / "x" / "y.txt") == "two");
  CHECK(std::filesystem::directory_iterator(dir / "x") != std::filesystem::directory_iterator());
  CHECK_FALSE(std::filesystem::exists(dir / "x" / "y.txt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("fmt round-trips doubles") {
  auto g = gen::rng(2);
  for (int k = 0; k < 1000; ++k) {
    const double v = gen::uniform(g, -1e3, 1e3) * std::pow(10.0, gen::integer(g, -20, 20));
    CHECK(std::stod(fmt(v)) == v);
  }
}

#include "wigprobe/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "wigprobe/errors.hpp"

namespace wigprobe {

namespace {

std::string where(const std::string& name, std::size_t line) { return name + ":" + std::to_string(line) + ": "; }

double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError(ctx + "not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_hex(const std::string& s, const std::string& ctx) {
  std::uint64_t v = 0;
  const char* b = s.data();
  if (s.starts_with("0x")) b += 2;
  const auto res = std::from_chars(b, s.data() + s.size(), v, 16);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || b == s.data() + s.size()) {
    throw DataError(ctx + "not a hex pattern: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& ctx) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError(ctx + "not a count: '" + s + "'");
  return v;
}

std::string hex(Pattern p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", static_cast<unsigned>(p));
  return buf;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 digest failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", md[k]);
    out += buf;
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string record_to_csv(const ClickRecord& rec) {
  std::string out = "pattern_hex,count\n";
  for (const auto& [p, n] : rec.counts) out += hex(p) + "," + std::to_string(n) + "\n";
  return out;
}

ClickRecord record_from_csv(const std::string& text, const std::string& name) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "pattern_hex,count") {
    throw DataError(where(name, 1) + "expected header 'pattern_hex,count'");
  }
  ClickRecord rec;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto ctx = where(name, k + 1);
    const auto f = split_csv_line(lines[k]);
    if (f.size() != 2) throw DataError(ctx + "expected 2 fields, found " + std::to_string(f.size()));
    const auto p = parse_hex(f[0], ctx);
    if (p > 0xffffffffull) throw DataError(ctx + "pattern does not fit 32 bits");
    if (rec.counts.count(static_cast<Pattern>(p))) throw DataError(ctx + "duplicate pattern " + f[0]);
    rec.add(static_cast<Pattern>(p), parse_count(f[1], ctx));
  }
  if (rec.shots == 0) throw DataError(name + ": record has no counts");
  return rec;
}

std::string probe_to_csv(const Probe& probe) {
  std::string out = "amp_s,amp_i,mode,pattern_hex,frequency\n";
  const std::string head = fmt(probe.amp_s) + "," + fmt(probe.amp_i) + ",";
  for (int mode = 0; mode < 2; ++mode) {
    const auto& f = mode == 0 ? probe.freq_s : probe.freq_i;
    for (std::size_t p = 0; p < f.size(); ++p) {
      if (f[p] == 0.0) continue;
      out += head + std::to_string(mode) + "," + hex(static_cast<Pattern>(p)) + "," + fmt(f[p]) + "\n";
    }
  }
  return out;
}

Probe probe_from_csv(const std::string& text, const std::string& name, int bins_s, int bins_i, std::uint64_t shots) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "amp_s,amp_i,mode,pattern_hex,frequency") {
    throw DataError(where(name, 1) + "expected header 'amp_s,amp_i,mode,pattern_hex,frequency'");
  }
  Probe probe;
  probe.shots = shots;
  probe.freq_s.assign(std::size_t{1} << bins_s, 0.0);
  probe.freq_i.assign(std::size_t{1} << bins_i, 0.0);
  bool first = true;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto ctx = where(name, k + 1);
    const auto f = split_csv_line(lines[k]);
    if (f.size() != 5) throw DataError(ctx + "expected 5 fields, found " + std::to_string(f.size()));
    const double as = parse_double(f[0], ctx);
    const double ai = parse_double(f[1], ctx);
    if (first) {
      probe.amp_s = as;
      probe.amp_i = ai;
      first = false;
    } else if (as != probe.amp_s || ai != probe.amp_i) {
      throw DataError(ctx + "amplitudes differ from the first row");
    }
    const auto mode = parse_count(f[2], ctx);
    if (mode > 1) throw DataError(ctx + "mode must be 0 or 1");
    auto& freq = mode == 0 ? probe.freq_s : probe.freq_i;
    const auto p = parse_hex(f[3], ctx);
    if (p >= freq.size()) throw DataError(ctx + "pattern " + f[3] + " does not fit the detector");
    const double v = parse_double(f[4], ctx);
    if (!(v >= 0.0 && v <= 1.0)) throw DataError(ctx + "frequency outside [0, 1]");
    freq[p] = v;
  }
  if (first) throw DataError(name + ": probe file has no rows");
  return probe;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_double(rows.at(row).at(column(name)), where(source, row + 2));
}

CsvTable parse_csv(const std::string& text, const std::string& name, const std::vector<std::string>& required) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0].empty()) throw DataError(name + ": empty table");
  CsvTable t;
  t.source = name;
  t.header = split_csv_line(lines[0]);
  for (const auto& col : required) t.column(col);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    auto f = split_csv_line(lines[k]);
    if (f.size() != t.header.size()) {
      throw DataError(where(name, k + 1) + "expected " + std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(f.size()));
    }
    t.rows.push_back(std::move(f));
  }
  return t;
}

}  // namespace wigprobe

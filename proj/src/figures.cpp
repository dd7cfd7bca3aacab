#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "wigprobe/commands.hpp"
#include "wigprobe/errors.hpp"
#include "wigprobe/io.hpp"

namespace wigprobe {

namespace fs = std::filesystem;

namespace {

struct Series {
  std::string name;
  std::string kind;  // "data": points with error bars, "bar": bars with error bars, "model": a line
  std::vector<double> x, y, err;
};

struct Panel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
};

const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Draws one panel into a w x h box at (ox, oy).
std::string draw_panel(const Panel& p, double ox, double oy, double w, double h) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double e = s.err.empty() ? 0.0 : s.err[k];
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k] - e);
      y1 = std::max(y1, s.y[k] + e);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double l = ox + 60, r = ox + w - 10, t = oy + 30, b = oy + h - 45;
  auto sx = [&](double x) { return l + (x - x0) / (x1 - x0) * (r - l); };
  auto sy = [&](double y) { return b - (y - y0) / (y1 - y0) * (b - t); };

  std::string out;
  out += "<rect x=\"" + num(l) + "\" y=\"" + num(t) + "\" width=\"" + num(r - l) + "\" height=\"" + num(b - t) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<text x=\"" + num((l + r) / 2) + "\" y=\"" + num(oy + 18) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         escape(p.title) + "</text>\n";
  out += "<text x=\"" + num((l + r) / 2) + "\" y=\"" + num(oy + h - 8) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         escape(p.xlabel) + "</text>\n";
  out += "<text x=\"" + num(ox + 14) + "\" y=\"" + num((t + b) / 2) + "\" text-anchor=\"middle\" font-size=\"12\" " +
         "transform=\"rotate(-90 " + num(ox + 14) + " " + num((t + b) / 2) + ")\">" + escape(p.ylabel) + "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    out += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(b + 15) + "\" text-anchor=\"middle\" font-size=\"10\">" +
           num(xv) + "</text>\n";
    out += "<text x=\"" + num(l - 4) + "\" y=\"" + num(sy(yv) + 3) + "\" text-anchor=\"end\" font-size=\"10\">" +
           num(yv) + "</text>\n";
  }
  if (y0 < 0 && y1 > 0) {
    out += "<line x1=\"" + num(l) + "\" y1=\"" + num(sy(0)) + "\" x2=\"" + num(r) + "\" y2=\"" + num(sy(0)) +
           "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
  }

  for (std::size_t si = 0; si < p.series.size(); ++si) {
    const auto& s = p.series[si];
    const char* col = kColours[si % std::size(kColours)];
    if (s.kind == "model") {
      std::string pts;
      for (std::size_t k = 0; k < s.x.size(); ++k) pts += num(sx(s.x[k])) + "," + num(sy(s.y[k])) + " ";
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.5\"/>\n";
    } else {
      for (std::size_t k = 0; k < s.x.size() && s.kind == "bar"; ++k) {
        const double half = 0.35 * (r - l) / std::max(1.0, x1 - x0);
        const double top = std::min(sy(s.y[k]), sy(0.0));
        out += "<rect x=\"" + num(sx(s.x[k]) - half) + "\" y=\"" + num(top) + "\" width=\"" + num(2 * half) +
               "\" height=\"" + num(std::abs(sy(s.y[k]) - sy(0.0))) + "\" fill=\"" + col + "\" fill-opacity=\"0.35\"/>\n";
      }
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        const double e = s.err.empty() ? 0.0 : s.err[k];
        if (e > 0) {
          out += "<line x1=\"" + num(sx(s.x[k])) + "\" y1=\"" + num(sy(s.y[k] - e)) + "\" x2=\"" + num(sx(s.x[k])) +
                 "\" y2=\"" + num(sy(s.y[k] + e)) + "\" stroke=\"" + col + "\"/>\n";
        }
        out += "<circle cx=\"" + num(sx(s.x[k])) + "\" cy=\"" + num(sy(s.y[k])) + "\" r=\"3\" fill=\"" + col +
               "\"/>\n";
      }
    }
    const double ly = t + 14 + 14 * static_cast<double>(si);
    out += "<text x=\"" + num(r - 6) + "\" y=\"" + num(ly) + "\" text-anchor=\"end\" font-size=\"10\" fill=\"" + col +
           "\">" + escape(s.name) + "</text>\n";
  }
  return out;
}

std::string svg(const std::vector<Panel>& panels, int cols) {
  const double w = 420, h = 300;
  const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w * cols) + "\" height=\"" +
                    num(h * rows) + "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    out += draw_panel(panels[k], w * static_cast<double>(k % cols), h * static_cast<double>(k / cols), w, h);
  }
  return out + "</svg>\n";
}

CsvTable load_table(const fs::path& path, const std::vector<std::string>& required) {
  if (!fs::exists(path)) throw DataError("missing results table " + path.string() + " (run reconstruct first)");
  auto t = parse_csv(read_text(path), path.string(), required);
  if (t.rows.empty()) throw DataError(path.string() + ": table has no rows");
  return t;
}

// Groups row indices by the value of one column, in order of first appearance.
std::vector<std::pair<double, std::vector<std::size_t>>> group_by(const CsvTable& t, const std::string& col) {
  std::vector<std::pair<double, std::vector<std::size_t>>> out;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double v = t.number(k, col);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == v; });
    if (it == out.end()) out.push_back({v, {k}});
    else it->second.push_back(k);
  }
  return out;
}

Series column_series(const CsvTable& t, const std::vector<std::size_t>& rows, const std::string& name,
                     const std::string& kind, const std::string& xc, const std::string& yc,
                     const std::string& ec = "") {
  Series s{name, kind, {}, {}, {}};
  for (auto k : rows) {
    s.x.push_back(t.number(k, xc));
    s.y.push_back(t.number(k, yc));
    if (!ec.empty()) s.err.push_back(t.number(k, ec));
  }
  return s;
}

void append_long(std::string& out, const std::string& figure, const Panel& p) {
  for (const auto& s : p.series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      out += figure + "," + p.title + ": " + s.name + "," + fmt(s.x[k]) + "," + fmt(s.y[k]) + "," +
             (s.err.empty() ? std::string() : fmt(s.err[k])) + "," + s.kind + "\n";
    }
  }
}

std::string overlap_label(double m) { return "M=" + num(m); }

std::vector<Panel> parity_panels(const CsvTable& t, const std::string& title, bool afterpulse_model) {
  std::vector<Panel> panels;
  Panel p{title, "displacement amplitude", "parity", {}};
  for (const auto& [m, rows] : group_by(t, "overlap")) {
    p.series.push_back(column_series(t, rows, "reconstructed " + overlap_label(m), "data", "amp",
                                     "parity_reconstructed", "std"));
    p.series.push_back(column_series(t, rows, "model " + overlap_label(m), "model", "amp", "parity_forward_model"));
    if (afterpulse_model) {
      p.series.push_back(column_series(t, rows, "model + afterpulse " + overlap_label(m), "model", "amp",
                                       "parity_forward_model_afterpulse"));
    }
  }
  panels.push_back(std::move(p));
  return panels;
}

}  // namespace

void cmd_figures(const fs::path& out_dir) {
  const fs::path res = out_dir / "results";
  const fs::path figs = out_dir / "figures";
  const std::vector<std::string> parity_cols = {"overlap", "amp", "parity_reconstructed", "std", "parity_forward_model",
                                                "parity_forward_model_afterpulse"};
  std::string longcsv = "figure,series,x,y,err,kind\n";

  const auto t3 = load_table(res / "fig3_parity.csv", parity_cols);
  const auto p3 = parity_panels(t3, "Two-mode parity", false);
  append_long(longcsv, "fig3", p3[0]);
  write_text(figs / "fig3.svg", svg(p3, 1));

  const auto t4 = load_table(res / "fig4_idler_singles.csv", {"amp2", "idler_singles_rate", "fit_rate"});
  std::vector<std::size_t> all4(t4.rows.size());
  for (std::size_t k = 0; k < all4.size(); ++k) all4[k] = k;
  Panel p4{"Idler singles", "amp^2", "singles rate per shot", {}};
  p4.series.push_back(column_series(t4, all4, "measured", "data", "amp2", "idler_singles_rate"));
  p4.series.push_back(column_series(t4, all4, "linear fit", "model", "amp2", "fit_rate"));
  append_long(longcsv, "fig4", p4);
  write_text(figs / "fig4.svg", svg({p4}, 1));

  const auto t5 = load_table(res / "fig5_heralded_parity.csv", parity_cols);
  const auto p5 = parity_panels(t5, "Heralded signal parity", true);
  append_long(longcsv, "fig5", p5[0]);
  write_text(figs / "fig5.svg", svg(p5, 1));

  // One row per displacement, one column per overlap.
  const auto t6 =
      load_table(res / "fig6_pn.csv", {"overlap", "amp_nominal", "n", "p_reconstructed", "std", "p_forward_model",
                                       "p_forward_model_afterpulse"});
  std::vector<Panel> p6;
  const auto by_amp = group_by(t6, "amp_nominal");
  const auto overlaps = group_by(t6, "overlap");
  for (const auto& [a, arows] : by_amp) {
    for (const auto& [m, mrows] : overlaps) {
      std::vector<std::size_t> rows;
      for (auto k : arows) {
        if (std::find(mrows.begin(), mrows.end(), k) != mrows.end()) rows.push_back(k);
      }
      Panel p{"a=" + num(a) + " " + overlap_label(m), "n", "P(n)", {}};
      p.series.push_back(column_series(t6, rows, "reconstructed", "bar", "n", "p_reconstructed", "std"));
      p.series.push_back(column_series(t6, rows, "model", "model", "n", "p_forward_model"));
      p.series.push_back(column_series(t6, rows, "model + afterpulse", "model", "n", "p_forward_model_afterpulse"));
      append_long(longcsv, "fig6", p);
      p6.push_back(std::move(p));
    }
  }
  write_text(figs / "fig6.svg", svg(p6, std::max<int>(1, static_cast<int>(overlaps.size()))));
  write_text(figs / "figures_long.csv", longcsv);
}

}  // namespace wigprobe

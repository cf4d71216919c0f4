#pragma once

// Plot exports. Every image is an SVG drawn from a data table that is written next to it as CSV,
// so outputs can be compared through the table.

#include "depo/trainer/analysis.hpp"
#include "depo/trainer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace depo::cli {

using trainer::format_double;
using trainer::Matrix;
using trainer::Vector;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
      out << '\n';
    }
    return out.str();
  }
};

/// Mean and population standard deviation of success rate and return across seed logs.
/// Logs must share the env-step sequence.
inline Table curve_table(const std::vector<trainer::MetricsLog>& logs) {
  if (logs.empty()) throw PreconditionError("no metrics files given");
  const auto& ref = logs.front().rows;
  for (const auto& l : logs) {
    if (l.rows.size() != ref.size()) throw FormatError("metrics files have different row counts");
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (l.rows[i].env_steps != ref[i].env_steps) throw FormatError("metrics files disagree on env steps");
  }
  Table t{{"env_steps", "success_mean", "success_std", "return_mean", "return_std", "seeds"}, {}};
  const double n = static_cast<double>(logs.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double ms = 0, mr = 0;
    for (const auto& l : logs) {
      ms += l.rows[i].success_rate;
      mr += l.rows[i].mean_return;
    }
    ms /= n;
    mr /= n;
    double vs = 0, vr = 0;
    for (const auto& l : logs) {
      vs += (l.rows[i].success_rate - ms) * (l.rows[i].success_rate - ms);
      vr += (l.rows[i].mean_return - mr) * (l.rows[i].mean_return - mr);
    }
    t.rows.push_back({static_cast<double>(ref[i].env_steps), ms, std::sqrt(vs / n), mr, std::sqrt(vr / n), n});
  }
  return t;
}

/// Argmax successor per grid cell with its legality and path classification.
inline Table heatmap_table(const envs::GridWorld& gw, const Matrix& planner_table) {
  const auto m = trainer::planner_map(gw, planner_table);
  Table t{{"state", "x", "y", "argmax", "argmax_x", "argmax_y", "legal", "on_path", "goal"}, {}};
  for (int s = 0; s < gw.n_states(); ++s) {
    const auto c = gw.cell(s);
    const int n = m.argmax[static_cast<std::size_t>(s)];
    const auto d = gw.cell(n);
    t.rows.push_back({double(s), double(c.x), double(c.y), double(n), double(d.x), double(d.y),
                      m.legal[static_cast<std::size_t>(s)] ? 1.0 : 0.0, m.on_path[static_cast<std::size_t>(s)] ? 1.0 : 0.0,
                      s == gw.goal() ? 1.0 : 0.0});
  }
  return t;
}

/// Imagined planner rollout next to the real trajectory from the same start.
inline Table rollout_table(const decoupled::ContinuousDecoupledPolicy& policy, const envs::PointMass& env, const Vector& s0, int n) {
  const auto imagined = trainer::multi_step_rollout(policy, s0, n);
  const auto real = trainer::policy_rollout(policy, env, s0, n);
  Table t{{"step", "imagined_x", "imagined_y", "real_x", "real_y", "error"}, {}};
  for (int i = 0; i <= n; ++i) {
    const auto& a = imagined[static_cast<std::size_t>(i)];
    const auto& b = real[static_cast<std::size_t>(i)];
    t.rows.push_back({double(i), a(0), a(1), b(0), b(1), (a - b).norm()});
  }
  return t;
}

// ---- SVG ---------------------------------------------------------------------------------------

namespace svg {

inline constexpr double kW = 480, kH = 360, kPad = 48;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) +
         " " + num(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& color, double width = 1.5) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) + "\" stroke=\"" + color +
         "\" stroke-width=\"" + num(width) + "\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"" + anchor +
         "\">" + s + "</text>\n";
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kPad + (x - x0) / (x1 - x0 > 0 ? x1 - x0 : 1.0) * (kW - 2 * kPad); }
  double py(double y) const { return kH - kPad - (y - y0) / (y1 - y0 > 0 ? y1 - y0 : 1.0) * (kH - 2 * kPad); }
  std::string axes(const std::string& xlabel, const std::string& ylabel) const {
    std::string s = line(kPad, kH - kPad, kW - kPad, kH - kPad, "black", 1) + line(kPad, kPad, kPad, kH - kPad, "black", 1);
    s += text(kW / 2, kH - 12, xlabel) + text(14, kH / 2, ylabel);
    s += text(kPad, kH - kPad + 16, num(x0)) + text(kW - kPad, kH - kPad + 16, num(x1));
    s += text(kPad - 4, kH - kPad, num(y0), "end") + text(kPad - 4, kPad + 4, num(y1), "end");
    return s;
  }
};

}  // namespace svg

/// Success-rate curve with a shaded mean +- std band.
inline std::string curve_svg(const Table& t) {
  if (t.rows.empty()) throw PreconditionError("curve table is empty");
  svg::Frame f{t.rows.front()[0], t.rows.back()[0], 0.0, 1.0};
  std::string s = svg::open(svg::kW, svg::kH) + f.axes("env steps", "success");
  std::string band, mean;
  for (const auto& r : t.rows) band += svg::num(f.px(r[0])) + "," + svg::num(f.py(std::min(1.0, r[1] + r[2]))) + " ";
  for (auto it = t.rows.rbegin(); it != t.rows.rend(); ++it)
    band += svg::num(f.px((*it)[0])) + "," + svg::num(f.py(std::max(0.0, (*it)[1] - (*it)[2]))) + " ";
  for (const auto& r : t.rows) mean += svg::num(f.px(r[0])) + "," + svg::num(f.py(r[1])) + " ";
  s += "<polygon points=\"" + band + "\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  s += "<polyline points=\"" + mean + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  return s + "</svg>\n";
}

/// Grid of cells with an arrow from each cell to its argmax successor. Illegal arrows are red.
inline std::string heatmap_svg(const Table& t, int width, int height) {
  const double cs = 56, pad = 16;
  std::string s = svg::open(2 * pad + cs * width, 2 * pad + cs * height);
  auto cx = [&](double x) { return pad + cs * (x + 0.5); };
  auto cy = [&](double y) { return pad + cs * (height - y - 0.5); };
  for (const auto& r : t.rows) {
    const std::string fill = r[8] > 0 ? "#ffe08a" : "#ffffff";
    s += "<rect x=\"" + svg::num(pad + cs * r[1]) + "\" y=\"" + svg::num(pad + cs * (height - 1 - r[2])) + "\" width=\"" +
         svg::num(cs) + "\" height=\"" + svg::num(cs) + "\" fill=\"" + fill + "\" stroke=\"#999\"/>\n";
  }
  for (const auto& r : t.rows) {
    if (r[8] > 0) continue;
    const std::string color = r[6] > 0 ? "black" : "#d62728";
    const double x1 = cx(r[1]), y1 = cy(r[2]);
    if (r[3] == r[0]) {
      s += "<circle cx=\"" + svg::num(x1) + "\" cy=\"" + svg::num(y1) + "\" r=\"6\" fill=\"none\" stroke=\"" + color + "\"/>\n";
      continue;
    }
    const double x2 = x1 + 0.8 * (cx(r[4]) - x1), y2 = y1 + 0.8 * (cy(r[5]) - y1);
    s += svg::line(x1, y1, x2, y2, color, 2);
    s += "<circle cx=\"" + svg::num(x2) + "\" cy=\"" + svg::num(y2) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
  }
  return s + "</svg>\n";
}

/// Imagined and real position traces.
inline std::string rollout_svg(const Table& t) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& r : t.rows)
    for (int c : {1, 3}) {
      x0 = std::min(x0, r[c]);
      x1 = std::max(x1, r[c]);
      y0 = std::min(y0, r[c + 1]);
      y1 = std::max(y1, r[c + 1]);
    }
  svg::Frame f{x0, x1, y0, y1};
  std::string s = svg::open(svg::kW, svg::kH) + f.axes("x", "y");
  for (auto [col, color, dash] : {std::tuple{1, "#1f77b4", "6,4"}, std::tuple{3, "#2ca02c", "none"}}) {
    std::string pts;
    for (const auto& r : t.rows) pts += svg::num(f.px(r[col])) + "," + svg::num(f.py(r[col + 1])) + " ";
    s += std::string("<polyline points=\"") + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" stroke-dasharray=\"" +
         dash + "\"/>\n";
  }
  s += svg::text(svg::kW - svg::kPad, 20, "dashed: imagined, solid: real", "end");
  return s + "</svg>\n";
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << content;
}

}  // namespace depo::cli

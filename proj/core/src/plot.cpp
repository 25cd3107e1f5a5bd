#include "pgg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "pgg/error.hpp"

namespace pgg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

AxisRange padded_range(double min, double max) {
  if (min > max) std::swap(min, max);
  double pad = 0.05 * (max - min);
  if (pad == 0.0) pad = std::max(0.05 * std::abs(min), 0.05);
  return {min - pad, max + pad};
}

std::string gamma_color(std::size_t index, std::size_t count) {
  const double t = count > 1 ? static_cast<double>(index) / static_cast<double>(count - 1) : 0.0;
  const int r = static_cast<int>(std::lround(31 + t * (44 - 31)));
  const int g = static_cast<int>(std::lround(119 + t * (160 - 119)));
  const int b = static_cast<int>(std::lround(180 + t * (44 - 180)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string render_svg(const std::vector<EvalCell>& cells, const std::string& title) {
  if (cells.empty()) throw Error("plot: no data");
  std::map<double, std::vector<const EvalCell*>> series;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& c : cells) {
    series[c.gamma].push_back(&c);
    xmin = std::min(xmin, static_cast<double>(c.step));
    xmax = std::max(xmax, static_cast<double>(c.step));
    ymin = std::min(ymin, c.mean - c.ci95);
    ymax = std::max(ymax, c.mean + c.ci95);
  }
  const AxisRange xr = padded_range(xmin, xmax);
  const AxisRange yr = padded_range(ymin, ymax);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" data-x-lo=\"" +
       label(xr.lo) + "\" data-x-hi=\"" + label(xr.hi) + "\" data-y-lo=\"" + label(yr.lo) +
       "\" data-y-hi=\"" + label(yr.hi) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(title) + "</text>\n";
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" +
       num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    s += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kTop + ph + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + label(std::round(xv)) + "</text>\n";
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(yv)) +
         "\" y2=\"" + num(py(yv)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(yv) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + label(yv) + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 10) +
       "\" text-anchor=\"middle\" font-size=\"12\">training step</text>\n";
  s += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\" "
       "transform=\"rotate(-90 16 " + num(kTop + ph / 2) + ")\">episodic return</text>\n";

  std::size_t k = 0;
  for (auto& [gamma, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->step < b->step; });
    const std::string color = gamma_color(k, series.size());
    std::string band, line;
    for (auto* c : pts) band += num(px(c->step)) + "," + num(py(c->mean + c->ci95)) + " ";
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
      band += num(px((*it)->step)) + "," + num(py((*it)->mean - (*it)->ci95)) + " ";
    }
    for (auto* c : pts) line += num(px(c->step)) + "," + num(py(c->mean)) + " ";
    band.pop_back();
    line.pop_back();
    s += "<g class=\"series\" data-gamma=\"" + label(gamma) + "\">\n";
    s += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    if (pts.size() > 1) {
      s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    }
    for (auto* c : pts) {
      s += "<circle cx=\"" + num(px(c->step)) + "\" cy=\"" + num(py(c->mean)) + "\" r=\"3\" fill=\"" +
           color + "\"/>\n";
    }
    s += "</g>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    s += "<line x1=\"" + num(kLeft + pw + 12) + "\" x2=\"" + num(kLeft + pw + 32) + "\" y1=\"" +
         num(ly) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(kLeft + pw + 38) + "\" y=\"" + num(ly + 4) + "\" font-size=\"11\">" +
         "\xce\xb3 = " + label(gamma) + "</text>\n";
    ++k;
  }
  const double ly = kTop + 14 + 18 * static_cast<double>(k) + 8;
  s += "<text x=\"" + num(kLeft + pw + 12) + "\" y=\"" + num(ly) +
       "\" font-size=\"10\">seed-pooled mean,</text>\n";
  s += "<text x=\"" + num(kLeft + pw + 12) + "\" y=\"" + num(ly + 13) +
       "\" font-size=\"10\">shaded \xc2\xb1 95% CI</text>\n";
  s += "</svg>\n";
  return s;
}

std::string render_table_csv(const std::vector<EvalCell>& cells) {
  if (cells.empty()) throw Error("plot: no data");
  std::set<std::int64_t> steps;
  std::map<double, std::map<std::int64_t, const EvalCell*>> rows;
  for (const auto& c : cells) {
    steps.insert(c.step);
    rows[c.gamma][c.step] = &c;
  }
  std::string out = "gamma";
  for (auto st : steps) out += "," + std::to_string(st);
  out += '\n';
  for (const auto& [gamma, byStep] : rows) {
    out += label(gamma);
    for (auto st : steps) {
      out += ',';
      auto it = byStep.find(st);
      if (it != byStep.end()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.1f \xc2\xb1 %.1f", it->second->mean, it->second->ci95);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<std::filesystem::path> plot_reports(const std::vector<std::filesystem::path>& reports,
                                                const std::filesystem::path& out_dir) {
  if (reports.empty()) throw Error("plot: no report files given");
  std::map<std::string, std::vector<EvalCell>> by_env;
  for (const auto& r : reports) {
    for (auto& c : read_report_csv(r)) by_env[c.env].push_back(std::move(c));
  }
  if (by_env.empty()) throw Error("plot: reports contain no rows");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [env, cells] : by_env) {
    const auto svg = out_dir / (env + ".svg");
    const auto table = out_dir / (env + "_table.csv");
    std::ofstream(svg) << render_svg(cells, env);
    std::ofstream(table) << render_table_csv(cells);
    written.push_back(svg);
    written.push_back(table);
  }
  return written;
}

}  // namespace pgg

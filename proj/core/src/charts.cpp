// SVG charts regenerated from steps.csv and summary.json alone. Output is a
// pure function of those two files so reruns are byte-identical.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "modelsel/harness.hpp"
#include "steps_csv.hpp"

namespace modelsel::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;
constexpr std::size_t kMaxCurvePoints = 400;

constexpr std::array<const char*, 5> kColors = {"#1f77b4", "#ff7f0e", "#7f7f7f", "#2ca02c",
                                                "#9467bd"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void widen_if_flat() {
    if (!(hi > lo)) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

class Plot {
 public:
  Plot(std::string title, std::string x_label, std::string y_label, Range x, Range y)
      : x_(x), y_(y) {
    x_.widen_if_flat();
    y_.widen_if_flat();
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
            fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\">\n";
    out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
            escape(title) + "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out_ += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y1) + "\" width=\"" + fmt(x1 - x0) +
            "\" height=\"" + fmt(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      out_ += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(y0 + 16) +
              "\" text-anchor=\"middle\" font-size=\"10\">" + fmt_tick(fx) + "</text>\n";
      out_ += "<text x=\"" + fmt(x0 - 4) + "\" y=\"" + fmt(py(fy) + 3) +
              "\" text-anchor=\"end\" font-size=\"10\">" + fmt_tick(fy) + "</text>\n";
    }
    out_ += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(kHeight - 12) +
            "\" text-anchor=\"middle\" font-size=\"12\">" + escape(x_label) + "</text>\n";
    out_ += "<text x=\"14\" y=\"" + fmt((y0 + y1) / 2) +
            "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
            fmt((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
  }

  double px(double x) const {
    return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kRight - kLeft);
  }
  /// Values beyond the range are pinned to the frame.
  double py(double y) const {
    const double c = std::clamp(y, y_.lo, y_.hi);
    return (kHeight - kBottom) - (c - y_.lo) / (y_.hi - y_.lo) * (kHeight - kBottom - kTop);
  }
  double top() const { return kTop; }

  void polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    if (pts.empty()) return;
    out_ += "<polyline fill=\"none\" stroke=\"";
    out_ += color;
    out_ += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out_ += ' ';
      out_ += fmt(px(pts[i].first)) + "," + fmt(py(pts[i].second));
    }
    out_ += "\"/>\n";
  }

  void marker(double sx, double sy, const char* color, bool hollow) {
    out_ += "<circle cx=\"" + fmt(sx) + "\" cy=\"" + fmt(sy) + "\" r=\"3\" ";
    out_ += hollow ? std::string("fill=\"none\" stroke=\"") + color + "\"" :
                     std::string("fill=\"") + color + "\"";
    out_ += "/>\n";
  }

  void legend(std::size_t row, std::string_view label, const char* color) {
    const double lx = kWidth - kRight + 10, ly = kTop + 12 + 16.0 * static_cast<double>(row);
    out_ += "<rect x=\"" + fmt(lx) + "\" y=\"" + fmt(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"";
    out_ += color;
    out_ += "\"/>\n<text x=\"" + fmt(lx + 14) + "\" y=\"" + fmt(ly) + "\" font-size=\"11\">" +
            escape(label) + "</text>\n";
  }

  void note(std::size_t row, std::string_view text) {
    out_ += "<text x=\"" + fmt(kWidth - kRight + 10) + "\" y=\"" +
            fmt(kTop + 110 + 14.0 * static_cast<double>(row)) + "\" font-size=\"10\">" +
            escape(text) + "</text>\n";
  }

  std::string finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

 private:
  Range x_, y_;
  std::string out_;
};

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

std::size_t policy_index(PolicyKind p) {
  return static_cast<std::size_t>(std::find(kAllPolicies.begin(), kAllPolicies.end(), p) -
                                  kAllPolicies.begin());
}

/// Mean cumulative reward over trials at each t, per policy. A trial that has
/// hit -inf poisons every later point for its policy; those points are dropped.
void render_reward_curve(const fs::path& dir, const std::string& title) {
  struct Acc {
    std::vector<double> sum;
    std::vector<std::size_t> count;
    std::vector<bool> poisoned;
  };
  std::array<Acc, 5> acc;
  std::map<std::pair<std::size_t, std::size_t>, double> running;  // (trial, policy) -> sum
  detail::for_each_step_row(dir / "steps.csv", [&](const detail::StepRow& r) {
    const std::size_t pi = policy_index(r.policy);
    double& run = running[{r.trial, pi}];
    run += r.reward;
    Acc& a = acc[pi];
    if (a.sum.size() <= r.t) {
      a.sum.resize(r.t + 1, 0.0);
      a.count.resize(r.t + 1, 0);
      a.poisoned.resize(r.t + 1, false);
    }
    if (std::isfinite(run)) {
      a.sum[r.t] += run;
      ++a.count[r.t];
    } else {
      a.poisoned[r.t] = true;
    }
  });

  std::array<std::vector<std::pair<double, double>>, 5> curves;
  Range x{0.0, 1.0}, y{0.0, 0.0};
  bool any = false;
  for (std::size_t pi = 0; pi < 5; ++pi) {
    const Acc& a = acc[pi];
    const std::size_t n = a.sum.size();
    if (n == 0) continue;
    const std::size_t stride = (n + kMaxCurvePoints - 1) / kMaxCurvePoints;
    for (std::size_t t = 0; t < n; ++t) {
      const bool keep = t % stride == 0 || t + 1 == n;
      if (!keep || a.poisoned[t] || a.count[t] == 0) continue;
      const double v = a.sum[t] / static_cast<double>(a.count[t]);
      curves[pi].emplace_back(static_cast<double>(t + 1), v);
      if (!any) y = {v, v};
      any = true;
      y.lo = std::min(y.lo, v);
      y.hi = std::max(y.hi, v);
      x.hi = std::max(x.hi, static_cast<double>(t + 1));
    }
  }
  Plot plot(title, "step", "mean cumulative reward", x, y);
  for (std::size_t pi = 0; pi < 5; ++pi) {
    plot.polyline(curves[pi], kColors[pi]);
    plot.legend(pi, policy_label(kAllPolicies[pi]), kColors[pi]);
  }
  write_file(dir / "reward_curve.svg", plot.finish());
}

/// One marker per (trial, policy): total cost against mean loss. Infinite
/// losses sit on the top edge as hollow markers.
void render_cost_vs_loss(const fs::path& dir, const ComparisonReport& r) {
  Range x{0.0, 0.0}, y{0.0, 0.0};
  bool any_x = false, any_y = false, any_inf = false;
  for (const auto& t : r.trials) {
    if (!any_x) x = {t.total_cost, t.total_cost};
    any_x = true;
    x.lo = std::min(x.lo, t.total_cost);
    x.hi = std::max(x.hi, t.total_cost);
    if (t.mean_loss.is_infinite()) {
      any_inf = true;
      continue;
    }
    const double l = t.mean_loss.value();
    if (!any_y) y = {l, l};
    any_y = true;
    y.lo = std::min(y.lo, l);
    y.hi = std::max(y.hi, l);
  }
  if (any_inf) y.hi += (y.hi - y.lo > 0.0 ? (y.hi - y.lo) : 1.0) * 0.1;
  Plot plot(r.label + ": cost vs loss", "total cost", "mean loss", x, y);
  for (const auto& t : r.trials) {
    const std::size_t pi = policy_index(t.policy);
    const double sy = t.mean_loss.is_infinite() ? plot.top() : plot.py(t.mean_loss.value());
    plot.marker(plot.px(t.total_cost), sy, kColors[pi], t.mean_loss.is_infinite());
  }
  for (std::size_t pi = 0; pi < 5; ++pi)
    plot.legend(pi, policy_label(kAllPolicies[pi]), kColors[pi]);
  if (any_inf) plot.note(0, "hollow: infinite loss");
  write_file(dir / "cost_vs_loss.svg", plot.finish());
}

}  // namespace

void render_charts(const fs::path& dir) {
  const ComparisonReport r =
      report_from_json(io::load_json(dir / "summary.json"), (dir / "summary.json").string());
  render_reward_curve(dir, r.label + ": cumulative reward");
  render_cost_vs_loss(dir, r);
}

}  // namespace modelsel::harness

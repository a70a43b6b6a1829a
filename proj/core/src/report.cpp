#include "cocorrect/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cocorrect/errors.hpp"

namespace cocorrect {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Picks a tick step of 1, 2 or 5 times a power of ten giving about 5 ticks.
double nice_step(double span) {
  if (span <= 0.0) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

RunInfo load_run(const fs::path& dir) {
  RunInfo run;
  run.dir = dir;
  run.name = dir.filename().string();
  run.history = read_metrics(dir / "metrics.csv");
  const fs::path cfg = dir / "config.resolved";
  if (fs::exists(cfg)) {
    std::ifstream in(cfg);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded()) {
      run.method = j.value("method", "");
      if (j.contains("noise")) {
        run.noise_model = j["noise"].value("model", "");
        run.noise_rate = j["noise"].value("rate", 0.0);
      }
    }
  }
  if (run.method.empty()) {
    const bool dual = !run.history.empty() && run.history.front().acc_test_net2.has_value();
    run.method = dual ? "cocorrecting" : "standard";
  }
  if (run.noise_model.empty()) run.noise_model = "unknown";
  return run;
}

// Test accuracy series of the network with the better final validation accuracy.
std::vector<double> report_series(const RunInfo& run) {
  const auto& last = run.history.back();
  const bool second = last.acc_val_net2 && *last.acc_val_net2 > last.acc_val_net1;
  std::vector<double> out;
  for (const auto& r : run.history) out.push_back(second && r.acc_test_net2 ? *r.acc_test_net2 : r.acc_test_net1);
  return out;
}

std::vector<double> epochs_of(const RunInfo& run) {
  std::vector<double> out;
  for (const auto& r : run.history) out.push_back(r.epoch);
  return out;
}

std::string fmt_opt(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string();
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_series(std::string name, std::vector<double> x, std::vector<double> y, bool step) {
  if (x.size() != y.size()) throw std::invalid_argument("plot series: x and y differ in length");
  series_.push_back({std::move(name), std::move(x), std::move(y), step});
}

std::string SvgPlot::render() const {
  constexpr double kW = 720;
  constexpr double kH = 440;
  constexpr double kLeft = 70;
  constexpr double kRight = 190;
  constexpr double kTop = 40;
  constexpr double kBottom = 55;
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& s : series_) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1e-3, y0 -= 1e-3;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return kTop + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kW, kH, kLeft + pw / 2, escape(title_));
  const double xs = nice_step(x1 - x0);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9; t += xs) {
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#e5e5e5\"/>"
        "<text x=\"{0:.1f}\" y=\"{3:.1f}\" text-anchor=\"middle\">{4:g}</text>\n",
        sx(t), kTop, kTop + ph, kTop + ph + 16, t);
  }
  const double ys = nice_step(y1 - y0);
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-12; t += ys) {
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#e5e5e5\"/>"
        "<text x=\"{3:.1f}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:g}</text>\n",
        kLeft, sy(t), kLeft + pw, kLeft - 6, sy(t) + 4, std::round(t / ys) * ys);
  }
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft,
                     kTop, pw, ph);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 14,
                     escape(x_label_));
  svg += fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
      kTop + ph / 2, escape(y_label_));
  for (std::size_t k = 0; k < series_.size(); ++k) {
    const auto& s = series_[k];
    const char* color = kPalette[k % kPalette.size()];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.step && i > 0) points += fmt::format("{:.1f},{:.1f} ", sx(s.x[i]), sy(s.y[i - 1]));
      points += fmt::format("{:.1f},{:.1f} ", sx(s.x[i]), sy(s.y[i]));
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n", color, points);
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"3\"/>"
        "<text x=\"{4:.1f}\" y=\"{5:.1f}\">{6}</text>\n",
        kLeft + pw + 12, ly, kLeft + pw + 32, color, kLeft + pw + 38, ly + 4, escape(s.name));
  }
  svg += "</svg>\n";
  return svg;
}

void SvgPlot::write(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << render();
}

std::vector<RunInfo> discover_runs(const fs::path& root) {
  if (!fs::exists(root)) throw LoadError("report root not found: " + root.string());
  std::vector<fs::path> dirs;
  if (fs::exists(root / "metrics.csv")) {
    dirs.push_back(root);
  } else {
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
      if (it.depth() >= 3) it.disable_recursion_pending();
      if (it->is_regular_file() && it->path().filename() == "metrics.csv") dirs.push_back(it->path().parent_path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunInfo> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  return runs;
}

int count_unlock_steps(const std::vector<MetricsRecord>& history) {
  int steps = 0;
  int prev = 0;
  for (const auto& r : history) {
    const int u = r.unlocked.value_or(0);
    if (u > prev) ++steps;
    prev = u;
  }
  return steps;
}

ReportResult render_report(const fs::path& root, const fs::path& out_dir) {
  const fs::path out = out_dir.empty() ? root / "report" : out_dir;
  fs::create_directories(out);
  ReportResult result;
  result.summary_csv = out / "summary.csv";
  result.summary_md = out / "summary.md";

  std::vector<RunInfo> runs;
  for (auto& r : discover_runs(root)) {
    if (r.history.empty()) {
      result.notes.push_back("run " + r.name + " has an empty metrics.csv and was skipped");
    } else {
      runs.push_back(std::move(r));
    }
  }
  result.runs = static_cast<int>(runs.size());

  std::ofstream csv(result.summary_csv);
  std::ofstream md(result.summary_md);
  if (!csv || !md) throw RuntimeFailure("cannot write summary files in " + out.string());
  csv << "run,method,noise,rate,epochs,final_acc,best_acc,final_acc_label,label_gain,unlock_steps\n";
  md << "# Summary\n\n";
  if (runs.empty()) {
    md << "No data: no run with metrics was found under `" << root.string() << "`.\n";
    for (const auto& n : result.notes) md << "\n- " << n << '\n';
    result.notes.emplace_back("no data");
    return result;
  }

  std::map<std::pair<std::string, double>, std::vector<const RunInfo*>> groups;
  for (const auto& r : runs) groups[{r.noise_model, r.noise_rate}].push_back(&r);

  md << "| run | method | noise | rate | epochs | final acc | best acc | final label acc |\n";
  md << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : runs) {
    const auto acc = report_series(r);
    const double final_acc = acc.back();
    const double best_acc = *std::max_element(acc.begin(), acc.end());
    const auto label0 = r.history.front().acc_label;
    const auto label1 = r.history.back().acc_label;
    std::optional<double> gain;
    if (label0 && label1) gain = *label1 - *label0;
    const int steps = count_unlock_steps(r.history);
    csv << fmt::format("{},{},{},{},{},{:.4f},{:.4f},{},{},{}\n", r.name, r.method, r.noise_model, r.noise_rate,
                       r.history.size(), final_acc, best_acc, fmt_opt(label1, 4), fmt_opt(gain, 4), steps);
    std::string label_cell = "n/a";
    if (label1) label_cell = fmt::format("{:.2f} ({:+.2f})", 100 * *label1, 100 * gain.value_or(0.0));
    md << fmt::format("| {} | {} | {} | {} | {} | {:.2f} | {:.2f} | {} |\n", r.name, r.method, r.noise_model,
                      r.noise_rate, r.history.size(), 100 * final_acc, 100 * best_acc, label_cell);
  }

  for (const auto& [key, members] : groups) {
    const std::string tag = fmt::format("{}_{}", key.first, key.second);
    const std::string title = fmt::format("{} noise {}", key.first, key.second);
    SvgPlot acc_plot("Test accuracy, " + title, "epoch", "Acc_class");
    SvgPlot label_plot("Label accuracy, " + title, "epoch", "Acc_label");
    SvgPlot unlock_plot("Unlocked labels, " + title, "epoch", "unlocked samples");
    for (const RunInfo* r : members) {
      const auto x = epochs_of(*r);
      acc_plot.add_series(r->method + " (" + r->name + ")", x, report_series(*r));
      if (r->history.front().acc_label) {
        std::vector<double> y;
        std::vector<double> u;
        for (const auto& row : r->history) {
          y.push_back(row.acc_label.value_or(0.0));
          u.push_back(row.unlocked.value_or(0));
        }
        label_plot.add_series(r->method + " (" + r->name + ")", x, y);
        unlock_plot.add_series(r->method + " (" + r->name + ")", x, u, true);
      } else {
        result.notes.push_back("run " + r->name + " has no acc_label column; its label curve is omitted");
      }
    }
    const fs::path acc_path = out / ("accuracy_" + tag + ".svg");
    acc_plot.write(acc_path);
    result.figures.push_back(acc_path);
    if (label_plot.series_count() > 0) {
      const fs::path label_path = out / ("label_accuracy_" + tag + ".svg");
      const fs::path unlock_path = out / ("unlocked_" + tag + ".svg");
      label_plot.write(label_path);
      unlock_plot.write(unlock_path);
      result.figures.push_back(label_path);
      result.figures.push_back(unlock_path);
    }
  }
  if (!result.notes.empty()) {
    md << "\n## Notes\n\n";
    for (const auto& n : result.notes) md << "- " << n << '\n';
  }
  md << "\n## Figures\n\n";
  for (const auto& f : result.figures) md << "- [" << f.filename().string() << "](" << f.filename().string() << ")\n";
  return result;
}

}  // namespace cocorrect

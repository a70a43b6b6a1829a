#include "cocorrect/metrics.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cocorrect/errors.hpp"

namespace cocorrect {

double acc_class(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("acc_class: length mismatch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double acc_label(std::span<const int> hard_labels, std::span<const int> clean_labels) {
  if (hard_labels.size() != clean_labels.size()) throw std::invalid_argument("acc_label: length mismatch");
  return acc_class(hard_labels, clean_labels);
}

namespace {

template <typename T>
std::string opt(const std::optional<T>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw LoadError("bad metrics field: '" + s + "'");
  return value;
}

template <typename T>
std::optional<T> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_number<T>(s);
}

}  // namespace

std::string format_metrics_row(const MetricsRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.epoch, r.stage, r.acc_test_net1,
                     opt(r.acc_test_net2), r.acc_val_net1, opt(r.acc_val_net2), opt(r.acc_label), r.l_c, opt(r.l_o),
                     opt(r.l_e), r.r_t, opt(r.unlocked), opt(r.dirty), r.seconds);
}

MetricsRecord parse_metrics_row(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 14) throw LoadError("metrics row has " + std::to_string(f.size()) + " fields: " + line);
  MetricsRecord r;
  r.epoch = parse_number<int>(f[0]);
  r.stage = parse_number<int>(f[1]);
  r.acc_test_net1 = parse_number<double>(f[2]);
  r.acc_test_net2 = parse_optional<double>(f[3]);
  r.acc_val_net1 = parse_number<double>(f[4]);
  r.acc_val_net2 = parse_optional<double>(f[5]);
  r.acc_label = parse_optional<double>(f[6]);
  r.l_c = parse_number<double>(f[7]);
  r.l_o = parse_optional<double>(f[8]);
  r.l_e = parse_optional<double>(f[9]);
  r.r_t = parse_number<double>(f[10]);
  r.unlocked = parse_optional<int>(f[11]);
  r.dirty = parse_optional<int>(f[12]);
  r.seconds = parse_number<double>(f[13]);
  return r;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::optional<int> keep_epochs_before) {
  std::vector<MetricsRecord> kept;
  if (keep_epochs_before && std::filesystem::exists(path)) {
    for (const auto& r : read_metrics(path)) {
      if (r.epoch < *keep_epochs_before) kept.push_back(r);
    }
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw RuntimeFailure("cannot write " + path.string());
  out_ << kMetricsHeader << '\n';
  for (const auto& r : kept) out_ << format_metrics_row(r) << '\n';
  out_.flush();
}

void MetricsWriter::append(const MetricsRecord& record) {
  out_ << format_metrics_row(record) << '\n';
  out_.flush();
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw LoadError("unexpected metrics header in " + path.string());
  std::vector<MetricsRecord> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

}  // namespace cocorrect

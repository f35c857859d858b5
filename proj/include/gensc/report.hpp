#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace gensc {

/// Metric values for one (model tag, SNR, sample). A record with an empty
/// sample id carries group-level values such as classification metrics
/// computed over a whole prediction log. A non-empty `error` marks a failed
/// sample; its values are ignored by aggregation.
struct MetricRecord {
  std::string model_tag;
  double snr_db = 0.0;
  std::string sample_id;
  std::optional<double> accuracy;
  std::optional<double> f1_macro;
  std::optional<double> recall_macro;
  std::optional<double> psnr_db;
  std::optional<double> mse;
  std::optional<double> ber;
  std::optional<double> compression_rate;      // against the feature tensor bytes
  std::optional<double> compression_rate_raw;  // against the raw ground-truth file bytes
  std::optional<double> iou;
  std::optional<double> mpa;
  std::optional<double> snr_measured_db;
  std::map<std::string, double> external_scores;
  std::string error;

  /// (name, value) pairs in canonical column order, built-ins first, then
  /// external scores by name.
  std::vector<std::pair<std::string, double>> values() const;
  void set(const std::string& name, double value);

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Built-in metric names in column order.
const std::vector<std::string>& builtin_metric_names();

struct ReportRow {
  std::string model_tag;
  double snr_db = 0.0;
  std::size_t samples = 0;   // per-sample records contributing values
  std::size_t failures = 0;  // records carrying an error
  std::vector<std::pair<std::string, double>> metrics;  // mean per metric, canonical order

  std::optional<double> metric(const std::string& name) const;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct MetricsReport {
  std::vector<ReportRow> rows;  // tags in first-appearance order, then ascending SNR
  std::vector<MetricRecord> records;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  const ReportRow* find(const std::string& model_tag, double snr_db) const;
  std::vector<std::string> model_tags() const;
  std::vector<double> snr_levels() const;
};

/// Groups records by (model tag, SNR) and averages each metric over the
/// records that carry it. Identical duplicates of (tag, SNR, sample) are
/// collapsed; differing ones raise conflict.
MetricsReport aggregate_report(const std::vector<MetricRecord>& records);

/// Union keyed by (model tag, SNR). A key present in both with different
/// rows raises conflict. Metadata comes from `a`.
MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b);

/// Shortest round-trip decimal; "inf" / "-inf" for infinities.
std::string format_number(double v);

/// Wide layout: one row per model tag; for each SNR in ascending order a
/// block of snr_<v>_<metric> columns, listing only metrics present.
std::string report_to_csv(const MetricsReport& r);

nlohmann::ordered_json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
MetricsReport load_report(const std::filesystem::path& path);

/// Writes series/<metric>.csv (model_tag,snr_db,value) under `dir` and
/// returns the files written.
std::vector<std::filesystem::path> emit_plot_data(const MetricsReport& r, const std::filesystem::path& dir);

/// Sidecar of externally computed scores:
///   { "<sample>": { "<metric>": value | { "<snr>": value } } }
class ExternalScores {
 public:
  static ExternalScores from_json(const nlohmann::json& j);
  static ExternalScores load(const std::filesystem::path& path);

  /// Scores for a sample at an SNR; SNR-specific entries take precedence.
  std::map<std::string, double> lookup(const std::string& sample_id, double snr_db) const;
  bool empty() const noexcept { return scores_.empty(); }

 private:
  struct Entry {
    std::optional<double> any_snr;
    std::map<double, double> per_snr;
  };
  std::map<std::string, std::map<std::string, Entry>> scores_;
};

}  // namespace gensc

#include "gensc/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include "gensc/error.hpp"
#include "gensc/tensor.hpp"

namespace gensc {

namespace {

using ojson = nlohmann::ordered_json;

using OptionalField = std::optional<double> MetricRecord::*;

const std::vector<std::pair<std::string, OptionalField>>& builtin_fields() {
  static const std::vector<std::pair<std::string, OptionalField>> fields = {
      {"accuracy", &MetricRecord::accuracy},
      {"f1_macro", &MetricRecord::f1_macro},
      {"recall_macro", &MetricRecord::recall_macro},
      {"psnr_db", &MetricRecord::psnr_db},
      {"mse", &MetricRecord::mse},
      {"ber", &MetricRecord::ber},
      {"compression_rate", &MetricRecord::compression_rate},
      {"compression_rate_raw", &MetricRecord::compression_rate_raw},
      {"iou", &MetricRecord::iou},
      {"mpa", &MetricRecord::mpa},
      {"snr_measured_db", &MetricRecord::snr_measured_db},
  };
  return fields;
}

std::size_t metric_rank(const std::string& name) {
  const auto& f = builtin_fields();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i].first == name) return i;
  return f.size();
}

bool metric_less(const std::string& a, const std::string& b) {
  const auto ra = metric_rank(a), rb = metric_rank(b);
  return ra != rb ? ra < rb : a < b;
}

ojson number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error(Errc::schema, "expected a number, got " + j.dump());
}

// Same values compare equal even when both are infinite.
bool same_value(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

using Key = std::pair<std::string, double>;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

const std::vector<std::string>& builtin_metric_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, field] : builtin_fields()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<std::pair<std::string, double>> MetricRecord::values() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, field] : builtin_fields())
    if (const auto& v = this->*field) out.emplace_back(name, *v);
  for (const auto& [name, v] : external_scores) out.emplace_back(name, v);
  return out;
}

void MetricRecord::set(const std::string& name, double value) {
  for (const auto& [n, field] : builtin_fields())
    if (n == name) {
      this->*field = value;
      return;
    }
  external_scores[name] = value;
}

std::optional<double> ReportRow::metric(const std::string& name) const {
  for (const auto& [n, v] : metrics)
    if (n == name) return v;
  return std::nullopt;
}

const ReportRow* MetricsReport::find(const std::string& model_tag, double snr_db) const {
  for (const auto& r : rows)
    if (r.model_tag == model_tag && r.snr_db == snr_db) return &r;
  return nullptr;
}

std::vector<std::string> MetricsReport::model_tags() const {
  std::vector<std::string> tags;
  for (const auto& r : rows)
    if (std::find(tags.begin(), tags.end(), r.model_tag) == tags.end()) tags.push_back(r.model_tag);
  return tags;
}

std::vector<double> MetricsReport::snr_levels() const {
  std::set<double> s;
  for (const auto& r : rows) s.insert(r.snr_db);
  return {s.begin(), s.end()};
}

MetricsReport aggregate_report(const std::vector<MetricRecord>& records) {
  MetricsReport report;
  std::vector<std::string> tag_order;
  std::map<std::tuple<std::string, double, std::string>, const MetricRecord*> seen;
  std::map<Key, std::vector<const MetricRecord*>> groups;

  for (const auto& rec : records) {
    if (std::isnan(rec.snr_db)) throw Error(Errc::invalid_argument, "record SNR is NaN");
    const auto key = std::make_tuple(rec.model_tag, rec.snr_db, rec.sample_id);
    if (const auto it = seen.find(key); it != seen.end()) {
      if (!(*it->second == rec))
        throw Error(Errc::conflict, "conflicting records for (" + rec.model_tag + ", " + format_number(rec.snr_db) +
                                        ", '" + rec.sample_id + "')");
      continue;
    }
    seen.emplace(key, &rec);
    report.records.push_back(rec);
    if (std::find(tag_order.begin(), tag_order.end(), rec.model_tag) == tag_order.end())
      tag_order.push_back(rec.model_tag);
    groups[{rec.model_tag, rec.snr_db}].push_back(&rec);
  }

  for (const auto& tag : tag_order) {
    for (const auto& [key, members] : groups) {
      if (key.first != tag) continue;
      ReportRow row{tag, key.second, 0, 0, {}};
      std::map<std::string, std::pair<double, std::size_t>> sums;
      for (const auto* rec : members) {
        if (!rec->error.empty()) {
          ++row.failures;
          continue;
        }
        if (!rec->sample_id.empty()) ++row.samples;
        for (const auto& [name, v] : rec->values()) {
          auto& s = sums[name];
          s.first += v;
          ++s.second;
        }
      }
      for (const auto& [name, s] : sums) row.metrics.emplace_back(name, s.first / static_cast<double>(s.second));
      std::stable_sort(row.metrics.begin(), row.metrics.end(),
                       [](const auto& a, const auto& b) { return metric_less(a.first, b.first); });
      report.rows.push_back(std::move(row));
    }
  }
  report.metadata["averaging"] = "macro";
  return report;
}

MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b) {
  MetricsReport out;
  out.metadata = a.metadata;
  std::vector<std::string> tag_order = a.model_tags();
  for (const auto& t : b.model_tags())
    if (std::find(tag_order.begin(), tag_order.end(), t) == tag_order.end()) tag_order.push_back(t);

  std::map<Key, const ReportRow*> rows;
  for (const auto& r : a.rows) rows[{r.model_tag, r.snr_db}] = &r;
  std::set<Key> from_b;
  for (const auto& r : b.rows) {
    const Key key{r.model_tag, r.snr_db};
    if (const auto it = rows.find(key); it != rows.end()) {
      const auto& other = *it->second;
      bool same = other.samples == r.samples && other.failures == r.failures && other.metrics.size() == r.metrics.size();
      for (std::size_t i = 0; same && i < r.metrics.size(); ++i)
        same = other.metrics[i].first == r.metrics[i].first && same_value(other.metrics[i].second, r.metrics[i].second);
      if (!same)
        throw Error(Errc::conflict, "reports disagree on (" + r.model_tag + ", " + format_number(r.snr_db) + ")");
      continue;
    }
    rows[key] = &r;
    from_b.insert(key);
  }
  for (const auto& tag : tag_order)
    for (const auto& [key, row] : rows)
      if (key.first == tag) out.rows.push_back(*row);

  out.records = a.records;
  for (const auto& rec : b.records)
    if (from_b.count({rec.model_tag, rec.snr_db})) out.records.push_back(rec);
  return out;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string report_to_csv(const MetricsReport& r) {
  const auto snrs = r.snr_levels();
  std::vector<std::pair<double, std::vector<std::string>>> blocks;
  for (double snr : snrs) {
    std::vector<std::string> names;
    for (const auto& row : r.rows)
      if (row.snr_db == snr)
        for (const auto& [n, v] : row.metrics)
          if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    std::stable_sort(names.begin(), names.end(), metric_less);
    blocks.emplace_back(snr, std::move(names));
  }

  std::ostringstream os;
  os << "model_tag";
  for (const auto& [snr, names] : blocks)
    for (const auto& n : names) os << ",snr_" << format_number(snr) << "_" << csv_field(n);
  os << "\n";
  for (const auto& tag : r.model_tags()) {
    os << csv_field(tag);
    for (const auto& [snr, names] : blocks) {
      const auto* row = r.find(tag, snr);
      for (const auto& n : names) {
        os << ",";
        if (row)
          if (const auto v = row->metric(n)) os << format_number(*v);
      }
    }
    os << "\n";
  }
  return os.str();
}

ojson report_to_json(const MetricsReport& r) {
  ojson j;
  j["metadata"] = r.metadata;
  j["rows"] = ojson::array();
  for (const auto& row : r.rows) {
    ojson o;
    o["model_tag"] = row.model_tag;
    o["snr_db"] = number_to_json(row.snr_db);
    o["samples"] = row.samples;
    o["failures"] = row.failures;
    ojson m = ojson::object();
    for (const auto& [n, v] : row.metrics) m[n] = number_to_json(v);
    o["metrics"] = std::move(m);
    j["rows"].push_back(std::move(o));
  }
  j["records"] = ojson::array();
  for (const auto& rec : r.records) {
    ojson o;
    o["model_tag"] = rec.model_tag;
    o["snr_db"] = number_to_json(rec.snr_db);
    o["sample_id"] = rec.sample_id;
    for (const auto& [name, field] : builtin_fields())
      if (const auto& v = rec.*field) o[name] = number_to_json(*v);
    if (!rec.external_scores.empty()) {
      ojson ext = ojson::object();
      for (const auto& [n, v] : rec.external_scores) ext[n] = number_to_json(v);
      o["external_scores"] = std::move(ext);
    }
    if (!rec.error.empty()) o["error"] = rec.error;
    j["records"].push_back(std::move(o));
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    if (j.contains("metadata")) r.metadata = ojson::parse(j.at("metadata").dump());
    for (const auto& o : j.at("rows")) {
      ReportRow row;
      row.model_tag = o.at("model_tag").get<std::string>();
      row.snr_db = number_from_json(o.at("snr_db"));
      row.samples = o.value("samples", std::size_t{0});
      row.failures = o.value("failures", std::size_t{0});
      for (const auto& [n, v] : o.at("metrics").items()) row.metrics.emplace_back(n, number_from_json(v));
      std::stable_sort(row.metrics.begin(), row.metrics.end(),
                       [](const auto& a, const auto& b) { return metric_less(a.first, b.first); });
      r.rows.push_back(std::move(row));
    }
    if (j.contains("records"))
      for (const auto& o : j.at("records")) {
        MetricRecord rec;
        rec.model_tag = o.at("model_tag").get<std::string>();
        rec.snr_db = number_from_json(o.at("snr_db"));
        rec.sample_id = o.value("sample_id", std::string{});
        for (const auto& [name, field] : builtin_fields())
          if (o.contains(name)) rec.*field = number_from_json(o.at(name));
        if (o.contains("external_scores"))
          for (const auto& [n, v] : o.at("external_scores").items()) rec.external_scores[n] = number_from_json(v);
        rec.error = o.value("error", std::string{});
        r.records.push_back(std::move(rec));
      }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("report JSON: ") + e.what());
  }
}

MetricsReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::schema, path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

std::vector<std::filesystem::path> emit_plot_data(const MetricsReport& r, const std::filesystem::path& dir) {
  if (r.rows.empty()) throw Error(Errc::empty_input, "report has no rows");
  std::vector<std::string> names;
  for (const auto& row : r.rows)
    for (const auto& [n, v] : row.metrics)
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  std::stable_sort(names.begin(), names.end(), metric_less);

  std::vector<std::filesystem::path> written;
  for (const auto& name : names) {
    std::ostringstream os;
    os << "model_tag,snr_db,value\n";
    for (const auto& row : r.rows)
      if (const auto v = row.metric(name))
        os << csv_field(row.model_tag) << "," << format_number(row.snr_db) << "," << format_number(*v) << "\n";
    const auto path = dir / "series" / (name + ".csv");
    write_text(path, os.str());
    written.push_back(path);
  }
  return written;
}

ExternalScores ExternalScores::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::schema, "external scores must be an object keyed by sample id");
  ExternalScores s;
  for (const auto& [sample, metrics] : j.items()) {
    if (!metrics.is_object()) throw Error(Errc::schema, "scores for '" + sample + "' must be an object");
    for (const auto& [metric, value] : metrics.items()) {
      auto& e = s.scores_[sample][metric];
      if (value.is_object()) {
        for (const auto& [snr, v] : value.items()) {
          double key = 0.0;
          try {
            key = snr == "inf" ? std::numeric_limits<double>::infinity() : std::stod(snr);
          } catch (const std::exception&) {
            throw Error(Errc::schema, "bad SNR key '" + snr + "' for " + sample + "/" + metric);
          }
          e.per_snr[key] = number_from_json(v);
        }
      } else {
        e.any_snr = number_from_json(value);
      }
    }
  }
  return s;
}

ExternalScores ExternalScores::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::schema, path.string() + ": " + e.what());
  }
}

std::map<std::string, double> ExternalScores::lookup(const std::string& sample_id, double snr_db) const {
  std::map<std::string, double> out;
  const auto it = scores_.find(sample_id);
  if (it == scores_.end()) return out;
  for (const auto& [metric, e] : it->second) {
    if (const auto p = e.per_snr.find(snr_db); p != e.per_snr.end())
      out[metric] = p->second;
    else if (e.any_snr)
      out[metric] = *e.any_snr;
  }
  return out;
}

}  // namespace gensc

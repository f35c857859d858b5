#include "gensc/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

#include "gensc/error.hpp"
#include "gensc/metrics.hpp"
#include "gensc/parallel.hpp"

namespace gensc {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::config_invalid, what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) invalid(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + " is missing or has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

double snr_value(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && v.get<std::string>() == "inf") return kInf;
  invalid(where + ": SNR must be a number or \"inf\"");
}

double snr_key(const std::string& s, const std::string& where) {
  if (s == "inf") return kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::schema, where + ": bad SNR key '" + s + "'");
}

ojson snr_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

std::vector<double> probabilities(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) invalid(where + "." + key + " entries must be numbers");
      out.push_back(x.get<double>());
    }
  } else {
    invalid(where + "." + key + " must be a number or a list");
  }
  return out;
}

RangeMode parse_range_mode(const std::string& s) {
  if (s == "per-tensor") return RangeMode::per_tensor;
  if (s == "fixed") return RangeMode::fixed;
  invalid("unknown quantizer range_mode '" + s + "'");
}

std::string range_mode_name(RangeMode m) { return m == RangeMode::fixed ? "fixed" : "per-tensor"; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::classical_digital: return "classical-digital";
    case Pipeline::classical_jscc: return "classical-jscc";
    case Pipeline::quantum: return "quantum";
  }
  return "?";
}

Pipeline parse_pipeline(const std::string& name) {
  if (name == "classical-digital") return Pipeline::classical_digital;
  if (name == "classical-jscc") return Pipeline::classical_jscc;
  if (name == "quantum") return Pipeline::quantum;
  invalid("unknown pipeline '" + name + "'");
}

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"dataset", "pipeline", "model_tag", "split", "channel", "quantizer", "quantum", "snr_sweep", "seed",
              "outputs", "external_scores", "predictions"});
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.dataset = get<std::string>(j, "dataset", "config");
  const auto& pipe = j.contains("pipeline") ? j.at("pipeline") : json();
  if (!pipe.is_string()) invalid("config.pipeline must name exactly one pipeline");
  c.pipeline = parse_pipeline(pipe.get<std::string>());
  c.model_tag = get_or<std::string>(j, "model_tag", to_string(c.pipeline), "config");
  if (j.contains("split")) {
    const auto s = get<std::string>(j, "split", "config");
    if (s == "train")
      c.split = Split::train;
    else if (s == "test")
      c.split = Split::test;
    else if (s != "all")
      invalid("config.split must be train, test or all");
  }

  c.channel.mode = c.pipeline == Pipeline::classical_digital ? ChannelMode::digital : ChannelMode::analog_jscc;
  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    check_keys(ch, "channel", {"constellation", "ofdm"});
    if (ch.contains("constellation")) {
      try {
        c.channel.constellation = parse_constellation(get<std::string>(ch, "constellation", "channel"));
      } catch (const Error& e) {
        invalid(e.what());
      }
    }
    if (ch.contains("ofdm") && !ch.at("ofdm").is_null()) {
      const auto& o = ch.at("ofdm");
      check_keys(o, "channel.ofdm", {"n_subcarriers", "cyclic_prefix_len"});
      OfdmConfig ofdm;
      ofdm.n_subcarriers = get_or<std::size_t>(o, "n_subcarriers", ofdm.n_subcarriers, "channel.ofdm");
      ofdm.cyclic_prefix_len = get_or<std::size_t>(o, "cyclic_prefix_len", ofdm.cyclic_prefix_len, "channel.ofdm");
      c.channel.ofdm = ofdm;
    }
  }

  if (j.contains("quantizer")) {
    const auto& q = j.at("quantizer");
    check_keys(q, "quantizer", {"bits", "range_mode", "lo", "hi"});
    c.quantizer.bits = get_or<int>(q, "bits", c.quantizer.bits, "quantizer");
    if (q.contains("range_mode")) c.quantizer.range_mode = parse_range_mode(get<std::string>(q, "range_mode", "quantizer"));
    c.quantizer.lo = get_or<double>(q, "lo", c.quantizer.lo, "quantizer");
    c.quantizer.hi = get_or<double>(q, "hi", c.quantizer.hi, "quantizer");
  }

  if (j.contains("quantum")) {
    const auto& q = j.at("quantum");
    check_keys(q, "quantum",
               {"embedding", "n_qubits", "entanglement", "theta", "p_bitflip", "p_phaseflip", "correction", "readout",
                "simulation"});
    auto& qc = c.quantum;
    if (q.contains("embedding")) qc.embedding = parse_embedding(get<std::string>(q, "embedding", "quantum"));
    qc.readout = qc.embedding == Embedding::angle ? Readout::expectation_z : Readout::amplitude_readback;
    qc.n_qubits = get_or<int>(q, "n_qubits", qc.n_qubits, "quantum");
    if (q.contains("entanglement"))
      qc.entanglement.kind = parse_entanglement(get<std::string>(q, "entanglement", "quantum"));
    qc.entanglement.theta = get_or<double>(q, "theta", qc.entanglement.theta, "quantum");
    if (q.contains("correction")) qc.correction = parse_correction(get<std::string>(q, "correction", "quantum"));
    if (q.contains("readout")) qc.readout = parse_readout(get<std::string>(q, "readout", "quantum"));
    if (q.contains("simulation"))
      qc.simulation = parse_noise_simulation(get<std::string>(q, "simulation", "quantum"));
    c.p_bitflip = probabilities(q, "p_bitflip", "quantum");
    c.p_phaseflip = probabilities(q, "p_phaseflip", "quantum");
  }

  if (j.contains("snr_sweep")) {
    const auto& s = j.at("snr_sweep");
    if (!s.is_array()) invalid("config.snr_sweep must be a list");
    for (const auto& v : s) c.snr_sweep.push_back(snr_value(v, "snr_sweep"));
  }

  if (j.contains("seed")) {
    const auto& seed = j.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      invalid("config.seed must be an unsigned integer");
    c.config_seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("outputs")) {
    check_keys(j.at("outputs"), "outputs", {"dir"});
    c.output_dir = get_or<std::string>(j.at("outputs"), "dir", "", "outputs");
  }
  if (j.contains("external_scores")) c.external_scores = get<std::string>(j, "external_scores", "config");
  if (j.contains("predictions")) c.predictions = get<std::string>(j, "predictions", "config");

  // Broadcast scalar probabilities over the sweep.
  for (auto* p : {&c.p_bitflip, &c.p_phaseflip})
    if (p->size() == 1 && c.snr_sweep.size() > 1) p->assign(c.snr_sweep.size(), p->front());
  resolve_seed(c, std::nullopt);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

void resolve_seed(ExperimentConfig& cfg, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) {
    cfg.seed.master_seed = *cli_seed;
    cfg.seed_source = "command-line";
  } else if (cfg.config_seed) {
    cfg.seed.master_seed = *cfg.config_seed;
    cfg.seed_source = "config";
  } else if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') invalid(std::string(kSeedEnvVar) + " is not an unsigned integer");
    cfg.seed.master_seed = v;
    cfg.seed_source = "environment";
  } else {
    cfg.seed.master_seed = 0;
    cfg.seed_source = "default";
  }
}

void ExperimentConfig::validate(bool check_paths) const {
  if (dataset.empty()) invalid("config.dataset is empty");
  if (snr_sweep.empty()) invalid("config.snr_sweep must not be empty");
  std::set<double> seen;
  for (double s : snr_sweep) {
    if (std::isnan(s)) invalid("snr_sweep contains NaN");
    if (!seen.insert(s).second) invalid("snr_sweep lists " + format_number(s) + " twice");
  }
  if (model_tag.empty()) invalid("config.model_tag is empty");
  try {
    switch (pipeline) {
      case Pipeline::classical_digital:
        quantizer.validate();
        channel.validate();
        break;
      case Pipeline::classical_jscc:
        channel.validate();
        break;
      case Pipeline::quantum:
        if (p_bitflip.empty() || p_phaseflip.empty())
          invalid("quantum pipeline needs explicit quantum.p_bitflip and quantum.p_phaseflip");
        if (p_bitflip.size() != snr_sweep.size() || p_phaseflip.size() != snr_sweep.size())
          invalid("quantum flip probabilities need one value or one per sweep point");
        for (std::size_t i = 0; i < snr_sweep.size(); ++i) quantum_at(i).validate();
        break;
    }
  } catch (const Error& e) {
    if (e.code() == Errc::config_invalid) throw;
    invalid(e.what());
  }
  if (!check_paths) return;
  auto must_exist = [&](const std::string& p, const char* what) {
    if (!fs::exists(resolve(p))) invalid(std::string(what) + " not found: " + resolve(p).string());
  };
  must_exist(dataset, "dataset");
  if (external_scores) must_exist(*external_scores, "external_scores");
  if (predictions) must_exist(*predictions, "predictions");
}

ChannelConfig ExperimentConfig::channel_at(std::size_t i) const {
  ChannelConfig c = channel;
  c.snr_db = snr_sweep.at(i);
  return c;
}

QuantumChannelConfig ExperimentConfig::quantum_at(std::size_t i) const {
  QuantumChannelConfig q = quantum;
  q.p_bitflip = p_bitflip.at(i);
  q.p_phaseflip = p_phaseflip.at(i);
  return q;
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["dataset"] = dataset;
  j["pipeline"] = to_string(pipeline);
  j["model_tag"] = model_tag;
  j["split"] = split ? to_string(*split) : "all";
  ojson sweep = ojson::array();
  for (double s : snr_sweep) sweep.push_back(snr_json(s));
  j["snr_sweep"] = std::move(sweep);
  j["seed"] = seed.master_seed;
  j["seed_source"] = seed_source;
  if (pipeline != Pipeline::quantum) {
    ojson ch;
    ch["mode"] = to_string(channel.mode);
    ch["constellation"] = to_string(channel.constellation);
    if (channel.ofdm)
      ch["ofdm"] = {{"n_subcarriers", channel.ofdm->n_subcarriers},
                    {"cyclic_prefix_len", channel.ofdm->cyclic_prefix_len}};
    else
      ch["ofdm"] = nullptr;
    j["channel"] = std::move(ch);
  }
  if (pipeline == Pipeline::classical_digital) {
    ojson q;
    q["bits"] = quantizer.bits;
    q["range_mode"] = range_mode_name(quantizer.range_mode);
    if (quantizer.range_mode == RangeMode::fixed) {
      q["lo"] = quantizer.lo;
      q["hi"] = quantizer.hi;
    }
    j["quantizer"] = std::move(q);
  }
  if (pipeline == Pipeline::quantum) {
    ojson q;
    q["embedding"] = to_string(quantum.embedding);
    q["n_qubits"] = quantum.n_qubits;
    q["entanglement"] = to_string(quantum.entanglement.kind);
    q["theta"] = quantum.entanglement.theta;
    q["p_bitflip"] = p_bitflip;
    q["p_phaseflip"] = p_phaseflip;
    q["correction"] = to_string(quantum.correction);
    q["readout"] = to_string(quantum.readout);
    q["simulation"] = to_string(quantum.simulation);
    j["quantum"] = std::move(q);
  }
  if (external_scores) j["external_scores"] = *external_scores;
  if (predictions) j["predictions"] = *predictions;
  return j;
}

std::string transmit_stage(Pipeline p, double snr_db) { return to_string(p) + ":" + format_number(snr_db); }

TransmitOutcome transmit_feature(const FeatureTensor& clean, const ExperimentConfig& cfg, std::size_t i,
                                 RandomStream& stream) {
  switch (cfg.pipeline) {
    case Pipeline::classical_digital: {
      auto r = digital_transmit_detailed(clean, cfg.quantizer, cfg.channel_at(i), stream);
      const double rate = compression_rate(r.original_bytes, r.blob_bytes);
      const double b = r.ber();
      return {std::move(r.output), b, rate, r.blob_bytes};
    }
    case Pipeline::classical_jscc:
      return {jscc_transmit(clean, cfg.channel_at(i), stream), std::nullopt, std::nullopt, std::nullopt};
    case Pipeline::quantum:
      return {quantum_transmit(clean, cfg.quantum_at(i), stream), std::nullopt, std::nullopt, std::nullopt};
  }
  throw Error(Errc::config_invalid, "unknown pipeline");
}

PredictionLog PredictionLog::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::schema, "prediction log must be an object");
  PredictionLog log;
  for (const auto& [key, value] : j.items()) {
    if (key != "classification" && key != "segmentation")
      throw Error(Errc::schema, "prediction log: unknown key '" + key + "'");
    if (!value.is_object()) throw Error(Errc::schema, "prediction log: '" + key + "' must be an object");
    for (const auto& [snr, entries] : value.items()) {
      const double s = snr_key(snr, "prediction log");
      if (!entries.is_object()) throw Error(Errc::schema, "prediction log: entries must be objects");
      for (const auto& [sample, v] : entries.items()) {
        if (key == "classification") {
          if (!v.is_number_unsigned()) throw Error(Errc::schema, "prediction for '" + sample + "' is not a label");
          log.classification[s][sample] = v.get<std::size_t>();
        } else {
          if (!v.is_string()) throw Error(Errc::schema, "mask prediction for '" + sample + "' is not a path");
          log.segmentation[s][sample] = v.get<std::string>();
        }
      }
    }
  }
  return log;
}

PredictionLog PredictionLog::load(const fs::path& path) {
  auto log = from_json(read_json(path));
  // Mask paths are relative to the log itself.
  for (auto& [snr, entries] : log.segmentation)
    for (auto& [sample, p] : entries) p = (path.parent_path() / p).string();
  return log;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
  cfg.validate();
  DatasetManifest manifest;
  try {
    manifest = load_manifest(cfg.resolve(cfg.dataset), false);
  } catch (const Error& e) {
    throw Error(e.code() == Errc::config_invalid ? Errc::io : e.code(), "dataset unreadable: " + std::string(e.what()));
  }
  std::optional<ExternalScores> external;
  if (cfg.external_scores) external = ExternalScores::load(cfg.resolve(*cfg.external_scores));
  std::optional<PredictionLog> predictions;
  if (cfg.predictions) predictions = PredictionLog::load(cfg.resolve(*cfg.predictions));

  std::vector<const SampleEntry*> samples;
  for (const auto& s : manifest.samples)
    if (!cfg.split || s.split == *cfg.split) samples.push_back(&s);

  const std::size_t n_sweep = cfg.snr_sweep.size();
  std::vector<MetricRecord> records(samples.size() * n_sweep);

  parallel_for(records.size(), jobs, [&](std::size_t k) {
    const auto& s = *samples[k / n_sweep];
    const std::size_t i = k % n_sweep;
    const double snr = cfg.snr_sweep[i];
    auto& rec = records[k];
    rec.model_tag = cfg.model_tag;
    rec.snr_db = snr;
    rec.sample_id = s.id;
    try {
      const auto clean = read_tensor(manifest.resolve(s.feature_path));
      auto stream = derive_stream(cfg.seed, s.id, transmit_stage(cfg.pipeline, snr));
      const auto out = transmit_feature(clean, cfg, i, stream);
      rec.mse = mse(clean, out.output);
      rec.psnr_db = psnr(clean, out.output);
      rec.snr_measured_db = empirical_snr(clean, out.output);
      rec.ber = out.ber;
      rec.compression_rate = out.compression_rate;
      if (out.compressed_bytes) {
        const auto raw = manifest.resolve(s.ground_truth_path);
        if (fs::exists(raw) && fs::file_size(raw) > 0)
          rec.compression_rate_raw = compression_rate(fs::file_size(raw), *out.compressed_bytes);
      }

      if (predictions) {
        const auto it = predictions->segmentation.find(snr);
        if (it != predictions->segmentation.end()) {
          if (const auto p = it->second.find(s.id); p != it->second.end()) {
            if (!s.segmentation_mask_path)
              throw Error(Errc::schema, "mask prediction for a sample without a ground-truth mask");
            const auto truth = read_tensor(manifest.resolve(*s.segmentation_mask_path));
            const auto pred = read_tensor(p->second);
            rec.iou = iou(truth, pred);
            rec.mpa = mpa(truth, pred, manifest.classes.size());
          }
        }
      }
      if (external) rec.external_scores = external->lookup(s.id, snr);
    } catch (const std::exception& e) {
      MetricRecord failed;
      failed.model_tag = rec.model_tag;
      failed.snr_db = rec.snr_db;
      failed.sample_id = rec.sample_id;
      failed.error = e.what();
      rec = std::move(failed);
    }
  });

  if (predictions) {
    std::map<std::string, const SampleEntry*> by_id;
    for (const auto* s : samples) by_id[s->id] = s;
    for (double snr : cfg.snr_sweep) {
      const auto it = predictions->classification.find(snr);
      if (it == predictions->classification.end()) continue;
      MetricRecord rec;
      rec.model_tag = cfg.model_tag;
      rec.snr_db = snr;
      try {
        std::vector<std::size_t> truth, pred;
        for (const auto& [id, label] : it->second) {
          const auto s = by_id.find(id);
          if (s == by_id.end()) throw Error(Errc::schema, "prediction for unknown or unselected sample '" + id + "'");
          truth.push_back(s->second->label);
          pred.push_back(label);
        }
        const auto m = classification_metrics(truth, pred, manifest.classes.size());
        rec.accuracy = m.accuracy;
        rec.f1_macro = m.f1_macro;
        rec.recall_macro = m.recall_macro;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      records.push_back(std::move(rec));
    }
  }

  auto report = aggregate_report(records);
  report.metadata["averaging_scope"] = "unweighted mean over all declared classes";
  report.metadata["seed"] = cfg.seed.master_seed;
  report.metadata["seed_source"] = cfg.seed_source;
  report.metadata["config"] = cfg.to_json();
  return report;
}

std::vector<fs::path> write_outputs(const MetricsReport& report, const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::vector<fs::path> written;
  write_text(out_dir / "report.csv", report_to_csv(report));
  written.push_back(out_dir / "report.csv");
  write_text(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  written.push_back(out_dir / "report.json");
  for (auto& p : emit_plot_data(report, out_dir)) written.push_back(std::move(p));
  write_text(out_dir / "resolved-config.json", cfg.to_json().dump(2) + "\n");
  written.push_back(out_dir / "resolved-config.json");
  return written;
}

}  // namespace gensc

#include "gensc/noisegen.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>

#include "gensc/classical.hpp"
#include "gensc/error.hpp"
#include "gensc/metrics.hpp"
#include "gensc/parallel.hpp"

namespace gensc {

namespace fs = std::filesystem;

namespace {

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

fs::path rebase(const DatasetManifest& m, const fs::path& rel, const fs::path& root) {
  const auto abs = fs::weakly_canonical(fs::absolute(m.resolve(rel)));
  return abs.lexically_relative(fs::weakly_canonical(fs::absolute(root)));
}

double mean_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

void AugmentPlan::validate() const {
  if (snr_list.empty()) throw Error(Errc::config_invalid, "augment plan has an empty SNR list");
  std::set<int> seen;
  for (int s : snr_list)
    if (!seen.insert(s).second) throw Error(Errc::config_invalid, "SNR " + std::to_string(s) + " listed twice");
  if (output_root.empty()) throw Error(Errc::config_invalid, "augment plan has no output root");
}

std::string augment_stage(int snr_db) { return "augment:" + std::to_string(snr_db); }

FeatureTensor make_noisy_feature(const FeatureTensor& clean, const std::string& sample_id, int snr_db,
                                 const SeedSpec& seed, std::optional<double> reference_power) {
  auto stream = derive_stream(seed, sample_id, augment_stage(snr_db));
  if (reference_power) return awgn_with_reference(clean, snr_db, *reference_power, stream);
  return awgn(clean, snr_db, stream);
}

double global_feature_power(const DatasetManifest& m) {
  double energy = 0.0;
  std::size_t count = 0;
  for (const auto& s : m.samples) {
    const auto t = read_tensor(m.resolve(s.feature_path));
    for (double v : t.data()) energy += v * v;
    count += t.size();
  }
  if (count == 0) throw Error(Errc::empty_input, "manifest has no features");
  return energy / static_cast<double>(count);
}

DatasetManifest augment_dataset(const DatasetManifest& m, const AugmentPlan& plan, unsigned jobs) {
  plan.validate();
  validate_manifest(m);
  const fs::path& root = plan.output_root;
  fs::create_directories(root);

  std::vector<std::string> names(m.samples.size());
  std::map<std::string, std::string> taken;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    names[i] = sanitize_id(m.samples[i].id);
    if (const auto [it, fresh] = taken.emplace(names[i], m.samples[i].id); !fresh)
      throw Error(Errc::conflict, "sample ids '" + it->second + "' and '" + m.samples[i].id +
                                      "' map to the same file name");
  }

  std::optional<double> reference;
  if (plan.normalization == NoiseReference::global_power) reference = global_feature_power(m);

  struct Task {
    std::size_t sample;
    int snr;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < m.samples.size(); ++i)
    for (int snr : plan.snr_list) tasks.push_back({i, snr});
  auto rel_path = [&](const Task& t) {
    return fs::path("noisy") / ("snr_" + std::to_string(t.snr)) / (names[t.sample] + ".gsc");
  };

  parallel_for(tasks.size(), jobs, [&](std::size_t k) {
    const auto& task = tasks[k];
    const auto& s = m.samples[task.sample];
    const auto clean = read_tensor(m.resolve(s.feature_path));
    const auto noisy = make_noisy_feature(clean, s.id, task.snr, plan.seed, reference);
    const auto bytes = encode_tensor(noisy);
    const auto path = root / rel_path(task);
    if (fs::exists(path)) {
      if (read_file_bytes(path) != bytes)
        throw Error(Errc::conflict, "refusing to overwrite differing file " + path.string());
      return;
    }
    write_file_bytes(path, bytes);
  });

  DatasetManifest out = m;
  out.base_dir = root;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    auto& s = out.samples[i];
    const auto& src = m.samples[i];
    s.ground_truth_path = rebase(m, src.ground_truth_path, root);
    s.feature_path = rebase(m, src.feature_path, root);
    if (src.segmentation_mask_path) s.segmentation_mask_path = rebase(m, *src.segmentation_mask_path, root);
    for (auto& [snr, p] : s.noisy_features) p = rebase(m, p, root);
    for (int snr : plan.snr_list) s.noisy_features[snr] = rel_path({i, snr});
  }
  for (int snr : plan.snr_list)
    out.augmentation[snr] = AugmentationRecord{plan.normalization, reference.value_or(0.0), plan.seed.master_seed};
  save_manifest(out, root / "manifest.json");
  return out;
}

double snr_tolerance_db(std::size_t n) {
  // The noise-power estimate of n Gaussian draws has relative spread
  // sqrt(2/n); three of those on the low side is the wider dB band.
  const double rel = 3.0 * std::sqrt(2.0 / static_cast<double>(n));
  if (rel >= 1.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(1.0 - rel);
}

VerificationReport verify_collection(const DatasetManifest& m, unsigned jobs) {
  VerificationReport report;
  for (const auto& s : m.samples)
    for (const auto& [snr, path] : s.noisy_features) {
      VerificationEntry e;
      e.sample_id = s.id;
      e.snr_db = snr;
      report.entries.push_back(std::move(e));
    }

  std::map<std::string, const SampleEntry*> by_id;
  for (const auto& s : m.samples) by_id[s.id] = &s;

  parallel_for(report.entries.size(), jobs, [&](std::size_t k) {
    auto& e = report.entries[k];
    const auto& s = *by_id.at(e.sample_id);
    try {
      const auto clean = read_tensor(m.resolve(s.feature_path));
      const auto noisy = read_tensor(m.resolve(s.noisy_features.at(e.snr_db)));
      e.measured_db = empirical_snr(clean, noisy);
      e.expected_db = e.snr_db;
      if (const auto it = m.augmentation.find(e.snr_db);
          it != m.augmentation.end() && it->second.reference == NoiseReference::global_power)
        e.expected_db += 10.0 * std::log10(mean_power(clean.data()) / it->second.reference_power);
      e.tolerance_db = snr_tolerance_db(clean.size());
      e.flagged = !(std::abs(e.measured_db - e.expected_db) <= e.tolerance_db);
    } catch (const std::exception& ex) {
      e.error = ex.what();
      e.flagged = true;
    }
  });

  auto& sum = report.summary;
  sum.entries = report.entries.size();
  std::map<int, std::pair<double, std::size_t>> per_snr;
  for (const auto& e : report.entries) {
    if (e.flagged) ++sum.flagged;
    if (!e.error.empty()) continue;
    const double dev = e.measured_db - e.expected_db;
    sum.max_abs_deviation_db = std::max(sum.max_abs_deviation_db, std::abs(dev));
    auto& acc = per_snr[e.snr_db];
    acc.first += dev;
    ++acc.second;
  }
  for (const auto& [snr, acc] : per_snr)
    sum.mean_deviation_db.emplace_back(snr, acc.first / static_cast<double>(acc.second));
  return report;
}

}  // namespace gensc

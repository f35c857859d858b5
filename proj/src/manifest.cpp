#include "gensc/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "gensc/error.hpp"
#include "gensc/tensor.hpp"

namespace gensc {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::string to_string(NoiseReference ref) {
  return ref == NoiseReference::per_tensor_power ? "per-tensor-power" : "global-power";
}

NoiseReference parse_noise_reference(const std::string& name) {
  if (name == "per-tensor-power") return NoiseReference::per_tensor_power;
  if (name == "global-power") return NoiseReference::global_power;
  throw Error(Errc::schema, "unknown normalization '" + name + "'");
}

const SampleEntry* DatasetManifest::find(const std::string& id) const {
  auto it = std::find_if(samples.begin(), samples.end(), [&](const SampleEntry& s) { return s.id == id; });
  return it == samples.end() ? nullptr : &*it;
}

ManifestSummary DatasetManifest::summary() const {
  ManifestSummary s;
  s.classes = classes.size();
  s.samples = samples.size();
  std::set<int> snrs;
  for (const auto& e : samples) {
    (e.split == Split::train ? s.train : s.test) += 1;
    for (const auto& [snr, _] : e.noisy_features) snrs.insert(snr);
  }
  s.snr_levels.assign(snrs.begin(), snrs.end());
  return s;
}

namespace {

void check_relative(const fs::path& p, const std::string& id, std::string_view field) {
  if (p.empty()) throw Error(Errc::schema, "sample '" + id + "': empty " + std::string(field));
  if (p.is_absolute())
    throw Error(Errc::schema, "sample '" + id + "': " + std::string(field) + " must be relative to the manifest");
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(Errc::schema, where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::schema, where + ": field '" + key + "': " + e.what());
  }
}

Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw Error(Errc::schema, where + ": split must be train or test, got '" + s + "'");
}

int parse_snr_key(const std::string& key, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || key.empty())
    throw Error(Errc::schema, where + ": noisy_features key '" + key + "' is not an integer SNR");
  return v;
}

void check_tensor_file(const DatasetManifest& m, const SampleEntry& s, const fs::path& rel) {
  const auto full = m.resolve(rel);
  if (!fs::exists(full))
    throw Error(Errc::dangling_path, "sample '" + s.id + "': missing file " + rel.generic_string());
  try {
    (void)read_tensor(full);
  } catch (const Error& e) {
    throw Error(e.code(), "sample '" + s.id + "': " + rel.generic_string() + ": " + e.what());
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& m) {
  if (m.version != kManifestVersion)
    throw Error(Errc::schema, "manifest version " + std::to_string(m.version) + " not supported");
  if (m.classes.empty()) throw Error(Errc::schema, "manifest declares no classes");
  std::set<std::string> names;
  for (const auto& c : m.classes)
    if (!names.insert(c).second) throw Error(Errc::schema, "duplicate class name '" + c + "'");
  std::set<std::string> ids;
  for (const auto& s : m.samples) {
    if (s.id.empty()) throw Error(Errc::schema, "sample with empty id");
    if (!ids.insert(s.id).second) throw Error(Errc::duplicate_id, "duplicate sample id '" + s.id + "'");
    if (s.label >= m.classes.size())
      throw Error(Errc::schema, "sample '" + s.id + "': label " + std::to_string(s.label) +
                                    " outside [0, " + std::to_string(m.classes.size() - 1) + "]");
    check_relative(s.ground_truth_path, s.id, "ground_truth_path");
    check_relative(s.feature_path, s.id, "feature_path");
    for (const auto& [snr, p] : s.noisy_features) check_relative(p, s.id, "noisy_features");
    if (s.segmentation_mask_path) check_relative(*s.segmentation_mask_path, s.id, "segmentation_mask_path");
  }
}

void check_manifest_files(const DatasetManifest& m) {
  for (const auto& s : m.samples) {
    // Ground truth is opaque (raw photographic data passes through untouched).
    if (!fs::exists(m.resolve(s.ground_truth_path)))
      throw Error(Errc::dangling_path, "sample '" + s.id + "': missing file " + s.ground_truth_path.generic_string());
    check_tensor_file(m, s, s.feature_path);
    for (const auto& [snr, p] : s.noisy_features) check_tensor_file(m, s, p);
    if (s.segmentation_mask_path) {
      check_tensor_file(m, s, *s.segmentation_mask_path);
      const auto mask = read_tensor(m.resolve(*s.segmentation_mask_path));
      if (mask.dtype() != DType::u8 || (mask.shape().size() != 2 && mask.shape().size() != 3))
        throw Error(Errc::schema, "sample '" + s.id + "': mask must be a u8 raster of rank 2 or 3");
    }
  }
}

DatasetManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::schema, "manifest must be a JSON object");
  DatasetManifest m;
  m.base_dir = base_dir;
  m.version = required<int>(j, "version", "manifest");
  m.classes = required<std::vector<std::string>>(j, "classes", "manifest");
  const auto& samples = j.contains("samples") ? j.at("samples") : throw Error(Errc::schema, "manifest: missing 'samples'");
  if (!samples.is_array()) throw Error(Errc::schema, "manifest: 'samples' must be an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& js = samples[i];
    const std::string where = "samples[" + std::to_string(i) + "]";
    if (!js.is_object()) throw Error(Errc::schema, where + " must be an object");
    SampleEntry s;
    s.id = required<std::string>(js, "id", where);
    const auto label = required<long long>(js, "label", where);
    if (label < 0) throw Error(Errc::schema, where + ": negative label");
    s.label = static_cast<std::size_t>(label);
    s.split = parse_split(required<std::string>(js, "split", where), where);
    s.ground_truth_path = required<std::string>(js, "ground_truth_path", where);
    s.feature_path = required<std::string>(js, "feature_path", where);
    if (js.contains("noisy_features")) {
      const auto& nf = js.at("noisy_features");
      if (!nf.is_object()) throw Error(Errc::schema, where + ": noisy_features must be an object");
      for (const auto& [key, value] : nf.items()) {
        if (!value.is_string()) throw Error(Errc::schema, where + ": noisy_features values must be paths");
        const int snr = parse_snr_key(key, where);
        if (!s.noisy_features.emplace(snr, value.get<std::string>()).second)
          throw Error(Errc::schema, where + ": duplicate SNR " + key);
      }
    }
    if (js.contains("segmentation_mask_path") && !js.at("segmentation_mask_path").is_null())
      s.segmentation_mask_path = required<std::string>(js, "segmentation_mask_path", where);
    m.samples.push_back(std::move(s));
  }
  if (j.contains("augmentation")) {
    for (const auto& [key, value] : j.at("augmentation").items()) {
      AugmentationRecord rec;
      rec.reference = parse_noise_reference(required<std::string>(value, "normalization", "augmentation"));
      rec.reference_power = value.value("reference_power", 0.0);
      rec.master_seed = value.value("master_seed", std::uint64_t{0});
      m.augmentation[parse_snr_key(key, "augmentation")] = rec;
    }
  }
  validate_manifest(m);
  return m;
}

ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["version"] = m.version;
  j["classes"] = m.classes;
  ordered_json samples = ordered_json::array();
  for (const auto& s : m.samples) {
    ordered_json js;
    js["id"] = s.id;
    js["label"] = s.label;
    js["split"] = to_string(s.split);
    js["ground_truth_path"] = s.ground_truth_path.generic_string();
    js["feature_path"] = s.feature_path.generic_string();
    ordered_json nf = ordered_json::object();
    for (const auto& [snr, p] : s.noisy_features) nf[std::to_string(snr)] = p.generic_string();
    js["noisy_features"] = std::move(nf);
    if (s.segmentation_mask_path) js["segmentation_mask_path"] = s.segmentation_mask_path->generic_string();
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  if (!m.augmentation.empty()) {
    ordered_json aug = ordered_json::object();
    for (const auto& [snr, rec] : m.augmentation) {
      ordered_json r;
      r["normalization"] = to_string(rec.reference);
      if (rec.reference == NoiseReference::global_power) r["reference_power"] = rec.reference_power;
      r["master_seed"] = rec.master_seed;
      aug[std::to_string(snr)] = std::move(r);
    }
    j["augmentation"] = std::move(aug);
  }
  return j;
}

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema, path.string() + ": " + e.what());
  }
  auto m = manifest_from_json(j, path.parent_path());
  if (check_files) check_manifest_files(m);
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gensc

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "gensc/experiment.hpp"
#include "gensc/metrics.hpp"
#include "gensc/noisegen.hpp"
#include "test_util.hpp"

using namespace gensc;
using testutil::error_of;
namespace fs = std::filesystem;

namespace {

// Small on-disk dataset with Gaussian f32 features.
DatasetManifest make_dataset(const fs::path& root, std::size_t n, std::size_t dim, std::uint64_t seed = 5) {
  DatasetManifest m;
  m.base_dir = root;
  m.classes = {"a", "b", "c"};
  fs::create_directories(root / "features");
  fs::create_directories(root / "ground_truth");
  for (std::size_t i = 0; i < n; ++i) {
    SampleEntry s;
    s.id = "s" + std::to_string(i);
    s.label = i % 3;
    s.split = i % 4 == 0 ? Split::test : Split::train;
    s.feature_path = "features/" + s.id + ".gsc";
    s.ground_truth_path = "ground_truth/" + s.id + ".raw";
    auto rng = derive_stream(SeedSpec{seed}, s.id, "make");
    std::vector<double> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal() * (1.0 + static_cast<double>(i)));
    write_tensor(FeatureTensor(DType::f32, {dim}, v), root / s.feature_path);
    std::ofstream(root / s.ground_truth_path) << "raw";
    m.samples.push_back(s);
  }
  save_manifest(m, root / "manifest.json");
  return m;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return std::string(b.begin(), b.end());
}

}  // namespace

TEST_CASE("augmentation writes one file per sample and SNR and is idempotent") {
  const auto root = testutil::scratch("augment");
  const auto m = make_dataset(root / "in", 3, 512);
  const auto before = slurp(root / "in" / "features" / "s0.gsc");
  AugmentPlan plan{{10, 30}, NoiseReference::per_tensor_power, SeedSpec{7}, root / "out"};
  const auto out = augment_dataset(m, plan, 2);

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "out" / "noisy"))
    files += e.is_regular_file();
  CHECK(files == 6);
  CHECK(out.summary().snr_levels == std::vector<int>{10, 30});
  CHECK(slurp(root / "in" / "features" / "s0.gsc") == before);

  const auto reloaded = load_manifest(root / "out" / "manifest.json");
  CHECK(reloaded.samples.size() == 3);
  CHECK(reloaded.augmentation.at(10).master_seed == 7);

  const auto first = slurp(root / "out" / "noisy" / "snr_10" / "s1.gsc");
  CHECK_NOTHROW(augment_dataset(m, plan, 1));
  CHECK(slurp(root / "out" / "noisy" / "snr_10" / "s1.gsc") == first);

  auto other = plan;
  other.seed = SeedSpec{8};
  CHECK(error_of([&] { augment_dataset(m, other); }) == Errc::conflict);

  auto bad = plan;
  bad.snr_list = {};
  CHECK(error_of([&] { augment_dataset(m, bad); }) == Errc::config_invalid);
}

TEST_CASE("verification passes clean augmentations and flags doubled noise") {
  const auto root = testutil::scratch("verify");
  const auto m = make_dataset(root / "in", 4, 4096);
  const auto out = augment_dataset(m, {{0, 10, 20}, NoiseReference::per_tensor_power, SeedSpec{3}, root / "out"});
  const auto report = verify_collection(load_manifest(root / "out" / "manifest.json"));
  CHECK(report.entries.size() == 12);
  CHECK(report.ok());
  for (const auto& e : report.entries) CHECK(std::abs(e.measured_db - e.expected_db) <= e.tolerance_db);

  // Replace one file with a copy carrying twice the noise power.
  const auto& s = out.samples[1];
  const auto clean = read_tensor(out.resolve(s.feature_path));
  auto noisy = read_tensor(out.resolve(s.noisy_features.at(10)));
  std::vector<double> doubled(noisy.size());
  for (std::size_t i = 0; i < doubled.size(); ++i)
    doubled[i] = clean.data()[i] + std::sqrt(2.0) * (noisy.data()[i] - clean.data()[i]);
  write_tensor(FeatureTensor(noisy.dtype(), noisy.shape(), doubled), out.resolve(s.noisy_features.at(10)));
  const auto flagged = verify_collection(load_manifest(root / "out" / "manifest.json"));
  CHECK(flagged.summary.flagged == 1);
  CHECK_FALSE(flagged.ok());

  DatasetManifest empty;
  empty.classes = {"a"};
  const auto none = verify_collection(empty);
  CHECK(none.entries.empty());
  CHECK(none.ok());
}

TEST_CASE("global normalization references the collection power") {
  const auto root = testutil::scratch("global");
  const auto m = make_dataset(root / "in", 4, 4096);
  const double p_ref = global_feature_power(m);
  const auto out = augment_dataset(m, {{10}, NoiseReference::global_power, SeedSpec{3}, root / "out"});
  CHECK(out.augmentation.at(10).reference_power == doctest::Approx(p_ref));
  const auto report = verify_collection(load_manifest(root / "out" / "manifest.json"));
  CHECK(report.ok());
  // Sample 3 has 16x the power of sample 0 so its SNR sits about 12 dB higher.
  CHECK(report.entries[3].measured_db - report.entries[0].measured_db == doctest::Approx(12.04).epsilon(0.02));
}

TEST_CASE("mean measured SNR over many tensors") {
  for (int snr : {0, 10, 20}) {
    double sum = 0;
    for (int i = 0; i < 1000; ++i) {
      auto rng = derive_stream(SeedSpec{11}, "c" + std::to_string(i), "clean");
      std::vector<double> v(1000);
      for (auto& x : v) x = rng.normal();
      const auto clean = FeatureTensor::vector(v);
      const auto noisy = make_noisy_feature(clean, "c" + std::to_string(i), snr, SeedSpec{11});
      sum += empirical_snr(clean, noisy);
    }
    CHECK(std::abs(sum / 1000 - snr) <= 0.05);
  }
}

namespace {

ExperimentConfig jscc_config(const fs::path& root, std::vector<double> sweep) {
  nlohmann::json j = {{"dataset", "data/manifest.json"}, {"pipeline", "classical-jscc"}, {"seed", 9}};
  j["snr_sweep"] = nlohmann::json::array();
  for (double s : sweep) {
    if (std::isinf(s))
      j["snr_sweep"].push_back("inf");
    else
      j["snr_sweep"].push_back(s);
  }
  return config_from_json(j, root);
}

}  // namespace

TEST_CASE("noiseless JSCC sweep is lossless") {
  const auto root = testutil::scratch("noiseless");
  make_dataset(root / "data", 4, 1024);
  const auto r = run_experiment(jscc_config(root, {std::numeric_limits<double>::infinity()}));
  REQUIRE(r.rows.size() == 1);
  CHECK(*r.rows[0].metric("mse") <= 1e-9);
  CHECK(*r.rows[0].metric("psnr_db") == kInfinityDb);
}

TEST_CASE("JSCC sweep follows MSE = P / snr") {
  const auto root = testutil::scratch("sweep");
  const auto m = make_dataset(root / "data", 40, 4096);
  double p_sum = 0;
  for (const auto& s : m.samples) {
    const auto t = read_tensor(m.resolve(s.feature_path));
    double p = 0;
    for (double x : t.data()) p += x * x;
    p_sum += p / static_cast<double>(t.size());
  }
  const double p_mean = p_sum / static_cast<double>(m.samples.size());
  const auto r = run_experiment(jscc_config(root, {0, 5, 10, 20, 30}), 4);
  REQUIRE(r.rows.size() == 5);
  double last_psnr = -kInfinityDb;
  for (const auto& row : r.rows) {
    const double expected = p_mean / std::pow(10.0, row.snr_db / 10);
    CHECK(std::abs(*row.metric("mse") / expected - 1) <= 0.02);
    CHECK(*row.metric("psnr_db") > last_psnr);
    last_psnr = *row.metric("psnr_db");
  }
}

TEST_CASE("runs are deterministic and independent of worker count") {
  const auto root = testutil::scratch("determinism");
  make_dataset(root / "data", 6, 256);
  const auto cfg = jscc_config(root, {5, 15});
  const auto a = run_experiment(cfg, 1);
  const auto b = run_experiment(cfg, 4);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  write_outputs(a, cfg, root / "o1");
  write_outputs(b, cfg, root / "o2");
  for (const char* f : {"report.csv", "report.json", "resolved-config.json"})
    CHECK(slurp(root / "o1" / f) == slurp(root / "o2" / f));

  auto other = cfg;
  resolve_seed(other, 10);
  CHECK(report_to_json(run_experiment(other)).dump() != report_to_json(a).dump());
}

TEST_CASE("seed precedence") {
  const auto root = testutil::scratch("seed");
  auto cfg = config_from_json({{"dataset", "d.json"}, {"pipeline", "classical-jscc"}, {"snr_sweep", {10}}}, root);
  ::unsetenv(kSeedEnvVar);
  resolve_seed(cfg, std::nullopt);
  CHECK(cfg.seed_source == "default");
  CHECK(cfg.seed.master_seed == 0);
  ::setenv(kSeedEnvVar, "77", 1);
  resolve_seed(cfg, std::nullopt);
  CHECK(cfg.seed.master_seed == 77);
  CHECK(cfg.seed_source == "environment");
  cfg.config_seed = 5;
  resolve_seed(cfg, std::nullopt);
  CHECK(cfg.seed.master_seed == 5);
  resolve_seed(cfg, 3);
  CHECK(cfg.seed.master_seed == 3);
  CHECK(cfg.seed_source == "command-line");
  ::setenv(kSeedEnvVar, "x", 1);
  cfg.config_seed.reset();
  CHECK(error_of([&] { resolve_seed(cfg, std::nullopt); }) == Errc::config_invalid);
  ::unsetenv(kSeedEnvVar);
}

TEST_CASE("config validation") {
  const auto root = testutil::scratch("config");
  make_dataset(root / "data", 2, 64);
  auto quantum = config_from_json(
      {{"dataset", "data/manifest.json"}, {"pipeline", "quantum"}, {"snr_sweep", {10}}, {"quantum", {{"n_qubits", 4}}}},
      root);
  CHECK(error_of([&] { quantum.validate(); }) == Errc::config_invalid);
  CHECK(error_of([&] { run_experiment(quantum); }) == Errc::config_invalid);
  CHECK(error_of([&] { config_from_json({{"dataset", "x"}, {"pipeline", "classical-jscc"}, {"snr_sweep", {1}}, {"bogus", 1}}, root); }) ==
        Errc::config_invalid);
  auto dup = jscc_config(root, {10, 10});
  CHECK(error_of([&] { dup.validate(); }) == Errc::config_invalid);
  auto missing = config_from_json({{"dataset", "nope.json"}, {"pipeline", "classical-jscc"}, {"snr_sweep", {1}}}, root);
  CHECK(error_of([&] { missing.validate(); }) == Errc::config_invalid);
}

TEST_CASE("per-sample failures become error records") {
  const auto root = testutil::scratch("failures");
  make_dataset(root / "data", 3, 64);
  fs::remove(root / "data" / "features" / "s1.gsc");
  const auto r = run_experiment(jscc_config(root, {10}));
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].failures == 1);
  CHECK(r.rows[0].samples == 2);
}

TEST_CASE("digital runs report compression against features and raw files") {
  const auto root = testutil::scratch("digital");
  const auto m = make_dataset(root / "data", 1, 1024);
  // A 1024x1024 RGB raster stands in for the raw source image.
  const std::vector<std::uint8_t> raw(3145728, 7);
  write_file_bytes(root / "data" / m.samples[0].ground_truth_path, raw);
  const auto cfg = config_from_json({{"dataset", "data/manifest.json"},
                                     {"pipeline", "classical-digital"},
                                     {"snr_sweep", {"inf"}},
                                     {"quantizer", {{"bits", 8}}}},
                                    root);
  const auto r = run_experiment(cfg);
  REQUIRE(r.rows.size() == 1);
  const double feature_rate = *r.rows[0].metric("compression_rate");
  const double raw_rate = *r.rows[0].metric("compression_rate_raw");
  CHECK(*r.rows[0].metric("ber") == 0.0);
  CHECK(feature_rate > 0.7);
  CHECK(raw_rate == doctest::Approx(1 - (1 - feature_rate) * 4096.0 / 3145728.0).epsilon(1e-12));
}

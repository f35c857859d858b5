#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gensc/metrics.hpp"
#include "gensc/report.hpp"
#include "gensc/rng.hpp"
#include "test_util.hpp"

using namespace gensc;
using testutil::error_of;

TEST_CASE("PSNR closed forms") {
  std::vector<double> ref(64 * 64), test(64 * 64);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref[i] = static_cast<double>((i * 37) % 200);
    test[i] = ref[i] + 16;
  }
  const FeatureTensor a(DType::u8, {64, 64}, ref), b(DType::u8, {64, 64}, test);
  CHECK(psnr(a, b) == doctest::Approx(20 * std::log10(255.0 / 16)).epsilon(1e-12));
  CHECK(psnr(a, b) == doctest::Approx(24.05).epsilon(0.001));
  CHECK(psnr(a, a) == kInfinityDb);
  CHECK(psnr(a, b, 255.0) == psnr(b, a, 255.0));
  CHECK(error_of([&] { psnr(a, FeatureTensor::vector({1})); }) == Errc::shape_mismatch);

  // Float tensors default to the reference maximum.
  const auto f = FeatureTensor::vector({0.0, 2.0}), g = FeatureTensor::vector({0.0, 1.0});
  CHECK(psnr(f, g) == doctest::Approx(10 * std::log10(4.0 / 0.5)));
}

TEST_CASE("PSNR for sigma = 8 Gaussian noise and monotonicity") {
  auto rng = derive_stream(SeedSpec{1}, "psnr", "test");
  const std::size_t n = 1000000;
  std::vector<double> clean(n);
  for (auto& v : clean) v = static_cast<double>(rng.next_u64() % 256);
  const FeatureTensor ref(DType::u8, {1000, 1000}, clean);
  double last = kInfinityDb;
  for (double sigma : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    std::vector<double> noisy(n);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = clean[i] + sigma * rng.normal();
    const double p = psnr(ref, FeatureTensor(DType::f64, {1000, 1000}, noisy), 255.0);
    if (sigma == 8.0) CHECK(std::abs(p - 30.07) <= 0.05);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("empirical SNR") {
  auto rng = derive_stream(SeedSpec{2}, "snr", "test");
  const std::size_t n = 1000000;
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = (rng.next_u64() >> 63) ? 1.0 : -1.0;
    y[i] = s[i] + std::sqrt(0.1) * rng.normal();
  }
  CHECK(std::abs(empirical_snr(s, y) - 10.0) < 0.1);
  CHECK(empirical_snr(s, s) == kInfinityDb);
}

TEST_CASE("classification metrics: hand-computed binary case") {
  std::vector<std::size_t> truth, pred;
  auto add = [&](std::size_t t, std::size_t p, int count) {
    for (int i = 0; i < count; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(1, 1, 40);  // TP
  add(1, 0, 10);  // FN
  add(0, 1, 20);  // FP
  add(0, 0, 30);  // TN
  const auto m = classification_metrics(truth, pred, 2);
  CHECK(m.precision[1] == doctest::Approx(2.0 / 3));
  CHECK(m.recall[1] == doctest::Approx(0.8));
  CHECK(m.f1[1] == doctest::Approx(0.727).epsilon(0.001));
  CHECK(m.accuracy == doctest::Approx(0.7));
  CHECK(m.confusion.row_sum(1) == 50);
  CHECK(m.confusion.col_sum(1) == 60);

  const auto perfect = classification_metrics(truth, truth, 2);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1_macro == 1.0);

  // Class 2 never appears but still counts in the macro denominator.
  const auto three = classification_metrics(truth, truth, 3);
  CHECK(three.f1_macro == doctest::Approx(2.0 / 3));

  CHECK(error_of([] { classification_metrics({}, {}, 2); }) == Errc::empty_input);
  const std::vector<std::size_t> bad = {0, 2};
  const std::vector<std::size_t> ok = {0, 1};
  CHECK(error_of([&] { classification_metrics(ok, bad, 2); }) == Errc::out_of_range);
}

TEST_CASE("classification metrics agree with brute force on small instances") {
  auto rng = derive_stream(SeedSpec{3}, "brute", "test");
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.next_u64() % 4;
    const std::size_t n = 1 + rng.next_u64() % 20;
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.next_u64() % k;
      p[i] = rng.uniform() < 0.6 ? t[i] : rng.next_u64() % k;
    }
    const auto m = classification_metrics(t, p, k);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += t[i] == p[i];
    CHECK(m.accuracy == static_cast<double>(correct) / static_cast<double>(n));
    double f1 = 0, rec = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += t[i] == c && p[i] == c;
        fp += t[i] != c && p[i] == c;
        fn += t[i] == c && p[i] != c;
      }
      const double pr = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double re = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      CHECK(m.precision[c] == pr);
      CHECK(m.recall[c] == re);
      CHECK(m.confusion.row_sum(c) == static_cast<std::uint64_t>(tp + fn));
      f1 += pr + re > 0 ? 2 * pr * re / (pr + re) : 0.0;
      rec += re;
    }
    CHECK(m.f1_macro == doctest::Approx(f1 / static_cast<double>(k)).epsilon(1e-15));
    CHECK(m.recall_macro == doctest::Approx(rec / static_cast<double>(k)).epsilon(1e-15));
    CHECK(m.confusion.total() == n);
  }
}

TEST_CASE("IoU and MPA") {
  const FeatureTensor a(DType::u8, {2, 2}, {1, 1, 0, 0});
  const FeatureTensor b(DType::u8, {2, 2}, {0, 1, 0, 1});
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3));
  CHECK(iou(a, b) == iou(b, a));
  CHECK(iou(a, a) == 1.0);
  const FeatureTensor c(DType::u8, {2, 2}, {0, 0, 1, 1});
  CHECK(iou(a, c) == 0.0);
  const FeatureTensor empty(DType::u8, {2, 2}, {0, 0, 0, 0});
  CHECK(iou(empty, empty) == 1.0);
  CHECK(error_of([&] { iou(a, FeatureTensor(DType::u8, {4}, {0, 0, 0, 0})); }) == Errc::shape_mismatch);

  // Class 1 half right, class 0 all right.
  const FeatureTensor truth(DType::u8, {2, 4}, {0, 0, 0, 0, 1, 1, 1, 1});
  const FeatureTensor pred(DType::u8, {2, 4}, {0, 0, 0, 0, 1, 1, 0, 0});
  CHECK(mpa(truth, pred, 2) == doctest::Approx(0.75));
  CHECK(mpa(truth, truth, 2) == 1.0);
  // Class 2 is absent from the truth and does not enter the mean.
  const FeatureTensor pred2(DType::u8, {2, 4}, {0, 0, 0, 0, 1, 1, 2, 2});
  CHECK(mpa(truth, pred2, 3) == doctest::Approx(0.75));
  CHECK(error_of([&] { mpa(truth, pred2, 2); }) == Errc::out_of_range);
}

namespace {

MetricRecord rec(const std::string& tag, double snr, const std::string& id) {
  MetricRecord r;
  r.model_tag = tag;
  r.snr_db = snr;
  r.sample_id = id;
  return r;
}

}  // namespace

TEST_CASE("report aggregation and paired-SNR layout") {
  auto one = rec("resnet50", 10, "a");
  one.psnr_db = 20;
  const auto single = aggregate_report({one});
  CHECK(single.rows.size() == 1);
  CHECK(single.rows[0].metric("psnr_db") == 20.0);

  std::vector<MetricRecord> records;
  for (const auto& tag : {"vit", "resnet50"}) {
    for (double snr : {30.0, 10.0}) {
      auto g = rec(tag, snr, "");
      g.accuracy = snr / 40;
      g.f1_macro = snr / 50;
      g.recall_macro = snr / 60;
      records.push_back(g);
      auto s = rec(tag, snr, "img1");
      s.external_scores["clip_s"] = 35.52;
      records.push_back(s);
    }
  }
  const auto r = aggregate_report(records);
  CHECK(r.model_tags() == std::vector<std::string>{"vit", "resnet50"});
  CHECK(r.rows[0].snr_db == 10.0);
  CHECK(r.rows[0].samples == 1);
  const std::string expected =
      "model_tag,snr_10_accuracy,snr_10_f1_macro,snr_10_recall_macro,snr_10_clip_s,"
      "snr_30_accuracy,snr_30_f1_macro,snr_30_recall_macro,snr_30_clip_s\n"
      "vit,0.25,0.2,0.16666666666666666,35.52,0.75,0.6,0.5,35.52\n"
      "resnet50,0.25,0.2,0.16666666666666666,35.52,0.75,0.6,0.5,35.52\n";
  CHECK(report_to_csv(r) == expected);

  const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  CHECK(back.rows == r.rows);
  CHECK(back.records == r.records);

  auto clash = records;
  clash.push_back(records[1]);
  CHECK_NOTHROW(aggregate_report(clash));  // identical duplicate collapses
  clash.back().external_scores["clip_s"] = 1.0;
  CHECK(error_of([&] { aggregate_report(clash); }) == Errc::conflict);
}

TEST_CASE("report merge, infinity sentinel and plot series") {
  auto a = rec("jscc", 10, "s");
  a.psnr_db = 25;
  auto b = rec("jscc", kInfinityDb, "s");
  b.psnr_db = kInfinityDb;
  b.mse = 0;
  const auto ra = aggregate_report({a});
  const auto rb = aggregate_report({b});
  const auto merged = merge_reports(ra, rb);
  CHECK(merged.rows.size() == 2);
  CHECK(merge_reports(merged, ra).rows.size() == 2);
  a.psnr_db = 26;
  CHECK(error_of([&] { merge_reports(merged, aggregate_report({a})); }) == Errc::conflict);

  const auto csv = report_to_csv(merged);
  CHECK(csv == "model_tag,snr_10_psnr_db,snr_inf_psnr_db,snr_inf_mse\njscc,25,inf,0\n");
  const auto j = report_to_json(merged);
  CHECK(j["rows"][1]["metrics"]["psnr_db"] == "inf");
  CHECK(report_from_json(nlohmann::json::parse(j.dump())).rows == merged.rows);

  const auto dir = testutil::scratch("series");
  const auto files = emit_plot_data(merged, dir);
  CHECK(files.size() == 2);
  const auto bytes = read_file_bytes(dir / "series" / "psnr_db.csv");
  CHECK(std::string(bytes.begin(), bytes.end()) == "model_tag,snr_db,value\njscc,10,25\njscc,inf,inf\n");
  CHECK(error_of([&] { emit_plot_data(MetricsReport{}, dir); }) == Errc::empty_input);
}

TEST_CASE("external score sidecar") {
  const auto s = ExternalScores::from_json(nlohmann::json::parse(R"({"img1": {"clip_s": 35.52, "lpips": {"10": 0.4, "30": 0.1}}})"));
  const auto at10 = s.lookup("img1", 10);
  CHECK(at10.at("clip_s") == 35.52);
  CHECK(at10.at("lpips") == 0.4);
  CHECK(s.lookup("img1", 20).count("lpips") == 0);
  CHECK(s.lookup("other", 10).empty());
  CHECK(error_of([] { ExternalScores::from_json(nlohmann::json::parse("[1]")); }) == Errc::schema);
}

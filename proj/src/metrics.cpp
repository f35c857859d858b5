#include "gensc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gensc/error.hpp"

namespace gensc {

namespace {

void require_same_shape(const FeatureTensor& a, const FeatureTensor& b) {
  if (a.shape() != b.shape()) throw Error(Errc::shape_mismatch, "tensor shapes differ");
}

double mean_square_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::shape_mismatch, "lengths differ");
  if (a.empty()) throw Error(Errc::empty_input, "no elements");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::size_t class_of(double v, std::size_t k) {
  if (v < 0.0 || v != std::floor(v) || v >= static_cast<double>(k))
    throw Error(Errc::out_of_range, "class value " + std::to_string(v) + " outside [0, " + std::to_string(k) + ")");
  return static_cast<std::size_t>(v);
}

}  // namespace

double mse(const FeatureTensor& a, const FeatureTensor& b) {
  require_same_shape(a, b);
  return mean_square_diff(a.data(), b.data());
}

double psnr(const FeatureTensor& reference, const FeatureTensor& test, std::optional<double> max_value) {
  require_same_shape(reference, test);
  double peak = 0.0;
  if (max_value) {
    peak = *max_value;
  } else if (reference.dtype() == DType::u8) {
    peak = 255.0;
  } else {
    const auto x = reference.data();
    peak = *std::max_element(x.begin(), x.end());
    if (peak <= 0.0)
      for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0) peak = 1.0;
  }
  if (!(peak > 0.0)) throw Error(Errc::invalid_argument, "max_value must be positive");
  const double e = mean_square_diff(reference.data(), test.data());
  if (e == 0.0) return kInfinityDb;
  return 10.0 * std::log10(peak * peak / e);
}

double empirical_snr(std::span<const double> clean, std::span<const double> noisy) {
  const double noise = mean_square_diff(clean, noisy);
  if (noise == 0.0) return kInfinityDb;
  double signal = 0.0;
  for (double v : clean) signal += v * v;
  signal /= static_cast<double>(clean.size());
  return 10.0 * std::log10(signal / noise);
}

double empirical_snr(const FeatureTensor& clean, const FeatureTensor& noisy) {
  require_same_shape(clean, noisy);
  return empirical_snr(clean.data(), noisy.data());
}

double ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received) {
  if (sent.size() != received.size()) throw Error(Errc::shape_mismatch, "bit sequences differ in length");
  if (sent.empty()) throw Error(Errc::empty_input, "no bits");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < sent.size(); ++i) errors += (sent[i] != 0) != (received[i] != 0);
  return static_cast<double>(errors) / static_cast<double>(sent.size());
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += counts_[i * k_ + i];
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < k_; ++j) t += at(truth, j);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, predicted);
  return t;
}

ClassificationMetrics classification_metrics(std::span<const std::size_t> truth,
                                             std::span<const std::size_t> predicted, std::size_t k) {
  if (truth.size() != predicted.size()) throw Error(Errc::shape_mismatch, "label sequences differ in length");
  if (truth.empty()) throw Error(Errc::empty_input, "no labels");
  if (k == 0) throw Error(Errc::invalid_argument, "k must be positive");

  ClassificationMetrics m;
  m.confusion = ConfusionMatrix(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= k || predicted[i] >= k)
      throw Error(Errc::out_of_range, "label at position " + std::to_string(i) + " is >= " + std::to_string(k));
    m.confusion.add(truth[i], predicted[i]);
  }

  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(m.confusion.trace(), m.confusion.total());
  m.precision.resize(k);
  m.recall.resize(k);
  m.f1.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto tp = m.confusion.at(c, c);
    m.precision[c] = ratio(tp, m.confusion.col_sum(c));
    m.recall[c] = ratio(tp, m.confusion.row_sum(c));
    const double s = m.precision[c] + m.recall[c];
    m.f1[c] = s == 0.0 ? 0.0 : 2.0 * m.precision[c] * m.recall[c] / s;
    m.precision_macro += m.precision[c];
    m.recall_macro += m.recall[c];
    m.f1_macro += m.f1[c];
  }
  const auto kd = static_cast<double>(k);
  m.precision_macro /= kd;
  m.recall_macro /= kd;
  m.f1_macro /= kd;
  return m;
}

double iou(const FeatureTensor& a, const FeatureTensor& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0.0, y = b[i] != 0.0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mpa(const FeatureTensor& truth, const FeatureTensor& predicted, std::size_t k) {
  require_same_shape(truth, predicted);
  if (truth.size() == 0) throw Error(Errc::empty_input, "empty mask");
  std::vector<std::size_t> correct(k, 0), total(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = class_of(truth[i], k);
    const auto p = class_of(predicted[i], k);
    ++total[t];
    correct[t] += t == p;
  }
  double acc = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (total[c] == 0) continue;
    acc += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return acc / static_cast<double>(present);
}

}  // namespace gensc

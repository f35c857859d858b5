#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gensc/tensor.hpp"

namespace gensc {

/// Returned by psnr / empirical_snr when the error power is exactly zero.
inline constexpr double kInfinityDb = std::numeric_limits<double>::infinity();

double mse(const FeatureTensor& a, const FeatureTensor& b);

/// 10 log10(max^2 / MSE). Without an explicit peak, u8 references use 255
/// and float references their largest element (max |x| if that is <= 0).
double psnr(const FeatureTensor& reference, const FeatureTensor& test,
            std::optional<double> max_value = std::nullopt);

/// 10 log10(P_clean / P_(noisy - clean)).
double empirical_snr(const FeatureTensor& clean, const FeatureTensor& noisy);
double empirical_snr(std::span<const double> clean, std::span<const double> noisy);

/// Fraction of differing positions in two 0/1 sequences.
double ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received);

/// k x k counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

  std::size_t classes() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted) { ++counts_[truth * k_ + predicted]; }
  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct ClassificationMetrics {
  ConfusionMatrix confusion{0};
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double recall_macro = 0.0;
  double precision_macro = 0.0;
  std::vector<double> precision;  // per class, 0/0 -> 0
  std::vector<double> recall;
  std::vector<double> f1;
};

/// Macro averages run over all k classes; a class with no truth and no
/// predictions contributes 0.
ClassificationMetrics classification_metrics(std::span<const std::size_t> truth,
                                             std::span<const std::size_t> predicted, std::size_t k);

/// Nonzero elements are foreground. Two empty masks give 1.
double iou(const FeatureTensor& a, const FeatureTensor& b);

/// Per-class pixel accuracy averaged over classes present in the truth.
double mpa(const FeatureTensor& truth, const FeatureTensor& predicted, std::size_t k);

}  // namespace gensc

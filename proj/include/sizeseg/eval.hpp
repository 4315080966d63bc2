#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sizeseg/field.hpp"
#include "sizeseg/image.hpp"
#include "sizeseg/synthdata.hpp"

namespace sizeseg {

/// K x K pixel counts, rows = ground truth, columns = prediction.
/// Matrices for separate images merge by addition.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = 0);

  int classes() const { return classes_; }
  std::uint64_t at(int truth, int predicted) const { return counts_[std::size_t(truth) * classes_ + predicted]; }
  std::uint64_t total() const;

  void add(int truth, int predicted, std::uint64_t count = 1);
  void add(const LabelMap& truth, const LabelMap& predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  std::uint64_t true_positives(int k) const { return at(k, k); }
  std::uint64_t false_positives(int k) const;
  std::uint64_t false_negatives(int k) const;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

/// TP / (TP + FP + FN); nullopt when class k is absent from both truth and prediction.
std::optional<double> class_iou(const ConfusionMatrix& cm, int k);
/// 2TP / (2TP + FP + FN); nullopt under the same absence rule.
std::optional<double> class_dice(const ConfusionMatrix& cm, int k);

/// Mean IoU over classes that appear in truth or prediction.
double miou(const ConfusionMatrix& cm);
/// Mean Dice over foreground classes (k >= 1) that appear in truth or prediction.
/// Returns 1 when no foreground class appears anywhere (nothing to miss).
double dice(const ConfusionMatrix& cm);

/// Per-pixel argmax of the predictions.
LabelMap argmax_labels(const PredictionField& field);

/// |v - v_hat| / v_hat; requires v_hat > 0.
double relative_error(double v, double v_hat);

struct SizeErrorSample {
  int image = 0;
  int cls = 0;
  double relative_error = 0.0;
};

/// Relative errors of the working sizes against the exact sizes for every
/// (image, present class) pair. Samples without working sizes are skipped.
std::vector<SizeErrorSample> size_errors(std::span<const SampleRecord> dataset);
/// Mean of the relative errors over all (image, present class) pairs.
double mre(std::span<const SampleRecord> dataset);
double mean_relative_error(std::span<const SizeErrorSample> errors);

/// Per-class histograms of relative errors: bins of `bin_width` on [0, 1) and a
/// final overflow bin. Each class's counts are divided by that class's number
/// of images, so a class histogram sums to 1.
struct REHistogram {
  double bin_width = 0.025;
  int bins = 40;
  std::vector<int> classes;
  std::vector<std::vector<double>> frequencies;
  std::vector<int> image_counts;
};

REHistogram re_histogram(std::span<const SizeErrorSample> errors, double bin_width = 0.025);

}  // namespace sizeseg

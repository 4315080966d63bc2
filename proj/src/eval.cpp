#include "sizeseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "sizeseg/errors.hpp"

namespace sizeseg {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes), counts_(std::size_t(classes) * classes, 0) {
  if (classes < 0) throw DomainError("ConfusionMatrix: negative class count");
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
    throw DomainError("ConfusionMatrix: label out of range");
  counts_[std::size_t(truth) * classes_ + predicted] += count;
}

void ConfusionMatrix::add(const LabelMap& truth, const LabelMap& predicted) {
  if (truth.pixels() != predicted.pixels()) throw DomainError("ConfusionMatrix: label maps differ in size");
  for (std::size_t p = 0; p < truth.pixels(); ++p) add(truth.labels[p], predicted.labels[p]);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw DomainError("ConfusionMatrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::false_positives(int k) const {
  std::uint64_t s = 0;
  for (int t = 0; t < classes_; ++t)
    if (t != k) s += at(t, k);
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(int k) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes_; ++p)
    if (p != k) s += at(k, p);
  return s;
}

std::optional<double> class_iou(const ConfusionMatrix& cm, int k) {
  const double tp = double(cm.true_positives(k));
  const double denom = tp + double(cm.false_positives(k)) + double(cm.false_negatives(k));
  if (denom == 0.0) return std::nullopt;
  return tp / denom;
}

std::optional<double> class_dice(const ConfusionMatrix& cm, int k) {
  const double tp = double(cm.true_positives(k));
  const double denom = 2.0 * tp + double(cm.false_positives(k)) + double(cm.false_negatives(k));
  if (denom == 0.0) return std::nullopt;
  return 2.0 * tp / denom;
}

double miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DomainError("miou: empty confusion matrix");
  double sum = 0.0;
  int count = 0;
  for (int k = 0; k < cm.classes(); ++k)
    if (const auto iou = class_iou(cm, k)) {
      sum += *iou;
      ++count;
    }
  return sum / count;
}

double dice(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DomainError("dice: empty confusion matrix");
  double sum = 0.0;
  int count = 0;
  for (int k = 1; k < cm.classes(); ++k)
    if (const auto d = class_dice(cm, k)) {
      sum += *d;
      ++count;
    }
  return count ? sum / count : 1.0;
}

LabelMap argmax_labels(const PredictionField& field) {
  LabelMap out(field.height(), field.width());
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const auto s = field.prob(p);
    out.labels[p] = std::uint8_t(std::max_element(s.begin(), s.end()) - s.begin());
  }
  return out;
}

double relative_error(double v, double v_hat) {
  if (!(v_hat > 0.0)) throw DomainError("relative_error: exact size must be > 0");
  return std::abs(v - v_hat) / v_hat;
}

std::vector<SizeErrorSample> size_errors(std::span<const SampleRecord> dataset) {
  std::vector<SizeErrorSample> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (!s.sizes) continue;
    for (std::size_t k = 0; k < s.exact_sizes.size(); ++k)
      if (s.exact_sizes[k] > 0.0) out.push_back({int(i), int(k), relative_error((*s.sizes)[k], s.exact_sizes[k])});
  }
  return out;
}

double mean_relative_error(std::span<const SizeErrorSample> errors) {
  if (errors.empty()) throw DomainError("mre: no (image, class) pairs with working sizes");
  double sum = 0.0;
  for (const auto& e : errors) sum += e.relative_error;
  return sum / double(errors.size());
}

double mre(std::span<const SampleRecord> dataset) {
  const auto errors = size_errors(dataset);
  return mean_relative_error(errors);
}

REHistogram re_histogram(std::span<const SizeErrorSample> errors, double bin_width) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw DomainError("re_histogram: bin width must lie in (0, 1]");
  REHistogram h;
  h.bin_width = bin_width;
  h.bins = int(std::lround(1.0 / bin_width));
  std::map<int, std::vector<double>> counts;
  std::map<int, int> images;
  for (const auto& e : errors) {
    auto& c = counts[e.cls];
    if (c.empty()) c.assign(std::size_t(h.bins) + 1, 0.0);
    const int bin = std::min(h.bins, int(std::floor(e.relative_error / bin_width)));
    c[std::size_t(bin)] += 1.0;
    ++images[e.cls];
  }
  for (auto& [cls, c] : counts) {
    for (double& v : c) v /= double(images[cls]);
    h.classes.push_back(cls);
    h.frequencies.push_back(c);
    h.image_counts.push_back(images[cls]);
  }
  return h;
}

}  // namespace sizeseg

#include "sizeseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sizeseg/errors.hpp"

namespace sizeseg {

namespace {

constexpr double kHuge = std::numeric_limits<double>::max();

std::vector<double> raw_mean(const PredictionField& field) {
  const int K = field.classes();
  std::vector<double> mean(K, 0.0);
  const auto probs = field.probs();
  for (std::size_t p = 0; p < field.pixels(); ++p)
    for (int k = 0; k < K; ++k) mean[k] += probs[p * K + k];
  for (double& m : mean) m /= double(field.pixels());
  return mean;
}

// Logit gradient of a loss that depends on the field only through its mean:
// dL/dz_pk = S_pk (g_k - sum_j S_pj g_j) / N, with g = dL/dS_mean.
std::vector<double> chain_through_mean(const PredictionField& field, std::span<const double> mean_grad) {
  const int K = field.classes();
  const double inv_n = 1.0 / double(field.pixels());
  const auto probs = field.probs();
  std::vector<double> out(probs.size());
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const double* s = probs.data() + p * K;
    double dot = 0.0;
    for (int k = 0; k < K; ++k) dot += s[k] * mean_grad[k];
    for (int k = 0; k < K; ++k) out[p * K + k] = s[k] * (mean_grad[k] - dot) * inv_n;
  }
  return out;
}

// ln(max(x, floor)); -inf with a zero floor and zero argument.
double floored_log(double x, double floor) { return std::log(std::max(x, floor)); }

LossValue saturated_result(std::size_t grad_size) {
  LossValue r;
  r.value = kHuge;
  r.saturated = true;
  r.grad.assign(grad_size, 0.0);
  return r;
}

void check_target(const PredictionField& field, std::size_t size, const char* what) {
  if (size != std::size_t(field.classes())) throw DomainError(std::string(what) + ": class count mismatch");
}

std::vector<bool> tag_mask(const TagSet& tags, int classes) {
  std::vector<bool> in(classes, false);
  for (int t : tags) in[t] = true;
  return in;
}

}  // namespace

void validate_tags(const TagSet& tags, int classes) {
  for (int t : tags)
    if (t < 0 || t >= classes) throw DomainError("tag id out of range");
}

void validate_seeds(const SeedSet& seeds, std::size_t pixels, int classes) {
  std::vector<std::uint32_t> seen;
  seen.reserve(seeds.size());
  for (const auto& s : seeds) {
    if (s.pixel >= pixels) throw DomainError("seed pixel out of bounds");
    if (s.label < 0 || s.label >= classes) throw DomainError("seed label out of range");
    seen.push_back(s.pixel);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) throw DomainError("duplicate seed pixel");
}

void accumulate(LossValue& out, const LossValue& term, double scale) {
  if (scale == 0.0) return;
  if (out.grad.empty()) out.grad.assign(term.grad.size(), 0.0);
  if (out.saturated || term.saturated) {
    out.saturated = true;
    out.value = kHuge;
  } else {
    out.value += scale * term.value;
  }
  for (std::size_t i = 0; i < term.grad.size(); ++i) out.grad[i] += scale * term.grad[i];
}

LossValue size_target_loss(const PredictionField& field, const CategoricalDist& v, const LossOptions& opts) {
  check_target(field, v.size(), "size_target_loss");
  const auto mean = raw_mean(field);
  const int K = field.classes();
  std::vector<double> g(K, 0.0);
  double value = 0.0;
  for (int k = 0; k < K; ++k) {
    if (v[k] == 0.0) continue;
    const double denom = std::max(mean[k], opts.log_floor);
    if (denom == 0.0) return saturated_result(field.probs().size());
    value += v[k] * (std::log(v[k]) - std::log(denom));
    g[k] = -v[k] / denom;
  }
  return {value, false, chain_through_mean(field, g)};
}

LossValue crf_loss(const PredictionField& field, const AffinityGraph& graph) {
  if (graph.num_pixels() != field.pixels()) throw DomainError("crf_loss: graph and field sizes differ");
  const int K = field.classes();
  const auto probs = field.probs();
  std::vector<double> prob_grad(probs.size(), 0.0);
  double value = 0.0;
  // Each stored edge is both (p,q) and (q,p) of the symmetric W:
  // w * sum_k [(1 - S_pk) S_qk + (1 - S_qk) S_pk].
  for (const auto& e : graph.edges) {
    const double* sp = probs.data() + std::size_t(e.p) * K;
    const double* sq = probs.data() + std::size_t(e.q) * K;
    double* gp = prob_grad.data() + std::size_t(e.p) * K;
    double* gq = prob_grad.data() + std::size_t(e.q) * K;
    double agree = 0.0;
    for (int k = 0; k < K; ++k) {
      agree += sp[k] * sq[k];
      gp[k] += e.weight * (1.0 - 2.0 * sq[k]);
      gq[k] += e.weight * (1.0 - 2.0 * sp[k]);
    }
    value += 2.0 * e.weight * (1.0 - agree);
  }
  return {value, false, softmax_backward(field, prob_grad)};
}

LossValue partial_ce_loss(const PredictionField& field, const SeedSet& seeds, const LossOptions& opts) {
  validate_seeds(seeds, field.pixels(), field.classes());
  const int K = field.classes();
  LossValue r{0.0, false, std::vector<double>(field.probs().size(), 0.0)};
  for (const auto& s : seeds) {
    const double prob = field.prob(s.pixel, s.label);
    const double arg = std::max(prob, opts.log_floor);
    if (arg == 0.0) return saturated_result(r.grad.size());
    r.value -= std::log(arg);
    for (int k = 0; k < K; ++k) r.grad[std::size_t(s.pixel) * K + k] = field.prob(s.pixel, k);
    r.grad[std::size_t(s.pixel) * K + s.label] -= 1.0;
  }
  return r;
}

LossValue expansion_loss(const PredictionField& field, const TagSet& tags, const LossOptions& opts) {
  validate_tags(tags, field.classes());
  const auto mean = raw_mean(field);
  const auto in = tag_mask(tags, field.classes());
  std::vector<double> g(field.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < field.classes(); ++k) {
    if (!in[k]) continue;
    const double arg = std::max(mean[k], opts.log_floor);
    if (arg == 0.0) return saturated_result(field.probs().size());
    value -= std::log(arg);
    g[k] = -1.0 / arg;
  }
  return {value, false, chain_through_mean(field, g)};
}

LossValue suppression_loss(const PredictionField& field, const TagSet& tags, const LossOptions& opts) {
  validate_tags(tags, field.classes());
  const auto mean = raw_mean(field);
  const auto in = tag_mask(tags, field.classes());
  std::vector<double> g(field.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < field.classes(); ++k) {
    if (in[k]) continue;
    const double arg = std::max(1.0 - mean[k], opts.log_floor);
    if (arg == 0.0) return saturated_result(field.probs().size());
    value -= std::log(arg);
    g[k] = 1.0 / arg;
  }
  return {value, false, chain_through_mean(field, g)};
}

LossValue flat_log_barrier(const PredictionField& field, const TagSet& tags, const BarrierConfig& cfg,
                           const LossOptions& opts) {
  validate_tags(tags, field.classes());
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw ConfigError("flat_log_barrier: epsilon must lie in (0, 1)");
  const auto mean = raw_mean(field);
  const auto in = tag_mask(tags, field.classes());
  const double eps = cfg.epsilon;
  std::vector<double> g(field.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < field.classes(); ++k) {
    if (!in[k]) continue;
    if (cfg.flat_form == FlatBarrierForm::ZeroAboveThreshold) {
      if (mean[k] >= eps) continue;
      const double arg = std::max(mean[k], opts.log_floor);
      if (arg == 0.0) return saturated_result(field.probs().size());
      value -= std::log(arg / eps);
      g[k] = -1.0 / arg;
    } else {
      if (mean[k] <= eps) {
        value -= std::log(eps);
      } else {
        value -= std::log(mean[k]);
        g[k] = -1.0 / mean[k];
      }
    }
  }
  return {value, false, chain_through_mean(field, g)};
}

LossValue quadratic_barrier(const PredictionField& field, const BarrierConfig& cfg) {
  check_target(field, cfg.lower_bounds.size(), "quadratic_barrier");
  for (double a : cfg.lower_bounds)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("quadratic_barrier: lower bounds must lie in [0, 1]");
  const auto mean = raw_mean(field);
  std::vector<double> g(field.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < field.classes(); ++k) {
    const double gap = cfg.lower_bounds[k] - mean[k];
    if (gap <= 0.0) continue;
    value += gap * gap;
    g[k] = -2.0 * gap;
  }
  return {value, false, chain_through_mean(field, g)};
}

LossValue absent_class_suppressor(const PredictionField& field, int obj_class) {
  if (obj_class < 0 || obj_class >= field.classes()) throw DomainError("absent_class_suppressor: class out of range");
  const auto mean = raw_mean(field);
  std::vector<double> g(field.classes(), 0.0);
  g[obj_class] = 2.0 * mean[obj_class];
  return {mean[obj_class] * mean[obj_class], false, chain_through_mean(field, g)};
}

LossValue mask_cross_entropy(const PredictionField& field, const LabelMap& mask, const LossOptions& opts) {
  if (mask.pixels() != field.pixels()) throw DomainError("mask_cross_entropy: mask and field sizes differ");
  const int K = field.classes();
  const double inv_n = 1.0 / double(field.pixels());
  LossValue r{0.0, false, std::vector<double>(field.probs().size(), 0.0)};
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const int y = mask.labels[p];
    if (y >= K) throw DomainError("mask_cross_entropy: label out of range");
    const double arg = std::max(field.prob(p, y), opts.log_floor);
    if (arg == 0.0) return saturated_result(r.grad.size());
    r.value -= std::log(arg) * inv_n;
    for (int k = 0; k < K; ++k) r.grad[p * K + k] = field.prob(p, k) * inv_n;
    r.grad[p * K + y] -= inv_n;
  }
  return r;
}

LossValue fairness_loss(const PredictionField& batch, const LossOptions& opts) {
  const auto mean = raw_mean(batch);
  std::vector<double> g(batch.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < batch.classes(); ++k) {
    const double lg = floored_log(mean[k], opts.log_floor);
    if (mean[k] > 0.0) value += mean[k] * lg;
    g[k] = lg + 1.0;
  }
  if (!std::isfinite(value)) return saturated_result(batch.probs().size());
  return {value, false, chain_through_mean(batch, g)};
}

std::optional<LossValue> balance_loss(const PredictionField& batch, const CategoricalDist& v, const LossOptions& opts) {
  check_target(batch, v.size(), "balance_loss");
  const auto mean = raw_mean(batch);
  for (int k = 0; k < batch.classes(); ++k)
    if (mean[k] > 0.0 && v[k] == 0.0) return std::nullopt;
  std::vector<double> g(batch.classes(), 0.0);
  double value = 0.0;
  for (int k = 0; k < batch.classes(); ++k) {
    if (v[k] == 0.0) continue;
    const double lg = floored_log(mean[k], opts.log_floor) - std::log(v[k]);
    if (mean[k] > 0.0) value += mean[k] * lg;
    g[k] = lg + 1.0;
  }
  if (!std::isfinite(value)) return saturated_result(batch.probs().size());
  return LossValue{value, false, chain_through_mean(batch, g)};
}

double unnormalized_class_weight(double beta, double count) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("weighted CE: beta must lie in (0, 1)");
  if (!(count >= 0.0)) throw ConfigError("weighted CE: class counts must be >= 0");
  return 1.0 / (1.0 - std::pow(beta, count));
}

std::vector<double> class_weights(const WeightedCEConfig& cfg) {
  const std::size_t K = cfg.class_counts.size();
  std::vector<double> w(K, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (cfg.class_counts[k] == 0.0) {
      unnormalized_class_weight(cfg.beta, 0.0);  // validates beta
      continue;
    }
    w[k] = unnormalized_class_weight(cfg.beta, cfg.class_counts[k]);
    total += w[k];
  }
  if (!(total > 0.0)) throw ConfigError("weighted CE: all class counts are zero");
  for (double& x : w) x *= double(K) / total;
  return w;
}

LossValue weighted_ce_loss(const PredictionField& batch, std::span<const int> labels, const WeightedCEConfig& cfg,
                           const LossOptions& opts) {
  check_target(batch, cfg.class_counts.size(), "weighted_ce_loss");
  if (labels.size() != batch.pixels()) throw DomainError("weighted_ce_loss: one label per prediction required");
  const auto w = class_weights(cfg);
  const int K = batch.classes();
  LossValue r{0.0, false, std::vector<double>(batch.probs().size(), 0.0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= K) throw DomainError("weighted_ce_loss: label out of range");
    const double arg = std::max(batch.prob(i, y), opts.log_floor);
    if (arg == 0.0) return saturated_result(r.grad.size());
    r.value -= w[y] * std::log(arg);
    for (int k = 0; k < K; ++k) r.grad[i * K + k] = w[y] * batch.prob(i, k);
    r.grad[i * K + y] -= w[y];
  }
  return r;
}

namespace {

PredictionField batch_field(std::span<const CategoricalDist> batch) {
  if (batch.empty()) throw DomainError("empty batch");
  const std::size_t K = batch.front().size();
  std::vector<double> probs;
  probs.reserve(batch.size() * K);
  for (const auto& d : batch) {
    if (d.size() != K) throw DomainError("batch distributions differ in class count");
    probs.insert(probs.end(), d.probs().begin(), d.probs().end());
  }
  return PredictionField::from_probs(1, int(batch.size()), int(K), std::move(probs));
}

}  // namespace

double fairness_loss(std::span<const CategoricalDist> batch) {
  return fairness_loss(batch_field(batch), LossOptions{0.0}).value;
}

std::optional<double> balance_loss(std::span<const CategoricalDist> batch, const CategoricalDist& v) {
  const auto mean = average_prediction(batch_field(batch));
  return kl_reverse(mean, v);
}

double weighted_ce_loss(std::span<const CategoricalDist> predictions, std::span<const int> labels,
                        const WeightedCEConfig& cfg) {
  return weighted_ce_loss(batch_field(predictions), labels, cfg, LossOptions{0.0}).value;
}

LossValue total_loss_image_level(const PredictionField& field, const CategoricalDist& v, const AffinityGraph& graph,
                                 const TotalLossWeights& weights, const LossOptions& opts) {
  LossValue out{0.0, false, std::vector<double>(field.probs().size(), 0.0)};
  if (weights.size != 0.0) accumulate(out, size_target_loss(field, v, opts), weights.size);
  if (weights.crf != 0.0) accumulate(out, crf_loss(field, graph), weights.crf);
  return out;
}

LossValue total_loss_seeded(const PredictionField& field, const CategoricalDist& v, const AffinityGraph& graph,
                            const SeedSet& seeds, const TotalLossWeights& weights, const LossOptions& opts) {
  LossValue out = total_loss_image_level(field, v, graph, weights, opts);
  if (weights.pce != 0.0) accumulate(out, partial_ce_loss(field, seeds, opts), weights.pce);
  return out;
}

}  // namespace sizeseg

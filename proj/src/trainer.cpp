#include "sizeseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sizeseg/errors.hpp"
#include "sizeseg/rng.hpp"

namespace sizeseg {

using nlohmann::json;

namespace {

const std::map<SupervisionMode, std::string>& mode_names() {
  static const std::map<SupervisionMode, std::string> names = {
      {SupervisionMode::FullMask, "full-mask"},
      {SupervisionMode::Size, "size"},
      {SupervisionMode::SizeCrf, "size-crf"},
      {SupervisionMode::SizeCrfSeeds, "size-crf-seeds"},
      {SupervisionMode::ExpandCrf, "expand-crf"},
      {SupervisionMode::FlatBarrierCrf, "flat-barrier-crf"},
      {SupervisionMode::QuadBarrierSeeds, "quad-barrier-seeds"},
      {SupervisionMode::SeedsOnly, "seeds-only"},
      {SupervisionMode::FixedMeanSize, "fixed-mean-size"},
  };
  return names;
}

// Stream ids for Rng::split so independent consumers never share draws.
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kCorruptionStream = 0x434f5252ULL;

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

CategoricalDist restrict_to_tags(const CategoricalDist& d, const TagSet& tags) {
  std::vector<double> out(d.size(), 0.0);
  for (int t : tags) out[std::size_t(t)] = d[std::size_t(t)];
  double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(total > 0.0)) return uniform_over(tags, int(d.size()));
  return CategoricalDist::normalized(std::move(out));
}

}  // namespace

std::string to_string(SupervisionMode m) { return mode_names().at(m); }

SupervisionMode supervision_mode_from_string(const std::string& s) {
  for (const auto& [mode, name] : mode_names())
    if (name == s) return mode;
  std::string known;
  for (const auto& [mode, name] : mode_names()) known += (known.empty() ? "" : ", ") + name;
  throw ConfigError("unknown supervision mode '" + s + "' (expected one of: " + known + ")");
}

bool mode_uses_crf(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::SizeCrf:
    case SupervisionMode::SizeCrfSeeds:
    case SupervisionMode::ExpandCrf:
    case SupervisionMode::FlatBarrierCrf:
    case SupervisionMode::FixedMeanSize:
      return true;
    default:
      return false;
  }
}

bool mode_needs_seeds(SupervisionMode m) {
  return m == SupervisionMode::SizeCrfSeeds || m == SupervisionMode::QuadBarrierSeeds ||
         m == SupervisionMode::SeedsOnly;
}

bool mode_uses_size_targets(SupervisionMode m) {
  return m == SupervisionMode::Size || m == SupervisionMode::SizeCrf || m == SupervisionMode::SizeCrfSeeds ||
         m == SupervisionMode::FixedMeanSize;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (!(cfg.poly_power > 0.0)) throw ConfigError("train: poly power must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("train: weight decay must be >= 0");
  if (!(cfg.crf_weight >= 0.0) || !(cfg.pce_weight >= 0.0) || !(cfg.size_weight >= 0.0))
    throw ConfigError("train: loss weights must be >= 0");
  if (!(cfg.derived_bound_scale > 0.0 && cfg.derived_bound_scale <= 1.0))
    throw ConfigError("train: derived_bound_scale must lie in (0, 1]");
  if (!(cfg.corruption_sigma >= 0.0)) throw ConfigError("train: corruption sigma must be >= 0");
  if (!(cfg.barrier.epsilon > 0.0 && cfg.barrier.epsilon < 1.0)) throw ConfigError("train: barrier epsilon must lie in (0, 1)");
  if (cfg.eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
  if (cfg.threads < 1) throw ConfigError("train: threads must be >= 1");
}

double lr_at(std::int64_t step, std::int64_t total, const TrainConfig& cfg) {
  if (total <= 0 || step < 0 || step > total) throw DomainError("lr_at: step must lie in [0, total]");
  return cfg.learning_rate * std::pow(1.0 - double(step) / double(total), cfg.poly_power);
}

struct PreparedSample {
  std::optional<AffinityGraph> graph;
  std::optional<CategoricalDist> target;
  std::vector<double> lower_bounds;
  double inv_pixels = 1.0;
};

TrainingProblem::TrainingProblem(std::span<const SampleRecord> train_set, int classes, const TrainConfig& cfg)
    : samples_(train_set), cfg_(cfg) {
  validate(cfg);
  if (train_set.empty()) throw ConfigError("train: empty training set");
  for (const auto& s : train_set) {
    if (s.exact_sizes.size() != std::size_t(classes)) throw ConfigError("train: sample " + s.id + " has the wrong class count");
    if (s.tags.empty()) throw ConfigError("train: sample " + s.id + " has an empty tag set");
    if (mode_needs_seeds(cfg.mode) && !s.seeds)
      throw ConfigError("train: mode " + to_string(cfg.mode) + " needs seeds but sample " + s.id + " has none");
    if (s.seeds) validate_seeds(*s.seeds, s.mask.pixels(), classes);
  }

  std::optional<CategoricalDist> mean_target;
  if (cfg.mode == SupervisionMode::FixedMeanSize) mean_target = dataset_mean_sizes(train_set);

  std::vector<double> bounds = cfg.barrier.lower_bounds;
  if (cfg.mode == SupervisionMode::QuadBarrierSeeds && bounds.empty()) {
    bounds.assign(std::size_t(classes), 1.0);
    for (const auto& s : train_set)
      for (int t : s.tags) bounds[std::size_t(t)] = std::min(bounds[std::size_t(t)], s.exact_sizes[std::size_t(t)]);
    for (double& b : bounds) b = b == 1.0 ? 0.0 : b * cfg.derived_bound_scale;
  }
  if (cfg.mode == SupervisionMode::QuadBarrierSeeds && bounds.size() != std::size_t(classes))
    throw ConfigError("train: barrier lower bounds need one value per class");

  const Rng corruption_root = Rng(cfg.seed).split(kCorruptionStream);
  prepared_.resize(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const auto& s = train_set[i];
    auto& p = prepared_[i];
    p.inv_pixels = 1.0 / double(s.mask.pixels());
    if (mode_uses_crf(cfg.mode) && cfg.crf_weight > 0.0) p.graph = build_affinity(s.image, cfg.affinity);
    if (cfg.mode == SupervisionMode::FixedMeanSize) {
      p.target = restrict_to_tags(*mean_target, s.tags);
    } else if (mode_uses_size_targets(cfg.mode)) {
      const CategoricalDist& base = s.sizes ? *s.sizes : s.exact_sizes;
      Rng rng = corruption_root.split(i);
      p.target = corrupt_sizes(base, cfg.corruption_sigma, rng);
    }
    if (cfg.mode == SupervisionMode::QuadBarrierSeeds) {
      p.lower_bounds.assign(std::size_t(classes), 0.0);
      for (int t : s.tags) p.lower_bounds[std::size_t(t)] = bounds[std::size_t(t)];
    }
  }
}

TrainingProblem::~TrainingProblem() = default;
TrainingProblem::TrainingProblem(TrainingProblem&&) noexcept = default;
TrainingProblem& TrainingProblem::operator=(TrainingProblem&&) noexcept = default;

std::size_t TrainingProblem::size() const { return prepared_.size(); }

LossValue TrainingProblem::loss(std::size_t index, const PredictionField& field) const {
  const auto& s = samples_[index];
  const auto& p = prepared_[index];
  const LossOptions opts{cfg_.log_floor};
  LossValue out{0.0, false, std::vector<double>(field.probs().size(), 0.0)};

  auto add_crf = [&] {
    if (p.graph) accumulate(out, crf_loss(field, *p.graph), cfg_.crf_weight * p.inv_pixels);
  };
  auto add_pce = [&] {
    if (s.seeds && !s.seeds->empty() && cfg_.pce_weight > 0.0)
      accumulate(out, partial_ce_loss(field, *s.seeds, opts), cfg_.pce_weight / double(s.seeds->size()));
  };

  switch (cfg_.mode) {
    case SupervisionMode::FullMask:
      accumulate(out, mask_cross_entropy(field, s.mask, opts));
      break;
    case SupervisionMode::Size:
      accumulate(out, size_target_loss(field, *p.target, opts), cfg_.size_weight);
      break;
    case SupervisionMode::SizeCrf:
      accumulate(out, size_target_loss(field, *p.target, opts), cfg_.size_weight);
      add_crf();
      break;
    case SupervisionMode::SizeCrfSeeds:
    case SupervisionMode::FixedMeanSize:
      accumulate(out, size_target_loss(field, *p.target, opts), cfg_.size_weight);
      add_crf();
      add_pce();
      break;
    case SupervisionMode::ExpandCrf:
      accumulate(out, expansion_loss(field, s.tags, opts), cfg_.size_weight);
      add_crf();
      break;
    case SupervisionMode::FlatBarrierCrf:
      accumulate(out, flat_log_barrier(field, s.tags, cfg_.barrier, opts), cfg_.size_weight);
      add_crf();
      break;
    case SupervisionMode::QuadBarrierSeeds: {
      BarrierConfig b = cfg_.barrier;
      b.lower_bounds = p.lower_bounds;
      accumulate(out, quadratic_barrier(field, b), cfg_.size_weight);
      std::vector<bool> tagged(std::size_t(field.classes()), false);
      for (int t : s.tags) tagged[std::size_t(t)] = true;
      for (int k = 0; k < field.classes(); ++k)
        if (!tagged[std::size_t(k)]) accumulate(out, absent_class_suppressor(field, k), cfg_.size_weight);
      add_pce();
      break;
    }
    case SupervisionMode::SeedsOnly:
      add_pce();
      break;
  }
  if (out.saturated) out.value = cfg_.saturation_clamp;
  if (std::isnan(out.value)) throw RuntimeFailure("train: NaN loss on sample " + s.id);
  return out;
}

std::vector<SampleRecord> TrainingProblem::samples_with_targets() const {
  std::vector<SampleRecord> out(samples_.begin(), samples_.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].sizes = prepared_[i].target;
  return out;
}

Metrics evaluate(const ModelConfig& model, const ModelParams& params, std::span<const SampleRecord> dataset,
                 int threads) {
  if (dataset.empty()) throw DomainError("evaluate: empty dataset");
  std::vector<ConfusionMatrix> per_image(dataset.size(), ConfusionMatrix(model.classes));
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    const auto field = forward(model, params, dataset[i].image);
    per_image[i].add(dataset[i].mask, argmax_labels(field));
  });
  Metrics m;
  m.confusion = ConfusionMatrix(model.classes);
  for (const auto& cm : per_image) m.confusion += cm;
  m.miou = miou(m.confusion);
  m.dice = dice(m.confusion);
  m.images = dataset.size();
  return m;
}

std::string checkpoint_id(const ModelConfig& model, const ModelParams& params) {
  const std::string bytes = checkpoint_bytes(model, params);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

namespace {

double mean_objective(const TrainingProblem& problem, const ModelConfig& model, const ModelParams& params,
                      std::span<const SampleRecord> train_set, int threads) {
  std::vector<double> values(train_set.size());
  parallel_for(train_set.size(), threads, [&](std::size_t i) {
    values[i] = problem.loss(i, forward(model, params, train_set[i].image)).value;
  });
  return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
}

}  // namespace

TrainReport train(std::span<const SampleRecord> train_set, std::span<const SampleRecord> val_set,
                  const ModelConfig& model, const TrainConfig& cfg, const ProgressCallback& progress) {
  const auto start = std::chrono::steady_clock::now();
  validate(model);
  for (const auto& s : train_set)
    if (s.image.channels != model.in_channels) throw ConfigError("train: image channels do not match the model");
  TrainingProblem problem(train_set, model.classes, cfg);

  TrainReport report;
  report.mode = to_string(cfg.mode);
  if (mode_uses_size_targets(cfg.mode)) {
    const auto with_targets = problem.samples_with_targets();
    report.train_mre = mre(with_targets);
  }

  ModelParams params = init_params(model);
  std::vector<double> velocity(params.values.size(), 0.0);
  report.initial_loss = mean_objective(problem, model, params, train_set, cfg.threads);
  if (!std::isfinite(report.initial_loss)) throw RuntimeFailure("train: non-finite initial loss");

  const std::size_t n = train_set.size();
  const std::size_t batch = std::min<std::size_t>(std::size_t(cfg.batch_size), n);
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;
  const std::int64_t total_steps = std::int64_t(batches_per_epoch) * cfg.epochs;
  std::int64_t step = 0;

  std::vector<std::size_t> order(n);
  std::vector<std::vector<double>> grads(batch);
  std::vector<double> losses(batch);
  const Rng shuffle_root = Rng(cfg.seed).split(kShuffleStream);
  std::optional<double> best;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = shuffle_root.split(std::uint64_t(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[std::size_t(shuffle.uniform_int(0, int(i) - 1))]);

    double epoch_loss = 0.0;
    double epoch_lr = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += batch) {
      const std::size_t count = std::min(batch, n - b0);
      parallel_for(count, cfg.threads, [&](std::size_t j) {
        const std::size_t idx = order[b0 + j];
        ForwardCache cache;
        const auto field = forward(model, params, train_set[idx].image, cache);
        const auto l = problem.loss(idx, field);
        losses[j] = l.value;
        grads[j] = backward(model, params, cache, l.grad);
      });
      const double lr = lr_at(step, total_steps, cfg);
      const double scale = 1.0 / double(count);
      for (std::size_t i = 0; i < params.values.size(); ++i) {
        double g = 0.0;
        for (std::size_t j = 0; j < count; ++j) g += grads[j][i];
        g = g * scale + cfg.weight_decay * params.values[i];
        velocity[i] = cfg.momentum * velocity[i] + g;
        params.values[i] -= lr * velocity[i];
      }
      for (std::size_t j = 0; j < count; ++j) epoch_loss += losses[j];
      epoch_lr = lr;
      ++step;
    }
    for (double v : params.values)
      if (!std::isfinite(v)) throw RuntimeFailure("train: parameters diverged in epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = epoch_loss / double(n);
    rec.learning_rate = epoch_lr;
    const bool eval_now = cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    if (eval_now && !val_set.empty()) {
      const auto m = evaluate(model, params, val_set, cfg.threads);
      rec.val_miou = m.miou;
      rec.val_dice = m.dice;
      if (!best || m.miou > *best) {
        best = m.miou;
        report.best_epoch = epoch;
        report.best_params = params;
      }
    }
    if (eval_now && cfg.eval_train) rec.train_miou = evaluate(model, params, train_set, cfg.threads).miou;
    report.epochs.push_back(rec);
    if (progress) progress(rec);
  }

  report.final_loss = mean_objective(problem, model, params, train_set, cfg.threads);
  report.final_params = params;
  if (report.best_params.values.empty()) {
    report.best_params = params;
    report.best_epoch = cfg.epochs;
  }
  report.best_val_miou = best;
  if (!report.epochs.empty()) {
    report.final_val_miou = report.epochs.back().val_miou;
    report.final_val_dice = report.epochs.back().val_dice;
  }
  report.final_checkpoint_id = checkpoint_id(model, report.final_params);
  report.best_checkpoint_id = checkpoint_id(model, report.best_params);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["poly_power"] = cfg.poly_power;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["size_weight"] = cfg.size_weight;
  j["crf_weight"] = cfg.crf_weight;
  j["pce_weight"] = cfg.pce_weight;
  j["corruption_sigma"] = cfg.corruption_sigma;
  j["barrier_epsilon"] = cfg.barrier.epsilon;
  j["barrier_lower_bounds"] = cfg.barrier.lower_bounds;
  j["derived_bound_scale"] = cfg.derived_bound_scale;
  j["flat_barrier_form"] = cfg.barrier.flat_form == FlatBarrierForm::LiteralMax ? "literal-max" : "zero-above-threshold";
  if (cfg.affinity.bandwidth) j["affinity_bandwidth"] = *cfg.affinity.bandwidth;
  j["affinity_radius"] = cfg.affinity.radius;
  j["affinity_connectivity"] = cfg.affinity.connectivity == Connectivity::Four    ? "4"
                               : cfg.affinity.connectivity == Connectivity::Eight ? "8"
                                                                                  : "disc";
  j["log_floor"] = cfg.log_floor;
  j["saturation_clamp"] = cfg.saturation_clamp;
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["threads"] = cfg.threads;
  j["eval_train"] = cfg.eval_train;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("train config: top level must be an object");
  static const std::vector<std::string> known = {
      "mode", "epochs", "batch_size", "learning_rate", "poly_power", "momentum", "weight_decay", "size_weight",
      "crf_weight", "pce_weight", "corruption_sigma", "mre", "barrier_epsilon", "barrier_lower_bounds", "derived_bound_scale",
      "flat_barrier_form", "affinity_bandwidth", "affinity_radius", "affinity_connectivity", "log_floor",
      "saturation_clamp", "seed", "eval_every", "threads", "eval_train"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("train config: unknown key '" + key + "'");
  try {
    if (j.contains("mode")) cfg.mode = supervision_mode_from_string(j["mode"].get<std::string>());
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.poly_power = j.value("poly_power", cfg.poly_power);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.size_weight = j.value("size_weight", cfg.size_weight);
    cfg.crf_weight = j.value("crf_weight", cfg.crf_weight);
    cfg.pce_weight = j.value("pce_weight", cfg.pce_weight);
    cfg.corruption_sigma = j.value("corruption_sigma", cfg.corruption_sigma);
    if (j.contains("mre")) cfg.corruption_sigma = sigma_for_mre(j["mre"].get<double>());
    cfg.barrier.epsilon = j.value("barrier_epsilon", cfg.barrier.epsilon);
    cfg.barrier.lower_bounds = j.value("barrier_lower_bounds", cfg.barrier.lower_bounds);
    cfg.derived_bound_scale = j.value("derived_bound_scale", cfg.derived_bound_scale);
    if (j.contains("flat_barrier_form")) {
      const auto form = j["flat_barrier_form"].get<std::string>();
      if (form == "literal-max")
        cfg.barrier.flat_form = FlatBarrierForm::LiteralMax;
      else if (form == "zero-above-threshold")
        cfg.barrier.flat_form = FlatBarrierForm::ZeroAboveThreshold;
      else
        throw ConfigError("train config: unknown flat_barrier_form '" + form + "'");
    }
    if (j.contains("affinity_bandwidth")) cfg.affinity.bandwidth = j["affinity_bandwidth"].get<double>();
    cfg.affinity.radius = j.value("affinity_radius", cfg.affinity.radius);
    if (j.contains("affinity_connectivity")) {
      const auto c = j["affinity_connectivity"].get<std::string>();
      if (c == "4")
        cfg.affinity.connectivity = Connectivity::Four;
      else if (c == "8")
        cfg.affinity.connectivity = Connectivity::Eight;
      else if (c == "disc")
        cfg.affinity.connectivity = Connectivity::Disc;
      else
        throw ConfigError("train config: affinity_connectivity must be 4, 8 or disc");
    }
    cfg.log_floor = j.value("log_floor", cfg.log_floor);
    cfg.saturation_clamp = j.value("saturation_clamp", cfg.saturation_clamp);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.eval_train = j.value("eval_train", cfg.eval_train);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string report_to_json(const TrainReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_loss", e.mean_loss},
                      {"learning_rate", e.learning_rate},
                      {"train_miou", opt(e.train_miou)},
                      {"val_miou", opt(e.val_miou)},
                      {"val_dice", opt(e.val_dice)}});
  json j{{"mode", r.mode},
         {"epochs", epochs},
         {"initial_loss", r.initial_loss},
         {"final_loss", r.final_loss},
         {"train_mre", r.train_mre},
         {"best_epoch", r.best_epoch},
         {"best_val_miou", opt(r.best_val_miou)},
         {"final_val_miou", opt(r.final_val_miou)},
         {"final_val_dice", opt(r.final_val_dice)},
         {"final_checkpoint_id", r.final_checkpoint_id},
         {"best_checkpoint_id", r.best_checkpoint_id}};
  return j.dump(2) + "\n";
}

std::string report_summary(const TrainReport& r) {
  std::ostringstream os;
  char line[160];
  os << "mode " << r.mode << "  train mRE " << r.train_mre << "\n";
  std::snprintf(line, sizeof line, "%6s %12s %10s %10s %10s\n", "epoch", "loss", "lr", "val_mIoU", "val_DSC");
  os << line;
  for (const auto& e : r.epochs) {
    std::snprintf(line, sizeof line, "%6d %12.6f %10.6f %10s %10s\n", e.epoch, e.mean_loss, e.learning_rate,
                  e.val_miou ? std::to_string(*e.val_miou).c_str() : "-",
                  e.val_dice ? std::to_string(*e.val_dice).c_str() : "-");
    os << line;
  }
  os << "initial loss " << r.initial_loss << "  final loss " << r.final_loss << "\n";
  os << "final checkpoint " << r.final_checkpoint_id << "  best epoch " << r.best_epoch << " (" << r.best_checkpoint_id
     << ")\n";
  return os.str();
}

}  // namespace sizeseg

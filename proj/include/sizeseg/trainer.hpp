#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sizeseg/affinity.hpp"
#include "sizeseg/eval.hpp"
#include "sizeseg/losses.hpp"
#include "sizeseg/net.hpp"
#include "sizeseg/synthdata.hpp"

namespace sizeseg {

enum class SupervisionMode {
  FullMask,          // cross-entropy on every pixel
  Size,              // KL(v || S_mean)
  SizeCrf,           // size + CRF
  SizeCrfSeeds,      // size + CRF + partial CE
  ExpandCrf,         // expansion log-barrier + CRF
  FlatBarrierCrf,    // flat-bottom log-barrier + CRF
  QuadBarrierSeeds,  // quadratic size barrier + partial CE + absent-class suppressor
  SeedsOnly,         // partial CE
  FixedMeanSize,     // size loss against the dataset-mean target (+ CRF, + partial CE when seeds exist)
};

std::string to_string(SupervisionMode m);
SupervisionMode supervision_mode_from_string(const std::string& s);
bool mode_uses_crf(SupervisionMode m);
bool mode_needs_seeds(SupervisionMode m);
bool mode_uses_size_targets(SupervisionMode m);

/// Reference values from the original full-scale setup (SGD, batch 16,
/// initial LR 0.005, poly power 0.9, 60 or 200 epochs). Documentation only;
/// the desk-scale defaults below differ.
struct FullScaleReference {
  static constexpr int batch_size = 16;
  static constexpr double learning_rate = 0.005;
  static constexpr double poly_power = 0.9;
  static constexpr int epochs_natural = 60;
  static constexpr int epochs_medical = 200;
};

struct TrainConfig {
  SupervisionMode mode = SupervisionMode::SizeCrf;
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 0.05;
  double poly_power = 0.9;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double size_weight = 1.0;
  /// Weight of the CRF term per pixel: the image's CRF loss enters as
  /// crf_weight * L_crf / |Omega|.
  double crf_weight = 0.1;
  /// Weight of the partial CE term per seed: enters as pce_weight * L_pce / |Seeds|.
  double pce_weight = 1.0;
  /// Std of the multiplicative size-target noise (0 = exact targets).
  double corruption_sigma = 0.0;
  /// Flat barrier epsilon and quadratic barrier lower bounds. Empty lower
  /// bounds are derived per class as the smallest exact size among training
  /// images that contain the class, times derived_bound_scale.
  BarrierConfig barrier;
  double derived_bound_scale = 0.5;
  AffinityConfig affinity;
  double log_floor = kDefaultLogFloor;
  /// Saturated (infinite) losses are clamped to this value; NaN aborts.
  double saturation_clamp = 1e6;
  std::uint64_t seed = 0;
  /// Evaluate on the validation set every this many epochs (0 disables).
  int eval_every = 1;
  /// Worker threads for per-image forward/backward within a batch.
  int threads = 1;
  /// Also compute train mIoU at each evaluation point.
  bool eval_train = false;
};

void validate(const TrainConfig& cfg);

/// Polynomial decay lr0 * (1 - step / total)^power.
double lr_at(std::int64_t step, std::int64_t total, const TrainConfig& cfg);

struct Metrics {
  ConfusionMatrix confusion;
  double miou = 0.0;
  double dice = 0.0;
  std::size_t images = 0;
};

/// Forward pass over every sample, merged confusion matrix, no updates.
Metrics evaluate(const ModelConfig& model, const ModelParams& params, std::span<const SampleRecord> dataset,
                 int threads = 1);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  std::optional<double> train_miou;
  std::optional<double> val_miou;
  std::optional<double> val_dice;
};

struct TrainReport {
  std::string mode;
  std::vector<EpochRecord> epochs;
  /// Mean per-image training objective before the first step and after the last.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// mRE of the size targets actually used (0 for modes without targets).
  double train_mre = 0.0;
  int best_epoch = 0;
  std::optional<double> best_val_miou;
  std::optional<double> final_val_miou;
  std::optional<double> final_val_dice;
  std::string final_checkpoint_id;
  std::string best_checkpoint_id;
  ModelParams final_params;
  ModelParams best_params;
  /// Not part of the JSON report (it is not reproducible).
  double wall_seconds = 0.0;
};

using ProgressCallback = std::function<void(const EpochRecord&)>;

/// SGD with momentum over mini-batches (batch gradient = mean of per-image
/// gradients), polynomial learning-rate decay, deterministic given the seed.
TrainReport train(std::span<const SampleRecord> train_set, std::span<const SampleRecord> val_set,
                  const ModelConfig& model, const TrainConfig& cfg, const ProgressCallback& progress = {});

/// Per-image training objective and logit gradient as used by `train`.
struct PreparedSample;
struct TrainingProblem {
  TrainingProblem(std::span<const SampleRecord> train_set, int classes, const TrainConfig& cfg);
  ~TrainingProblem();
  TrainingProblem(TrainingProblem&&) noexcept;
  TrainingProblem& operator=(TrainingProblem&&) noexcept;

  std::size_t size() const;
  LossValue loss(std::size_t index, const PredictionField& field) const;
  /// Targets in use (only for modes with size targets).
  std::vector<SampleRecord> samples_with_targets() const;

 private:
  std::vector<PreparedSample> prepared_;
  std::span<const SampleRecord> samples_;
  TrainConfig cfg_;
};

/// 64-bit FNV-1a of the checkpoint bytes, as 16 hex digits.
std::string checkpoint_id(const ModelConfig& model, const ModelParams& params);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});
/// Deterministic JSON (no wall time).
std::string report_to_json(const TrainReport& report);
std::string report_summary(const TrainReport& report);

}  // namespace sizeseg

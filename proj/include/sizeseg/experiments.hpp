#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sizeseg/dataset_io.hpp"
#include "sizeseg/net.hpp"
#include "sizeseg/trainer.hpp"

namespace sizeseg {

// Loss probe: every loss op evaluated on one field, with finite-difference
// residuals of the logit gradient.

struct LossProbeInput {
  int height = 0;
  int width = 0;
  int classes = 0;
  std::vector<double> logits;
  /// Optional H x W x C raster for the affinity graph; a constant image otherwise.
  std::optional<Image> image;
  AffinityConfig affinity;
  CategoricalDist target;
  /// Target of the balance loss (defaults to `target`).
  CategoricalDist balance_target;
  TagSet tags;
  SeedSet seeds;
  BarrierConfig barrier;
  int absent_class = 0;
  /// Per-pixel labels for the batch losses (argmax of the logits when empty).
  std::vector<int> labels;
  WeightedCEConfig weighted;
  LossOptions options{0.0};
};

/// JSON keys: height, width, classes, logits (pixel-major), and optionally
/// image + channels, target, tags, seeds ([[x, y, label], ...]), lower_bounds,
/// epsilon, flat_form, absent_class, labels, class_counts, beta, bandwidth,
/// log_floor. Missing target defaults to uniform, tags to all classes.
LossProbeInput parse_probe_input(const std::string& text);
/// Reproducible random instance (logits N(0, 2^2), random tags, seeds and targets).
LossProbeInput random_probe_input(int height, int width, int classes, std::uint64_t seed);

struct ProbeRow {
  std::string op;
  double value = 0.0;
  /// "ok", "saturated" or "undefined".
  std::string status = "ok";
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Names of the probed ops, in table order.
const std::vector<std::string>& probed_ops();
std::vector<ProbeRow> run_loss_probe(const LossProbeInput& input, double h = 1e-5);
std::string probe_to_csv(const std::vector<ProbeRow>& rows);
std::string probe_to_table(const std::vector<ProbeRow>& rows);

// Sweeps over supervision mode x mRE x seed (x scribble ratio).

struct SweepConfig {
  std::vector<SupervisionMode> modes;
  std::vector<double> mre_levels{0.0};
  std::vector<std::uint64_t> seeds{0};
  /// Seed stroke length ratios for modes that use seeds (0 = one click).
  std::vector<double> scribble_ratios{0.0};
  TrainConfig train;
  ModelConfig model;
  /// Concurrent points.
  int workers = 1;
};

void validate(const SweepConfig& cfg);
std::string sweep_config_to_json(const SweepConfig& cfg);
SweepConfig sweep_config_from_json(const std::string& text, SweepConfig base = {});

struct RunRow {
  std::string mode;
  double mre = 0.0;
  double scribble_ratio = 0.0;
  std::uint64_t seed = 0;
  double train_mre = 0.0;
  double val_miou = 0.0;
  double val_dice = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string checkpoint_id;
};

struct SummaryRow {
  std::string mode;
  double mre = 0.0;
  double sigma = 0.0;
  double scribble_ratio = 0.0;
  std::size_t runs = 0;
  double mean_miou = 0.0;
  double std_miou = 0.0;
  double mean_dice = 0.0;
  double std_dice = 0.0;
};

/// Directory name of one sweep point.
std::string point_name(const std::string& mode, double mre, double scribble_ratio, std::uint64_t seed);

/// Runs every grid point, writing <out>/points/<name>/{report.json,checkpoint.bin},
/// <out>/runs.csv and <out>/summary.csv. Rows follow grid order regardless of
/// worker count.
std::vector<RunRow> run_sweep(const Dataset& train_set, const Dataset& val_set, const SweepConfig& cfg,
                              const std::filesystem::path& out_dir,
                              const std::function<void(const RunRow&)>& progress = {});

std::string runs_to_csv(const std::vector<RunRow>& rows);
std::vector<RunRow> runs_from_csv(const std::string& text);
/// Mean and sample standard deviation per (mode, mRE, scribble ratio), in
/// first-appearance order.
std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

enum class PlotMetric { MIoU, Dice };
/// Line chart of the metric against mRE, one line per mode.
std::string svg_plot(const std::vector<SummaryRow>& rows, PlotMetric metric);

/// Reads <run_dir>/runs.csv and writes <run_dir>/report/{summary.txt,
/// summary.csv, miou_vs_mre.svg, dice_vs_mre.svg}. Returns the summary text.
std::string write_report(const std::filesystem::path& run_dir);

}  // namespace sizeseg

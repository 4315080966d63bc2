#include "sizeseg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sizeseg/errors.hpp"
#include "sizeseg/gradcheck.hpp"
#include "sizeseg/pngio.hpp"
#include "sizeseg/rng.hpp"

namespace sizeseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw RuntimeFailure("cannot write " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Loss probe

LossProbeInput parse_probe_input(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("probe input: ") + e.what());
  }
  LossProbeInput in;
  try {
    in.height = j.at("height").get<int>();
    in.width = j.at("width").get<int>();
    in.classes = j.at("classes").get<int>();
    in.logits = j.at("logits").get<std::vector<double>>();
    if (in.height < 1 || in.width < 1 || in.classes < 2) throw ConfigError("probe input: bad dimensions");
    if (in.logits.size() != std::size_t(in.height) * in.width * in.classes)
      throw ConfigError("probe input: logits must have height*width*classes entries");
    if (j.contains("image")) {
      const int c = j.value("channels", 3);
      Image img(in.height, in.width, c);
      img.data = j["image"].get<std::vector<double>>();
      if (img.data.size() != std::size_t(in.height) * in.width * c)
        throw ConfigError("probe input: image must have height*width*channels entries");
      in.image = std::move(img);
    }
    if (j.contains("bandwidth")) in.affinity.bandwidth = j["bandwidth"].get<double>();
    const int K = in.classes;
    if (j.contains("tags")) {
      in.tags = j["tags"].get<TagSet>();
    } else {
      in.tags.resize(std::size_t(K));
      std::iota(in.tags.begin(), in.tags.end(), 0);
    }
    validate_tags(in.tags, K);
    in.target = j.contains("target") ? CategoricalDist(j["target"].get<std::vector<double>>()) : uniform_over(in.tags, K);
    if (in.target.size() != std::size_t(K)) throw ConfigError("probe input: target needs one entry per class");
    in.balance_target = j.contains("balance_target") ? CategoricalDist(j["balance_target"].get<std::vector<double>>())
                                                     : in.target;
    if (j.contains("seeds"))
      for (const auto& s : j["seeds"]) {
        const int x = s.at(0).get<int>(), y = s.at(1).get<int>();
        if (x < 0 || x >= in.width || y < 0 || y >= in.height) throw ConfigError("probe input: seed outside the image");
        in.seeds.push_back({std::uint32_t(y * in.width + x), s.at(2).get<int>()});
      }
    std::sort(in.seeds.begin(), in.seeds.end(), [](const Seed& a, const Seed& b) { return a.pixel < b.pixel; });
    validate_seeds(in.seeds, std::size_t(in.height) * in.width, K);
    in.barrier.epsilon = j.value("epsilon", in.barrier.epsilon);
    in.barrier.lower_bounds = j.value("lower_bounds", std::vector<double>(std::size_t(K), 0.1));
    if (in.barrier.lower_bounds.size() != std::size_t(K)) throw ConfigError("probe input: lower_bounds needs K entries");
    if (j.value("flat_form", std::string("zero-above-threshold")) == "literal-max")
      in.barrier.flat_form = FlatBarrierForm::LiteralMax;
    in.absent_class = j.value("absent_class", K - 1);
    if (in.absent_class < 0 || in.absent_class >= K) throw ConfigError("probe input: absent_class out of range");
    in.labels = j.value("labels", std::vector<int>{});
    in.weighted.beta = j.value("beta", in.weighted.beta);
    in.weighted.class_counts = j.value("class_counts", std::vector<double>(std::size_t(K), 10.0));
    in.options.log_floor = j.value("log_floor", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("probe input: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("probe input: ") + e.what());
  }
  return in;
}

LossProbeInput random_probe_input(int height, int width, int classes, std::uint64_t seed) {
  Rng rng(seed);
  LossProbeInput in;
  in.height = height;
  in.width = width;
  in.classes = classes;
  const std::size_t n = std::size_t(height) * width;
  in.logits.resize(n * std::size_t(classes));
  for (auto& z : in.logits) z = rng.normal(0.0, 2.0);
  Image img(height, width, 3);
  for (auto& v : img.data) v = rng.uniform();
  in.image = std::move(img);
  in.tags.push_back(0);
  for (int k = 1; k < classes; ++k)
    if (rng.uniform() < 0.5) in.tags.push_back(k);
  std::vector<double> t(std::size_t(classes), 0.0), b(std::size_t(classes), 0.0);
  for (int k : in.tags) t[std::size_t(k)] = rng.uniform(0.05, 1.0);
  for (auto& x : b) x = rng.uniform(0.05, 1.0);
  in.target = CategoricalDist::normalized(std::move(t));
  in.balance_target = CategoricalDist::normalized(std::move(b));
  std::vector<std::uint32_t> pixels(n);
  std::iota(pixels.begin(), pixels.end(), 0u);
  const int count = rng.uniform_int(1, int(std::min<std::size_t>(n, 6)));
  for (int i = 0; i < count; ++i) std::swap(pixels[std::size_t(i)], pixels[std::size_t(rng.uniform_int(i, int(n) - 1))]);
  for (int i = 0; i < count; ++i) in.seeds.push_back({pixels[std::size_t(i)], rng.uniform_int(0, classes - 1)});
  std::sort(in.seeds.begin(), in.seeds.end(), [](const Seed& a, const Seed& b) { return a.pixel < b.pixel; });
  in.barrier.epsilon = rng.uniform(0.1, 0.4);
  in.barrier.lower_bounds.resize(std::size_t(classes));
  for (auto& a : in.barrier.lower_bounds) a = rng.uniform(0.0, 0.5);
  in.absent_class = rng.uniform_int(0, classes - 1);
  in.labels.resize(n);
  for (auto& l : in.labels) l = rng.uniform_int(0, classes - 1);
  in.weighted.class_counts.resize(std::size_t(classes));
  for (auto& c : in.weighted.class_counts) c = double(rng.uniform_int(1, 50));
  return in;
}

const std::vector<std::string>& probed_ops() {
  static const std::vector<std::string> ops = {
      "size_target_loss", "crf_loss",           "partial_ce_loss",         "expansion_loss",
      "suppression_loss", "flat_log_barrier",   "quadratic_barrier",       "absent_class_suppressor",
      "fairness_loss",    "balance_loss",       "weighted_ce_loss",        "total_loss_image_level",
      "total_loss_seeded", "mask_cross_entropy"};
  return ops;
}

std::vector<ProbeRow> run_loss_probe(const LossProbeInput& in, double h) {
  const int H = in.height, W = in.width, K = in.classes;
  const int n = H * W;
  const Image image = in.image ? *in.image : Image(H, W, 1);
  const AffinityGraph graph = build_affinity(image, in.affinity);
  std::vector<int> labels = in.labels;
  if (labels.empty()) {
    const PredictionField f(H, W, K, in.logits);
    for (int p = 0; p < n; ++p) {
      const auto row = f.prob(std::size_t(p));
      labels.push_back(int(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  if (labels.size() != std::size_t(n)) throw ConfigError("probe input: labels must have one entry per pixel");
  LabelMap mask(H, W);
  for (int p = 0; p < n; ++p) mask.labels[std::size_t(p)] = std::uint8_t(labels[std::size_t(p)]);
  const auto& o = in.options;

  using Op = std::function<std::optional<LossValue>(const std::vector<double>&)>;
  auto pixel = [&](auto fn) -> Op {
    return [&, fn](const std::vector<double>& z) -> std::optional<LossValue> { return fn(PredictionField(H, W, K, z)); };
  };
  auto batch = [&](auto fn) -> Op {
    return [&, fn](const std::vector<double>& z) -> std::optional<LossValue> { return fn(PredictionField(1, n, K, z)); };
  };
  const std::vector<Op> ops = {
      pixel([&](const PredictionField& f) { return size_target_loss(f, in.target, o); }),
      pixel([&](const PredictionField& f) { return crf_loss(f, graph); }),
      pixel([&](const PredictionField& f) { return partial_ce_loss(f, in.seeds, o); }),
      pixel([&](const PredictionField& f) { return expansion_loss(f, in.tags, o); }),
      pixel([&](const PredictionField& f) { return suppression_loss(f, in.tags, o); }),
      pixel([&](const PredictionField& f) { return flat_log_barrier(f, in.tags, in.barrier, o); }),
      pixel([&](const PredictionField& f) { return quadratic_barrier(f, in.barrier); }),
      pixel([&](const PredictionField& f) { return absent_class_suppressor(f, in.absent_class); }),
      batch([&](const PredictionField& f) { return fairness_loss(f, o); }),
      batch([&](const PredictionField& f) { return balance_loss(f, in.balance_target, o); }),
      batch([&](const PredictionField& f) { return weighted_ce_loss(f, labels, in.weighted, o); }),
      pixel([&](const PredictionField& f) { return total_loss_image_level(f, in.target, graph, {}, o); }),
      pixel([&](const PredictionField& f) { return total_loss_seeded(f, in.target, graph, in.seeds, {}, o); }),
      pixel([&](const PredictionField& f) { return mask_cross_entropy(f, mask, o); }),
  };

  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    ProbeRow row;
    row.op = probed_ops()[i];
    const auto l = ops[i](in.logits);
    if (!l) {
      row.status = "undefined";
      row.value = std::nan("");
      rows.push_back(row);
      continue;
    }
    row.value = l->value;
    if (l->saturated) {
      row.status = "saturated";
      rows.push_back(row);
      continue;
    }
    const auto f = [&](std::span<const double> z) {
      const auto v = ops[i](std::vector<double>(z.begin(), z.end()));
      return v ? v->value : std::nan("");
    };
    const auto check = check_gradient(f, in.logits, l->grad, h);
    row.max_rel_error = check.max_rel_error;
    row.max_abs_error = check.max_abs_error;
    rows.push_back(row);
  }
  return rows;
}

std::string probe_to_csv(const std::vector<ProbeRow>& rows) {
  std::string out = "op,value,status,max_rel_error,max_abs_error\n";
  for (const auto& r : rows)
    out += r.op + "," + fmt("%.12g", r.value) + "," + r.status + "," + fmt("%.3e", r.max_rel_error) + "," +
           fmt("%.3e", r.max_abs_error) + "\n";
  return out;
}

std::string probe_to_table(const std::vector<ProbeRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %16s %10s %12s %12s\n", "op", "value", "status", "rel_err", "abs_err");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %16.10g %10s %12.3e %12.3e\n", r.op.c_str(), r.value, r.status.c_str(),
                  r.max_rel_error, r.max_abs_error);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

void validate(const SweepConfig& cfg) {
  if (cfg.modes.empty() || cfg.mre_levels.empty() || cfg.seeds.empty() || cfg.scribble_ratios.empty())
    throw ConfigError("sweep: empty grid (modes, mRE levels, seeds and scribble ratios all need at least one value)");
  for (double m : cfg.mre_levels)
    if (!(m >= 0.0)) throw ConfigError("sweep: mRE levels must be >= 0");
  for (double r : cfg.scribble_ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("sweep: scribble ratios must lie in [0, 1]");
  if (cfg.workers < 1) throw ConfigError("sweep: workers must be >= 1");
  validate(cfg.train);
  validate(cfg.model);
}

std::string sweep_config_to_json(const SweepConfig& cfg) {
  json j;
  json modes = json::array();
  for (auto m : cfg.modes) modes.push_back(to_string(m));
  j["modes"] = modes;
  j["mre_levels"] = cfg.mre_levels;
  j["seeds"] = cfg.seeds;
  j["scribble_ratios"] = cfg.scribble_ratios;
  j["workers"] = cfg.workers;
  j["train"] = json::parse(train_config_to_json(cfg.train));
  j["model"] = json::parse(config_to_json(cfg.model));
  return j.dump(2);
}

SweepConfig sweep_config_from_json(const std::string& text, SweepConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  try {
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j["modes"]) cfg.modes.push_back(supervision_mode_from_string(m.get<std::string>()));
    }
    cfg.mre_levels = j.value("mre_levels", cfg.mre_levels);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.scribble_ratios = j.value("scribble_ratios", cfg.scribble_ratios);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("train")) cfg.train = train_config_from_json(j["train"].dump(), cfg.train);
    if (j.contains("model")) cfg.model = config_from_json(j["model"].dump());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string point_name(const std::string& mode, double mre, double scribble_ratio, std::uint64_t seed) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_mre%.4f_scr%.4f_seed%llu", mode.c_str(), mre, scribble_ratio,
                static_cast<unsigned long long>(seed));
  return buf;
}

namespace {

struct GridPoint {
  SupervisionMode mode;
  double mre;
  double ratio;
  std::uint64_t seed;
};

bool point_uses_seeds(SupervisionMode m) { return mode_needs_seeds(m) || m == SupervisionMode::FixedMeanSize; }

RunRow run_point(const Dataset& train_set, const Dataset& val_set, const SweepConfig& cfg, const GridPoint& g,
                 const fs::path& dir) {
  std::vector<SampleRecord> samples = train_set.samples;
  if (point_uses_seeds(g.mode)) {
    const Rng root = Rng(g.seed).split(0x53454544ULL);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Rng r = root.split(i);
      samples[i].seeds = generate_scribbles(samples[i].mask, train_set.classes, {g.ratio, 1, r.next_u64()});
    }
  } else {
    for (auto& s : samples) s.seeds.reset();
  }
  TrainConfig tc = cfg.train;
  tc.mode = g.mode;
  tc.corruption_sigma = sigma_for_mre(g.mre);
  tc.seed = g.seed;
  ModelConfig mc = cfg.model;
  mc.init_seed = g.seed;
  mc.classes = train_set.classes;
  const auto report = train(samples, val_set.samples, mc, tc);

  RunRow row;
  row.mode = to_string(g.mode);
  row.mre = g.mre;
  row.scribble_ratio = point_uses_seeds(g.mode) ? g.ratio : 0.0;
  row.seed = g.seed;
  row.train_mre = report.train_mre;
  if (report.final_val_miou) {
    row.val_miou = *report.final_val_miou;
    row.val_dice = report.final_val_dice.value_or(0.0);
  } else {
    const auto m = evaluate(mc, report.final_params, val_set.samples, tc.threads);
    row.val_miou = m.miou;
    row.val_dice = m.dice;
  }
  row.initial_loss = report.initial_loss;
  row.final_loss = report.final_loss;
  row.checkpoint_id = report.final_checkpoint_id;

  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(report));
  write_text(dir / "train_config.json", train_config_to_json(tc) + "\n");
  save_checkpoint(dir / "checkpoint.bin", mc, report.final_params);
  return row;
}

}  // namespace

std::vector<RunRow> run_sweep(const Dataset& train_set, const Dataset& val_set, const SweepConfig& cfg,
                              const fs::path& out_dir, const std::function<void(const RunRow&)>& progress) {
  validate(cfg);
  if (train_set.samples.empty() || val_set.samples.empty()) throw ConfigError("sweep: empty train or validation set");
  if (train_set.classes != val_set.classes) throw ConfigError("sweep: train and validation class counts differ");

  std::vector<GridPoint> grid;
  for (auto mode : cfg.modes) {
    const bool seeded = point_uses_seeds(mode);
    const std::vector<double> mres = mode_uses_size_targets(mode) && mode != SupervisionMode::FixedMeanSize
                                         ? cfg.mre_levels
                                         : std::vector<double>{0.0};
    const std::vector<double> ratios = seeded ? cfg.scribble_ratios : std::vector<double>{0.0};
    for (double m : mres)
      for (double r : ratios)
        for (auto s : cfg.seeds) grid.push_back({mode, m, r, s});
  }

  fs::create_directories(out_dir);
  write_text(out_dir / "sweep_config.json", sweep_config_to_json(cfg) + "\n");
  std::vector<RunRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        const auto& g = grid[i];
        rows[i] = run_point(train_set, val_set, cfg, g,
                            out_dir / "points" / point_name(to_string(g.mode), g.mre, g.ratio, g.seed));
        if (progress) {
          std::lock_guard lock(progress_mutex);
          progress(rows[i]);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(cfg.workers, int(grid.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  write_text(out_dir / "runs.csv", runs_to_csv(rows));
  write_text(out_dir / "summary.csv", summary_to_csv(summarize(rows)));
  return rows;
}

std::string runs_to_csv(const std::vector<RunRow>& rows) {
  std::string out = "mode,mre,scribble_ratio,seed,train_mre,val_miou,val_dice,initial_loss,final_loss,checkpoint_id\n";
  for (const auto& r : rows)
    out += r.mode + "," + fmt("%.4f", r.mre) + "," + fmt("%.4f", r.scribble_ratio) + "," + std::to_string(r.seed) +
           "," + fmt("%.6f", r.train_mre) + "," + fmt("%.6f", r.val_miou) + "," + fmt("%.6f", r.val_dice) + "," +
           fmt("%.6f", r.initial_loss) + "," + fmt("%.6f", r.final_loss) + "," + r.checkpoint_id + "\n";
  return out;
}

std::vector<RunRow> runs_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("mode,mre,", 0) != 0) throw ConfigError("runs.csv: missing header");
  std::vector<RunRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw ConfigError("runs.csv: line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    try {
      RunRow r;
      r.mode = f[0];
      r.mre = std::stod(f[1]);
      r.scribble_ratio = std::stod(f[2]);
      r.seed = std::stoull(f[3]);
      r.train_mre = std::stod(f[4]);
      r.val_miou = std::stod(f[5]);
      r.val_dice = std::stod(f[6]);
      r.initial_loss = std::stod(f[7]);
      r.final_loss = std::stod(f[8]);
      r.checkpoint_id = f[9];
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ConfigError("runs.csv: bad number on line " + std::to_string(line_no));
    }
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<const RunRow*>> members;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.mode == r.mode && s.mre == r.mre && s.scribble_ratio == r.scribble_ratio;
    });
    if (it == out.end()) {
      out.push_back({r.mode, r.mre, sigma_for_mre(r.mre), r.scribble_ratio});
      members.emplace_back();
      it = out.end() - 1;
    }
    members[std::size_t(it - out.begin())].push_back(&r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& m = members[i];
    auto stats = [&](auto get, double& mean, double& sd) {
      double s = 0.0;
      for (auto* r : m) s += get(*r);
      mean = s / double(m.size());
      double ss = 0.0;
      for (auto* r : m) ss += (get(*r) - mean) * (get(*r) - mean);
      sd = m.size() > 1 ? std::sqrt(ss / double(m.size() - 1)) : 0.0;
    };
    out[i].runs = m.size();
    stats([](const RunRow& r) { return r.val_miou; }, out[i].mean_miou, out[i].std_miou);
    stats([](const RunRow& r) { return r.val_dice; }, out[i].mean_dice, out[i].std_dice);
  }
  return out;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "mode,mre,sigma,scribble_ratio,runs,mean_miou,std_miou,mean_dice,std_dice\n";
  for (const auto& r : rows)
    out += r.mode + "," + fmt("%.4f", r.mre) + "," + fmt("%.6f", r.sigma) + "," + fmt("%.4f", r.scribble_ratio) + "," +
           std::to_string(r.runs) + "," + fmt("%.6f", r.mean_miou) + "," + fmt("%.6f", r.std_miou) + "," +
           fmt("%.6f", r.mean_dice) + "," + fmt("%.6f", r.std_dice) + "\n";
  return out;
}

std::string svg_plot(const std::vector<SummaryRow>& rows, PlotMetric metric) {
  constexpr double w = 640, h = 420, left = 60, right = 170, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};
  double xmax = 0.0;
  for (const auto& r : rows) xmax = std::max(xmax, r.mre);
  if (xmax <= 0.0) xmax = 1.0;
  auto X = [&](double x) { return left + pw * x / xmax; };
  auto Y = [&](double y) { return top + ph * (1.0 - std::clamp(y, 0.0, 1.0)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.1f", Y(y) + 4) << "\" text-anchor=\"end\">" << fmt("%.1f", y) << "</text>\n";
    const double x = xmax * i / 5.0;
    os << "<text x=\"" << fmt("%.1f", X(x)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt("%.0f%%", 100 * x) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">mRE</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2 << ")\" text-anchor=\"middle\">"
     << (metric == PlotMetric::MIoU ? "mIoU" : "DSC") << "</text>\n";

  std::vector<std::string> modes;
  for (const auto& r : rows)
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<const SummaryRow*> pts;
    for (const auto& r : rows)
      if (r.mode == modes[m]) pts.push_back(&r);
    std::stable_sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->mre < b->mre; });
    const char* color = colors[m % std::size(colors)];
    auto val = [&](const SummaryRow* r) { return metric == PlotMetric::MIoU ? r->mean_miou : r->mean_dice; };
    if (pts.size() == 1) {
      // Single-level modes are drawn as horizontal reference lines.
      os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt("%.1f", Y(val(pts[0]))) << "\" y2=\""
         << fmt("%.1f", Y(val(pts[0]))) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        os << (i ? " " : "") << fmt("%.1f", X(pts[i]->mre)) << "," << fmt("%.1f", Y(val(pts[i])));
      os << "\"/>\n";
    }
    for (auto* p : pts)
      if (pts.size() > 1)
        os << "<circle cx=\"" << fmt("%.1f", X(p->mre)) << "\" cy=\"" << fmt("%.1f", Y(val(p))) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 14 + 18.0 * double(m);
    os << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << modes[m] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string write_report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw ConfigError("report: run directory " + run_dir.string() + " does not exist");
  const fs::path runs_path = run_dir / "runs.csv";
  if (!fs::exists(runs_path)) throw ConfigError("report: " + runs_path.string() + " not found");
  const auto rows = runs_from_csv(read_file_bytes(runs_path));
  if (rows.empty()) throw ConfigError("report: runs.csv has no rows");
  const auto summary = summarize(rows);

  std::ostringstream os;
  char line[200];
  os << "runs: " << rows.size() << "\n\n";
  std::snprintf(line, sizeof line, "%-20s %7s %9s %7s %5s %15s %15s\n", "mode", "mRE", "sigma", "scr", "n", "mIoU",
                "DSC");
  os << line;
  for (const auto& s : summary) {
    std::snprintf(line, sizeof line, "%-20s %6.1f%% %9.4f %7.2f %5zu %7.4f+-%.4f %7.4f+-%.4f\n", s.mode.c_str(),
                  100 * s.mre, s.sigma, s.scribble_ratio, s.runs, s.mean_miou, s.std_miou, s.mean_dice, s.std_dice);
    os << line;
  }
  const std::string text = os.str();
  const fs::path out = run_dir / "report";
  write_text(out / "summary.txt", text);
  write_text(out / "summary.csv", summary_to_csv(summary));
  write_text(out / "miou_vs_mre.svg", svg_plot(summary, PlotMetric::MIoU));
  write_text(out / "dice_vs_mre.svg", svg_plot(summary, PlotMetric::Dice));
  return text;
}

}  // namespace sizeseg

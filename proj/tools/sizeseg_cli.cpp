#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sizeseg/annotation.hpp"
#include "sizeseg/dataset_io.hpp"
#include "sizeseg/errors.hpp"
#include "sizeseg/experiments.hpp"
#include "sizeseg/pngio.hpp"
#include "sizeseg/rng.hpp"
#include "sizeseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sizeseg;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::string data_dir_default(const std::string& sub = {}) {
  const char* env = std::getenv("SIZESEG_DATA_DIR");
  if (!env || !*env) return {};
  return sub.empty() ? std::string(env) : (fs::path(env) / sub).string();
}

fs::path require_dir(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError(flag + " is required (or set SIZESEG_DATA_DIR)");
  return value;
}

fs::path require_dataset(const std::string& value, const std::string& flag) {
  const fs::path dir = require_dir(value, flag);
  if (!fs::exists(dir / "manifest.json")) throw ConfigError(flag + ": no dataset (manifest.json) in " + dir.string());
  return dir;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    auto j = json::parse(read_file_bytes(path));
    if (!j.is_object()) throw ConfigError("config " + path + ": top level must be an object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  } catch (const RuntimeFailure& e) {
    throw ConfigError(e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw RuntimeFailure("cannot write " + path.string());
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_percent_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_csv(s)) {
    try {
      out.push_back(item.back() == '%' ? std::stod(item.substr(0, item.size() - 1)) / 100.0 : std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("bad number '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out = data_dir_default();
  std::string mode = "shapes";
  int classes = 0;
  int count = 100;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
  double variability = 0.05;
  double absent = 0.0;
  std::optional<double> scribble_ratio;
  std::string config;
};

int cmd_gen_data(const GenArgs& a) {
  GenConfig g;
  g.mode = gen_mode_from_string(a.mode);
  g.classes = a.classes > 0 ? a.classes : (g.mode == GenMode::MedicalLike ? 2 : 5);
  g.height = a.height;
  g.width = a.width;
  g.seed = a.seed;
  g.size_variability = a.variability;
  g.absent_probability = a.absent;
  int count = a.count;
  std::optional<double> ratio = a.scribble_ratio;
  const json c = read_config(a.config);
  try {
    if (c.contains("mode")) g.mode = gen_mode_from_string(c["mode"].get<std::string>());
    g.classes = c.value("classes", g.classes);
    g.height = c.value("height", g.height);
    g.width = c.value("width", g.width);
    g.seed = c.value("seed", g.seed);
    g.min_shapes = c.value("min_shapes", g.min_shapes);
    g.max_shapes = c.value("max_shapes", g.max_shapes);
    g.color_noise = c.value("color_noise", g.color_noise);
    g.texture_noise = c.value("texture_noise", g.texture_noise);
    g.rim_shading = c.value("rim_shading", g.rim_shading);
    g.size_variability = c.value("size_variability", g.size_variability);
    g.mean_object_fraction = c.value("mean_object_fraction", g.mean_object_fraction);
    g.absent_probability = c.value("absent_probability", g.absent_probability);
    count = c.value("count", count);
    if (c.contains("scribble_ratio")) ratio = c["scribble_ratio"].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gen-data config: ") + e.what());
  }
  validate(g);
  if (count < 1) throw ConfigError("--count must be >= 1");
  const fs::path out = require_dir(a.out, "--out");
  Dataset d;
  d.classes = g.classes;
  d.class_names = default_class_names(g.mode, g.classes);
  d.samples = generate(g, count);
  if (ratio) {
    const Rng root = Rng(g.seed).split(0x53435249ULL);
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      Rng r = root.split(i);
      d.samples[i].seeds = generate_scribbles(d.samples[i].mask, g.classes, {*ratio, 1, r.next_u64()});
    }
  }
  write_dataset(out, d);
  std::cout << "wrote " << d.samples.size() << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_extract_sizes(const std::string& dataset, const std::string& out) {
  const fs::path dir = require_dataset(dataset, "--dataset");
  const Dataset d = load_dataset(dir);
  const fs::path path = out.empty() ? dir / "sizes" / "exact.json" : fs::path(out);
  write_sizes_file(path, exact_sizes_map(d));
  std::cout << "wrote exact sizes for " << d.samples.size() << " images to " << path.string() << "\n";
  return 0;
}

int cmd_corrupt_sizes(const std::string& dataset, const std::string& sizes, std::optional<double> mre,
                      std::optional<double> sigma, std::uint64_t seed, const std::string& out) {
  const fs::path dir = require_dataset(dataset, "--dataset");
  if (mre.has_value() == sigma.has_value()) throw ConfigError("give exactly one of --mre or --sigma");
  const double s = sigma ? *sigma : sigma_for_mre(*mre);
  if (!(s >= 0.0)) throw ConfigError("noise level must be >= 0");
  const Dataset d = load_dataset(dir);
  const SizesMap base = sizes.empty() ? exact_sizes_map(d) : read_sizes_file(sizes, d.classes);
  const Rng root = Rng(seed).split(0x434f5252ULL);
  SizesMap result;
  std::size_t i = 0;
  for (const auto& sample : d.samples) {
    auto it = base.find(sample.id);
    if (it == base.end()) continue;
    Rng r = root.split(i++);
    result.emplace(sample.id, corrupt_sizes(it->second, s, r));
  }
  char name[64];
  std::snprintf(name, sizeof name, "corrupt_mre%.4f_seed%llu.json", mre_for_sigma(s), static_cast<unsigned long long>(seed));
  const fs::path path = out.empty() ? dir / "sizes" / name : fs::path(out);
  write_sizes_file(path, result);
  std::vector<SampleRecord> check = d.samples;
  for (auto& smp : check) {
    auto it = result.find(smp.id);
    if (it != result.end()) smp.sizes = it->second;
  }
  std::cout << "wrote " << result.size() << " corrupted size targets (sigma " << s << ", measured mRE " << sizeseg::mre(check)
            << ") to " << path.string() << "\n";
  return 0;
}

int cmd_gen_scribbles(const std::string& dataset, double ratio, int stroke, std::uint64_t seed) {
  const fs::path dir = require_dataset(dataset, "--dataset");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("--ratio must lie in [0, 1]");
  if (stroke < 1) throw ConfigError("--stroke-width must be >= 1");
  Dataset d = load_dataset(dir);
  const Rng root = Rng(seed).split(0x53435249ULL);
  std::size_t total = 0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    Rng r = root.split(i);
    d.samples[i].seeds = generate_scribbles(d.samples[i].mask, d.classes, {ratio, stroke, r.next_u64()});
    total += d.samples[i].seeds->size();
  }
  write_dataset(dir, d);
  std::cout << "wrote " << total << " seed pixels for " << d.samples.size() << " images\n";
  return 0;
}

struct TrainArgs {
  std::string train_dir = data_dir_default("train");
  std::string val_dir = data_dir_default("val");
  std::string out;
  std::string mode = "size-crf";
  std::string sizes;
  std::string config;
  std::string arch = "small-conv";
  std::string hidden = "8,8,8";
  int epochs = 20;
  int batch = 8;
  double lr = 0.05;
  double crf_weight = 0.1;
  double pce_weight = 1.0;
  std::optional<double> mre;
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
};

ModelConfig model_from_args(const std::string& arch, const std::string& hidden, int classes, int channels,
                            std::uint64_t seed) {
  ModelConfig m;
  m.architecture = architecture_from_string(arch);
  m.hidden.clear();
  for (const auto& h : split_csv(hidden)) {
    try {
      m.hidden.push_back(std::stoi(h));
    } catch (const std::logic_error&) {
      throw ConfigError("--hidden: bad width '" + h + "'");
    }
  }
  m.classes = classes;
  m.in_channels = channels;
  m.init_seed = seed;
  validate(m);
  return m;
}

int cmd_train(const TrainArgs& a) {
  TrainConfig tc;
  tc.mode = supervision_mode_from_string(a.mode);
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.learning_rate = a.lr;
  tc.crf_weight = a.crf_weight;
  tc.pce_weight = a.pce_weight;
  if (a.mre) tc.corruption_sigma = sigma_for_mre(*a.mre);
  tc.seed = a.seed;
  tc.threads = a.threads;
  if (!a.config.empty()) tc = train_config_from_json(read_config(a.config).dump(), tc);
  validate(tc);
  const fs::path out = require_dir(a.out, "--out");
  Dataset train_set = load_dataset(require_dataset(a.train_dir, "--train"));
  Dataset val_set = a.val_dir.empty() ? Dataset{} : load_dataset(require_dataset(a.val_dir, "--val"));
  if (!a.sizes.empty()) {
    const auto updated = apply_sizes(train_set, read_sizes_file(a.sizes, train_set.classes));
    if (!a.quiet) std::cerr << "size targets from " << a.sizes << " for " << updated << " images\n";
  }
  const ModelConfig mc = model_from_args(a.arch, a.hidden, train_set.classes, train_set.samples.at(0).image.channels, tc.seed);
  const auto report = train(train_set.samples, val_set.samples, mc, tc, [&](const EpochRecord& e) {
    if (a.quiet) return;
    std::cerr << "epoch " << e.epoch << " loss " << e.mean_loss;
    if (e.val_miou) std::cerr << " val mIoU " << *e.val_miou;
    std::cerr << "\n";
  });
  fs::create_directories(out);
  save_checkpoint(out / "checkpoint.bin", mc, report.final_params);
  save_checkpoint(out / "best.bin", mc, report.best_params);
  write_file(out / "report.json", report_to_json(report));
  write_file(out / "train_config.json", train_config_to_json(tc) + "\n");
  std::cout << report_summary(report);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& out, int threads) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto [mc, params] = load_checkpoint(checkpoint);
  const Dataset d = load_dataset(require_dataset(dataset, "--dataset"));
  if (d.classes != mc.classes) throw ConfigError("dataset class count does not match the checkpoint");
  const auto m = evaluate(mc, params, d.samples, threads);
  json per_class = json::array();
  for (int k = 0; k < mc.classes; ++k) {
    const auto iou = class_iou(m.confusion, k);
    const auto dsc = class_dice(m.confusion, k);
    per_class.push_back({{"class_id", k},
                         {"name", d.class_names.at(std::size_t(k))},
                         {"iou", iou ? json(*iou) : json(nullptr)},
                         {"dice", dsc ? json(*dsc) : json(nullptr)}});
  }
  const json j{{"images", m.images}, {"miou", m.miou}, {"dice", m.dice}, {"classes", per_class}};
  if (!out.empty()) write_file(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_loss_probe(const std::string& input, const std::string& random, std::uint64_t seed, bool csv) {
  LossProbeInput in;
  if (!input.empty()) {
    in = parse_probe_input(read_file_bytes(input));
  } else if (!random.empty()) {
    const auto dims = split_csv(random);
    if (dims.size() != 3) throw ConfigError("--random expects H,W,K");
    try {
      in = random_probe_input(std::stoi(dims[0]), std::stoi(dims[1]), std::stoi(dims[2]), seed);
    } catch (const std::logic_error&) {
      throw ConfigError("--random expects three positive integers H,W,K");
    }
  } else {
    throw ConfigError("give --input FILE or --random H,W,K");
  }
  const auto rows = run_loss_probe(in);
  std::cout << (csv ? probe_to_csv(rows) : probe_to_table(rows));
  return 0;
}

struct SweepArgs {
  std::string train_dir = data_dir_default("train");
  std::string val_dir = data_dir_default("val");
  std::string out;
  std::string config;
  std::string modes;
  std::string mre = "0";
  std::string seeds = "0";
  std::string ratios = "0";
  int epochs = 20;
  int workers = 1;
};

int cmd_sweep(const SweepArgs& a) {
  SweepConfig cfg;
  for (const auto& m : split_csv(a.modes)) cfg.modes.push_back(supervision_mode_from_string(m));
  cfg.mre_levels = parse_percent_list(a.mre);
  cfg.seeds.clear();
  for (const auto& s : split_csv(a.seeds)) {
    try {
      cfg.seeds.push_back(std::stoull(s));
    } catch (const std::logic_error&) {
      throw ConfigError("--seeds: bad seed '" + s + "'");
    }
  }
  cfg.scribble_ratios = parse_percent_list(a.ratios);
  cfg.train.epochs = a.epochs;
  cfg.workers = a.workers;
  const Dataset train_set = load_dataset(require_dataset(a.train_dir, "--train"));
  cfg.model.classes = train_set.classes;
  cfg.model.in_channels = train_set.samples.at(0).image.channels;
  if (!a.config.empty()) cfg = sweep_config_from_json(read_config(a.config).dump(), cfg);
  validate(cfg);
  const fs::path out = require_dir(a.out, "--out");
  const Dataset val_set = load_dataset(require_dataset(a.val_dir, "--val"));
  const auto rows = run_sweep(train_set, val_set, cfg, out, [](const RunRow& r) {
    std::cerr << r.mode << " mRE " << r.mre << " seed " << r.seed << " -> mIoU " << r.val_miou << "\n";
  });
  std::cout << summary_to_csv(summarize(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation with approximate size targets: data, training, evaluation and annotation tools"};
  app.require_subcommand(1);
  int status = 0;

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  c_gen->add_option("--out", gen.out, "Output directory (default $SIZESEG_DATA_DIR)");
  c_gen->add_option("--mode", gen.mode, "shapes or medical-like")->capture_default_str();
  c_gen->add_option("--classes", gen.classes, "Classes including background (default 5, medical 2)");
  c_gen->add_option("--count", gen.count, "Number of images")->capture_default_str();
  c_gen->add_option("--height", gen.height)->capture_default_str();
  c_gen->add_option("--width", gen.width)->capture_default_str();
  c_gen->add_option("--seed", gen.seed)->capture_default_str();
  c_gen->add_option("--variability", gen.variability, "Medical-like relative object size std")->capture_default_str();
  c_gen->add_option("--absent", gen.absent, "Medical-like probability of an empty image")->capture_default_str();
  c_gen->add_option("--scribble-ratio", gen.scribble_ratio, "Also write seeds with this stroke ratio (0 = one click)");
  c_gen->add_option("--config", gen.config, "JSON config overriding flags");
  c_gen->callback([&] { status = cmd_gen_data(gen); });

  std::string ex_dataset = data_dir_default(), ex_out;
  auto* c_ex = app.add_subcommand("extract-sizes", "Write exact size targets from the masks");
  c_ex->add_option("--dataset", ex_dataset);
  c_ex->add_option("--out", ex_out, "Default <dataset>/sizes/exact.json");
  c_ex->callback([&] { status = cmd_extract_sizes(ex_dataset, ex_out); });

  std::string co_dataset = data_dir_default(), co_sizes, co_out;
  std::optional<double> co_mre, co_sigma;
  std::uint64_t co_seed = 0;
  auto* c_co = app.add_subcommand("corrupt-sizes", "Write noisy size targets");
  c_co->add_option("--dataset", co_dataset);
  c_co->add_option("--sizes", co_sizes, "Base sizes file (default exact sizes)");
  c_co->add_option("--mre", co_mre, "Target mean relative error, e.g. 0.08");
  c_co->add_option("--sigma", co_sigma, "Noise standard deviation");
  c_co->add_option("--seed", co_seed);
  c_co->add_option("--out", co_out);
  c_co->callback([&] { status = cmd_corrupt_sizes(co_dataset, co_sizes, co_mre, co_sigma, co_seed, co_out); });

  std::string sc_dataset = data_dir_default();
  double sc_ratio = 0.0;
  int sc_stroke = 1;
  std::uint64_t sc_seed = 0;
  auto* c_sc = app.add_subcommand("gen-scribbles", "Write seed scribbles or one-click seeds for a dataset");
  c_sc->add_option("--dataset", sc_dataset);
  c_sc->add_option("--ratio", sc_ratio, "Stroke length ratio (0 = one click)")->capture_default_str();
  c_sc->add_option("--stroke-width", sc_stroke)->capture_default_str();
  c_sc->add_option("--seed", sc_seed);
  c_sc->callback([&] { status = cmd_gen_scribbles(sc_dataset, sc_ratio, sc_stroke, sc_seed); });

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a segmentation model");
  c_tr->add_option("--train", tr.train_dir, "Training dataset (default $SIZESEG_DATA_DIR/train)");
  c_tr->add_option("--val", tr.val_dir, "Validation dataset (default $SIZESEG_DATA_DIR/val)");
  c_tr->add_option("--out", tr.out, "Output directory")->required();
  c_tr->add_option("--mode", tr.mode, "Supervision mode")->capture_default_str();
  c_tr->add_option("--sizes", tr.sizes, "Sizes file with working targets");
  c_tr->add_option("--config", tr.config, "JSON train config overriding flags");
  c_tr->add_option("--arch", tr.arch, "small-conv or pixel-linear")->capture_default_str();
  c_tr->add_option("--hidden", tr.hidden, "Hidden widths")->capture_default_str();
  c_tr->add_option("--epochs", tr.epochs)->capture_default_str();
  c_tr->add_option("--batch-size", tr.batch)->capture_default_str();
  c_tr->add_option("--lr", tr.lr)->capture_default_str();
  c_tr->add_option("--crf-weight", tr.crf_weight, "Per-pixel CRF weight")->capture_default_str();
  c_tr->add_option("--pce-weight", tr.pce_weight, "Per-seed partial CE weight")->capture_default_str();
  c_tr->add_option("--mre", tr.mre, "Corrupt targets to this mRE");
  c_tr->add_option("--seed", tr.seed);
  c_tr->add_option("--threads", tr.threads)->capture_default_str();
  c_tr->add_flag("--quiet", tr.quiet);
  c_tr->callback([&] { status = cmd_train(tr); });

  std::string ev_ckpt, ev_dataset = data_dir_default("val"), ev_out;
  int ev_threads = 1;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  c_ev->add_option("--checkpoint", ev_ckpt);
  c_ev->add_option("--dataset", ev_dataset);
  c_ev->add_option("--out", ev_out, "Also write metrics JSON here");
  c_ev->add_option("--threads", ev_threads);
  c_ev->callback([&] { status = cmd_eval(ev_ckpt, ev_dataset, ev_out, ev_threads); });

  std::string lp_input, lp_random;
  std::uint64_t lp_seed = 0;
  bool lp_csv = false;
  auto* c_lp = app.add_subcommand("loss-probe", "Evaluate every loss and its gradient residual on a field");
  c_lp->add_option("--input", lp_input, "Field JSON file");
  c_lp->add_option("--random", lp_random, "Random instance H,W,K");
  c_lp->add_option("--seed", lp_seed);
  c_lp->add_flag("--csv", lp_csv);
  c_lp->callback([&] { status = cmd_loss_probe(lp_input, lp_random, lp_seed, lp_csv); });

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Train and evaluate over a grid of modes, mRE levels and seeds");
  c_sw->add_option("--train", sw.train_dir);
  c_sw->add_option("--val", sw.val_dir);
  c_sw->add_option("--out", sw.out)->required();
  c_sw->add_option("--config", sw.config, "JSON sweep config overriding flags");
  c_sw->add_option("--modes", sw.modes, "Comma separated supervision modes");
  c_sw->add_option("--mre", sw.mre, "Comma separated mRE levels, e.g. 0,4%,8%")->capture_default_str();
  c_sw->add_option("--seeds", sw.seeds, "Comma separated seeds")->capture_default_str();
  c_sw->add_option("--scribble-ratios", sw.ratios)->capture_default_str();
  c_sw->add_option("--epochs", sw.epochs)->capture_default_str();
  c_sw->add_option("--workers", sw.workers)->capture_default_str();
  c_sw->callback([&] { status = cmd_sweep(sw); });

  std::string an_dataset = data_dir_default(), an_host = "127.0.0.1", an_annotator, an_static, an_log;
  int an_port = 8080;
  auto* c_an = app.add_subcommand("annotate-serve", "Serve the size annotation API");
  c_an->add_option("--dataset", an_dataset);
  c_an->add_option("--port", an_port)->capture_default_str();
  c_an->add_option("--host", an_host)->capture_default_str();
  c_an->add_option("--annotator", an_annotator, "Default annotator name");
  c_an->add_option("--static", an_static, "Built UI bundle directory");
  c_an->add_option("--log", an_log, "Annotation log (default <dataset>/annotations.ndjson)");
  c_an->callback([&] {
    ServiceConfig sc;
    sc.dataset_dir = require_dir(an_dataset, "--dataset");
    sc.log_path = an_log;
    if (!an_annotator.empty()) sc.annotator = an_annotator;
    if (!an_static.empty()) sc.static_dir = an_static;
    AnnotationService service(sc);
    if (!service.has_dataset()) std::cerr << "warning: no manifest.json in " << sc.dataset_dir << "; serving 503\n";
    std::cerr << "listening on http://" << an_host << ":" << an_port << "\n";
    if (!serve(service, an_host, an_port)) throw RuntimeFailure("cannot listen on " + an_host + ":" + std::to_string(an_port));
  });

  std::string rp_dir;
  auto* c_rp = app.add_subcommand("report", "Summarize a sweep directory into text, CSV and SVG plots");
  c_rp->add_option("--run-dir", rp_dir)->required();
  c_rp->callback([&] { std::cout << write_report(rp_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return status;
}

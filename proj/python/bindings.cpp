#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "sizeseg/dataset_io.hpp"
#include "sizeseg/errors.hpp"
#include "sizeseg/eval.hpp"
#include "sizeseg/experiments.hpp"
#include "sizeseg/losses.hpp"
#include "sizeseg/simplex.hpp"
#include "sizeseg/synthdata.hpp"
#include "sizeseg/trainer.hpp"

namespace py = pybind11;
using namespace sizeseg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PredictionField field_from(const Array& logits) {
  if (logits.ndim() != 3) throw ConfigError("logits must have shape (H, W, K)");
  const auto h = int(logits.shape(0)), w = int(logits.shape(1)), k = int(logits.shape(2));
  return PredictionField(h, w, k, std::vector<double>(logits.data(), logits.data() + logits.size()));
}

Image image_from(const Array& a) {
  if (a.ndim() != 3) throw ConfigError("image must have shape (H, W, C)");
  Image img(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)));
  img.data.assign(a.data(), a.data() + a.size());
  return img;
}

py::array_t<double> to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  py::array_t<double> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::tuple loss_tuple(const LossValue& l, const PredictionField& f) {
  const double value = l.saturated ? std::numeric_limits<double>::infinity() : l.value;
  return py::make_tuple(value, to_array(l.grad, {f.height(), f.width(), f.classes()}));
}

SeedSet seeds_from(const std::vector<std::tuple<int, int, int>>& seeds, int width) {
  SeedSet out;
  for (auto [x, y, label] : seeds) out.push_back({std::uint32_t(y * width + x), label});
  std::sort(out.begin(), out.end(), [](const Seed& a, const Seed& b) { return a.pixel < b.pixel; });
  return out;
}

py::dict sample_dict(const SampleRecord& s) {
  py::dict d;
  d["id"] = s.id;
  d["image"] = to_array(s.image.data, {s.image.height, s.image.width, s.image.channels});
  py::array_t<std::uint8_t> mask({s.mask.height, s.mask.width});
  std::copy(s.mask.labels.begin(), s.mask.labels.end(), mask.mutable_data());
  d["mask"] = mask;
  d["tags"] = s.tags;
  d["exact_sizes"] = s.exact_sizes.vec();
  if (s.seeds) {
    std::vector<std::tuple<int, int, int>> seeds;
    for (const auto& seed : *s.seeds)
      seeds.emplace_back(int(seed.pixel % std::uint32_t(s.mask.width)), int(seed.pixel / std::uint32_t(s.mask.width)), seed.label);
    d["seeds"] = seeds;
  }
  return d;
}

py::object json_to_py(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

}  // namespace

PYBIND11_MODULE(_sizeseg, m) {
  m.doc() = "Size-target weakly supervised segmentation core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  // Distributions
  m.def("kl_forward", [](std::vector<double> v, std::vector<double> q) {
    const auto r = kl_forward(CategoricalDist(std::move(v)), CategoricalDist(std::move(q)));
    return r.infinite ? std::numeric_limits<double>::infinity() : r.value;
  }, py::arg("v"), py::arg("q"), "KL(v || q); inf when v has mass where q is zero.");
  m.def("kl_reverse", [](std::vector<double> q, std::vector<double> v) {
    return kl_reverse(CategoricalDist(std::move(q)), CategoricalDist(std::move(v)));
  }, py::arg("q"), py::arg("v"), "KL(q || v), or None when undefined.");
  m.def("uniform_over", [](std::vector<int> tags, int classes) { return uniform_over(tags, classes).vec(); },
        py::arg("tags"), py::arg("classes"));
  m.def("corrupt_sizes", [](std::vector<double> exact, double sigma, std::uint64_t seed) {
    return corrupt_sizes(CategoricalDist(std::move(exact)), CorruptionConfig{sigma, seed}).vec();
  }, py::arg("exact"), py::arg("sigma"), py::arg("seed") = 0);
  m.def("sigma_for_mre", &sigma_for_mre, py::arg("mre"));
  m.def("mre_for_sigma", &mre_for_sigma, py::arg("sigma"));

  // Losses on (H, W, K) logits; each returns (value, gradient wrt logits).
  m.def("size_target_loss", [](const Array& z, std::vector<double> v, double floor) {
    const auto f = field_from(z);
    return loss_tuple(size_target_loss(f, CategoricalDist(std::move(v)), {floor}), f);
  }, py::arg("logits"), py::arg("target"), py::arg("log_floor") = kDefaultLogFloor);
  m.def("crf_loss", [](const Array& z, const Array& image, std::optional<double> bandwidth) {
    const auto f = field_from(z);
    AffinityConfig cfg;
    cfg.bandwidth = bandwidth;
    return loss_tuple(crf_loss(f, build_affinity(image_from(image), cfg)), f);
  }, py::arg("logits"), py::arg("image"), py::arg("bandwidth") = py::none());
  m.def("partial_ce_loss", [](const Array& z, const std::vector<std::tuple<int, int, int>>& seeds, double floor) {
    const auto f = field_from(z);
    const auto s = seeds_from(seeds, f.width());
    validate_seeds(s, std::size_t(f.height()) * f.width(), f.classes());
    return loss_tuple(partial_ce_loss(f, s, {floor}), f);
  }, py::arg("logits"), py::arg("seeds"), py::arg("log_floor") = kDefaultLogFloor);
  m.def("expansion_loss", [](const Array& z, TagSet tags, double floor) {
    const auto f = field_from(z);
    return loss_tuple(expansion_loss(f, tags, {floor}), f);
  }, py::arg("logits"), py::arg("tags"), py::arg("log_floor") = kDefaultLogFloor);
  m.def("suppression_loss", [](const Array& z, TagSet tags, double floor) {
    const auto f = field_from(z);
    return loss_tuple(suppression_loss(f, tags, {floor}), f);
  }, py::arg("logits"), py::arg("tags"), py::arg("log_floor") = kDefaultLogFloor);
  m.def("flat_log_barrier", [](const Array& z, TagSet tags, double epsilon, bool literal, double floor) {
    const auto f = field_from(z);
    BarrierConfig cfg;
    cfg.epsilon = epsilon;
    cfg.flat_form = literal ? FlatBarrierForm::LiteralMax : FlatBarrierForm::ZeroAboveThreshold;
    return loss_tuple(flat_log_barrier(f, tags, cfg, {floor}), f);
  }, py::arg("logits"), py::arg("tags"), py::arg("epsilon") = 0.1, py::arg("literal_max") = false,
        py::arg("log_floor") = kDefaultLogFloor);
  m.def("quadratic_barrier", [](const Array& z, std::vector<double> lower_bounds) {
    const auto f = field_from(z);
    BarrierConfig cfg;
    cfg.lower_bounds = std::move(lower_bounds);
    return loss_tuple(quadratic_barrier(f, cfg), f);
  }, py::arg("logits"), py::arg("lower_bounds"));
  m.def("absent_class_suppressor", [](const Array& z, int cls) {
    const auto f = field_from(z);
    return loss_tuple(absent_class_suppressor(f, cls), f);
  }, py::arg("logits"), py::arg("obj_class"));
  m.def("average_prediction", [](const Array& z) { return average_prediction(field_from(z)).vec(); }, py::arg("logits"));

  // Batch losses over a list of distributions.
  auto dists = [](const std::vector<std::vector<double>>& rows) {
    std::vector<CategoricalDist> out;
    for (const auto& r : rows) out.emplace_back(r);
    return out;
  };
  m.def("fairness_loss", [dists](const std::vector<std::vector<double>>& batch) { return fairness_loss(dists(batch)); },
        py::arg("batch"));
  m.def("balance_loss", [dists](const std::vector<std::vector<double>>& batch, std::vector<double> v) {
    return balance_loss(dists(batch), CategoricalDist(std::move(v)));
  }, py::arg("batch"), py::arg("target"), "KL(batch mean || target), or None when undefined.");
  m.def("weighted_ce_loss", [dists](const std::vector<std::vector<double>>& batch, std::vector<int> labels,
                                    std::vector<double> counts, double beta) {
    return weighted_ce_loss(dists(batch), labels, WeightedCEConfig{beta, std::move(counts)});
  }, py::arg("batch"), py::arg("labels"), py::arg("class_counts"), py::arg("beta") = 0.9);
  m.def("class_weights", [](std::vector<double> counts, double beta) {
    return class_weights(WeightedCEConfig{beta, std::move(counts)});
  }, py::arg("class_counts"), py::arg("beta") = 0.9);

  // Metrics
  m.def("miou", [](const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
    if (truth.size() != pred.size()) throw ConfigError("truth and prediction lengths differ");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return miou(cm);
  }, py::arg("truth"), py::arg("pred"), py::arg("classes"));
  m.def("dice", [](const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
    if (truth.size() != pred.size()) throw ConfigError("truth and prediction lengths differ");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return dice(cm);
  }, py::arg("truth"), py::arg("pred"), py::arg("classes"));
  m.def("relative_error", &relative_error, py::arg("estimate"), py::arg("truth"));

  // Data and training
  m.def("generate", [](const std::string& mode, int n, int classes, std::uint64_t seed, int height, int width,
                       std::optional<double> scribble_ratio) {
    GenConfig g;
    g.mode = gen_mode_from_string(mode);
    g.classes = classes > 0 ? classes : (g.mode == GenMode::MedicalLike ? 2 : 5);
    g.seed = seed;
    g.height = height;
    g.width = width;
    auto samples = generate(g, n);
    py::list out;
    for (auto& s : samples) {
      if (scribble_ratio) s.seeds = generate_scribbles(s.mask, g.classes, {*scribble_ratio, 1, seed});
      out.append(sample_dict(s));
    }
    return out;
  }, py::arg("mode") = "shapes", py::arg("n") = 8, py::arg("classes") = 0, py::arg("seed") = 0,
        py::arg("height") = 64, py::arg("width") = 64, py::arg("scribble_ratio") = py::none());
  m.def("write_dataset", [](const std::string& dir, const std::string& mode, int n, int classes, std::uint64_t seed,
                            std::optional<double> scribble_ratio) {
    GenConfig g;
    g.mode = gen_mode_from_string(mode);
    g.classes = classes > 0 ? classes : (g.mode == GenMode::MedicalLike ? 2 : 5);
    g.seed = seed;
    Dataset d{g.classes, default_class_names(g.mode, g.classes), generate(g, n)};
    if (scribble_ratio)
      for (auto& s : d.samples) s.seeds = generate_scribbles(s.mask, g.classes, {*scribble_ratio, 1, seed});
    write_dataset(dir, d);
  }, py::arg("dir"), py::arg("mode") = "shapes", py::arg("n") = 8, py::arg("classes") = 0, py::arg("seed") = 0,
        py::arg("scribble_ratio") = py::none());
  m.def("train", [](const std::string& train_dir, const std::string& val_dir, const std::string& config_json,
                    std::vector<int> hidden) {
    const Dataset tr = load_dataset(train_dir);
    const Dataset va = val_dir.empty() ? Dataset{} : load_dataset(val_dir);
    const TrainConfig tc = train_config_from_json(config_json.empty() ? "{}" : config_json);
    ModelConfig mc;
    mc.classes = tr.classes;
    mc.hidden = std::move(hidden);
    mc.init_seed = tc.seed;
    mc.in_channels = tr.samples.at(0).image.channels;
    TrainReport report;
    {
      py::gil_scoped_release release;
      report = train(tr.samples, va.samples, mc, tc);
    }
    return json_to_py(report_to_json(report));
  }, py::arg("train_dir"), py::arg("val_dir") = "", py::arg("config_json") = "{}",
        py::arg("hidden") = std::vector<int>{8, 8, 8},
        "Train on dataset directories with a JSON train config; returns the report as a dict.");
  m.def("loss_probe", [](int h, int w, int k, std::uint64_t seed) {
    const auto rows = run_loss_probe(random_probe_input(h, w, k, seed));
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["op"] = r.op;
      d["value"] = r.value;
      d["status"] = r.status;
      d["max_rel_error"] = r.max_rel_error;
      out.append(d);
    }
    return out;
  }, py::arg("height") = 8, py::arg("width") = 8, py::arg("classes") = 4, py::arg("seed") = 0);
  m.def("supervision_modes", [] {
    std::vector<std::string> out;
    for (auto mode : {SupervisionMode::FullMask, SupervisionMode::Size, SupervisionMode::SizeCrf,
                      SupervisionMode::SizeCrfSeeds, SupervisionMode::ExpandCrf, SupervisionMode::FlatBarrierCrf,
                      SupervisionMode::QuadBarrierSeeds, SupervisionMode::SeedsOnly, SupervisionMode::FixedMeanSize})
      out.push_back(to_string(mode));
    return out;
  });
}

// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails.
//
//   sizeseg_acceptance            run P1..P10
//   sizeseg_acceptance P3 P7      run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sizeseg/eval.hpp"
#include "sizeseg/experiments.hpp"
#include "sizeseg/losses.hpp"
#include "sizeseg/simplex.hpp"
#include "sizeseg/synthdata.hpp"
#include "sizeseg/trainer.hpp"

using namespace sizeseg;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void log(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

// P1

Outcome gradient_suite() {
  Outcome o;
  double worst = 0.0;
  std::string worst_op;
  int instances = 20;
  for (int i = 0; i < instances; ++i) {
    auto rows = run_loss_probe(random_probe_input(8, 8, 4, 1000 + std::uint64_t(i)));
    for (const auto& r : rows) {
      if (r.status != "ok") {
        o.pass = false;
        o.detail += r.op + " status " + r.status + "; ";
      }
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_op = r.op;
      }
    }
  }
  o.pass = o.pass && worst < 1e-4;
  o.detail += std::to_string(probed_ops().size()) + " ops x " + std::to_string(instances) +
              " instances, worst rel err " + fmt("%.2e", worst) + " (" + worst_op + ")";
  return o;
}

// P2

struct Check {
  std::string name;
  double got;
  double expected;
  double tol;
};

Outcome analytic_values() {
  const LossOptions exact{0.0};
  const double ln2 = std::log(2.0);
  std::vector<Check> c;
  auto onehot2 = PredictionField::from_probs(1, 2, 2, {1, 0, 0, 1});

  auto avg = average_prediction(PredictionField::from_probs(1, 3, 2, {1, 0, 1, 0, 0, 1}));
  c.push_back({"average_prediction 3px", avg[0], 2.0 / 3.0, 1e-9});
  c.push_back({"average_prediction 2px", average_prediction(onehot2)[1], 0.5, 1e-9});
  c.push_back({"kl_forward p,p", kl_forward(CategoricalDist({0.3, 0.7}), CategoricalDist({0.3, 0.7})).value, 0, 1e-9});
  c.push_back({"kl_forward (1,0)", kl_forward(CategoricalDist({1, 0}), CategoricalDist({0.5, 0.5})).value, ln2, 1e-9});
  c.push_back({"kl_forward (0.7,0.3)", kl_forward(CategoricalDist({0.7, 0.3}), CategoricalDist({0.5, 0.5})).value,
               0.7 * std::log(1.4) + 0.3 * std::log(0.6), 1e-9});
  c.push_back({"kl_forward quoted", kl_forward(CategoricalDist({0.7, 0.3}), CategoricalDist({0.5, 0.5})).value,
               0.082283, 5e-7});
  c.push_back({"kl_forward inf flag",
               double(kl_forward(CategoricalDist({0.5, 0.5}), CategoricalDist({1, 0})).infinite), 1, 0});
  c.push_back({"kl_reverse undefined",
               double(kl_reverse(CategoricalDist({0.5, 0.5}), CategoricalDist({1, 0})).has_value()), 0, 0});
  c.push_back({"kl_reverse value", *kl_reverse(CategoricalDist({0.5, 0.5}), CategoricalDist({0.9, 0.1})),
               0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-9});
  std::vector<int> t01{0, 1}, t2{2}, t012{0, 1, 2};
  c.push_back({"uniform_over {0,1}", uniform_over(t01, 3)[1], 0.5, 1e-9});
  c.push_back({"uniform_over {2}", uniform_over(t2, 3)[2], 1.0, 1e-9});
  c.push_back({"uniform_over {0,1,2}", uniform_over(t012, 3)[0], 1.0 / 3.0, 1e-9});
  std::vector<double> eps{0.2, -0.2};
  c.push_back({"corrupt hand trace", apply_size_noise(CategoricalDist({0.5, 0.5}), eps)[0], 0.6, 1e-9});
  c.push_back({"corrupt sigma 0", corrupt_sizes(CategoricalDist({0.2, 0.8}), CorruptionConfig{0.0, 1})[0], 0.2, 0});
  c.push_back({"corrupt single class", corrupt_sizes(CategoricalDist({1.0}), CorruptionConfig{0.4, 1})[0], 1.0, 0});
  c.push_back({"sigma for mRE 8%", sigma_for_mre(0.08), 0.08 * std::sqrt(std::numbers::pi / 2), 1e-9});
  c.push_back({"sigma for mRE 8% quoted", sigma_for_mre(0.08), 0.100265, 5e-7});
  c.push_back({"mRE for sigma 19.5%", mre_for_sigma(0.195), 0.1556, 5e-5});

  c.push_back({"size loss 1x2", size_target_loss(onehot2, CategoricalDist({1, 0}), exact).value, ln2, 1e-9});
  c.push_back({"size loss uniform",
               size_target_loss(PredictionField(1, 2, 2, {0, 0, 0, 0}), CategoricalDist({0.5, 0.5}), exact).value, 0,
               1e-9});
  c.push_back({"crf 2px", crf_loss(onehot2, make_graph(1, 2, {{0, 1, 1.0}})).value, 2.0, 1e-9});
  c.push_back({"crf constant",
               crf_loss(PredictionField::from_probs(1, 2, 2, {0, 1, 0, 1}), make_graph(1, 2, {{0, 1, 1.0}})).value, 0,
               1e-9});
  auto half = PredictionField::from_probs(1, 1, 2, {0.5, 0.5});
  c.push_back({"pce 0.5", partial_ce_loss(half, {{0, 1}}, exact).value, ln2, 1e-9});
  c.push_back({"pce certain", partial_ce_loss(onehot2, {{0, 0}}, exact).value, 0, 1e-9});
  c.push_back({"pce empty", partial_ce_loss(onehot2, {}, exact).value, 0, 0});
  c.push_back({"expansion uniform", expansion_loss(onehot2, {0, 1}, exact).value, 2 * ln2, 1e-9});
  c.push_back({"expansion saturates",
               double(expansion_loss(PredictionField::from_probs(1, 1, 2, {1, 0}), {0, 1}, exact).saturated), 1, 0});
  c.push_back({"suppression zero", suppression_loss(PredictionField::from_probs(1, 1, 2, {1, 0}), {0}, exact).value,
               0, 1e-9});
  c.push_back({"suppression 0.5", suppression_loss(onehot2, {0}, exact).value, ln2, 1e-9});
  BarrierConfig flat;
  flat.epsilon = 0.1;
  c.push_back({"flat barrier above",
               flat_log_barrier(PredictionField::from_probs(1, 1, 2, {0.3, 0.7}), {0, 1}, flat, exact).value, 0, 0});
  c.push_back({"flat barrier 0.05",
               flat_log_barrier(PredictionField::from_probs(1, 1, 2, {0.05, 0.95}), {0, 1}, flat, exact).value, ln2,
               1e-9});
  BarrierConfig quad;
  quad.lower_bounds = {0.3, 0.0};
  c.push_back({"quad barrier", quadratic_barrier(PredictionField::from_probs(1, 1, 2, {0.1, 0.9}), quad).value, 0.04,
               1e-9});
  quad.lower_bounds = {0.1, 0.0};
  c.push_back({"quad barrier kink grad",
               std::abs(quadratic_barrier(PredictionField::from_probs(1, 1, 2, {0.1, 0.9}), quad).grad[0]), 0, 0});
  c.push_back({"absent suppressor 0.2",
               absent_class_suppressor(PredictionField::from_probs(1, 1, 2, {0.8, 0.2}), 1).value, 0.04, 1e-9});
  c.push_back({"absent suppressor 0",
               absent_class_suppressor(PredictionField::from_probs(1, 1, 2, {1, 0}), 1).value, 0, 0});
  std::vector<CategoricalDist> b91{CategoricalDist({0.9, 0.1})};
  c.push_back({"fairness (0.9,0.1)", fairness_loss(b91), 0.9 * std::log(0.9) + 0.1 * std::log(0.1), 1e-9});
  c.push_back({"fairness quoted", fairness_loss(b91), -0.325083, 5e-7});
  std::vector<CategoricalDist> bu{CategoricalDist({0.5, 0.5})};
  c.push_back({"fairness uniform", fairness_loss(bu), -ln2, 1e-9});
  std::vector<CategoricalDist> bh{CategoricalDist({1.0, 0.0})};
  c.push_back({"fairness one-hot", fairness_loss(bh), 0, 1e-9});
  std::vector<CategoricalDist> b55{CategoricalDist({0.5, 0.5})};
  c.push_back({"balance value", *balance_loss(b55, CategoricalDist({0.9, 0.1})),
               0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-9});
  c.push_back({"balance undefined", double(balance_loss(b55, CategoricalDist({1, 0})).has_value()), 0, 0});
  c.push_back({"class weight v=1", unnormalized_class_weight(0.9, 1), 10.0, 1e-9});
  c.push_back({"class weight v=2", unnormalized_class_weight(0.9, 2), 1.0 / 0.19, 1e-9});
  std::vector<int> y0{0};
  c.push_back({"weighted ce certain", weighted_ce_loss(bh, y0, WeightedCEConfig{0.9, {3, 3}}), 0, 1e-9});

  Image flat_img(3, 3, 1);
  auto g = build_affinity(flat_img, {});
  c.push_back({"affinity constant edges", double(g.edges.size()), 12, 0});
  c.push_back({"affinity constant weight", g.edges[0].weight, 1.0, 0});
  Image pair(1, 2, 1);
  pair.at(0, 1, 0) = 0.25;
  AffinityConfig bw;
  bw.bandwidth = 0.25;
  c.push_back({"affinity e^-1/2", build_affinity(pair, bw).edges[0].weight, std::exp(-0.5), 1e-9});
  c.push_back({"affinity 2x2 edges", double(build_affinity(Image(2, 2, 1), {}).edges.size()), 4, 0});
  auto single = sizeseg::apply(make_graph(1, 2, {{0, 1, 0.3}}), std::vector<double>{1, 0});
  c.push_back({"apply single edge", single[1], 0.3, 0});

  auto lbl = [](std::vector<std::uint8_t> v) {
    LabelMap m(1, int(v.size()));
    m.labels = std::move(v);
    return m;
  };
  ConfusionMatrix flip(2);
  flip.add(lbl({0, 0, 0, 1}), lbl({0, 0, 1, 1}));
  c.push_back({"miou hand matrix", miou(flip), (2.0 / 3.0 + 0.5) / 2, 1e-9});
  ConfusionMatrix dm(2);
  dm.add(lbl({1, 1, 0, 0}), lbl({1, 0, 1, 0}));
  c.push_back({"dice overlap 1", dice(dm), 0.5, 1e-9});
  c.push_back({"relative error", relative_error(0.25, 0.2), 0.25, 1e-9});

  LabelMap big(64, 64);
  std::fill_n(big.labels.begin(), 1024, std::uint8_t(1));
  c.push_back({"sizes 1024/4096", sizes_from_mask(big, 2)[1], 0.25, 0});
  SampleRecord a, b;
  a.exact_sizes = CategoricalDist({0.2, 0.8});
  b.exact_sizes = CategoricalDist({0.4, 0.6});
  std::vector<SampleRecord> ab{a, b};
  c.push_back({"dataset mean", dataset_mean_sizes(ab)[0], 0.3, 1e-9});

  TrainConfig lr;
  lr.learning_rate = 0.3;
  c.push_back({"lr step 0", lr_at(0, 10, lr), 0.3, 0});
  c.push_back({"lr step total", lr_at(10, 10, lr), 0.0, 0});
  lr.poly_power = 1.0;
  c.push_back({"lr half linear", lr_at(5, 10, lr), 0.15, 1e-12});

  Outcome o;
  int failed = 0;
  for (const auto& k : c) {
    if (!(std::abs(k.got - k.expected) <= k.tol)) {
      ++failed;
      log("P2 mismatch " + k.name + ": got " + fmt("%.12g", k.got) + " expected " + fmt("%.12g", k.expected));
    }
  }
  o.pass = failed == 0;
  o.detail = std::to_string(c.size() - failed) + "/" + std::to_string(c.size()) + " analytic examples match";
  return o;
}

// P3

Outcome mre_law() {
  Outcome o;
  const double sigma = sigma_for_mre(0.08);
  Rng rng(20240601);
  const int draws = 1000000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) acc += std::abs(rng.normal(0.0, sigma));
  const double mad = acc / draws;
  const double draw_err = std::abs(mad - mre_for_sigma(sigma)) / mre_for_sigma(sigma);

  Rng size_rng(7);
  std::vector<SampleRecord> data(10000);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double obj = size_rng.uniform(0.05, 0.5);
    data[i].exact_sizes = CategoricalDist({1.0 - obj, obj});
    data[i].tags = {0, 1};
    Rng r = Rng(99).split(i);
    data[i].sizes = corrupt_sizes(data[i].exact_sizes, sigma, r);
  }
  const double dataset_mre = mre(data);
  const double dataset_err = std::abs(dataset_mre - 0.08) / 0.08;
  o.pass = draw_err < 0.01 && dataset_err < 0.03;
  o.detail = "mean|eps| " + fmt("%.6f", mad) + " vs " + fmt("%.6f", mre_for_sigma(sigma)) + " (" +
             fmt("%.3f%%", 100 * draw_err) + "); dataset mre " + fmt("%.5f", dataset_mre) + " vs 0.08 (" +
             fmt("%.1f%%", 100 * dataset_err) + ", renormalized 2-class first-order value " +
             fmt("%.5f", 0.08 / std::sqrt(2.0)) + ")";
  return o;
}

// P4

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> x) {
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0, theta = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / double(j + 1);
    if (u[j] - t > 0) theta = t;
  }
  for (double& v : x) v = std::max(v - theta, 0.0);
  return x;
}

Outcome equal_size_bias() {
  Outcome o;
  Rng rng(4242);
  double worst = 0.0;
  const LossOptions exact{0.0};
  for (int trial = 0; trial < 50; ++trial) {
    const int K = rng.uniform_int(2, 6);
    TagSet tags;
    for (int k = 0; k < K; ++k)
      if (rng.uniform() < 0.5) tags.push_back(k);
    if (tags.empty()) tags.push_back(rng.uniform_int(0, K - 1));

    std::vector<double> s(static_cast<std::size_t>(K));
    for (double& v : s) v = 0.05 + rng.uniform();
    s = CategoricalDist::normalized(s).vec();
    auto value = [&](const std::vector<double>& p) {
      return expansion_loss(PredictionField::from_probs(1, 1, K, p), tags, exact).value;
    };
    double f = value(s);
    double step = 0.1;
    for (int it = 0; it < 20000 && step > 1e-14; ++it) {
      std::vector<double> g(std::size_t(K), 0.0);
      for (int t : tags) g[std::size_t(t)] = -1.0 / s[std::size_t(t)];
      // backtracking along the projected path
      while (step > 1e-14) {
        std::vector<double> x = s;
        for (int k = 0; k < K; ++k) x[std::size_t(k)] -= step * g[std::size_t(k)];
        x = project_simplex(x);
        bool feasible = true;
        for (int t : tags) feasible = feasible && x[std::size_t(t)] > 0.0;
        if (feasible) {
          const double fx = value(x);
          if (fx <= f) {
            const bool moved = x != s;
            s = x;
            f = fx;
            step *= 1.5;
            if (!moved) step = 0;
            break;
          }
        }
        step *= 0.5;
      }
    }
    const auto target = uniform_over(tags, K);
    double gap = 0.0;
    for (int k = 0; k < K; ++k) gap = std::max(gap, std::abs(s[std::size_t(k)] - target[std::size_t(k)]));
    worst = std::max(worst, gap);
  }
  o.pass = worst < 1e-3;
  o.detail = "50 tag sets, worst L_inf gap to uniform_over(T,K) " + fmt("%.2e", worst);
  return o;
}

// P5

Outcome zero_avoidance() {
  Outcome o;
  bool ok = true;
  Rng rng(55);
  int flag_checks = 0, undefined_checks = 0;
  for (int i = 0; i < 500; ++i) {
    const int K = 4;
    std::vector<double> v(K), q(K);
    for (int k = 0; k < K; ++k) {
      v[std::size_t(k)] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      q[std::size_t(k)] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    }
    v[std::size_t(rng.uniform_int(0, K - 1))] += 0.1;
    q[std::size_t(rng.uniform_int(0, K - 1))] += 0.1;
    auto vd = CategoricalDist::normalized(v), qd = CategoricalDist::normalized(q);
    bool meets = false, zero_support = false;
    for (int k = 0; k < K; ++k) {
      meets = meets || (vd[std::size_t(k)] > 0 && qd[std::size_t(k)] == 0);
      zero_support = zero_support || (qd[std::size_t(k)] > 0 && vd[std::size_t(k)] == 0);
    }
    ok = ok && kl_forward(vd, qd).infinite == meets;
    std::vector<CategoricalDist> batch{qd};
    ok = ok && balance_loss(batch, vd).has_value() == !zero_support;
    flag_checks += meets;
    undefined_checks += zero_support;
  }

  // a saturated image loss is clamped inside the trainer objective
  GenConfig gc;
  gc.classes = 3;
  gc.height = gc.width = 16;
  auto data = generate(gc, 80);
  TrainConfig cfg;
  cfg.mode = SupervisionMode::Size;
  cfg.log_floor = 0.0;
  TrainingProblem problem(data, 3, cfg);
  std::vector<double> dead(data[0].mask.pixels() * 3, 0.0);
  for (std::size_t p = 0; p < data[0].mask.pixels(); ++p) dead[p * 3] = 1.0;
  auto clamped = problem.loss(0, PredictionField::from_probs(16, 16, 3, dead));
  ok = ok && clamped.saturated && clamped.value == cfg.saturation_clamp;

  // ten SGD steps with the forward KL objective
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.5;
  ModelConfig m;
  m.classes = 3;
  std::vector<double> losses;
  auto r = train(data, data, m, cfg, [&](const EpochRecord& e) { losses.push_back(e.mean_loss); });
  const std::size_t steps = (data.size() + 7) / 8;
  bool finite = std::isfinite(r.initial_loss) && std::isfinite(r.final_loss);
  for (double l : losses) finite = finite && std::isfinite(l) && l <= cfg.saturation_clamp;
  ok = ok && finite && steps == 10;
  o.pass = ok;
  o.detail = "forward-KL flag agrees on 500 pairs (" + std::to_string(flag_checks) + " infinite), balance undefined on " +
             std::to_string(undefined_checks) + " zero-support targets, clamp " + fmt("%.0e", clamped.value) +
             ", 10-step run loss " + fmt("%.4f", r.initial_loss) + " -> " + fmt("%.4f", r.final_loss);
  return o;
}

// Desk-scale training runs

struct RunResult {
  double miou = 0.0;
  double dice = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string report_json;
  std::string checkpoint_id;
};

struct DataPair {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  int classes = 0;
};

DataPair shapes_data() {
  GenConfig g;
  g.classes = 5;
  g.seed = 1;
  DataPair d{generate(g, 200), {}, 5};
  g.seed = 2;
  d.val = generate(g, 50);
  for (auto& s : d.train) s.seeds = generate_scribbles(s.mask, g.classes, ScribbleConfig{0.0, 1, 0});
  return d;
}

DataPair medical_data() {
  GenConfig g;
  g.mode = GenMode::MedicalLike;
  g.classes = 2;
  g.seed = 1;
  DataPair d{generate(g, 300), {}, 2};
  g.seed = 2;
  d.val = generate(g, 60);
  for (auto& s : d.train) s.seeds = generate_scribbles(s.mask, g.classes, ScribbleConfig{0.0, 1, 0});
  return d;
}

RunResult run(const DataPair& data, SupervisionMode mode, std::uint64_t seed, double mre_level, double crf_weight,
              std::uint64_t init_seed) {
  ModelConfig m;
  m.classes = data.classes;
  m.init_seed = init_seed;
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.crf_weight = crf_weight;
  cfg.corruption_sigma = sigma_for_mre(mre_level);
  cfg.eval_every = 5;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = train(data.train, data.val, m, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RunResult out{*r.final_val_miou, *r.final_val_dice, r.initial_loss, r.final_loss, report_to_json(r),
                r.final_checkpoint_id};
  log(to_string(mode) + " seed " + std::to_string(seed) + " mRE " + fmt("%.0f%%", 100 * mre_level) + ": mIoU " +
      fmt("%.4f", out.miou) + " DSC " + fmt("%.4f", out.dice) + " loss " + fmt("%.4f", out.initial_loss) + " -> " +
      fmt("%.4f", out.final_loss) + " (" + fmt("%.0fs", secs) + ")");
  return out;
}

bool decreased(const RunResult& r) { return r.final_loss < r.initial_loss; }

constexpr double kShapesCrf = 0.1;
constexpr double kMedicalCrf = 1.0;

// P6

Outcome headline() {
  auto d = shapes_data();
  auto full = run(d, SupervisionMode::FullMask, 0, 0.0, kShapesCrf, 0);
  auto size = run(d, SupervisionMode::SizeCrf, 0, 0.0, kShapesCrf, 0);
  auto expand = run(d, SupervisionMode::ExpandCrf, 0, 0.0, kShapesCrf, 0);
  Outcome o;
  o.pass = size.miou >= 0.85 * full.miou && expand.miou < size.miou && decreased(full) && decreased(size) &&
           decreased(expand);
  o.detail = "full-mask " + fmt("%.4f", full.miou) + ", size-crf " + fmt("%.4f", size.miou) + " (ratio " +
             fmt("%.3f", size.miou / full.miou) + " >= 0.85), expand-crf " + fmt("%.4f", expand.miou);
  return o;
}

// P7

Outcome noise_robustness() {
  auto d = shapes_data();
  double m0 = 0, m16 = 0;
  bool dec = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto a = run(d, SupervisionMode::SizeCrf, seed, 0.0, kShapesCrf, seed);
    auto b = run(d, SupervisionMode::SizeCrf, seed, 0.16, kShapesCrf, seed);
    m0 += a.miou / 3;
    m16 += b.miou / 3;
    dec = dec && decreased(a) && decreased(b);
  }
  Outcome o;
  o.pass = std::abs(m0 - m16) <= 0.05 && dec;
  o.detail = "mean val mIoU over 3 seeds: mRE 0% " + fmt("%.4f", m0) + ", mRE 16% " + fmt("%.4f", m16) + " (gap " +
             fmt("%.4f", m0 - m16) + ")";
  return o;
}

// P8

Outcome seeds_integration() {
  auto d = shapes_data();
  double seeds_only = 0, with_size = 0;
  bool dec = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto a = run(d, SupervisionMode::SeedsOnly, seed, 0.0, kShapesCrf, seed);
    auto b = run(d, SupervisionMode::SizeCrfSeeds, seed, 0.0, kShapesCrf, seed);
    seeds_only += a.miou / 3;
    with_size += b.miou / 3;
    dec = dec && decreased(a) && decreased(b);
  }
  Outcome o;
  o.pass = seeds_only <= with_size - 0.05 && dec;
  o.detail = "one-click mean mIoU: seeds-only " + fmt("%.4f", seeds_only) + ", size-crf-seeds " +
             fmt("%.4f", with_size) + " (gain " + fmt("%.4f", with_size - seeds_only) + ")";
  return o;
}

// P9

Outcome target_vs_barrier() {
  auto d = medical_data();
  const std::uint64_t seed = 1;
  auto barrier = run(d, SupervisionMode::QuadBarrierSeeds, seed, 0.0, kMedicalCrf, 0);
  auto fixed = run(d, SupervisionMode::FixedMeanSize, seed, 0.0, kMedicalCrf, 0);
  bool ok = decreased(barrier) && decreased(fixed);
  std::string detail = "quad-barrier DSC " + fmt("%.4f", barrier.dice) + "; size target DSC";
  double exact_dice = 0;
  for (double level : {0.0, 0.08, 0.32, 0.64}) {
    auto r = run(d, SupervisionMode::SizeCrfSeeds, seed, level, kMedicalCrf, 0);
    if (level == 0.0) exact_dice = r.dice;
    ok = ok && r.dice >= barrier.dice && decreased(r);
    detail += " " + fmt("%.0f%%", 100 * level) + "=" + fmt("%.4f", r.dice);
  }
  ok = ok && fixed.dice >= 0.8 * exact_dice;
  detail += "; fixed-mean DSC " + fmt("%.4f", fixed.dice) + " (ratio " + fmt("%.3f", fixed.dice / exact_dice) + ")";
  return {ok, detail};
}

// P10

Outcome determinism() {
  auto d = shapes_data();
  auto a = run(d, SupervisionMode::SizeCrfSeeds, 0, 0.16, kShapesCrf, 0);
  auto b = run(d, SupervisionMode::SizeCrfSeeds, 0, 0.16, kShapesCrf, 0);
  Outcome o;
  o.pass = a.checkpoint_id == b.checkpoint_id && a.report_json == b.report_json;
  o.detail = "size-crf-seeds at mRE 16% twice: checkpoint " + a.checkpoint_id + " / " + b.checkpoint_id +
             (a.report_json == b.report_json ? ", reports identical" : ", reports differ");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"P1", gradient_suite},  {"P2", analytic_values},   {"P3", mre_law},          {"P4", equal_size_bias},
      {"P5", zero_avoidance},  {"P6", headline},          {"P7", noise_robustness}, {"P8", seeds_integration},
      {"P9", target_vs_barrier}, {"P10", determinism}};
  std::vector<std::string> selected(argv + 1, argv + argc);
  bool all_pass = true;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s [%.1fs]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}

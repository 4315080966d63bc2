#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sizeseg/errors.hpp"
#include "sizeseg/experiments.hpp"
#include "sizeseg/pngio.hpp"

using namespace sizeseg;
namespace fs = std::filesystem;

TEST_SUITE("experiments") {

TEST_CASE("probe covers every loss with small residuals") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto rows = run_loss_probe(random_probe_input(8, 8, 4, seed));
    REQUIRE(rows.size() == probed_ops().size());
    for (const auto& r : rows) {
      INFO(r.op);
      CHECK(r.status == "ok");
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("probe uniform field has zero size loss") {
  auto in = parse_probe_input(R"({"height":2,"width":2,"classes":2,"logits":[0,0,0,0,0,0,0,0]})");
  auto rows = run_loss_probe(in);
  CHECK(rows.front().op == "size_target_loss");
  CHECK(std::abs(rows.front().value) < 1e-15);
  auto csv = probe_to_csv(rows);
  CHECK(csv.rfind("op,", 0) == 0);
  CHECK_THROWS(parse_probe_input(R"({"height":2,"width":2,"classes":2,"logits":[0]})"));
}

TEST_CASE("probe fixtures") {
  for (const auto& entry : fs::directory_iterator(SIZESEG_FIXTURE_DIR)) {
    if (entry.path().extension() != ".json") continue;
    std::string text = read_file_bytes(entry.path());
    auto rows = run_loss_probe(parse_probe_input(text));
    for (const auto& r : rows) {
      INFO(entry.path().filename().string() << " " << r.op);
      if (r.status == "ok") CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("sweep config validation") {
  SweepConfig cfg;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.modes = {SupervisionMode::SizeCrf};
  cfg.mre_levels = {};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.mre_levels = {0.0, 0.04, 0.08, 0.16, 0.32};
  CHECK_NOTHROW(validate(cfg));
  auto back = sweep_config_from_json(sweep_config_to_json(cfg));
  CHECK(back.mre_levels == cfg.mre_levels);
  CHECK(back.modes == cfg.modes);
}

TEST_CASE("runs csv round trip and summary") {
  std::vector<RunRow> rows{{"size-crf", 0.0, 0.0, 0, 0.0, 0.8, 0.7, 2.0, 1.0, "aa"},
                           {"size-crf", 0.0, 0.0, 1, 0.0, 0.6, 0.5, 2.0, 1.0, "bb"},
                           {"size-crf", 0.16, 0.0, 0, 0.15, 0.7, 0.6, 2.0, 1.0, "cc"}};
  auto csv = runs_to_csv(rows);
  auto back = runs_from_csv(csv);
  REQUIRE(back.size() == 3);
  CHECK(runs_to_csv(back) == csv);
  auto summary = summarize(rows);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].runs == 2);
  CHECK(std::abs(summary[0].mean_miou - 0.7) < 1e-12);
  CHECK(std::abs(summary[0].std_miou - std::sqrt(0.02)) < 1e-12);
  CHECK(std::abs(summary[1].sigma - sigma_for_mre(0.16)) < 1e-15);
  CHECK(summary_to_csv(summary).find("sigma") != std::string::npos);
  auto svg = svg_plot(summary, PlotMetric::MIoU);
  CHECK(svg.rfind("<svg", 0) == 0);
}

TEST_CASE("report") {
  CHECK_THROWS_AS(write_report(fs::temp_directory_path() / "sizeseg_no_such_run"), ConfigError);
  auto dir = fs::temp_directory_path() / "sizeseg_report_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<RunRow> rows{{"size-crf", 0.08, 0.0, 0, 0.08, 0.8, 0.7, 2.0, 1.0, "aa"}};
  { std::ofstream(dir / "runs.csv") << runs_to_csv(rows); }
  auto text = write_report(dir);
  CHECK(text.find("size-crf") != std::string::npos);
  for (auto f : {"summary.txt", "summary.csv", "miou_vs_mre.svg", "dice_vs_mre.svg"})
    CHECK(fs::exists(dir / "report" / f));
  auto first = read_file_bytes(dir / "report" / "summary.csv");
  write_report(dir);
  CHECK(read_file_bytes(dir / "report" / "summary.csv") == first);
  fs::remove_all(dir);
}

TEST_CASE("small sweep is deterministic across worker counts") {
  GenConfig gc;
  gc.classes = 3;
  gc.height = gc.width = 12;
  Dataset train_set{3, default_class_names(gc.mode, 3), generate(gc, 6)};
  gc.seed = 1;
  Dataset val_set{3, default_class_names(gc.mode, 3), generate(gc, 3)};
  SweepConfig cfg;
  cfg.modes = {SupervisionMode::SizeCrf, SupervisionMode::SeedsOnly};
  cfg.mre_levels = {0.0, 0.16};
  cfg.seeds = {0, 1};
  cfg.train.epochs = 1;
  cfg.train.batch_size = 3;
  cfg.model.classes = 3;
  cfg.model.hidden = {2};
  auto a = fs::temp_directory_path() / "sizeseg_sweep_a";
  auto b = fs::temp_directory_path() / "sizeseg_sweep_b";
  fs::remove_all(a);
  fs::remove_all(b);
  auto rows = run_sweep(train_set, val_set, cfg, a);
  // size mode over 2 mRE levels plus the seeds-only mode, per seed
  CHECK(rows.size() == 6);
  cfg.workers = 3;
  run_sweep(train_set, val_set, cfg, b);
  CHECK(read_file_bytes(a / "runs.csv") == read_file_bytes(b / "runs.csv"));
  CHECK(read_file_bytes(a / "summary.csv") == read_file_bytes(b / "summary.csv"));
  CHECK(fs::exists(a / "points" / point_name("size-crf", 0.16, 0.0, 1) / "report.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

}

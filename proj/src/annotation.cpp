#include "sizeseg/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "sizeseg/errors.hpp"
#include "sizeseg/pngio.hpp"

namespace sizeseg {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(GridMode g) {
  switch (g) {
    case GridMode::Grid5x4:
      return "5x4";
    case GridMode::Grid3x3:
      return "3x3";
    case GridMode::None:
      return "none";
  }
  return "none";
}

std::optional<GridMode> grid_mode_from_string(const std::string& s) {
  if (s == "5x4") return GridMode::Grid5x4;
  if (s == "3x3") return GridMode::Grid3x3;
  if (s == "none") return GridMode::None;
  return std::nullopt;
}

namespace {

json record_json(const AnnotationRecord& r) {
  return json{{"record_id", r.record_id},   {"request_id", r.request_id}, {"image_id", r.image_id},
              {"class_id", r.cls},          {"fraction", r.fraction},     {"elapsed_ms", r.elapsed_ms},
              {"grid_mode", to_string(r.grid)}, {"annotator", r.annotator}, {"timestamp_ms", r.timestamp_ms}};
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

HttpResponse json_response(int status, const json& j) { return {status, "application/json", j.dump() + "\n"}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

std::uint64_t id_number(const std::string& record_id) {
  if (record_id.size() < 2 || record_id[0] != 'r') return 0;
  try {
    return std::stoull(record_id.substr(1));
  } catch (...) {
    return 0;
  }
}

std::string format_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%08llu", static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

std::string record_to_json(const AnnotationRecord& r) { return record_json(r).dump(); }

AnnotationRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    AnnotationRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.request_id = j.value("request_id", std::string{});
    r.image_id = j.at("image_id").get<std::string>();
    r.cls = j.at("class_id").get<int>();
    r.fraction = j.at("fraction").get<double>();
    r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
    const auto grid = grid_mode_from_string(j.value("grid_mode", std::string("none")));
    if (!grid) throw ConfigError("unknown grid mode");
    r.grid = *grid;
    r.annotator = j.value("annotator", std::string{});
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("annotation record: ") + e.what());
  }
}

AnnotationStore::AnnotationStore(fs::path log_path) : path_(std::move(log_path)) {
  std::vector<AnnotationRecord> records;
  if (!path_.empty() && fs::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        throw ConfigError("annotation log " + path_.string() + ": bad JSON on line " + std::to_string(line_no));
      }
      if (j.contains("requests")) {
        for (const auto& [req, rec] : j["requests"].items()) requests_[req] = rec.get<std::string>();
        continue;
      }
      auto r = record_from_json(line);
      if (!r.request_id.empty()) requests_[r.request_id] = r.record_id;
      next_id_ = std::max(next_id_, id_number(r.record_id) + 1);
      records.push_back(std::move(r));
    }
  }
  for (const auto& [req, rec] : requests_) next_id_ = std::max(next_id_, id_number(rec) + 1);
  publish(std::move(records));
}

void AnnotationStore::publish(std::vector<AnnotationRecord> records) {
  auto next = std::make_shared<const std::vector<AnnotationRecord>>(std::move(records));
  std::lock_guard lock(snapshot_mutex_);
  records_ = std::move(next);
}

std::shared_ptr<const std::vector<AnnotationRecord>> AnnotationStore::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return records_;
}

AnnotationStore::AppendResult AnnotationStore::append(AnnotationRecord record) {
  std::lock_guard lock(writer_);
  if (!record.request_id.empty()) {
    auto it = requests_.find(record.request_id);
    if (it != requests_.end()) return {it->second, true};
  }
  record.record_id = format_id(next_id_);
  if (!path_.empty()) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    out << record_to_json(record) << "\n";
    out.flush();
    if (!out) throw RuntimeFailure("annotation log: cannot append to " + path_.string());
  }
  ++next_id_;
  if (!record.request_id.empty()) requests_[record.request_id] = record.record_id;
  auto records = *snapshot();
  records.push_back(record);
  publish(std::move(records));
  return {record.record_id, false};
}

std::vector<AnnotationRecord> latest_records(const std::vector<AnnotationRecord>& records) {
  std::map<std::tuple<std::string, std::string, int>, std::size_t> last;
  for (std::size_t i = 0; i < records.size(); ++i)
    last[{records[i].annotator, records[i].image_id, records[i].cls}] = i;
  std::vector<std::size_t> keep;
  for (const auto& [key, i] : last) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  std::vector<AnnotationRecord> out;
  for (auto i : keep) out.push_back(records[i]);
  return out;
}

std::vector<AnnotationRecord> AnnotationStore::latest() const { return latest_records(*snapshot()); }

void AnnotationStore::compact() {
  std::lock_guard lock(writer_);
  auto kept = latest_records(*snapshot());
  if (!path_.empty()) {
    const fs::path tmp = path_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      json requests = json::object();
      for (const auto& [req, rec] : requests_) requests[req] = rec;
      out << json{{"requests", requests}}.dump() << "\n";
      for (const auto& r : kept) out << record_to_json(r) << "\n";
      if (!out) throw RuntimeFailure("annotation log: cannot write " + tmp.string());
    }
    fs::rename(tmp, path_);
  }
  publish(std::move(kept));
}

SessionStats compute_stats(const Dataset& dataset, const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) index[dataset.samples[i].id] = i;

  SessionStats st;
  st.images_total = dataset.samples.size();
  const auto latest = latest_records(records);
  st.records = latest.size();

  std::vector<double> re_sum(std::size_t(dataset.classes), 0.0), ms_sum(std::size_t(dataset.classes), 0.0);
  std::vector<std::size_t> re_n(std::size_t(dataset.classes), 0), n(std::size_t(dataset.classes), 0);
  std::vector<SizeErrorSample> errors;
  std::map<std::string, std::set<int>> annotated;
  for (const auto& r : latest) {
    auto it = index.find(r.image_id);
    if (it == index.end() || r.cls < 0 || r.cls >= dataset.classes) continue;
    const auto k = std::size_t(r.cls);
    ++n[k];
    ms_sum[k] += double(r.elapsed_ms);
    annotated[r.image_id].insert(r.cls);
    const double truth = dataset.samples[it->second].exact_sizes[k];
    if (truth > 0.0) {
      const double re = relative_error(r.fraction, truth);
      re_sum[k] += re;
      ++re_n[k];
      errors.push_back({int(it->second), r.cls, re});
    }
  }
  for (int k = 0; k < dataset.classes; ++k) {
    const auto ku = std::size_t(k);
    if (n[ku] == 0) continue;
    ClassStats c;
    c.cls = k;
    c.name = ku < dataset.class_names.size() ? dataset.class_names[ku] : std::to_string(k);
    c.records = n[ku];
    c.mean_elapsed_ms = ms_sum[ku] / double(n[ku]);
    if (re_n[ku] > 0) c.mean_relative_error = re_sum[ku] / double(re_n[ku]);
    st.classes.push_back(c);
  }
  st.histogram = re_histogram(errors);
  if (!errors.empty()) st.mre = mean_relative_error(errors);
  for (const auto& s : dataset.samples) {
    const auto it = annotated.find(s.id);
    bool complete = true;
    bool any = false;
    for (int t : s.tags) {
      if (t == 0) continue;
      any = true;
      if (it == annotated.end() || !it->second.count(t)) complete = false;
    }
    if (any && complete) ++st.images_complete;
  }
  return st;
}

std::string stats_to_json(const SessionStats& st) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json classes = json::array();
  for (const auto& c : st.classes)
    classes.push_back({{"class_id", c.cls},
                       {"name", c.name},
                       {"records", c.records},
                       {"mean_relative_error", opt(c.mean_relative_error)},
                       {"mean_elapsed_ms", opt(c.mean_elapsed_ms)}});
  json hist = json::array();
  for (std::size_t i = 0; i < st.histogram.classes.size(); ++i)
    hist.push_back({{"class_id", st.histogram.classes[i]},
                    {"images", st.histogram.image_counts[i]},
                    {"frequencies", st.histogram.frequencies[i]}});
  json j{{"records", st.records},
         {"mre", opt(st.mre)},
         {"classes", classes},
         {"histogram", {{"bin_width", st.histogram.bin_width}, {"bins", st.histogram.bins}, {"classes", hist}}},
         {"completion", {{"images_total", st.images_total}, {"images_complete", st.images_complete}}}};
  return j.dump();
}

ExportResult build_export(const Dataset& dataset, const std::vector<AnnotationRecord>& records,
                          const std::optional<std::string>& annotator) {
  // (image, class) -> latest fraction; records are in log order so later wins.
  std::map<std::pair<std::string, int>, double> chosen;
  for (const auto& r : records) {
    if (annotator && r.annotator != *annotator) continue;
    chosen[{r.image_id, r.cls}] = r.fraction;
  }
  ExportResult out;
  for (const auto& s : dataset.samples) {
    std::vector<double> v(std::size_t(dataset.classes), 0.0);
    bool complete = true;
    bool any = false;
    for (int t : s.tags) {
      if (t == 0) continue;
      auto it = chosen.find({s.id, t});
      if (it == chosen.end()) {
        complete = false;
        break;
      }
      any = true;
      v[std::size_t(t)] = it->second;
    }
    if (!complete || !any) {
      bool touched = false;
      for (int t : s.tags) touched = touched || chosen.count({s.id, t});
      if (touched) out.excluded.push_back(s.id);
      continue;
    }
    const double objects = std::accumulate(v.begin(), v.end(), 0.0);
    if (objects > 1.0) {
      for (auto& x : v) x /= objects;
      out.rescaled.push_back(s.id);
    } else {
      v[0] = 1.0 - objects;
    }
    out.sizes.emplace(s.id, CategoricalDist::normalized(std::move(v)));
  }
  if (out.sizes.empty()) out.warnings.push_back("no fully annotated images; export is empty");
  if (!out.excluded.empty())
    out.warnings.push_back(std::to_string(out.excluded.size()) + " partially annotated images excluded");
  if (!out.rescaled.empty())
    out.warnings.push_back(std::to_string(out.rescaled.size()) + " images had object sizes summing above 1 and were rescaled");
  return out;
}

AnnotationService::AnnotationService(ServiceConfig cfg, Clock clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_) clock_ = now_ms;
  if (cfg_.log_path.empty() && !cfg_.dataset_dir.empty()) cfg_.log_path = cfg_.dataset_dir / "annotations.ndjson";
  if (!cfg_.dataset_dir.empty() && fs::exists(cfg_.dataset_dir / "manifest.json")) {
    dataset_ = load_dataset(cfg_.dataset_dir);
    for (std::size_t i = 0; i < dataset_->samples.size(); ++i) index_[dataset_->samples[i].id] = i;
    const json manifest = json::parse(read_file_bytes(cfg_.dataset_dir / "manifest.json"));
    for (const auto& entry : manifest.at("images"))
      image_paths_[entry.at("id").get<std::string>()] = cfg_.dataset_dir / entry.at("image").get<std::string>();
  }
  store_ = std::make_unique<AnnotationStore>(dataset_ ? cfg_.log_path : fs::path{});
}

HttpResponse AnnotationService::manifest() const {
  if (!dataset_) return error_response(503, "no dataset loaded");
  json images = json::array();
  for (const auto& s : dataset_->samples)
    images.push_back({{"id", s.id}, {"width", s.image.width}, {"height", s.image.height}, {"tags", s.tags}});
  json classes = json::array();
  for (int k = 0; k < dataset_->classes; ++k)
    classes.push_back({{"id", k}, {"name", dataset_->class_names[std::size_t(k)]}, {"annotatable", k != 0}});
  return json_response(200, json{{"classes", classes}, {"images", images}});
}

HttpResponse AnnotationService::image(const std::string& id) const {
  if (!dataset_) return error_response(503, "no dataset loaded");
  auto it = image_paths_.find(id);
  if (it == image_paths_.end()) return error_response(404, "unknown image '" + id + "'");
  try {
    return {200, "image/png", read_file_bytes(it->second)};
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse AnnotationService::post_annotation(const std::string& body) {
  if (!dataset_) return error_response(503, "no dataset loaded");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return json_response(422, json{{"error", "validation failed"},
                                   {"fields", {{{"field", "body"}, {"message", "not valid JSON"}}}}});
  }
  if (!j.is_object())
    return json_response(422, json{{"error", "validation failed"},
                                   {"fields", {{{"field", "body"}, {"message", "expected a JSON object"}}}}});
  json errors = json::array();
  auto fail = [&](const std::string& field, const std::string& message) {
    errors.push_back({{"field", field}, {"message", message}});
  };

  AnnotationRecord r;
  const SampleRecord* sample = nullptr;
  if (!j.contains("image_id") || !j["image_id"].is_string()) {
    fail("image_id", "required string");
  } else {
    r.image_id = j["image_id"].get<std::string>();
    auto it = index_.find(r.image_id);
    if (it == index_.end())
      fail("image_id", "unknown image");
    else
      sample = &dataset_->samples[it->second];
  }
  if (!j.contains("class_id") || !j["class_id"].is_number_integer()) {
    fail("class_id", "required integer");
  } else {
    r.cls = j["class_id"].get<int>();
    if (r.cls < 1 || r.cls >= dataset_->classes)
      fail("class_id", "must be an object class in [1, " + std::to_string(dataset_->classes - 1) + "]");
    else if (sample && std::find(sample->tags.begin(), sample->tags.end(), r.cls) == sample->tags.end())
      fail("class_id", "class is not tagged in this image");
  }
  if (!j.contains("fraction") || !j["fraction"].is_number()) {
    fail("fraction", "required number");
  } else {
    r.fraction = j["fraction"].get<double>();
    if (!(r.fraction >= 0.0 && r.fraction <= 1.0)) fail("fraction", "must lie in [0, 1]");
  }
  if (j.contains("elapsed_ms")) {
    if (!j["elapsed_ms"].is_number_integer() || j["elapsed_ms"].get<std::int64_t>() < 0)
      fail("elapsed_ms", "must be a non-negative integer");
    else
      r.elapsed_ms = j["elapsed_ms"].get<std::int64_t>();
  }
  if (j.contains("grid_mode")) {
    const auto g = j["grid_mode"].is_string() ? grid_mode_from_string(j["grid_mode"].get<std::string>()) : std::nullopt;
    if (!g)
      fail("grid_mode", "must be one of 5x4, 3x3, none");
    else
      r.grid = *g;
  }
  if (j.contains("annotator")) {
    if (!j["annotator"].is_string() || j["annotator"].get<std::string>().empty())
      fail("annotator", "must be a non-empty string");
    else
      r.annotator = j["annotator"].get<std::string>();
  } else if (cfg_.annotator) {
    r.annotator = *cfg_.annotator;
  } else {
    fail("annotator", "required (no server default)");
  }
  if (j.contains("request_id")) {
    if (!j["request_id"].is_string())
      fail("request_id", "must be a string");
    else
      r.request_id = j["request_id"].get<std::string>();
  }
  if (!errors.empty()) return json_response(422, json{{"error", "validation failed"}, {"fields", errors}});

  r.timestamp_ms = clock_();
  const auto res = store_->append(r);
  return json_response(res.duplicate ? 200 : 201, json{{"record_id", res.record_id}, {"duplicate", res.duplicate}});
}

HttpResponse AnnotationService::stats() const {
  if (!dataset_) return error_response(503, "no dataset loaded");
  return {200, "application/json", stats_to_json(compute_stats(*dataset_, *store_->snapshot())) + "\n"};
}

HttpResponse AnnotationService::export_sizes(const std::string& body) {
  if (!dataset_) return error_response(503, "no dataset loaded");
  std::optional<std::string> annotator = cfg_.annotator;
  std::string name = "annotated";
  if (!body.empty()) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      return error_response(422, "export body is not valid JSON");
    }
    if (j.contains("annotator")) {
      if (j["annotator"].is_null())
        annotator.reset();
      else
        annotator = j["annotator"].get<std::string>();
    }
    if (j.contains("name")) name = j["name"].get<std::string>();
    if (name.empty() || name.find_first_of("/\\.") != std::string::npos)
      return error_response(422, "export name must be a plain file stem");
  }
  const auto result = build_export(*dataset_, *store_->snapshot(), annotator);
  const fs::path path = cfg_.dataset_dir / "sizes" / (name + ".json");
  try {
    write_sizes_file(path, result.sizes);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
  return json_response(200, json{{"path", fs::relative(path, cfg_.dataset_dir).generic_string()},
                                 {"exported", result.sizes.size()},
                                 {"excluded", result.excluded},
                                 {"rescaled", result.rescaled},
                                 {"warnings", result.warnings}});
}

void AnnotationService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/api/manifest", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, manifest()); });
  server.Get(R"(/api/image/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, image(req.matches[1]));
  });
  server.Post("/api/annotation", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, post_annotation(req.body));
  });
  server.Get("/api/stats", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, stats()); });
  server.Post("/api/export", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, export_sizes(req.body));
  });
  if (cfg_.static_dir && fs::is_directory(*cfg_.static_dir)) {
    server.set_mount_point("/", cfg_.static_dir->string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<!doctype html><title>sizeseg annotation</title><p>API at /api/manifest</p>\n", "text/html");
    });
  }
}

bool serve(AnnotationService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  return server.listen(host, port);
}

}  // namespace sizeseg

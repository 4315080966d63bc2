#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sizeseg/dataset_io.hpp"
#include "sizeseg/eval.hpp"

namespace httplib {
class Server;
}

namespace sizeseg {

enum class GridMode { Grid5x4, Grid3x3, None };

std::string to_string(GridMode g);
std::optional<GridMode> grid_mode_from_string(const std::string& s);

struct AnnotationRecord {
  std::string record_id;
  std::string request_id;
  std::string image_id;
  int cls = 0;
  double fraction = 0.0;
  std::int64_t elapsed_ms = 0;
  GridMode grid = GridMode::None;
  std::string annotator;
  std::int64_t timestamp_ms = 0;
};

std::string record_to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const std::string& line);

/// Append-only NDJSON record log. Appends go through one writer lock; readers
/// take an immutable snapshot.
class AnnotationStore {
 public:
  /// Replays `log_path` if it exists. An empty path keeps records in memory.
  explicit AnnotationStore(std::filesystem::path log_path = {});

  struct AppendResult {
    std::string record_id;
    bool duplicate = false;
  };
  /// Assigns the record id. A repeated non-empty request id returns the
  /// original record id and writes nothing.
  AppendResult append(AnnotationRecord record);

  std::shared_ptr<const std::vector<AnnotationRecord>> snapshot() const;
  /// Latest record per (annotator, image, class), in log order.
  std::vector<AnnotationRecord> latest() const;
  /// Rewrites the log keeping only the latest records.
  void compact();
  const std::filesystem::path& path() const { return path_; }

 private:
  void publish(std::vector<AnnotationRecord> records);

  std::filesystem::path path_;
  mutable std::mutex writer_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const std::vector<AnnotationRecord>> records_;
  std::map<std::string, std::string> requests_;
  std::uint64_t next_id_ = 1;
};

std::vector<AnnotationRecord> latest_records(const std::vector<AnnotationRecord>& records);

struct ClassStats {
  int cls = 0;
  std::string name;
  std::size_t records = 0;
  std::optional<double> mean_relative_error;
  std::optional<double> mean_elapsed_ms;
};

struct SessionStats {
  std::vector<ClassStats> classes;
  REHistogram histogram;
  std::size_t records = 0;
  std::size_t images_total = 0;
  std::size_t images_complete = 0;
  std::optional<double> mre;
};

/// Pure function of the records and the ground truth.
SessionStats compute_stats(const Dataset& dataset, const std::vector<AnnotationRecord>& records);
std::string stats_to_json(const SessionStats& stats);

struct ExportResult {
  SizesMap sizes;
  std::vector<std::string> excluded;
  std::vector<std::string> rescaled;
  std::vector<std::string> warnings;
};

/// Builds per-image size targets from annotations of tagged object classes.
/// Background is 1 minus the object sum; object sums above 1 are rescaled
/// proportionally. Images missing any tagged object class are excluded.
/// With an annotator, only that annotator's records count; otherwise the
/// latest record per (image, class) across annotators.
ExportResult build_export(const Dataset& dataset, const std::vector<AnnotationRecord>& records,
                          const std::optional<std::string>& annotator);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceConfig {
  std::filesystem::path dataset_dir;
  /// Defaults to <dataset_dir>/annotations.ndjson.
  std::filesystem::path log_path;
  /// Default annotator for posts without one and for exports.
  std::optional<std::string> annotator;
  /// Built UI bundle served at "/" when set.
  std::optional<std::filesystem::path> static_dir;
};

class AnnotationService {
 public:
  using Clock = std::function<std::int64_t()>;

  /// A missing dataset directory leaves the service up with every dataset
  /// endpoint answering 503.
  explicit AnnotationService(ServiceConfig cfg, Clock clock = {});

  HttpResponse manifest() const;
  HttpResponse image(const std::string& id) const;
  HttpResponse post_annotation(const std::string& body);
  HttpResponse stats() const;
  HttpResponse export_sizes(const std::string& body);

  bool has_dataset() const { return dataset_.has_value(); }
  AnnotationStore& store() { return *store_; }
  const ServiceConfig& config() const { return cfg_; }

  /// Registers the API routes and the static mount on `server`.
  void mount(httplib::Server& server);

 private:
  ServiceConfig cfg_;
  Clock clock_;
  std::optional<Dataset> dataset_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::filesystem::path> image_paths_;
  std::unique_ptr<AnnotationStore> store_;
};

/// Blocks serving on host:port until stopped. Returns false if binding fails.
bool serve(AnnotationService& service, const std::string& host, int port);

}  // namespace sizeseg

#pragma once

// HTTP facade over scenario runs.
//
//   POST /api/runs                      body: scenario JSON -> {"run_id": ...}
//   GET  /api/runs/{id}/trace           ?district=1,2&metric=unmet,pct_undernourished
//   GET  /api/runs/{id}/storage         state-level monthly storage vs. ground truth
//   GET  /api/districts                 district records + baseline undernourishment
//
// Handlers are plain member functions so they can be exercised without sockets.

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "pdsim/io.hpp"

namespace pdsim {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  /// Persisted runs (scenario.json + trace.csv per run id). Empty disables.
  std::optional<std::filesystem::path> cache_dir;
  std::string cors_origin = "*";
  std::size_t worker_threads = 4;
};

class RunService {
 public:
  /// An empty or invalid dataset leaves the service up but answering 422.
  RunService(Dataset dataset, RunConfig config, ServiceOptions options = {});
  static std::unique_ptr<RunService> unavailable(std::string reason, ServiceOptions options = {});

  bool ready() const noexcept { return ready_; }
  const ServiceOptions& options() const noexcept { return options_; }

  HttpResponse post_run(const std::string& body);
  HttpResponse get_trace(const std::string& run_id, const std::optional<std::string>& district,
                         const std::optional<std::string>& metric);
  HttpResponse get_storage(const std::string& run_id);
  HttpResponse get_districts() const;

  /// Content hash of (dataset fingerprint, model configuration, canonical scenario).
  std::string run_id_for(const ScenarioSpec& spec) const;

  /// Runs held in memory (tests use this to observe dedupe).
  std::size_t cached_runs() const;

 private:
  RunService(std::string reason, ServiceOptions options);

  using TracePtr = std::shared_ptr<const SimulationTrace>;
  TracePtr lookup(const std::string& run_id);
  TracePtr load_from_disk(const std::string& run_id) const;
  void save_to_disk(const std::string& run_id, const ScenarioSpec& spec,
                    const SimulationTrace& trace) const;
  HttpResponse not_ready() const;

  bool ready_ = false;
  std::string unavailable_reason_;
  ServiceOptions options_;
  Dataset dataset_;
  RunConfig config_;
  PreparedModel model_;
  DistrictIndex index_;
  std::string model_fingerprint_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<TracePtr>> runs_;
};

/// Blocking HTTP server around a RunService.
class HttpServer {
 public:
  explicit HttpServer(RunService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 binds an ephemeral port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pdsim

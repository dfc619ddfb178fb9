#include "pdsim/service.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "pdsim/calibration.hpp"
#include "pdsim/csv.hpp"

namespace pdsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

HttpResponse json_response(int status, const json& body) {
  return {status, body.dump(), "application/json"};
}

HttpResponse error_response(int status, const std::string& message,
                            std::optional<int> district_id = std::nullopt) {
  json body = {{"error", message}};
  if (district_id) body["district_id"] = *district_id;
  return json_response(status, body);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string model_configuration(const SimulationInputs& in) {
  json doc = {
      {"waste_fraction", in.engine.waste_fraction},
      {"reserve_weeks", in.engine.reserve_weeks},
      {"harvest_window", in.engine.harvest_window},
      {"transport_latency", in.engine.transport_latency},
      {"eq2_convention", to_string(in.engine.eq2_convention)},
      {"allocation", to_string(in.allocation)},
      {"flood_hits_farm_storage", in.flood_hits_farm_storage},
      {"aay", in.policy.aay_kg_per_household_per_month},
      {"priority", in.policy.priority_kg_per_person_per_month},
      {"slope", in.undernourishment.slope},
      {"intercept", in.undernourishment.intercept},
      {"spike_gain", in.undernourishment.spike_gain},
  };
  json cards = json::array();
  for (const auto& c : in.cardholders) {
    cards.push_back({c.district_id, c.aay_households, c.priority_persons});
  }
  doc["cardholders"] = std::move(cards);
  return doc.dump();
}

bool valid_run_id(const std::string& id) {
  return id.size() == 16 &&
         id.find_first_not_of("0123456789abcdef") == std::string::npos;
}

}  // namespace

RunService::RunService(Dataset dataset, RunConfig config, ServiceOptions options)
    : options_(std::move(options)), dataset_(std::move(dataset)), config_(std::move(config)) {
  if (dataset_.districts.empty()) {
    unavailable_reason_ = "dataset has no districts";
    return;
  }
  try {
    model_ = prepare_model(dataset_, config_);
  } catch (const Error& e) {
    unavailable_reason_ = e.what();
    return;
  }
  index_ = DistrictIndex(dataset_.districts);
  model_fingerprint_ = dataset_fingerprint(dataset_) + "\n" + model_configuration(model_.inputs);
  if (options_.cache_dir) fs::create_directories(*options_.cache_dir);
  ready_ = true;
}

RunService::RunService(std::string reason, ServiceOptions options)
    : unavailable_reason_(std::move(reason)), options_(std::move(options)) {}

std::unique_ptr<RunService> RunService::unavailable(std::string reason, ServiceOptions options) {
  return std::unique_ptr<RunService>(new RunService(std::move(reason), std::move(options)));
}

HttpResponse RunService::not_ready() const {
  return error_response(422, "dataset unavailable: " + unavailable_reason_);
}

std::string RunService::run_id_for(const ScenarioSpec& spec) const {
  return fnv1a_hex(model_fingerprint_ + "\n" + scenario_to_json(spec).dump());
}

std::size_t RunService::cached_runs() const {
  std::lock_guard lock(mutex_);
  return runs_.size();
}

HttpResponse RunService::post_run(const std::string& body) {
  if (!ready_) return not_ready();
  ScenarioSpec spec;
  try {
    spec = scenario_from_json(json::parse(body));
  } catch (const json::parse_error& e) {
    return error_response(400, std::string("body is not valid JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  }
  try {
    spec.validate(index_);
    resolve_params(model_.inputs, spec.overrides).engine.validate();
  } catch (const UnknownDistrict& e) {
    return error_response(422, e.what(), e.id());
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  }

  const std::string id = run_id_for(spec);
  std::promise<TracePtr> promise;
  std::shared_future<TracePtr> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = runs_.find(id);
    if (it == runs_.end()) {
      future = promise.get_future().share();
      runs_.emplace(id, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      TracePtr trace = load_from_disk(id);
      if (!trace) {
        trace = std::make_shared<const SimulationTrace>(run(spec, model_.inputs));
        save_to_disk(id, spec, *trace);
      }
      promise.set_value(std::move(trace));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mutex_);
      runs_.erase(id);
    }
  }
  try {
    future.get();
  } catch (const UnknownDistrict& e) {
    return error_response(422, e.what(), e.id());
  } catch (const ValidationFailed& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
  return json_response(200, {{"run_id", id}});
}

RunService::TracePtr RunService::lookup(const std::string& run_id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = runs_.find(run_id); it != runs_.end()) {
      try {
        return it->second.get();
      } catch (...) {
        return nullptr;
      }
    }
  }
  if (!valid_run_id(run_id)) return nullptr;
  TracePtr trace = load_from_disk(run_id);
  if (trace) {
    std::promise<TracePtr> p;
    p.set_value(trace);
    std::lock_guard lock(mutex_);
    runs_.emplace(run_id, p.get_future().share());
  }
  return trace;
}

RunService::TracePtr RunService::load_from_disk(const std::string& run_id) const {
  if (!options_.cache_dir) return nullptr;
  const fs::path dir = *options_.cache_dir / run_id;
  if (!fs::exists(dir / "trace.csv") || !fs::exists(dir / "scenario.json")) return nullptr;
  try {
    const ScenarioSpec spec = load_scenario(dir / "scenario.json");
    auto trace = read_trace_csv(dir / "trace.csv");
    trace.scenario_name = spec.name;
    trace.calendar = spec.calendar;
    trace.horizon_weeks = spec.horizon_weeks;
    trace.district_ids = index_.ids();
    trace.cells.resize(static_cast<std::size_t>(spec.horizon_weeks) * trace.district_ids.size());
    return std::make_shared<const SimulationTrace>(std::move(trace));
  } catch (const Error&) {
    // unreadable cache entries are recomputed
    return nullptr;
  }
}

void RunService::save_to_disk(const std::string& run_id, const ScenarioSpec& spec,
                              const SimulationTrace& trace) const {
  if (!options_.cache_dir) return;
  const fs::path dir = *options_.cache_dir / run_id;
  fs::create_directories(dir);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  // trace first: an entry only counts once scenario.json is present
  write_file_atomic(dir / "trace.csv", csv.str());
  write_file_atomic(dir / "scenario.json", scenario_to_json(spec).dump(2) + "\n");
}

HttpResponse RunService::get_trace(const std::string& run_id,
                                   const std::optional<std::string>& district,
                                   const std::optional<std::string>& metric) {
  if (!ready_) return not_ready();
  const TracePtr trace = lookup(run_id);
  if (!trace) return error_response(404, "unknown run id '" + run_id + "'");

  std::vector<std::size_t> positions;
  if (district && !district->empty()) {
    for (const auto& token : split_list(*district)) {
      int id = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
      if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
        return error_response(400, "district filter '" + token + "' is not an integer id");
      }
      const auto pos = index_.find(id);
      if (!pos) return error_response(400, "unknown district " + std::to_string(id), id);
      positions.push_back(*pos);
    }
  } else {
    for (std::size_t i = 0; i < trace->district_count(); ++i) positions.push_back(i);
  }
  std::vector<Metric> metrics;
  if (metric && !metric->empty()) {
    for (const auto& token : split_list(*metric)) {
      const auto m = parse_metric(token);
      if (!m) return error_response(400, "unknown metric '" + token + "'");
      metrics.push_back(*m);
    }
  } else {
    const auto all = all_metrics();
    metrics.assign(all.begin(), all.end());
  }

  json dates = json::array();
  for (int w = 0; w < trace->horizon_weeks; ++w) {
    dates.push_back(format_date(trace->calendar.date_of(w)));
  }
  json series = json::array();
  for (std::size_t pos : positions) {
    for (Metric m : metrics) {
      std::vector<double> values(static_cast<std::size_t>(trace->horizon_weeks));
      for (int w = 0; w < trace->horizon_weeks; ++w) values[w] = trace->at(w, pos).value(m);
      series.push_back({{"district_id", trace->district_ids[pos]},
                        {"metric", metric_name(m)},
                        {"values", std::move(values)}});
    }
  }
  return json_response(200, {{"run_id", run_id},
                             {"scenario", trace->scenario_name},
                             {"horizon_weeks", trace->horizon_weeks},
                             {"dates", std::move(dates)},
                             {"series", std::move(series)}});
}

HttpResponse RunService::get_storage(const std::string& run_id) {
  if (!ready_) return not_ready();
  const TracePtr trace = lookup(run_id);
  if (!trace) return error_response(404, "unknown run id '" + run_id + "'");
  const auto monthly = aggregate_to_state_monthly(*trace);
  std::map<std::chrono::year_month, double> truth;
  for (const auto& p : dataset_.storage_truth) {
    truth[std::chrono::year_month{p.date.year(), p.date.month()}] = p.kg;
  }
  json months = json::array();
  json model = json::array();
  json observed = json::array();
  for (const auto& m : monthly) {
    months.push_back(format_month(m.month));
    model.push_back(kg_to_tonnes(m.kg));
    if (auto it = truth.find(m.month); it != truth.end()) {
      observed.push_back(kg_to_tonnes(it->second));
    } else {
      observed.push_back(nullptr);
    }
  }
  return json_response(200, {{"run_id", run_id},
                             {"months", std::move(months)},
                             {"model_tonnes", std::move(model)},
                             {"truth_tonnes", std::move(observed)}});
}

HttpResponse RunService::get_districts() const {
  if (!ready_) return not_ready();
  json out = json::array();
  const auto& in = model_.inputs;
  for (std::size_t i = 0; i < in.districts.size(); ++i) {
    const auto& d = in.districts[i];
    const auto& c = in.cardholders[i];
    out.push_back({{"id", d.id},
                   {"name", d.name},
                   {"total_pop", d.total_population},
                   {"rural_pop", d.rural_population},
                   {"urban_pop", d.urban_population},
                   {"avg_family_size", d.avg_family_size},
                   {"aay_households", c.aay_households},
                   {"priority_persons", c.priority_persons},
                   {"baseline_pct_undernourished",
                    baseline_undernourished(c, in.undernourishment)}});
  }
  return json_response(200, out);
}

// --- sockets ---------------------------------------------------------------

struct HttpServer::Impl {
  RunService& service;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> query(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

}  // namespace

HttpServer::HttpServer(RunService& service) : impl_(new Impl{service, {}}) {
  auto& svr = impl_->server;
  const std::size_t workers = std::max<std::size_t>(1, service.options().worker_threads);
  svr.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  svr.set_default_headers({{"Access-Control-Allow-Origin", service.options().cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  svr.Post("/api/runs", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.post_run(req.body));
  });
  svr.Get(R"(/api/runs/([^/]+)/trace)",
          [&service](const httplib::Request& req, httplib::Response& res) {
            send(res, service.get_trace(req.matches[1], query(req, "district"),
                                        query(req, "metric")));
          });
  svr.Get(R"(/api/runs/([^/]+)/storage)",
          [&service](const httplib::Request& req, httplib::Response& res) {
            send(res, service.get_storage(req.matches[1]));
          });
  svr.Get("/api/districts", [&service](const httplib::Request&, httplib::Response& res) {
    send(res, service.get_districts());
  });
  svr.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        send(res, error_response(500, message));
      });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace pdsim

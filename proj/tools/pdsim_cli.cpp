// pdsim command-line interface.
//
// Exit codes: 0 success, 2 validation failure (bad input data, config or
// scenario), 3 runtime error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "pdsim/calibration.hpp"
#include "pdsim/io.hpp"
#include "pdsim/service.hpp"

namespace fs = std::filesystem;
using namespace pdsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::vector<TraceFormat> parse_formats(const std::string& text) {
  if (text == "csv") return {TraceFormat::CsvLong};
  if (text == "json") return {TraceFormat::Json};
  if (text == "both") return {TraceFormat::CsvLong, TraceFormat::Json};
  throw InvalidArgument("--format must be csv, json or both");
}

ScenarioSpec pick_scenario(const RunConfig& config, const std::string& override_path) {
  if (!override_path.empty()) return load_scenario(override_path);
  if (config.scenario) return load_scenario(*config.scenario);
  return ScenarioSpec{};
}

fs::path pick_out(const RunConfig& config, const std::string& override_path) {
  return override_path.empty() ? config.output_dir : fs::path(override_path);
}

int cmd_validate(const std::string& config_path) {
  const auto config = load_run_config(config_path);
  const auto report = validate_files(config);
  if (report.ok()) {
    std::cout << "ok\n";
    return kExitOk;
  }
  std::cout << report.to_string();
  return kExitValidation;
}

int cmd_estimate(const std::string& config_path, const std::string& out_path) {
  const auto config = load_run_config(config_path);
  const auto dataset = load_dataset(config);
  RationInputs in{dataset.districts, dataset.fractions, &dataset.adjacency, dataset.state_totals,
                  config.ration};
  const auto result = estimate_cardholders(in);
  std::ostringstream buf;
  write_cardholders_csv(buf, result);
  if (out_path.empty() || out_path == "-") {
    std::cout << buf.str();
  } else {
    write_file_atomic(out_path, buf.str());
  }
  return kExitOk;
}

void simulate_one(const ScenarioSpec& spec, const SimulationInputs& inputs,
                  const std::vector<TraceFormat>& formats, const fs::path& dir) {
  const auto trace = run(spec, inputs);
  for (const auto& p : emit_trace(trace, formats, dir)) std::cout << p.string() << '\n';
}

int cmd_simulate(const std::string& config_path, const std::string& scenario_path,
                 const std::string& out_path, const std::string& format,
                 const std::string& batch_dir) {
  const auto config = load_run_config(config_path);
  const auto formats = parse_formats(format);
  const auto dataset = load_dataset(config);
  const auto model = prepare_model(dataset, config);
  const fs::path out = pick_out(config, out_path);

  if (batch_dir.empty()) {
    simulate_one(pick_scenario(config, scenario_path), model.inputs, formats, out);
    return kExitOk;
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(batch_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  // parse everything first so a bad file fails the batch before any run starts
  std::vector<ScenarioSpec> specs;
  for (const auto& f : files) specs.push_back(load_scenario(f));

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> logs(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < files.size(); k = next++) {
      const auto trace = run(specs[k], model.inputs);
      for (const auto& p : emit_trace(trace, formats, out / files[k].stem())) {
        logs[k] += p.string() + "\n";
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (std::size_t t = 0; t < std::min(workers, files.size()); ++t) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  for (auto& f : pool) f.get();
  for (const auto& l : logs) std::cout << l;
  return kExitOk;
}

int cmd_calibrate(const std::string& config_path, const std::string& scenario_path,
                  const std::string& year_mode, int target_year, int years_back,
                  const std::string& out_path) {
  const auto config = load_run_config(config_path);
  const auto dataset = load_dataset(config);
  if (dataset.storage_truth.empty()) {
    throw InvalidArgument("calibrate needs storage_truth in the dataset");
  }
  const auto model = prepare_model(dataset, config);
  auto spec = pick_scenario(config, scenario_path);
  if (target_year == 0) target_year = static_cast<int>(spec.calendar.anchor.year());

  const auto mode = parse_year_mode(year_mode);
  const double rate = depletion_rate_from_year(dataset.storage_truth, mode, target_year, years_back);
  spec.state_depletion_kg_per_week = rate;

  const auto trace = run(spec, model.inputs);
  const auto monthly = aggregate_to_state_monthly(trace);
  std::vector<StoragePoint> truth;
  for (const auto& p : dataset.storage_truth) {
    if (static_cast<int>(p.date.year()) == target_year) truth.push_back(p);
  }
  const auto aligned = align_months(monthly, truth);
  const auto cmp = compare_series(aligned.model, aligned.truth);

  nlohmann::json doc = {
      {"year_mode", year_mode},
      {"target_year", target_year},
      {"depletion_tonnes_per_week", kg_to_tonnes(rate)},
      {"months", aligned.months.size()},
      {"rmse_tonnes", kg_to_tonnes(cmp.rmse)},
      {"mape_percent", std::isfinite(cmp.mape) ? nlohmann::json(cmp.mape) : nlohmann::json()},
      {"pearson_r", cmp.pearson_r ? nlohmann::json(*cmp.pearson_r) : nlohmann::json()},
  };
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < aligned.months.size(); ++i) {
    series.push_back({{"month", format_month(aligned.months[i])},
                      {"model_tonnes", kg_to_tonnes(aligned.model[i])},
                      {"truth_tonnes", kg_to_tonnes(aligned.truth[i])}});
  }
  doc["series"] = std::move(series);
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
  }
  return kExitOk;
}

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path, const std::string& host, int port,
              const std::string& cache_dir, std::size_t workers) {
  const auto config = load_run_config(config_path);
  ServiceOptions options;
  if (!cache_dir.empty()) options.cache_dir = cache_dir;
  options.worker_threads = workers;

  std::unique_ptr<RunService> service;
  try {
    service = std::make_unique<RunService>(load_dataset(config), config, options);
  } catch (const ValidationFailed& e) {
    service = RunService::unavailable(e.what(), options);
  }
  if (!service->ready()) std::cerr << "warning: dataset unavailable, API will answer 422\n";

  HttpServer server(*service);
  const int bound = server.bind(host, port);
  std::cout << "listening on http://" << host << ':' << bound << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"District-level PDS wheat flow simulator"};
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--dataset,--config", config_path, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
  };

  auto* validate = app.add_subcommand("validate", "Lint the dataset");
  add_config(validate);

  std::string out_path;
  auto* estimate = app.add_subcommand("estimate-rations", "Cardholder estimates per stage (CSV)");
  add_config(estimate);
  estimate->add_option("--out", out_path, "Output CSV (default stdout)");

  std::string scenario_path;
  std::string format = "csv";
  std::string batch_dir;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the trace");
  add_config(simulate);
  simulate->add_option("--scenario", scenario_path, "Scenario JSON")->check(CLI::ExistingFile);
  simulate->add_option("--out", out_path, "Output directory");
  simulate->add_option("--format", format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}));
  simulate->add_option("--batch", batch_dir, "Run every *.json scenario in a directory")
      ->check(CLI::ExistingDirectory);

  std::string year_mode = "same-year";
  int target_year = 0;
  int years_back = 3;
  auto* calibrate = app.add_subcommand("calibrate", "Compare state storage with ground truth");
  add_config(calibrate);
  calibrate->add_option("--scenario", scenario_path, "Scenario JSON")->check(CLI::ExistingFile);
  calibrate->add_option("--year-mode", year_mode, "same-year, prior-year or multi-year");
  calibrate->add_option("--target-year", target_year, "Year to compare (default: calendar year)");
  calibrate->add_option("--years-back", years_back, "Years averaged by multi-year");
  calibrate->add_option("--out", out_path, "Output JSON (default stdout)");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cache_dir;
  std::size_t workers = 4;
  auto* serve = app.add_subcommand("serve", "HTTP service");
  add_config(serve);
  serve->add_option("--port", port, "Port (0 = ephemeral)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--cache", cache_dir, "Run cache directory");
  serve->add_option("--workers", workers, "Request worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(config_path);
    if (*estimate) return cmd_estimate(config_path, out_path);
    if (*simulate) return cmd_simulate(config_path, scenario_path, out_path, format, batch_dir);
    if (*calibrate) {
      return cmd_calibrate(config_path, scenario_path, year_mode, target_year, years_back, out_path);
    }
    if (*serve) return cmd_serve(config_path, host, port, cache_dir, workers);
  } catch (const ValidationFailed& e) {
    std::cerr << e.what();
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UnknownDistrict& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

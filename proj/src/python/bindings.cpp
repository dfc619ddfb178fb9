#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pdsim/calibration.hpp"
#include "pdsim/csv.hpp"
#include "pdsim/io.hpp"

namespace py = pybind11;
using namespace pdsim;

namespace {

DriveTimeMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  DriveTimeMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw InvalidArgument("drive-time matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Metric metric_or_throw(const std::string& name) {
  if (auto m = parse_metric(name)) return *m;
  throw InvalidArgument("unknown metric '" + name + "'");
}

struct Session {
  RunConfig config;
  Dataset dataset;
  PreparedModel model;
};

Session open_session(const std::filesystem::path& config_path) {
  Session s;
  s.config = load_run_config(config_path);
  s.dataset = load_dataset(s.config);
  s.model = prepare_model(s.dataset, s.config);
  return s;
}

ScenarioSpec scenario_arg(const Session& s, const py::object& scenario) {
  if (scenario.is_none()) return s.config.scenario ? load_scenario(*s.config.scenario) : ScenarioSpec{};
  if (py::isinstance<py::str>(scenario)) {
    const auto text = scenario.cast<std::string>();
    if (!text.empty() && text.front() == '{') return scenario_from_json(nlohmann::json::parse(text));
    return load_scenario(text);
  }
  // any mapping: round-trip through JSON text
  const auto dumped = py::module_::import("json").attr("dumps")(scenario).cast<std::string>();
  return scenario_from_json(nlohmann::json::parse(dumped));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "District-level PDS wheat flow simulator";

  auto base = py::register_exception<Error>(m, "PdsimError");
  py::register_exception<ValidationFailed>(m, "ValidationFailed", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<UnknownDistrict>(m, "UnknownDistrict", base.ptr());

  m.def(
      "weekly_demand",
      [](double aay_households, double priority_persons, double aay_kg, double priority_kg) {
        return weekly_demand({0, aay_households, priority_persons, EstimateStage::Capped},
                             {aay_kg, priority_kg});
      },
      py::arg("aay_households"), py::arg("priority_persons"), py::arg("aay_kg") = 35.0,
      py::arg("priority_kg") = 5.0, "Entitlement demand in kg/week.");

  m.def(
      "baseline_undernourished",
      [](double aay_households, double priority_persons, double slope, double intercept) {
        UndernourishmentModel model;
        model.slope = slope;
        model.intercept = intercept;
        return baseline_undernourished({0, aay_households, priority_persons, EstimateStage::Capped},
                                       model);
      },
      py::arg("aay_households"), py::arg("priority_persons"), py::arg("slope") = 83.67,
      py::arg("intercept") = 0.0);

  m.def(
      "fit_undernourishment_line",
      [](const std::vector<double>& ratios, const std::vector<double>& pcts, bool with_intercept) {
        if (ratios.size() != pcts.size()) throw LengthMismatch("ratios and pcts differ in length");
        std::vector<StateObservation> table;
        for (std::size_t i = 0; i < ratios.size(); ++i) table.push_back({ratios[i], pcts[i]});
        const auto fit = fit_undernourishment_line(table, with_intercept);
        py::dict d;
        d["slope"] = fit.model.slope;
        d["intercept"] = fit.model.intercept;
        d["slope_p_value"] = fit.slope_p_value;
        d["r_squared"] = fit.r_squared;
        d["observations"] = fit.observations;
        return d;
      },
      py::arg("ratios"), py::arg("pcts"), py::arg("with_intercept") = true);

  m.def(
      "market_split",
      [](double last_nonwasted, double last_procured, double msp, double msp_last,
         double market_price, double market_price_last, const std::string& convention) {
        return market_split({last_nonwasted, last_procured},
                            {msp, msp_last, market_price, market_price_last},
                            parse_eq2_convention(convention));
      },
      py::arg("last_nonwasted"), py::arg("last_procured"), py::arg("msp"), py::arg("msp_last"),
      py::arg("market_price"), py::arg("market_price_last"),
      py::arg("convention") = "as_stated_text", "Annual kg sold to the open market.");

  m.def(
      "scale_production",
      [](const std::vector<double>& yields_kg, double total_kg) {
        return scale_production(yields_kg, total_kg);
      },
      py::arg("yields_kg"), py::arg("state_total_kg"));

  m.def(
      "allocate",
      [](const std::vector<double>& requests, const std::vector<double>& surpluses,
         const std::vector<std::vector<double>>& drive_times, int week, int latency,
         const std::string& strategy) {
        const auto plan = allocate(requests, surpluses, to_matrix(drive_times), week, latency,
                                   parse_allocation_strategy(strategy));
        py::list out;
        for (const auto& s : plan) {
          py::dict d;
          d["from"] = s.from;
          d["to"] = s.to;
          d["kg"] = s.kg;
          d["dispatch_week"] = s.dispatch_week;
          d["arrival_week"] = s.arrival_week;
          out.append(d);
        }
        return out;
      },
      py::arg("requests"), py::arg("surpluses"), py::arg("drive_times"), py::arg("week") = 0,
      py::arg("latency") = 1, py::arg("strategy") = "pair_sorted");

  m.def(
      "compare_series",
      [](const std::vector<double>& model, const std::vector<double>& truth) {
        const auto c = compare_series(model, truth);
        py::dict d;
        d["rmse"] = c.rmse;
        d["mape"] = c.mape;
        d["pearson_r"] = c.pearson_r ? py::cast(*c.pearson_r) : py::none();
        return d;
      },
      py::arg("model"), py::arg("truth"));

  m.def(
      "validate",
      [](const std::filesystem::path& config) {
        std::vector<std::string> out;
        for (const auto& v : validate_files(load_run_config(config)).violations) {
          out.push_back((v.district_id ? std::to_string(*v.district_id) + ": " : "") + v.field +
                        ": " + v.message);
        }
        return out;
      },
      py::arg("config"), "Violations found in the dataset (empty when clean).");

  m.def(
      "estimate_rations",
      [](const std::filesystem::path& config) {
        const auto s = open_session(config);
        py::list out;
        for (std::size_t i = 0; i < s.model.rations.capped.size(); ++i) {
          const auto& c = s.model.rations.capped[i];
          py::dict d;
          d["id"] = c.district_id;
          d["aay_households"] = c.aay_households;
          d["priority_persons"] = c.priority_persons;
          d["covered_persons"] = c.covered_persons(s.dataset.districts[i].avg_family_size);
          d["total_pop"] = s.dataset.districts[i].total_population;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), "Capped cardholder estimates per district.");

  py::class_<SimulationTrace>(m, "Trace")
      .def_readonly("scenario_name", &SimulationTrace::scenario_name)
      .def_readonly("horizon_weeks", &SimulationTrace::horizon_weeks)
      .def_readonly("district_ids", &SimulationTrace::district_ids)
      .def_readonly("in_flight_kg", &SimulationTrace::in_flight_kg)
      .def_readonly("baseline_pct", &SimulationTrace::baseline_pct)
      .def_property_readonly("initial_mass", &SimulationTrace::initial_mass)
      .def_property_readonly_static(
          "metrics",
          [](py::object) {
            std::vector<std::string> names;
            for (Metric m : all_metrics()) names.emplace_back(metric_name(m));
            return names;
          })
      .def(
          "series",
          [](const SimulationTrace& t, const std::string& metric) {
            const Metric m = metric_or_throw(metric);
            std::vector<std::vector<double>> out(t.district_count(),
                                                 std::vector<double>(t.horizon_weeks));
            for (int w = 0; w < t.horizon_weeks; ++w) {
              for (std::size_t i = 0; i < t.district_count(); ++i) out[i][w] = t.at(w, i).value(m);
            }
            return out;
          },
          py::arg("metric"), "One list per district (in district_ids order) of weekly values.")
      .def(
          "to_csv",
          [](const SimulationTrace& t) {
            std::ostringstream out;
            write_trace_csv(out, t);
            return out.str();
          })
      .def("to_json", [](const SimulationTrace& t) {
        std::ostringstream out;
        write_trace_json(out, t);
        return out.str();
      });

  m.def(
      "simulate",
      [](const std::filesystem::path& config, const py::object& scenario) {
        const auto s = open_session(config);
        const auto spec = scenario_arg(s, scenario);
        py::gil_scoped_release release;
        return run(spec, s.model.inputs);
      },
      py::arg("config"), py::arg("scenario") = py::none(),
      "Run a scenario (path, JSON text or dict; default: the config's scenario).");
}

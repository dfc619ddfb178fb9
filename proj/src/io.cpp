#include "pdsim/io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "pdsim/csv.hpp"

namespace pdsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.byte, e.what());
  }
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InvalidArgument("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
std::optional<T> opt(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

int to_id(const CsvTable& t, const CsvTable::Row& row, std::size_t col) {
  const auto v = t.integer(row, col);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ParseError(t.label(), row.line, col + 1, "district id out of range");
  }
  return static_cast<int>(v);
}

std::map<int, double> read_id_tonnes(const fs::path& path, const char* column) {
  const auto t = CsvTable::read(path);
  const auto id_col = t.column("id");
  const auto v_col = t.column(column);
  std::map<int, double> out;
  for (const auto& row : t.rows()) {
    const int id = to_id(t, row, id_col);
    const double tonnes = t.number(row, v_col);
    if (tonnes < 0) throw ParseError(t.label(), row.line, v_col + 1, "negative mass");
    if (!out.emplace(id, tonnes_to_kg(tonnes)).second) {
      throw ParseError(t.label(), row.line, id_col + 1, "duplicate id " + std::to_string(id));
    }
  }
  return out;
}

std::size_t column_or_alias(const CsvTable& t, const char* name, const char* alias) {
  if (auto c = t.find_column(alias)) return *c;
  return t.column(name);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

// --- run configuration -----------------------------------------------------

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    reject_unknown_keys(doc, {"dataset", "engine", "entitlements", "undernourishment", "ration",
                              "scenario", "output_dir"},
                        "run config");
    const json& ds = doc.at("dataset");
    reject_unknown_keys(ds, {"districts", "fractions", "adjacency", "drive_times", "state_totals",
                             "undernourishment_states", "storage_truth", "yields",
                             "harvest_history", "initial_stock"},
                        "dataset");
    cfg.dataset.districts = resolve(base_dir, ds.at("districts").get<std::string>());
    cfg.dataset.fractions = resolve(base_dir, ds.at("fractions").get<std::string>());
    cfg.dataset.adjacency = resolve(base_dir, ds.at("adjacency").get<std::string>());
    cfg.dataset.drive_times = resolve(base_dir, ds.at("drive_times").get<std::string>());
    cfg.dataset.state_totals = resolve(base_dir, ds.at("state_totals").get<std::string>());
    auto optional_path = [&](const char* key) -> std::optional<fs::path> {
      if (auto p = opt<std::string>(ds, key)) return resolve(base_dir, *p);
      return std::nullopt;
    };
    cfg.dataset.undernourishment_states = optional_path("undernourishment_states");
    cfg.dataset.storage_truth = optional_path("storage_truth");
    cfg.dataset.yields = optional_path("yields");
    cfg.dataset.harvest_history = optional_path("harvest_history");
    cfg.dataset.initial_stock = optional_path("initial_stock");

    if (auto it = doc.find("engine"); it != doc.end()) {
      const json& e = *it;
      reject_unknown_keys(e, {"waste_fraction", "reserve_weeks", "harvest_window",
                              "transport_latency", "eq2_convention", "allocation",
                              "flood_hits_farm_storage"},
                          "engine");
      if (auto v = opt<double>(e, "waste_fraction")) cfg.engine.waste_fraction = *v;
      if (auto v = opt<int>(e, "reserve_weeks")) cfg.engine.reserve_weeks = *v;
      if (auto v = opt<std::vector<int>>(e, "harvest_window")) cfg.engine.harvest_window = *v;
      if (auto v = opt<int>(e, "transport_latency")) cfg.engine.transport_latency = *v;
      if (auto v = opt<std::string>(e, "eq2_convention")) {
        cfg.engine.eq2_convention = parse_eq2_convention(*v);
      }
      if (auto v = opt<std::string>(e, "allocation")) cfg.allocation = parse_allocation_strategy(*v);
      if (auto v = opt<bool>(e, "flood_hits_farm_storage")) cfg.flood_hits_farm_storage = *v;
    }
    if (auto it = doc.find("entitlements"); it != doc.end()) {
      reject_unknown_keys(*it, {"aay_kg_per_household_per_month", "priority_kg_per_person_per_month"},
                          "entitlements");
      if (auto v = opt<double>(*it, "aay_kg_per_household_per_month")) {
        cfg.policy.aay_kg_per_household_per_month = *v;
      }
      if (auto v = opt<double>(*it, "priority_kg_per_person_per_month")) {
        cfg.policy.priority_kg_per_person_per_month = *v;
      }
    }
    if (auto it = doc.find("undernourishment"); it != doc.end()) {
      const json& u = *it;
      reject_unknown_keys(u, {"slope", "intercept", "spike_gain", "fit", "with_intercept"},
                          "undernourishment");
      if (auto v = opt<double>(u, "slope")) cfg.undernourishment.slope = *v;
      if (auto v = opt<double>(u, "intercept")) cfg.undernourishment.intercept = *v;
      if (auto v = opt<double>(u, "spike_gain")) cfg.undernourishment.spike_gain = *v;
      if (auto v = opt<bool>(u, "with_intercept")) cfg.fit_with_intercept = *v;
      if (auto v = opt<std::string>(u, "fit")) {
        if (*v == "none") {
          cfg.line_fit = LineFitMode::Fixed;
        } else if (*v == "intercept") {
          cfg.line_fit = LineFitMode::FitIntercept;
        } else if (*v == "both") {
          cfg.line_fit = LineFitMode::FitBoth;
        } else {
          throw InvalidArgument("undernourishment.fit must be none, intercept or both");
        }
      }
    }
    if (auto it = doc.find("ration"); it != doc.end()) {
      reject_unknown_keys(*it, {"scale_urban"}, "ration");
      if (auto v = opt<bool>(*it, "scale_urban")) cfg.ration.scale_urban = *v;
    }
    if (auto v = opt<std::string>(doc, "scenario")) cfg.scenario = resolve(base_dir, *v);
    if (auto v = opt<std::string>(doc, "output_dir")) cfg.output_dir = resolve(base_dir, *v);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("run config: ") + e.what());
  }
  cfg.engine.validate();
  if (!cfg.policy.valid()) throw InvalidArgument("entitlements must be positive");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path), path.parent_path());
}

// --- input files -----------------------------------------------------------

std::vector<DistrictRecord> read_districts(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_id = t.column("id");
  const auto c_name = t.column("name");
  const auto c_total = t.column("total_pop");
  const auto c_rural = t.column("rural_pop");
  const auto c_urban = t.column("urban_pop");
  const auto c_family = t.column("avg_family_size");
  std::vector<DistrictRecord> out;
  for (const auto& row : t.rows()) {
    DistrictRecord d;
    d.id = to_id(t, row, c_id);
    d.name = t.field(row, c_name);
    d.total_population = t.integer(row, c_total);
    d.rural_population = t.integer(row, c_rural);
    d.urban_population = t.integer(row, c_urban);
    d.avg_family_size = t.number(row, c_family);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<FractionRow> read_fractions(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_id = t.column("id");
  const std::array<std::size_t, kCardSeriesCount> cols{
      t.column("rural_aay"), t.column("urban_aay"), t.column("rural_priority"),
      t.column("urban_priority")};
  std::vector<FractionRow> out;
  for (const auto& row : t.rows()) {
    FractionRow f;
    f.district_id = to_id(t, row, c_id);
    for (std::size_t s = 0; s < kCardSeriesCount; ++s) {
      f.fraction[s] = t.optional_number(row, cols[s]);
      if (f.fraction[s] && (*f.fraction[s] < 0 || *f.fraction[s] > 1)) {
        throw ParseError(t.label(), row.line, cols[s] + 1, "fraction outside [0, 1]");
      }
    }
    out.push_back(f);
  }
  return out;
}

AdjacencyList read_adjacency(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_id = t.column("id");
  const auto c_n = t.column("neighbor_id");
  AdjacencyList adj;
  for (const auto& row : t.rows()) adj.add(to_id(t, row, c_id), to_id(t, row, c_n));
  return adj;
}

DriveTimeTable read_drive_times(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto& header = t.header();
  if (header.empty() || header[0] != "id") {
    throw ParseError(t.label(), 1, 1, "first column must be 'id'");
  }
  DriveTimeTable out;
  for (std::size_t c = 1; c < header.size(); ++c) {
    int id = 0;
    const auto& h = header[c];
    const auto [ptr, ec] = std::from_chars(h.data(), h.data() + h.size(), id);
    if (h.empty() || ec != std::errc{} || ptr != h.data() + h.size()) {
      throw ParseError(t.label(), 1, c + 1, "column header '" + h + "' is not a district id");
    }
    out.ids.push_back(id);
  }
  const std::size_t n = out.ids.size();
  if (t.rows().size() != n) {
    throw ParseError(t.label(), t.rows().empty() ? 1 : t.rows().back().line, 1,
                     "expected " + std::to_string(n) + " rows, found " +
                         std::to_string(t.rows().size()));
  }
  std::vector<double> values(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = t.rows()[r];
    if (to_id(t, row, 0) != out.ids[r]) {
      throw ParseError(t.label(), row.line, 1, "row id must match column order");
    }
    for (std::size_t c = 0; c < n; ++c) values[r * n + c] = t.number(row, c + 1);
  }
  out.matrix = DriveTimeMatrix(n, std::move(values));
  return out;
}

StateTotals read_state_totals(const fs::path& path) {
  const json doc = read_json_file(path);
  StateTotals t;
  try {
    t.rural_aay_households = doc.at("rural_aay_households").get<double>();
    t.rural_priority_persons = doc.at("rural_priority_persons").get<double>();
    t.urban_aay_households = doc.at("urban_aay_households").get<double>();
    t.urban_priority_persons = doc.at("urban_priority_persons").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, 0, e.what());
  }
  if (!t.valid()) throw ParseError(path.string(), 0, 0, "state totals must be non-negative");
  return t;
}

std::vector<StateObservation> read_undernourishment_states(const fs::path& path) {
  const auto t = CsvTable::read(path);
  t.column("state");
  const auto c_ratio = column_or_alias(t, "ratio", "ratio_aay_priority");
  const auto c_pct = column_or_alias(t, "pct", "pct_undernourished");
  std::vector<StateObservation> out;
  for (const auto& row : t.rows()) out.push_back({t.number(row, c_ratio), t.number(row, c_pct)});
  return out;
}

std::vector<StoragePoint> read_storage_truth(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_month = t.column("month");
  const auto c_tonnes = column_or_alias(t, "tonnes", "state_storage_tonnes");
  std::vector<StoragePoint> out;
  for (const auto& row : t.rows()) {
    std::chrono::year_month month;
    try {
      month = parse_month(t.field(row, c_month));
    } catch (const InvalidArgument& e) {
      throw ParseError(t.label(), row.line, c_month + 1, e.what());
    }
    out.push_back({month / std::chrono::day{1}, tonnes_to_kg(t.number(row, c_tonnes))});
  }
  return out;
}

std::map<int, double> read_yields(const fs::path& path) {
  return read_id_tonnes(path, "produced_tonnes");
}

std::map<int, double> read_initial_stock(const fs::path& path) {
  return read_id_tonnes(path, "procured_tonnes");
}

std::map<int, HarvestRecord> read_harvest_history(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_id = t.column("id");
  const auto c_h = t.column("last_year_nonwasted_tonnes");
  const auto c_p = t.column("last_year_procured_tonnes");
  std::map<int, HarvestRecord> out;
  for (const auto& row : t.rows()) {
    HarvestRecord h{tonnes_to_kg(t.number(row, c_h)), tonnes_to_kg(t.number(row, c_p))};
    if (!h.valid()) {
      throw ParseError(t.label(), row.line, c_p + 1,
                       "procured must lie between 0 and the non-wasted harvest");
    }
    out[to_id(t, row, c_id)] = h;
  }
  return out;
}

void write_districts(std::ostream& out, const std::vector<DistrictRecord>& districts) {
  out << "id,name,total_pop,rural_pop,urban_pop,avg_family_size\n";
  for (const auto& d : districts) {
    out << d.id << ',' << csv_escape(d.name) << ',' << d.total_population << ','
        << d.rural_population << ',' << d.urban_population << ','
        << format_number(d.avg_family_size) << '\n';
  }
}

void write_drive_times(std::ostream& out, const std::vector<int>& ids,
                       const DriveTimeMatrix& matrix) {
  out << "id";
  for (int id : ids) out << ',' << id;
  out << '\n';
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out << ids[r];
    for (std::size_t c = 0; c < ids.size(); ++c) out << ',' << format_number(matrix(r, c));
    out << '\n';
  }
}

// --- dataset ---------------------------------------------------------------

namespace {

struct RawDataset {
  Dataset data;
  ValidationReport report;
};

RawDataset read_and_check(const RunConfig& config) {
  RawDataset raw;
  auto& d = raw.data;
  auto& report = raw.report;
  const auto& p = config.dataset;

  d.districts = read_districts(p.districts);
  std::sort(d.districts.begin(), d.districts.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  const DistrictIndex index(d.districts);

  auto unknown = [&](int id, const std::string& file) {
    report.violations.push_back({id, file, "district id not present in districts.csv", {}});
  };

  const auto times = read_drive_times(p.drive_times);
  d.drive_times = DriveTimeMatrix(d.districts.size(), 0.0);
  {
    std::set<int> seen;
    for (int id : times.ids) {
      if (!index.find(id)) unknown(id, "drive_times");
      if (!seen.insert(id).second) {
        report.violations.push_back({id, "drive_times", "duplicate district column", {}});
      }
    }
    for (int id : index.ids()) {
      if (!seen.contains(id)) {
        report.violations.push_back({id, "drive_times", "district missing from matrix", {}});
      }
    }
    if (report.ok()) {
      std::vector<std::size_t> pos(times.ids.size());
      for (std::size_t k = 0; k < times.ids.size(); ++k) pos[k] = index.at(times.ids[k]);
      for (std::size_t r = 0; r < times.ids.size(); ++r) {
        for (std::size_t c = 0; c < times.ids.size(); ++c) {
          d.drive_times(pos[r], pos[c]) = times.matrix(r, c);
        }
      }
    } else {
      d.drive_times = times.matrix;
    }
  }

  d.fractions = read_fractions(p.fractions);
  for (const auto& f : d.fractions) {
    if (!index.find(f.district_id)) unknown(f.district_id, "fractions");
  }
  d.adjacency = read_adjacency(p.adjacency);
  for (auto& v : d.adjacency.validate(index).violations) report.violations.push_back(std::move(v));
  d.state_totals = read_state_totals(p.state_totals);

  if (p.undernourishment_states) {
    d.undernourishment_states = read_undernourishment_states(*p.undernourishment_states);
  }
  if (p.storage_truth) d.storage_truth = read_storage_truth(*p.storage_truth);
  if (p.yields) {
    d.yields_kg = read_yields(*p.yields);
    for (const auto& [id, _] : d.yields_kg) {
      if (!index.find(id)) unknown(id, "yields");
    }
  }
  if (p.harvest_history) {
    d.harvest_history = read_harvest_history(*p.harvest_history);
    for (const auto& [id, _] : d.harvest_history) {
      if (!index.find(id)) unknown(id, "harvest_history");
    }
  }
  if (p.initial_stock) {
    d.initial_stock_kg = read_initial_stock(*p.initial_stock);
    for (const auto& [id, _] : d.initial_stock_kg) {
      if (!index.find(id)) unknown(id, "initial_stock");
    }
  }

  auto base = validate_dataset(d.districts, d.drive_times);
  for (auto& v : base.violations) report.violations.push_back(std::move(v));
  return raw;
}

}  // namespace

Dataset load_dataset(const RunConfig& config) {
  auto raw = read_and_check(config);
  if (!raw.report.ok()) throw ValidationFailed(std::move(raw.report));
  return std::move(raw.data);
}

ValidationReport validate_files(const RunConfig& config) {
  return read_and_check(config).report;
}

PreparedModel prepare_model(const Dataset& dataset, const RunConfig& config) {
  PreparedModel model;
  RationInputs ration{dataset.districts, dataset.fractions, &dataset.adjacency,
                      dataset.state_totals, config.ration};
  model.rations = estimate_cardholders(ration);

  auto& in = model.inputs;
  const std::size_t n = dataset.districts.size();
  in.districts = dataset.districts;
  in.drive_times = dataset.drive_times;
  in.cardholders = model.rations.capped;
  if (!dataset.yields_kg.empty()) {
    in.produced_kg.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto it = dataset.yields_kg.find(dataset.districts[i].id); it != dataset.yields_kg.end()) {
        in.produced_kg[i] = it->second;
      }
    }
  }
  if (!dataset.harvest_history.empty()) {
    in.harvest_history.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto it = dataset.harvest_history.find(dataset.districts[i].id);
          it != dataset.harvest_history.end()) {
        in.harvest_history[i] = it->second;
      }
    }
  }
  if (!dataset.initial_stock_kg.empty()) {
    in.initial_procured_kg.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto it = dataset.initial_stock_kg.find(dataset.districts[i].id);
          it != dataset.initial_stock_kg.end()) {
        in.initial_procured_kg[i] = it->second;
      }
    }
  }
  in.engine = config.engine;
  in.policy = config.policy;
  in.allocation = config.allocation;
  in.flood_hits_farm_storage = config.flood_hits_farm_storage;
  in.undernourishment = config.undernourishment;

  const auto& table = dataset.undernourishment_states;
  if (!table.empty()) {
    if (config.line_fit == LineFitMode::FitIntercept) {
      in.undernourishment.intercept = fit_intercept_for_slope(table, in.undernourishment.slope);
    } else if (config.line_fit == LineFitMode::FitBoth) {
      model.line_fit = fit_undernourishment_line(table, config.fit_with_intercept);
      in.undernourishment.slope = model.line_fit->model.slope;
      in.undernourishment.intercept = model.line_fit->model.intercept;
    }
  }
  return model;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_fingerprint(const Dataset& d) {
  std::ostringstream s;
  write_districts(s, d.districts);
  write_drive_times(s, DistrictIndex(d.districts).ids(), d.drive_times);
  for (const auto& f : d.fractions) {
    s << f.district_id;
    for (const auto& v : f.fraction) s << ',' << (v ? format_number(*v) : "");
    s << '\n';
  }
  for (const auto& [id, nbrs] : d.adjacency.edges()) {
    for (int nb : nbrs) s << id << ',' << nb << '\n';
  }
  s << format_number(d.state_totals.rural_aay_households) << ','
    << format_number(d.state_totals.rural_priority_persons) << ','
    << format_number(d.state_totals.urban_aay_households) << ','
    << format_number(d.state_totals.urban_priority_persons) << '\n';
  for (const auto& o : d.undernourishment_states) {
    s << format_number(o.ratio_aay_priority) << ',' << format_number(o.pct_undernourished) << '\n';
  }
  for (const auto& p : d.storage_truth) s << format_date(p.date) << ',' << format_number(p.kg) << '\n';
  for (const auto& [id, kg] : d.yields_kg) s << 'y' << id << ',' << format_number(kg) << '\n';
  for (const auto& [id, h] : d.harvest_history) {
    s << 'h' << id << ',' << format_number(h.last_year_nonwasted_harvest) << ','
      << format_number(h.last_year_procured) << '\n';
  }
  for (const auto& [id, kg] : d.initial_stock_kg) s << 'i' << id << ',' << format_number(kg) << '\n';
  return fnv1a_hex(s.str());
}

// --- scenarios -------------------------------------------------------------

ScenarioSpec scenario_from_json(const json& doc) {
  ScenarioSpec spec;
  try {
    if (!doc.is_object()) throw InvalidArgument("scenario must be a JSON object");
    reject_unknown_keys(doc, {"name", "horizon_weeks", "calendar_anchor", "prices",
                              "last_year_procured_fraction", "state_production_tonnes",
                              "state_depletion_tonnes_per_week", "events", "overrides"},
                        "scenario");
    if (auto v = opt<std::string>(doc, "name")) spec.name = *v;
    if (auto v = opt<int>(doc, "horizon_weeks")) spec.horizon_weeks = *v;
    if (auto v = opt<std::string>(doc, "calendar_anchor")) spec.calendar.anchor = parse_date(*v);
    const json& p = doc.at("prices");
    reject_unknown_keys(p, {"msp", "msp_last_year", "market_price", "market_price_last_year"},
                        "prices");
    spec.prices.msp = p.at("msp").get<double>();
    spec.prices.msp_last_year = p.at("msp_last_year").get<double>();
    spec.prices.market_price = p.at("market_price").get<double>();
    spec.prices.market_price_last_year = p.at("market_price_last_year").get<double>();
    if (auto v = opt<double>(doc, "last_year_procured_fraction")) {
      spec.last_year_procured_fraction = *v;
    }
    if (auto v = opt<double>(doc, "state_production_tonnes")) {
      spec.state_production_kg = tonnes_to_kg(*v);
    }
    if (auto v = opt<double>(doc, "state_depletion_tonnes_per_week")) {
      spec.state_depletion_kg_per_week = tonnes_to_kg(*v);
    }
    if (auto it = doc.find("events"); it != doc.end() && !it->is_null()) {
      for (const json& e : *it) {
        const auto type = e.at("type").get<std::string>();
        if (type == "flood") {
          reject_unknown_keys(e, {"type", "week", "district_ids", "destroyed_fraction"}, "flood");
          spec.events.emplace_back(FloodEvent{e.at("week").get<int>(),
                                              e.at("district_ids").get<std::vector<int>>(),
                                              e.at("destroyed_fraction").get<double>()});
        } else if (type == "msp_change") {
          reject_unknown_keys(e, {"type", "effective_week", "new_msp"}, "msp_change");
          spec.events.emplace_back(
              MspChangeEvent{e.at("effective_week").get<int>(), e.at("new_msp").get<double>()});
        } else if (type == "yield_seed") {
          reject_unknown_keys(e, {"type", "produced_tonnes", "state_total_tonnes"}, "yield_seed");
          YieldSeedEvent seed;
          for (const auto& [key, value] : e.at("produced_tonnes").items()) {
            std::size_t used = 0;
            int id = 0;
            try {
              id = std::stoi(key, &used);
            } catch (const std::exception&) {
              used = 0;
            }
            if (used != key.size() || key.empty()) {
              throw InvalidArgument("yield_seed key '" + key + "' is not a district id");
            }
            seed.produced_kg[id] = tonnes_to_kg(value.get<double>());
          }
          if (auto v = opt<double>(e, "state_total_tonnes")) seed.state_total_kg = tonnes_to_kg(*v);
          spec.events.emplace_back(std::move(seed));
        } else {
          throw InvalidArgument("unknown event type '" + type + "'");
        }
      }
    }
    if (auto it = doc.find("overrides"); it != doc.end() && !it->is_null()) {
      const json& o = *it;
      reject_unknown_keys(o, {"waste_fraction", "reserve_weeks", "harvest_window",
                              "transport_latency", "eq2_convention", "allocation", "slope",
                              "intercept", "spike_gain", "flood_hits_farm_storage"},
                          "overrides");
      auto& ov = spec.overrides;
      ov.waste_fraction = opt<double>(o, "waste_fraction");
      ov.reserve_weeks = opt<int>(o, "reserve_weeks");
      ov.harvest_window = opt<std::vector<int>>(o, "harvest_window");
      ov.transport_latency = opt<int>(o, "transport_latency");
      if (auto v = opt<std::string>(o, "eq2_convention")) ov.eq2_convention = parse_eq2_convention(*v);
      if (auto v = opt<std::string>(o, "allocation")) ov.allocation = parse_allocation_strategy(*v);
      ov.slope = opt<double>(o, "slope");
      ov.intercept = opt<double>(o, "intercept");
      ov.spike_gain = opt<double>(o, "spike_gain");
      ov.flood_hits_farm_storage = opt<bool>(o, "flood_hits_farm_storage");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
  return spec;
}

json scenario_to_json(const ScenarioSpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["horizon_weeks"] = spec.horizon_weeks;
  doc["calendar_anchor"] = format_date(spec.calendar.anchor);
  doc["prices"] = {{"msp", spec.prices.msp},
                   {"msp_last_year", spec.prices.msp_last_year},
                   {"market_price", spec.prices.market_price},
                   {"market_price_last_year", spec.prices.market_price_last_year}};
  doc["last_year_procured_fraction"] = spec.last_year_procured_fraction;
  if (spec.state_production_kg) doc["state_production_tonnes"] = kg_to_tonnes(*spec.state_production_kg);
  if (spec.state_depletion_kg_per_week) {
    doc["state_depletion_tonnes_per_week"] = kg_to_tonnes(*spec.state_depletion_kg_per_week);
  }
  json events = json::array();
  for (const auto& event : spec.events) {
    if (const auto* f = std::get_if<FloodEvent>(&event)) {
      events.push_back({{"type", "flood"},
                        {"week", f->week},
                        {"district_ids", f->district_ids},
                        {"destroyed_fraction", f->destroyed_fraction}});
    } else if (const auto* m = std::get_if<MspChangeEvent>(&event)) {
      events.push_back(
          {{"type", "msp_change"}, {"effective_week", m->effective_week}, {"new_msp", m->new_msp}});
    } else if (const auto* y = std::get_if<YieldSeedEvent>(&event)) {
      json produced = json::object();
      for (const auto& [id, kg] : y->produced_kg) produced[std::to_string(id)] = kg_to_tonnes(kg);
      json e = {{"type", "yield_seed"}, {"produced_tonnes", produced}};
      if (y->state_total_kg) e["state_total_tonnes"] = kg_to_tonnes(*y->state_total_kg);
      events.push_back(std::move(e));
    }
  }
  doc["events"] = std::move(events);
  json o = json::object();
  const auto& ov = spec.overrides;
  if (ov.waste_fraction) o["waste_fraction"] = *ov.waste_fraction;
  if (ov.reserve_weeks) o["reserve_weeks"] = *ov.reserve_weeks;
  if (ov.harvest_window) o["harvest_window"] = *ov.harvest_window;
  if (ov.transport_latency) o["transport_latency"] = *ov.transport_latency;
  if (ov.eq2_convention) o["eq2_convention"] = to_string(*ov.eq2_convention);
  if (ov.allocation) o["allocation"] = to_string(*ov.allocation);
  if (ov.slope) o["slope"] = *ov.slope;
  if (ov.intercept) o["intercept"] = *ov.intercept;
  if (ov.spike_gain) o["spike_gain"] = *ov.spike_gain;
  if (ov.flood_hits_farm_storage) o["flood_hits_farm_storage"] = *ov.flood_hits_farm_storage;
  doc["overrides"] = std::move(o);
  return doc;
}

ScenarioSpec load_scenario(const fs::path& path) {
  return scenario_from_json(read_json_file(path));
}

// --- traces ----------------------------------------------------------------

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  out << "week,district_id,metric,value\n";
  for (int week = 0; week < trace.horizon_weeks; ++week) {
    for (std::size_t i = 0; i < trace.district_count(); ++i) {
      const auto& cell = trace.at(week, i);
      for (Metric m : all_metrics()) {
        out << week << ',' << trace.district_ids[i] << ',' << metric_name(m) << ','
            << format_number(cell.value(m)) << '\n';
      }
    }
  }
}

namespace {

std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  return format_number(v);
}

template <class Range, class Fn>
void json_array(std::ostream& out, const Range& range, Fn&& fn) {
  out << '[';
  bool first = true;
  for (const auto& v : range) {
    if (!first) out << ',';
    first = false;
    fn(v);
  }
  out << ']';
}

}  // namespace

void write_trace_json(std::ostream& out, const SimulationTrace& trace) {
  out << "{\"scenario\":" << json(trace.scenario_name).dump();
  out << ",\"calendar_anchor\":\"" << format_date(trace.calendar.anchor) << '"';
  out << ",\"horizon_weeks\":" << trace.horizon_weeks;
  out << ",\"district_ids\":";
  json_array(out, trace.district_ids, [&](int id) { out << id; });
  out << ",\"baseline_pct\":";
  json_array(out, trace.baseline_pct, [&](double v) { out << json_number(v); });
  out << ",\"in_flight_kg\":";
  json_array(out, trace.in_flight_kg, [&](double v) { out << json_number(v); });
  out << ",\"metrics\":{";
  bool first_metric = true;
  for (Metric m : all_metrics()) {
    if (!first_metric) out << ',';
    first_metric = false;
    out << '"' << metric_name(m) << "\":[";
    for (int week = 0; week < trace.horizon_weeks; ++week) {
      if (week > 0) out << ',';
      out << '[';
      for (std::size_t i = 0; i < trace.district_count(); ++i) {
        if (i > 0) out << ',';
        out << json_number(trace.at(week, i).value(m));
      }
      out << ']';
    }
    out << ']';
  }
  out << "},\"shipments\":";
  json_array(out, trace.shipments, [&](const Shipment& s) {
    out << "{\"from\":" << trace.district_ids[s.from] << ",\"to\":" << trace.district_ids[s.to]
        << ",\"kg\":" << json_number(s.kg) << ",\"dispatch_week\":" << s.dispatch_week
        << ",\"arrival_week\":" << s.arrival_week << '}';
  });
  out << "}\n";
}

SimulationTrace read_trace_csv(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_week = t.column("week");
  const auto c_id = t.column("district_id");
  const auto c_metric = t.column("metric");
  const auto c_value = t.column("value");

  struct Entry {
    int week;
    int id;
    Metric metric;
    double value;
  };
  std::vector<Entry> entries;
  std::set<int> ids;
  int weeks = 0;
  for (const auto& row : t.rows()) {
    const auto week = t.integer(row, c_week);
    if (week < 0) throw ParseError(t.label(), row.line, c_week + 1, "negative week");
    const auto metric = parse_metric(t.field(row, c_metric));
    if (!metric) {
      throw ParseError(t.label(), row.line, c_metric + 1,
                       "unknown metric '" + t.field(row, c_metric) + "'");
    }
    const std::string& text = t.field(row, c_value);
    double value = 0.0;
    if (text == "nan") {
      value = std::numeric_limits<double>::quiet_NaN();
    } else {
      value = t.number(row, c_value);
    }
    const int id = to_id(t, row, c_id);
    entries.push_back({static_cast<int>(week), id, *metric, value});
    ids.insert(id);
    weeks = std::max(weeks, static_cast<int>(week) + 1);
  }

  SimulationTrace trace;
  trace.horizon_weeks = weeks;
  trace.district_ids.assign(ids.begin(), ids.end());
  trace.cells.resize(static_cast<std::size_t>(weeks) * trace.district_ids.size());
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < trace.district_ids.size(); ++i) pos[trace.district_ids[i]] = i;
  for (const auto& e : entries) trace.at(e.week, pos[e.id]).set(e.metric, e.value);
  return trace;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned long> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

std::vector<fs::path> emit_trace(const SimulationTrace& trace,
                                 const std::vector<TraceFormat>& formats, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  for (TraceFormat f : formats) {
    std::ostringstream buf;
    fs::path path;
    if (f == TraceFormat::CsvLong) {
      write_trace_csv(buf, trace);
      path = dir / "trace.csv";
    } else {
      write_trace_json(buf, trace);
      path = dir / "trace.json";
    }
    write_file_atomic(path, buf.str());
    written.push_back(path);
  }
  return written;
}

void write_cardholders_csv(std::ostream& out, const RationPipelineResult& r) {
  out << "id,stage,rural_aay,urban_aay,rural_priority,urban_priority,aay_households,"
         "priority_persons\n";
  auto maybe = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  auto area_rows = [&](const std::vector<AreaEstimate>& areas, EstimateStage stage) {
    for (const auto& a : areas) {
      out << a.district_id << ',' << to_string(stage);
      for (const auto& v : a.value) out << ',' << maybe(v);
      if (a.complete()) {
        const auto c = a.combined(stage);
        out << ',' << format_number(c.aay_households) << ',' << format_number(c.priority_persons);
      } else {
        out << ",,";
      }
      out << '\n';
    }
  };
  area_rows(r.raw, EstimateStage::Raw);
  area_rows(r.imputed, EstimateStage::Imputed);
  area_rows(r.scaled.areas, EstimateStage::Scaled);
  for (const auto& c : r.capped) {
    out << c.district_id << ',' << to_string(EstimateStage::Capped) << ",,,,,"
        << format_number(c.aay_households) << ',' << format_number(c.priority_persons) << '\n';
  }
}

}  // namespace pdsim

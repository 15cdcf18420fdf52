#include "stmeta/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "stmeta/errors.hpp"
#include "util/text.hpp"

namespace stmeta::ingest {

namespace {

using Json = nlohmann::ordered_json;

constexpr Timestamp kSecondsPerDay = 86400;

Timestamp floor_div(Timestamp a, Timestamp b) {
  Timestamp q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::optional<std::size_t> column_of(const std::vector<std::string>& header, const std::string& name,
                                     bool mandatory) {
  if (name.empty()) return std::nullopt;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  if (mandatory) throw IngestError("event CSV is missing column '" + name + "'");
  return std::nullopt;
}

struct LocationColumns {
  std::optional<std::size_t> station, lat, lon;

  bool any() const { return station || (lat && lon); }
};

// Returns nullopt on malformed fields; an empty ref when all columns are blank.
std::optional<LocationRef> read_location(const std::vector<std::string>& f, const LocationColumns& cols) {
  LocationRef ref;
  if (cols.station) ref.station_id = std::string(util::trim(f[*cols.station]));
  if (cols.lat && cols.lon) {
    auto lat_text = util::trim(f[*cols.lat]);
    auto lon_text = util::trim(f[*cols.lon]);
    if (!lat_text.empty() || !lon_text.empty()) {
      auto lat = util::parse_double(lat_text);
      auto lon = util::parse_double(lon_text);
      if (!lat || !lon || std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0) return std::nullopt;
      ref.point = GeoPoint{*lat, *lon};
    }
  }
  return ref;
}

using Locator = std::function<std::optional<std::size_t>(const LocationRef&)>;

TensorBuild count_events(std::span<const EventRecord> events, std::size_t locations,
                         std::vector<std::string> ids, const Locator& locate, int slot_minutes, CountField field,
                         std::optional<SlotWindow> window) {
  if (locations == 0) throw PreconditionError("events_to_tensor needs at least one location");
  if (slot_minutes != 15 && slot_minutes != 30 && slot_minutes != 60) {
    throw ValidationError("slot length must be 15, 30 or 60 minutes, got " + std::to_string(slot_minutes));
  }
  const Timestamp slot_seconds = static_cast<Timestamp>(slot_minutes) * 60;

  auto counted_time = [field](const EventRecord& e) -> std::optional<Timestamp> {
    if (field == CountField::start) return e.start_time;
    return e.end_time;
  };
  auto counted_loc = [field](const EventRecord& e) -> const LocationRef* {
    if (field == CountField::start) return &e.start_loc;
    return e.end_loc ? &*e.end_loc : nullptr;
  };

  if (!window) {
    std::optional<Timestamp> lo, hi;
    for (const auto& e : events) {
      auto t = counted_time(e);
      if (!t) continue;
      lo = lo ? std::min(*lo, *t) : *t;
      hi = hi ? std::max(*hi, *t) : *t;
    }
    if (!lo) throw IngestError("no events carry the counted timestamp");
    SlotWindow w;
    w.origin = floor_div(*lo, kSecondsPerDay) * kSecondsPerDay;
    w.slots = static_cast<std::size_t>((*hi - w.origin) / slot_seconds) + 1;
    window = w;
  }
  if (window->slots == 0) throw PreconditionError("slot window must contain at least one slot");

  TensorBuild out;
  std::vector<double> data(window->slots * locations, 0.0);
  for (const auto& e : events) {
    auto t = counted_time(e);
    const LocationRef* loc = counted_loc(e);
    if (!t || !loc || *t < window->origin) {
      ++out.dropped;
      continue;
    }
    const auto slot = static_cast<std::size_t>((*t - window->origin) / slot_seconds);
    auto idx = locate(*loc);
    if (slot >= window->slots || !idx) {
      ++out.dropped;
      continue;
    }
    data[slot * locations + *idx] += 1.0;
  }
  out.tensor = timeseries::TrafficTensor::make(window->slots, locations, std::move(data), slot_minutes,
                                               window->origin, std::move(ids));
  return out;
}

std::vector<double> od_counts(std::span<const EventRecord> events, std::size_t n, const Locator& locate) {
  std::vector<double> od(n * n, 0.0);
  for (const auto& e : events) {
    if (!e.end_loc) continue;
    auto i = locate(e.start_loc);
    auto j = locate(*e.end_loc);
    if (i && j) od[*i * n + *j] += 1.0;
  }
  return od;
}

std::vector<std::string> split_lines_field(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find(';', pos);
    if (next == std::string_view::npos) next = text.size();
    auto part = util::trim(text.substr(pos, next - pos));
    if (!part.empty()) out.emplace_back(part);
    pos = next + 1;
  }
  return out;
}

}  // namespace

void EventSchema::validate() const {
  if (time_format.empty()) throw ConfigError("event schema: time_format must not be empty");
  if (start_time.empty()) throw ConfigError("event schema: start_time column is mandatory");
  if (start_station.empty() && (start_lat.empty() || start_lon.empty())) {
    throw ConfigError("event schema: start_station or start_lat/start_lon is mandatory");
  }
  if (start_lat.empty() != start_lon.empty() || end_lat.empty() != end_lon.empty()) {
    throw ConfigError("event schema: latitude and longitude columns must be given together");
  }
}

EventSchema EventSchema::from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("event schema: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("event schema must be a JSON object");
  EventSchema s;
  const std::pair<const char*, std::string*> fields[] = {
      {"time_format", &s.time_format}, {"start_time", &s.start_time}, {"end_time", &s.end_time},
      {"start_station", &s.start_station}, {"end_station", &s.end_station}, {"start_lat", &s.start_lat},
      {"start_lon", &s.start_lon}, {"end_lat", &s.end_lat}, {"end_lon", &s.end_lon},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(std::begin(fields), std::end(fields), [&](const auto& f) { return key == f.first; });
    if (it == std::end(fields)) throw ConfigError("event schema: unknown key '" + key + "'");
    if (!value.is_string()) throw ConfigError("event schema: '" + key + "' must be a string");
    *it->second = value.get<std::string>();
  }
  s.validate();
  return s;
}

std::string EventSchema::to_json() const {
  Json j;
  j["time_format"] = time_format;
  j["start_time"] = start_time;
  j["end_time"] = end_time;
  j["start_station"] = start_station;
  j["end_station"] = end_station;
  j["start_lat"] = start_lat;
  j["start_lon"] = start_lon;
  j["end_lat"] = end_lat;
  j["end_lon"] = end_lon;
  return j.dump(2);
}

std::optional<Timestamp> parse_timestamp(std::string_view text, const std::string& format) {
  const std::string buf(util::trim(text));
  if (buf.empty()) return std::nullopt;
  std::tm tm{};
  const char* end = ::strptime(buf.c_str(), format.c_str(), &tm);
  if (end == nullptr) return std::nullopt;
  if (*end == '.') {
    ++end;
    if (!std::isdigit(static_cast<unsigned char>(*end))) return std::nullopt;
    while (std::isdigit(static_cast<unsigned char>(*end))) ++end;
  }
  if (*end != '\0') return std::nullopt;
  return static_cast<Timestamp>(::timegm(&tm));
}

EventLog read_events(std::istream& is, const EventSchema& schema) {
  schema.validate();
  EventLog log;
  std::string line;
  if (!std::getline(is, line)) return log;
  auto header = util::split_csv_line(std::string(util::trim(line)));
  for (auto& h : header) h = std::string(util::trim(h));

  const auto start_time = *column_of(header, schema.start_time, true);
  const auto end_time = column_of(header, schema.end_time, true);
  const LocationColumns start_cols{column_of(header, schema.start_station, true),
                                   column_of(header, schema.start_lat, true),
                                   column_of(header, schema.start_lon, true)};
  const LocationColumns end_cols{column_of(header, schema.end_station, true), column_of(header, schema.end_lat, true),
                                 column_of(header, schema.end_lon, true)};

  while (std::getline(is, line)) {
    if (util::trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      f = util::split_csv_line(std::string(util::trim(line)));
    } catch (const std::exception&) {
      ++log.skipped;
      continue;
    }
    if (f.size() != header.size()) {
      ++log.skipped;
      continue;
    }
    EventRecord e;
    auto t0 = parse_timestamp(f[start_time], schema.time_format);
    auto start = read_location(f, start_cols);
    if (!t0 || !start || start->empty()) {
      ++log.skipped;
      continue;
    }
    e.start_time = *t0;
    e.start_loc = std::move(*start);
    if (end_time && !util::trim(f[*end_time]).empty()) {
      auto t1 = parse_timestamp(f[*end_time], schema.time_format);
      if (!t1 || *t1 < *t0) {
        ++log.skipped;
        continue;
      }
      e.end_time = *t1;
    }
    if (end_cols.any()) {
      auto end = read_location(f, end_cols);
      if (!end) {
        ++log.skipped;
        continue;
      }
      if (!end->empty()) e.end_loc = std::move(*end);
    }
    log.records.push_back(std::move(e));
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.start_time < b.start_time; });
  return log;
}

EventLog read_events(const std::string& path, const EventSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open event file '" + path + "'");
  return read_events(in, schema);
}

void GridSpec::validate() const {
  if (rows == 0 || cols == 0) throw ValidationError("grid needs positive rows and cols");
  if (!(cell_km > 0.0) || !std::isfinite(cell_km)) throw ValidationError("grid cell size must be positive");
  if (std::abs(origin_lat) >= 90.0 || std::abs(origin_lon) > 180.0) {
    throw ValidationError("grid origin is not a valid coordinate");
  }
}

double GridSpec::cell_lat_degrees() const {
  return cell_km * 1000.0 / graphkit::kEarthRadiusMeters * 180.0 / std::numbers::pi;
}

double GridSpec::cell_lon_degrees() const {
  return cell_lat_degrees() / std::cos(origin_lat * std::numbers::pi / 180.0);
}

std::optional<std::size_t> GridSpec::locate(GeoPoint p) const {
  const double r = std::floor((p.lat - origin_lat) / cell_lat_degrees());
  const double c = std::floor((p.lon - origin_lon) / cell_lon_degrees());
  if (!(r >= 0.0 && c >= 0.0) || r >= static_cast<double>(rows) || c >= static_cast<double>(cols)) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c);
}

GeoPoint GridSpec::cell_center(std::size_t cell) const {
  const auto r = static_cast<double>(cell / cols);
  const auto c = static_cast<double>(cell % cols);
  return {origin_lat + (r + 0.5) * cell_lat_degrees(), origin_lon + (c + 0.5) * cell_lon_degrees()};
}

StationRegistry::StationRegistry(std::vector<Station> stations) {
  for (auto& s : stations) add(std::move(s));
}

void StationRegistry::add(Station s) {
  if (s.id.empty()) throw ValidationError("station id must not be empty");
  if (index_.count(s.id)) throw ValidationError("duplicate station id '" + s.id + "'");
  index_.emplace(s.id, stations_.size());
  stations_.push_back(std::move(s));
}

std::optional<std::size_t> StationRegistry::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<GeoPoint> StationRegistry::coordinates() const {
  std::vector<GeoPoint> out;
  out.reserve(stations_.size());
  for (const auto& s : stations_) out.push_back(s.position);
  return out;
}

std::vector<std::vector<std::string>> StationRegistry::line_assignment() const {
  std::vector<std::vector<std::string>> out;
  out.reserve(stations_.size());
  for (const auto& s : stations_) out.push_back(s.lines);
  return out;
}

std::vector<std::string> StationRegistry::ids() const {
  std::vector<std::string> out;
  out.reserve(stations_.size());
  for (const auto& s : stations_) out.push_back(s.id);
  return out;
}

void write_registry_csv(std::ostream& os, const StationRegistry& r) {
  os << "id,lat,lon,lines\n";
  for (const auto& s : r.stations()) {
    os << s.id << ',' << util::format_double(s.position.lat) << ',' << util::format_double(s.position.lon) << ',';
    for (std::size_t k = 0; k < s.lines.size(); ++k) os << (k ? ";" : "") << s.lines[k];
    os << '\n';
  }
}

StationRegistry read_registry_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IngestError("registry CSV is empty");
  auto header = util::split_csv_line(std::string(util::trim(line)));
  for (auto& h : header) h = std::string(util::trim(h));
  if (header.size() < 3 || header[0] != "id" || header[1] != "lat" || header[2] != "lon" ||
      (header.size() > 3 && header[3] != "lines") || header.size() > 4) {
    throw IngestError("registry CSV header must be 'id,lat,lon,lines'");
  }
  StationRegistry reg;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    auto f = util::split_csv_line(std::string(util::trim(line)));
    if (f.size() < 3 || f.size() > header.size()) {
      throw IngestError("registry CSV line " + std::to_string(line_no) + ": wrong field count");
    }
    auto lat = util::parse_double(f[1]);
    auto lon = util::parse_double(f[2]);
    if (!lat || !lon) throw IngestError("registry CSV line " + std::to_string(line_no) + ": bad coordinate");
    Station s{std::string(util::trim(f[0])), {*lat, *lon}, {}};
    if (f.size() > 3) s.lines = split_lines_field(f[3]);
    try {
      reg.add(std::move(s));
    } catch (const ValidationError& e) {
      throw IngestError("registry CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return reg;
}

void save_registry_csv(const std::string& path, const StationRegistry& r) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write registry '" + path + "'");
  write_registry_csv(out, r);
}

StationRegistry load_registry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open registry '" + path + "'");
  return read_registry_csv(in);
}

std::string_view to_string(CountField f) { return f == CountField::start ? "start" : "end"; }

CountField parse_count_field(std::string_view text) {
  if (text == "start") return CountField::start;
  if (text == "end") return CountField::end;
  throw ConfigError("count field must be 'start' or 'end', got '" + std::string(text) + "'");
}

TensorBuild events_to_tensor(std::span<const EventRecord> events, const StationRegistry& stations, int slot_minutes,
                             CountField field, std::optional<SlotWindow> window) {
  Locator locate = [&stations](const LocationRef& ref) { return stations.find(ref.station_id); };
  return count_events(events, stations.size(), stations.ids(), locate, slot_minutes, field, window);
}

TensorBuild events_to_tensor(std::span<const EventRecord> events, const GridSpec& grid, int slot_minutes,
                             CountField field, std::optional<SlotWindow> window) {
  grid.validate();
  std::vector<std::string> ids;
  ids.reserve(grid.cells());
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) ids.push_back("cell_" + std::to_string(r) + "_" + std::to_string(c));
  }
  Locator locate = [&grid](const LocationRef& ref) -> std::optional<std::size_t> {
    if (!ref.point) return std::nullopt;
    return grid.locate(*ref.point);
  };
  return count_events(events, grid.cells(), std::move(ids), locate, slot_minutes, field, window);
}

std::vector<double> build_od_matrix(std::span<const EventRecord> events, const StationRegistry& stations) {
  return od_counts(events, stations.size(),
                   [&stations](const LocationRef& ref) { return stations.find(ref.station_id); });
}

std::vector<double> build_od_matrix(std::span<const EventRecord> events, const GridSpec& grid) {
  grid.validate();
  return od_counts(events, grid.cells(), [&grid](const LocationRef& ref) -> std::optional<std::size_t> {
    if (!ref.point) return std::nullopt;
    return grid.locate(*ref.point);
  });
}

}  // namespace stmeta::ingest

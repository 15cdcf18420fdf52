#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stmeta/graphkit.hpp"
#include "stmeta/timeseries.hpp"

namespace stmeta::ingest {

using graphkit::GeoPoint;
using timeseries::Timestamp;

/// A location reference carried by an event: a station id, a coordinate, or both.
struct LocationRef {
  std::string station_id;
  std::optional<GeoPoint> point;

  bool empty() const { return station_id.empty() && !point; }
};

struct EventRecord {
  Timestamp start_time = 0;
  std::optional<Timestamp> end_time;
  LocationRef start_loc;
  std::optional<LocationRef> end_loc;
};

/// Column mapping of an event CSV. Empty names mean "not present".
/// A start time and at least one start location column are mandatory.
struct EventSchema {
  std::string time_format = "%Y-%m-%d %H:%M:%S";
  std::string start_time;
  std::string end_time;
  std::string start_station;
  std::string end_station;
  std::string start_lat;
  std::string start_lon;
  std::string end_lat;
  std::string end_lon;

  void validate() const;
  /// JSON object with the member names above as keys; unknown keys are rejected.
  static EventSchema from_json(std::string_view text);
  std::string to_json() const;
};

struct EventLog {
  std::vector<EventRecord> records;  // sorted by start_time (stable)
  std::size_t skipped = 0;
};

/// strptime-style parse in UTC. Trailing fractional seconds are ignored.
std::optional<Timestamp> parse_timestamp(std::string_view text, const std::string& format);

EventLog read_events(std::istream& is, const EventSchema& schema);
EventLog read_events(const std::string& path, const EventSchema& schema);

/// Regular lat/lon grid anchored at its south-west corner. Row 0 is the
/// southernmost row; cells are indexed row-major.
struct GridSpec {
  double origin_lat = 0.0;
  double origin_lon = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double cell_km = 0.5;

  void validate() const;
  std::size_t cells() const { return rows * cols; }
  double cell_lat_degrees() const;
  double cell_lon_degrees() const;
  /// Cell index of a point, or nullopt when outside the grid.
  std::optional<std::size_t> locate(GeoPoint p) const;
  GeoPoint cell_center(std::size_t cell) const;
};

struct Station {
  std::string id;
  GeoPoint position;
  std::vector<std::string> lines;
};

/// Ordered station list; the order defines the location index.
class StationRegistry {
 public:
  StationRegistry() = default;
  explicit StationRegistry(std::vector<Station> stations);

  void add(Station s);
  std::size_t size() const { return stations_.size(); }
  const Station& operator[](std::size_t i) const { return stations_[i]; }
  const std::vector<Station>& stations() const { return stations_; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::vector<GeoPoint> coordinates() const;
  std::vector<std::vector<std::string>> line_assignment() const;
  std::vector<std::string> ids() const;

 private:
  std::vector<Station> stations_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// CSV `id,lat,lon,lines` with `;`-separated line ids.
void write_registry_csv(std::ostream& os, const StationRegistry& r);
StationRegistry read_registry_csv(std::istream& is);
void save_registry_csv(const std::string& path, const StationRegistry& r);
StationRegistry load_registry_csv(const std::string& path);

enum class CountField { start, end };

std::string_view to_string(CountField f);
CountField parse_count_field(std::string_view text);

/// Explicit slot window; by default the window starts at UTC midnight of the
/// earliest counted timestamp and ends with the slot of the latest one.
struct SlotWindow {
  Timestamp origin = 0;
  std::size_t slots = 0;
};

struct TensorBuild {
  timeseries::TrafficTensor tensor;
  std::size_t dropped = 0;  // unlocatable, outside the window, or missing the counted field
};

/// Slots are half-open [t, t + slot), so a timestamp on a boundary falls in the later slot.
TensorBuild events_to_tensor(std::span<const EventRecord> events, const StationRegistry& stations, int slot_minutes,
                             CountField field = CountField::start, std::optional<SlotWindow> window = std::nullopt);
TensorBuild events_to_tensor(std::span<const EventRecord> events, const GridSpec& grid, int slot_minutes,
                             CountField field = CountField::start, std::optional<SlotWindow> window = std::nullopt);

/// od[i·n + j] = trips starting at i and ending at j. Events lacking a
/// resolvable endpoint are ignored.
std::vector<double> build_od_matrix(std::span<const EventRecord> events, const StationRegistry& stations);
std::vector<double> build_od_matrix(std::span<const EventRecord> events, const GridSpec& grid);

}  // namespace stmeta::ingest

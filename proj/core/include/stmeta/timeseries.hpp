#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stmeta::timeseries {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

std::string format_iso_time(Timestamp t);
/// Parses `YYYY-MM-DDTHH:MM:SS` (a space separator is accepted too).
Timestamp parse_iso_time(std::string_view text);

/// Slot-indexed traffic matrix: data[slot * locations + location].
struct TrafficTensor {
  std::size_t slots = 0;
  std::size_t locations = 0;
  std::vector<double> data;
  int slot_minutes = 60;
  Timestamp origin = 0;
  std::vector<std::string> location_ids;

  /// Validates the invariants and fills default location ids (loc_1..loc_n).
  static TrafficTensor make(std::size_t slots, std::size_t locations, std::vector<double> data, int slot_minutes,
                            Timestamp origin, std::vector<std::string> location_ids = {});

  double at(std::size_t slot, std::size_t location) const { return data[slot * locations + location]; }
  double& at(std::size_t slot, std::size_t location) { return data[slot * locations + location]; }
  std::vector<double> series(std::size_t location) const;
  Timestamp slot_time(std::size_t slot) const { return origin + static_cast<Timestamp>(slot) * slot_minutes * 60; }
};

/// CSV with header `slot_iso_time,<id_1>,...,<id_n>`; values are written in
/// shortest round-trip form so read(write(t)) == t.
void write_tensor_csv(std::ostream& os, const TrafficTensor& t);
TrafficTensor read_tensor_csv(std::istream& is);
void save_tensor_csv(const std::string& path, const TrafficTensor& t);
TrafficTensor load_tensor_csv(const std::string& path);

struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t slot) const noexcept { return slot >= begin && slot < end; }
};

struct Split {
  SlotRange train;
  SlotRange val;
  SlotRange test;
};

/// Last ⌊0.1·T⌋ slots for test, the ⌊0.1·T⌋ before them for validation,
/// the rest for training. Requires T ≥ 10.
Split split(std::size_t slots);
Split split(const TrafficTensor& t);

struct FactorSpec {
  std::size_t closeness = 6;
  std::size_t daily = 7;
  std::size_t weekly = 2;
  int slot_minutes = 60;

  std::size_t slots_per_day() const;
  std::size_t slots_per_week() const { return 7 * slots_per_day(); }
  /// Largest look-back over all factors.
  std::size_t max_lag() const;
  void validate() const;
};

/// Supervised samples. Lag windows are stored oldest→newest:
/// closeness(s, i, l) is slot t-c+l, daily(s, i, j) is slot t-(d-j)·day,
/// weekly(s, i, j) is slot t-(w-j)·week, where t = sample_slots[s].
struct FactorSampleSet {
  std::size_t samples = 0;
  std::size_t locations = 0;
  std::size_t closeness_lags = 0;
  std::size_t daily_lags = 0;
  std::size_t weekly_lags = 0;
  std::vector<double> x_closeness;  // S×n×c
  std::vector<double> x_daily;      // S×n×d
  std::vector<double> x_weekly;     // S×n×w
  std::vector<double> target;       // S×n
  std::vector<std::size_t> sample_slots;

  double closeness(std::size_t s, std::size_t i, std::size_t l) const {
    return x_closeness[(s * locations + i) * closeness_lags + l];
  }
  double daily(std::size_t s, std::size_t i, std::size_t j) const {
    return x_daily[(s * locations + i) * daily_lags + j];
  }
  double weekly(std::size_t s, std::size_t i, std::size_t j) const {
    return x_weekly[(s * locations + i) * weekly_lags + j];
  }
  double target_at(std::size_t s, std::size_t i) const { return target[s * locations + i]; }

  /// Subset of samples in the given order.
  FactorSampleSet select(std::span<const std::size_t> indices) const;
};

/// Builds one sample per target slot in `targets` (default: all slots) that
/// has full history. Throws PreconditionError when no sample can be formed.
FactorSampleSet assemble_samples(const TrafficTensor& t, const FactorSpec& spec,
                                 std::optional<SlotRange> targets = std::nullopt);

enum class NormalizerMode { zscore, minmax, none };

std::string_view to_string(NormalizerMode mode);
NormalizerMode parse_normalizer_mode(std::string_view text);

/// Per-location affine normalization fitted on training slots only.
class Normalizer {
 public:
  static constexpr double kScaleFloor = 1e-8;

  explicit Normalizer(NormalizerMode mode = NormalizerMode::zscore) : mode_(mode) {}

  void fit(const TrafficTensor& t, SlotRange train);
  TrafficTensor apply(const TrafficTensor& t) const;
  TrafficTensor invert(const TrafficTensor& t) const;
  double apply(double value, std::size_t location) const;
  double invert(double value, std::size_t location) const;

  NormalizerMode mode() const noexcept { return mode_; }
  const std::vector<double>& offsets() const noexcept { return offset_; }
  const std::vector<double>& scales() const noexcept { return scale_; }

 private:
  void require_fitted(std::size_t locations) const;

  NormalizerMode mode_;
  std::vector<double> offset_;
  std::vector<double> scale_;
};

}  // namespace stmeta::timeseries

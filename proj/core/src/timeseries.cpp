#include "stmeta/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>

#include "stmeta/errors.hpp"
#include "util/text.hpp"

namespace stmeta::timeseries {

std::string format_iso_time(Timestamp t) {
  const std::time_t tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  return buf;
}

Timestamp parse_iso_time(std::string_view text) {
  const std::string s(util::trim(text));
  std::tm tm{};
  const char* end = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
  if (!end || *end != '\0') {
    tm = std::tm{};
    end = strptime(s.c_str(), "%Y-%m-%d %H:%M:%S", &tm);
  }
  if (!end || *end != '\0') throw ValidationError("unparsable ISO timestamp '" + s + "'");
  return static_cast<Timestamp>(timegm(&tm));
}

TrafficTensor TrafficTensor::make(std::size_t slots, std::size_t locations, std::vector<double> data,
                                  int slot_minutes, Timestamp origin, std::vector<std::string> location_ids) {
  if (slots == 0 || locations == 0) throw ValidationError("traffic tensor needs at least one slot and location");
  if (data.size() != slots * locations) {
    throw ShapeError("traffic tensor data has " + std::to_string(data.size()) + " values, expected " +
                     std::to_string(slots * locations));
  }
  if (slot_minutes != 15 && slot_minutes != 30 && slot_minutes != 60) {
    throw ValidationError("slot length must be 15, 30 or 60 minutes, got " + std::to_string(slot_minutes));
  }
  if (location_ids.empty()) {
    for (std::size_t i = 0; i < locations; ++i) location_ids.push_back("loc_" + std::to_string(i + 1));
  }
  if (location_ids.size() != locations) throw ValidationError("location id count does not match location count");
  TrafficTensor t;
  t.slots = slots;
  t.locations = locations;
  t.data = std::move(data);
  t.slot_minutes = slot_minutes;
  t.origin = origin;
  t.location_ids = std::move(location_ids);
  return t;
}

std::vector<double> TrafficTensor::series(std::size_t location) const {
  std::vector<double> out(slots);
  for (std::size_t s = 0; s < slots; ++s) out[s] = at(s, location);
  return out;
}

void write_tensor_csv(std::ostream& os, const TrafficTensor& t) {
  os << "slot_iso_time";
  for (const auto& id : t.location_ids) os << ',' << id;
  os << '\n';
  for (std::size_t s = 0; s < t.slots; ++s) {
    os << format_iso_time(t.slot_time(s));
    for (std::size_t i = 0; i < t.locations; ++i) os << ',' << util::format_double(t.at(s, i));
    os << '\n';
  }
}

TrafficTensor read_tensor_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IngestError("tensor CSV is empty");
  auto header = util::split_csv_line(std::string(util::trim(line)));
  if (header.size() < 2 || util::trim(header[0]) != "slot_iso_time") {
    throw IngestError("tensor CSV header must start with 'slot_iso_time'");
  }
  std::vector<std::string> ids(header.begin() + 1, header.end());
  for (auto& id : ids) id = std::string(util::trim(id));

  std::vector<double> data;
  std::vector<Timestamp> times;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    auto fields = util::split_csv_line(std::string(util::trim(line)));
    if (fields.size() != header.size()) {
      throw IngestError("tensor CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    times.push_back(parse_iso_time(fields[0]));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = util::parse_double(fields[i]);
      if (!v) throw IngestError("tensor CSV line " + std::to_string(line_no) + ": bad number '" + fields[i] + "'");
      data.push_back(*v);
    }
  }
  if (times.empty()) throw IngestError("tensor CSV has no data rows");
  int slot_minutes = 60;
  if (times.size() >= 2) slot_minutes = static_cast<int>((times[1] - times[0]) / 60);
  for (std::size_t s = 1; s < times.size(); ++s) {
    if (times[s] - times[s - 1] != static_cast<Timestamp>(slot_minutes) * 60) {
      throw IngestError("tensor CSV slots are not evenly spaced at row " + std::to_string(s + 1));
    }
  }
  const std::size_t locations = ids.size();
  return TrafficTensor::make(times.size(), locations, std::move(data), slot_minutes, times[0], std::move(ids));
}

void save_tensor_csv(const std::string& path, const TrafficTensor& t) {
  std::ofstream os(path);
  if (!os) throw IngestError("cannot write " + path);
  write_tensor_csv(os, t);
}

TrafficTensor load_tensor_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IngestError("cannot read " + path);
  return read_tensor_csv(is);
}

Split split(std::size_t slots) {
  if (slots < 10) throw PreconditionError("split needs at least 10 slots, got " + std::to_string(slots));
  const std::size_t tenth = slots / 10;
  Split s;
  s.test = {slots - tenth, slots};
  s.val = {slots - 2 * tenth, slots - tenth};
  s.train = {0, slots - 2 * tenth};
  return s;
}

Split split(const TrafficTensor& t) { return split(t.slots); }

std::size_t FactorSpec::slots_per_day() const {
  if (slot_minutes <= 0 || 1440 % slot_minutes != 0) {
    throw ValidationError("slot length must divide a day, got " + std::to_string(slot_minutes));
  }
  return static_cast<std::size_t>(1440 / slot_minutes);
}

std::size_t FactorSpec::max_lag() const {
  return std::max({closeness, daily * slots_per_day(), weekly * slots_per_week()});
}

void FactorSpec::validate() const {
  if (closeness + daily + weekly == 0) throw ValidationError("factor spec needs at least one lag");
  (void)slots_per_day();
}

FactorSampleSet FactorSampleSet::select(std::span<const std::size_t> indices) const {
  FactorSampleSet out;
  out.samples = indices.size();
  out.locations = locations;
  out.closeness_lags = closeness_lags;
  out.daily_lags = daily_lags;
  out.weekly_lags = weekly_lags;
  const std::size_t nc = locations * closeness_lags, nd = locations * daily_lags, nw = locations * weekly_lags;
  out.x_closeness.reserve(indices.size() * nc);
  out.x_daily.reserve(indices.size() * nd);
  out.x_weekly.reserve(indices.size() * nw);
  out.target.reserve(indices.size() * locations);
  for (auto s : indices) {
    if (s >= samples) throw PreconditionError("sample index out of range");
    out.x_closeness.insert(out.x_closeness.end(), x_closeness.begin() + s * nc, x_closeness.begin() + (s + 1) * nc);
    out.x_daily.insert(out.x_daily.end(), x_daily.begin() + s * nd, x_daily.begin() + (s + 1) * nd);
    out.x_weekly.insert(out.x_weekly.end(), x_weekly.begin() + s * nw, x_weekly.begin() + (s + 1) * nw);
    out.target.insert(out.target.end(), target.begin() + s * locations, target.begin() + (s + 1) * locations);
    out.sample_slots.push_back(sample_slots[s]);
  }
  return out;
}

FactorSampleSet assemble_samples(const TrafficTensor& t, const FactorSpec& spec, std::optional<SlotRange> targets) {
  spec.validate();
  const std::size_t history = spec.max_lag();
  if (t.slots <= history) {
    throw PreconditionError("empty sample set: " + std::to_string(t.slots) + " slots but " +
                            std::to_string(history) + " slots of history required");
  }
  SlotRange range = targets.value_or(SlotRange{0, t.slots});
  range.end = std::min(range.end, t.slots);
  const std::size_t first = std::max(range.begin, history);

  FactorSampleSet out;
  out.locations = t.locations;
  out.closeness_lags = spec.closeness;
  out.daily_lags = spec.daily;
  out.weekly_lags = spec.weekly;
  const std::size_t day = spec.slots_per_day(), week = spec.slots_per_week();
  for (std::size_t slot = first; slot < range.end; ++slot) {
    for (std::size_t i = 0; i < t.locations; ++i) {
      for (std::size_t l = 0; l < spec.closeness; ++l) out.x_closeness.push_back(t.at(slot - spec.closeness + l, i));
      for (std::size_t j = 0; j < spec.daily; ++j) out.x_daily.push_back(t.at(slot - (spec.daily - j) * day, i));
      for (std::size_t j = 0; j < spec.weekly; ++j) out.x_weekly.push_back(t.at(slot - (spec.weekly - j) * week, i));
      out.target.push_back(t.at(slot, i));
    }
    out.sample_slots.push_back(slot);
  }
  out.samples = out.sample_slots.size();
  if (out.samples == 0) {
    throw PreconditionError("empty sample set: no target slot in [" + std::to_string(range.begin) + ", " +
                            std::to_string(range.end) + ") has full history");
  }
  return out;
}

std::string_view to_string(NormalizerMode mode) {
  switch (mode) {
    case NormalizerMode::zscore: return "zscore";
    case NormalizerMode::minmax: return "minmax";
    case NormalizerMode::none: return "none";
  }
  return "none";
}

NormalizerMode parse_normalizer_mode(std::string_view text) {
  if (text == "zscore") return NormalizerMode::zscore;
  if (text == "minmax") return NormalizerMode::minmax;
  if (text == "none") return NormalizerMode::none;
  throw ValidationError("unknown normalizer mode '" + std::string(text) + "'");
}

void Normalizer::fit(const TrafficTensor& t, SlotRange train) {
  if (train.size() == 0 || train.end > t.slots) throw PreconditionError("normalizer fit range is empty or invalid");
  offset_.assign(t.locations, 0.0);
  scale_.assign(t.locations, 1.0);
  if (mode_ == NormalizerMode::none) return;
  const double count = static_cast<double>(train.size());
  for (std::size_t i = 0; i < t.locations; ++i) {
    if (mode_ == NormalizerMode::zscore) {
      double mean = 0.0;
      for (std::size_t s = train.begin; s < train.end; ++s) mean += t.at(s, i);
      mean /= count;
      double var = 0.0;
      for (std::size_t s = train.begin; s < train.end; ++s) var += (t.at(s, i) - mean) * (t.at(s, i) - mean);
      offset_[i] = mean;
      scale_[i] = std::max(std::sqrt(var / count), kScaleFloor);
    } else {
      double lo = t.at(train.begin, i), hi = lo;
      for (std::size_t s = train.begin; s < train.end; ++s) {
        lo = std::min(lo, t.at(s, i));
        hi = std::max(hi, t.at(s, i));
      }
      offset_[i] = lo;
      scale_[i] = std::max(hi - lo, kScaleFloor);
    }
  }
}

void Normalizer::require_fitted(std::size_t locations) const {
  if (offset_.size() != locations) throw PreconditionError("normalizer is not fitted for this location count");
}

double Normalizer::apply(double value, std::size_t location) const {
  return (value - offset_[location]) / scale_[location];
}

double Normalizer::invert(double value, std::size_t location) const {
  return value * scale_[location] + offset_[location];
}

TrafficTensor Normalizer::apply(const TrafficTensor& t) const {
  require_fitted(t.locations);
  TrafficTensor out = t;
  for (std::size_t s = 0; s < t.slots; ++s) {
    for (std::size_t i = 0; i < t.locations; ++i) out.at(s, i) = apply(t.at(s, i), i);
  }
  return out;
}

TrafficTensor Normalizer::invert(const TrafficTensor& t) const {
  require_fitted(t.locations);
  TrafficTensor out = t;
  for (std::size_t s = 0; s < t.slots; ++s) {
    for (std::size_t i = 0; i < t.locations; ++i) out.at(s, i) = invert(t.at(s, i), i);
  }
  return out;
}

}  // namespace stmeta::timeseries

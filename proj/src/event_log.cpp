#include "har/event_log.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "har/rng.hpp"
#include "json.hpp"

namespace har {

namespace {

// Days since 1970-01-01 for a civil date (Gregorian, proleptic).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

std::string format_date(std::int64_t day) {
  int y;
  unsigned m, d;
  civil_from_days(day, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

}  // namespace

Timestamp parse_timestamp(const std::string& date, const std::string& time) {
  int y, mo, d;
  if (std::sscanf(date.c_str(), "%d-%d-%d", &y, &mo, &d) != 3 || mo < 1 ||
      mo > 12 || d < 1 || d > 31)
    throw std::invalid_argument("bad date: " + date);
  int h, mi;
  double sec;
  if (std::sscanf(time.c_str(), "%d:%d:%lf", &h, &mi, &sec) != 3 || h < 0 ||
      h > 23 || mi < 0 || mi > 59 || sec < 0 || sec >= 61)
    throw std::invalid_argument("bad time: " + time);
  const std::int64_t day = days_from_civil(y, mo, d);
  const std::int64_t micros = static_cast<std::int64_t>(sec * 1e6 + 0.5);
  return day * kMicrosPerDay + (h * 3600ll + mi * 60ll) * 1000000ll + micros;
}

std::string format_timestamp(Timestamp ts) {
  const std::int64_t day = day_of(ts);
  std::int64_t rem = ts - day * kMicrosPerDay;
  const int h = static_cast<int>(rem / 3600000000ll);
  rem %= 3600000000ll;
  const int mi = static_cast<int>(rem / 60000000ll);
  rem %= 60000000ll;
  const int s = static_cast<int>(rem / 1000000ll);
  const int us = static_cast<int>(rem % 1000000ll);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s %02d:%02d:%02d.%06d",
                format_date(day).c_str(), h, mi, s, us);
  return buf;
}

SensorEvent parse_line(const std::string& line, std::size_t line_number) {
  const std::vector<std::string> fields = split_ws(line);
  if (fields.size() < 4)
    throw ParseError(line_number,
                     "expected at least 4 fields, got " +
                         std::to_string(fields.size()));
  if (fields.size() == 5 || fields.size() > 6)
    throw ParseError(line_number, "expected 4 or 6 fields, got " +
                                      std::to_string(fields.size()));
  SensorEvent e;
  try {
    e.timestamp = parse_timestamp(fields[0], fields[1]);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_number, ex.what());
  }
  e.sensor_id = fields[2];
  e.value = fields[3];
  if (fields.size() == 6) {
    Marker marker;
    if (fields[5] == "begin")
      marker = Marker::kBegin;
    else if (fields[5] == "end")
      marker = Marker::kEnd;
    else
      throw ParseError(line_number, "unknown marker keyword: " + fields[5]);
    e.annotation = Annotation{fields[4], marker};
  }
  return e;
}

std::string render_line(const SensorEvent& e) {
  std::string line = format_timestamp(e.timestamp) + " " + e.sensor_id + " " +
                     e.value;
  if (e.annotation) {
    line += " " + e.annotation->activity +
            (e.annotation->marker == Marker::kBegin ? " begin" : " end");
  }
  return line;
}

std::vector<SensorEvent> parse_stream(std::istream& in,
                                      std::vector<std::string>* warnings) {
  std::vector<SensorEvent> events;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    events.push_back(parse_line(line, line_number));
  }
  (void)warnings;
  return events;
}

std::vector<SensorEvent> parse_file(const std::string& path,
                                    std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return parse_stream(in, warnings);
}

namespace {

std::uint64_t event_hash(const SensorEvent& e) {
  std::uint64_t h = fnv1a(&e.timestamp, sizeof e.timestamp);
  h = fnv1a(e.sensor_id.data(), e.sensor_id.size(), h);
  h = fnv1a("\x1f", 1, h);
  h = fnv1a(e.value.data(), e.value.size(), h);
  if (e.annotation) {
    h = fnv1a(e.annotation->activity.data(), e.annotation->activity.size(), h);
    const char m = e.annotation->marker == Marker::kBegin ? 'b' : 'e';
    h = fnv1a(&m, 1, h);
  }
  return h;
}

// Multiset fingerprint of one day's (time-of-day, sensor, value) tuples.
// Annotations are excluded so relabeled copies of a day still match.
std::vector<std::uint64_t> day_signature(
    const std::vector<const SensorEvent*>& day) {
  std::vector<std::uint64_t> sig;
  sig.reserve(day.size());
  for (const SensorEvent* e : day) {
    const std::int64_t tod = e->timestamp - day_of(e->timestamp) * kMicrosPerDay;
    std::uint64_t h = fnv1a(&tod, sizeof tod);
    h = fnv1a(e->sensor_id.data(), e->sensor_id.size(), h);
    h = fnv1a("\x1f", 1, h);
    h = fnv1a(e->value.data(), e->value.size(), h);
    sig.push_back(h);
  }
  std::sort(sig.begin(), sig.end());
  return sig;
}

}  // namespace

std::vector<SensorEvent> clean(const std::vector<SensorEvent>& events,
                               CleaningReport* report) {
  CleaningReport local;
  local.input_events = events.size();

  // Exact duplicates: keep the first occurrence.
  std::vector<SensorEvent> kept;
  kept.reserve(events.size());
  {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
    for (const SensorEvent& e : events) {
      const std::uint64_t h = event_hash(e);
      auto& bucket = seen[h];
      bool duplicate = false;
      for (std::size_t idx : bucket) {
        if (kept[idx] == e) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) {
        ++local.duplicate_events_removed;
      } else {
        bucket.push_back(kept.size());
        kept.push_back(e);
      }
    }
  }

  for (std::size_t i = 1; i < kept.size(); ++i)
    if (kept[i].timestamp < kept[i - 1].timestamp) ++local.out_of_order_events;
  std::stable_sort(kept.begin(), kept.end(),
                   [](const SensorEvent& a, const SensorEvent& b) {
                     return a.timestamp < b.timestamp;
                   });

  // Group by calendar day, in order.
  std::vector<std::pair<std::int64_t, std::vector<const SensorEvent*>>> days;
  for (const SensorEvent& e : kept) {
    const std::int64_t d = day_of(e.timestamp);
    if (days.empty() || days.back().first != d) days.push_back({d, {}});
    days.back().second.push_back(&e);
  }

  std::vector<SensorEvent> out;
  out.reserve(kept.size());
  std::set<std::vector<std::uint64_t>> seen_days;
  const std::vector<std::uint64_t>* prev_sig = nullptr;
  std::vector<std::vector<std::uint64_t>> sigs;
  sigs.reserve(days.size());
  for (auto& [day, day_events] : days) {
    sigs.push_back(day_signature(day_events));
    const std::vector<std::uint64_t>& sig = sigs.back();
    if (seen_days.count(sig)) {
      ++local.duplicate_days_removed;
      local.removed_days.push_back(format_date(day));
      prev_sig = &sig;
      continue;
    }
    // Partial duplication against the immediately preceding day: warn only.
    if (prev_sig && !prev_sig->empty() && !sig.empty()) {
      std::vector<std::uint64_t> common;
      std::set_intersection(sig.begin(), sig.end(), prev_sig->begin(),
                            prev_sig->end(), std::back_inserter(common));
      if (common.size() * 5 >= sig.size() * 4) {
        local.partial_day_warnings.push_back(
            format_date(day) + ": " + std::to_string(common.size()) + "/" +
            std::to_string(sig.size()) +
            " events also occur on the previous day");
      }
    }
    seen_days.insert(sig);
    prev_sig = &sigs.back();
    for (const SensorEvent* e : day_events) out.push_back(*e);
  }

  local.output_events = out.size();
  if (report) *report = std::move(local);
  return out;
}

std::string CleaningReport::to_json() const {
  nlohmann::json j;
  j["input_events"] = input_events;
  j["duplicate_events_removed"] = duplicate_events_removed;
  j["out_of_order_events"] = out_of_order_events;
  j["duplicate_days_removed"] = duplicate_days_removed;
  j["removed_days"] = removed_days;
  j["partial_day_warnings"] = partial_day_warnings;
  j["output_events"] = output_events;
  return j.dump(2);
}

std::vector<LabeledEvent> annotate(const std::vector<SensorEvent>& events,
                                   std::vector<std::string>* warnings) {
  std::vector<LabeledEvent> out;
  out.reserve(events.size());
  std::vector<std::string> open;  // stack of open activities, innermost last

  for (const SensorEvent& e : events) {
    std::string label;
    if (e.annotation && e.annotation->marker == Marker::kBegin) {
      label = e.annotation->activity;
      out.push_back({e, label});
      open.push_back(label);
      continue;
    }
    if (e.annotation && e.annotation->marker == Marker::kEnd) {
      const std::string& name = e.annotation->activity;
      auto it = std::find(open.rbegin(), open.rend(), name);
      if (it == open.rend()) {
        if (warnings)
          warnings->push_back("end marker for '" + name +
                              "' with no open activity at " +
                              format_timestamp(e.timestamp));
        out.push_back({e, "Other"});
      } else {
        out.push_back({e, name});
        open.erase(std::next(it).base());
      }
      continue;
    }
    out.push_back({e, open.empty() ? "Other" : open.back()});
  }

  if (!open.empty() && warnings) {
    for (const std::string& name : open)
      warnings->push_back("activity '" + name +
                          "' still open at end of file; closed at last event");
  }
  return out;
}

std::vector<ActivitySequence> segment(
    const std::vector<LabeledEvent>& labeled) {
  std::vector<ActivitySequence> sequences;
  for (const LabeledEvent& le : labeled) {
    if (sequences.empty() || sequences.back().label != le.activity_label) {
      ActivitySequence seq;
      seq.label = le.activity_label;
      seq.start = le.event.timestamp;
      sequences.push_back(std::move(seq));
    }
    sequences.back().events.push_back(le);
    sequences.back().end = le.event.timestamp;
  }
  return sequences;
}

DatasetStats stats(const std::vector<ActivitySequence>& sequences,
                   const std::vector<SensorEvent>& events) {
  DatasetStats st;
  std::set<std::string> sensors;
  std::set<std::int64_t> days;
  for (const SensorEvent& e : events) {
    sensors.insert(e.sensor_id);
    days.insert(day_of(e.timestamp));
  }
  std::set<std::string> classes;
  for (const ActivitySequence& s : sequences) {
    classes.insert(s.label);
    ++st.sequences_per_class[s.label];
  }
  st.sensor_count = sensors.size();
  st.day_count = days.size();
  st.activity_class_count = classes.size();
  return st;
}

void write_log(const std::string& path,
               const std::vector<SensorEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  for (const SensorEvent& e : events) out << render_line(e) << "\n";
}

}  // namespace har

#ifndef HAR_EVENT_LOG_HPP
#define HAR_EVENT_LOG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace har {

// Microseconds since 1970-01-01 00:00:00, no timezone applied. Timestamps
// order and segment events; they are never model input.
using Timestamp = std::int64_t;

constexpr std::int64_t kMicrosPerDay = 86400ll * 1000000ll;

// "YYYY-MM-DD HH:MM:SS[.ffffff]" <-> Timestamp. Throws on malformed input.
Timestamp parse_timestamp(const std::string& date, const std::string& time);
std::string format_timestamp(Timestamp ts);

// Calendar day index (days since epoch) of a timestamp.
inline std::int64_t day_of(Timestamp ts) {
  return ts >= 0 ? ts / kMicrosPerDay : (ts - kMicrosPerDay + 1) / kMicrosPerDay;
}

enum class Marker { kBegin, kEnd };

struct Annotation {
  std::string activity;
  Marker marker;

  bool operator==(const Annotation&) const = default;
};

// One timestamped sensor activation, the atom of ingestion.
struct SensorEvent {
  Timestamp timestamp = 0;
  std::string sensor_id;
  std::string value;
  std::optional<Annotation> annotation;

  bool operator==(const SensorEvent&) const = default;
};

struct LabeledEvent {
  SensorEvent event;
  std::string activity_label;  // "Other" when outside every activity
};

struct ActivitySequence {
  std::vector<LabeledEvent> events;
  std::string label;
  Timestamp start = 0;
  Timestamp end = 0;
};

struct DatasetStats {
  std::string resident_description;
  std::size_t sensor_count = 0;
  std::size_t activity_class_count = 0;
  std::size_t day_count = 0;
  std::map<std::string, std::size_t> sequences_per_class;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
        line_number_(line_number) {}

  std::size_t line_number() const { return line_number_; }

 private:
  std::size_t line_number_;
};

// Whitespace-separated: date, time, sensor, value, then optionally
// activity-name and begin/end keyword.
SensorEvent parse_line(const std::string& line, std::size_t line_number = 0);

// Inverse of parse_line for the same field layout.
std::string render_line(const SensorEvent& e);

std::vector<SensorEvent> parse_stream(std::istream& in,
                                      std::vector<std::string>* warnings);
std::vector<SensorEvent> parse_file(const std::string& path,
                                    std::vector<std::string>* warnings);

struct CleaningReport {
  std::size_t input_events = 0;
  std::size_t duplicate_events_removed = 0;
  std::size_t out_of_order_events = 0;  // adjacent inversions before sorting
  std::size_t duplicate_days_removed = 0;
  std::vector<std::string> removed_days;        // "YYYY-MM-DD"
  std::vector<std::string> partial_day_warnings;
  std::size_t output_events = 0;

  std::string to_json() const;
};

// Removes exact-duplicate events, stably sorts by timestamp, and drops any
// calendar day whose (time-of-day, sensor, value) multiset duplicates an
// earlier day. Partially duplicated consecutive days only warn.
std::vector<SensorEvent> clean(const std::vector<SensorEvent>& events,
                               CleaningReport* report);

// Resolves begin/end annotations (nesting allowed) into per-event labels.
// Events outside every open activity get "Other". Unmatched end markers and
// activities still open at end-of-file produce warnings, never errors.
std::vector<LabeledEvent> annotate(const std::vector<SensorEvent>& events,
                                   std::vector<std::string>* warnings);

// Maximal runs of consecutive events sharing one label become one sequence.
std::vector<ActivitySequence> segment(const std::vector<LabeledEvent>& labeled);

DatasetStats stats(const std::vector<ActivitySequence>& sequences,
                   const std::vector<SensorEvent>& events);

void write_log(const std::string& path, const std::vector<SensorEvent>& events);

}  // namespace har

#endif  // HAR_EVENT_LOG_HPP

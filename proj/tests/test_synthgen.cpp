#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "har/dataset.hpp"
#include "har/synthgen.hpp"
#include "json.hpp"

using namespace har;

namespace {

std::vector<SensorEvent> parse_all(const GeneratedDataset& gen) {
  std::vector<SensorEvent> events;
  events.reserve(gen.log_lines.size());
  for (std::size_t i = 0; i < gen.log_lines.size(); ++i)
    events.push_back(parse_line(gen.log_lines[i], i + 1));
  return events;
}

HomeSpec tiny_home(std::uint64_t seed) {
  HomeSpec home = aruba_like();
  home.days = 6;
  home.seed = seed;
  return home;
}

}  // namespace

TEST_CASE("generated logs parse cleanly and in order") {
  const GeneratedDataset gen = generate(tiny_home(1));
  const std::vector<SensorEvent> events = parse_all(gen);
  CHECK(!events.empty());
  for (std::size_t i = 1; i < events.size(); ++i)
    CHECK(events[i].timestamp >= events[i - 1].timestamp);
}

TEST_CASE("same seed gives byte-identical logs") {
  const GeneratedDataset a = generate(tiny_home(9));
  const GeneratedDataset b = generate(tiny_home(9));
  CHECK(a.log_lines == b.log_lines);
  const GeneratedDataset c = generate(tiny_home(10));
  CHECK(a.log_lines != c.log_lines);
}

TEST_CASE("noise-free single-resident home recovers the schedule exactly") {
  HomeSpec home = tiny_home(2);
  REQUIRE(home.pet_noise_rate == 0.0);
  REQUIRE(home.residents == 1);
  const GeneratedDataset gen = generate(home);
  const std::vector<SensorEvent> events = parse_all(gen);
  const auto labeled = annotate(events, nullptr);
  const auto sequences = segment(labeled);

  REQUIRE(sequences.size() == gen.ground_truth.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    CHECK(sequences[i].label == gen.ground_truth[i].name);
    CHECK(sequences[i].start == gen.ground_truth[i].start);
    CHECK(sequences[i].end == gen.ground_truth[i].end);
  }
}

TEST_CASE("noise-free events stay inside their activity's room") {
  HomeSpec home = tiny_home(3);
  const GeneratedDataset gen = generate(home);
  std::map<std::string, std::string> room_of_activity;
  for (const ActivitySpec& act : home.activities)
    room_of_activity[act.name] = act.room;

  const auto labeled = annotate(parse_all(gen), nullptr);
  for (const LabeledEvent& le : labeled) {
    REQUIRE(le.activity_label != "Other");
    CHECK(gen.room_of_sensor.at(le.event.sensor_id) ==
          room_of_activity.at(le.activity_label));
  }
}

TEST_CASE("per-class sequence counts track the schedule weights") {
  HomeSpec home = aruba_like();
  home.days = 60;
  home.activities_per_day = 5;
  home.seed = 13;
  // Five activities with equal weight.
  home.activities.resize(5);
  for (ActivitySpec& act : home.activities) act.daily_weight = 1.0;

  const GeneratedDataset gen = generate(home);
  std::map<std::string, std::size_t> counts;
  for (const ScheduledActivity& s : gen.ground_truth) ++counts[s.name];
  const double expected = 60.0 * 5.0 / 5.0;
  for (const ActivitySpec& act : home.activities) {
    const double n = static_cast<double>(counts[act.name]);
    CHECK(n >= expected * 0.9 - 3);
    CHECK(n <= expected * 1.1 + 3);
  }
}

TEST_CASE("pet noise strictly increases stray events") {
  auto stray_count = [](double rate) {
    HomeSpec home = aruba_like();
    home.days = 8;
    home.seed = 77;
    home.pet_noise_rate = rate;
    const GeneratedDataset gen = generate(home);
    std::map<std::string, std::string> room_of_activity;
    for (const ActivitySpec& act : home.activities)
      room_of_activity[act.name] = act.room;
    std::vector<SensorEvent> events;
    for (std::size_t i = 0; i < gen.log_lines.size(); ++i)
      events.push_back(parse_line(gen.log_lines[i], i + 1));
    const auto labeled = annotate(events, nullptr);
    std::size_t stray = 0;
    for (const LabeledEvent& le : labeled) {
      if (le.activity_label == "Other")
        ++stray;  // outside every window
      else if (gen.room_of_sensor.at(le.event.sensor_id) !=
               room_of_activity.at(le.activity_label))
        ++stray;  // foreign sensor inside a window
    }
    return stray;
  };
  const std::size_t none = stray_count(0.0);
  const std::size_t some = stray_count(2.0);
  const std::size_t more = stray_count(8.0);
  CHECK(none == 0);
  CHECK(some > none);
  CHECK(more > some);
}

TEST_CASE("two-resident homes produce nested annotations") {
  HomeSpec home = cairo_like();
  home.days = 20;
  home.pet_noise_rate = 0.0;
  const GeneratedDataset gen = generate(home);
  const std::vector<SensorEvent> events = parse_all(gen);

  // Overlap exists iff some begin arrives while another activity is open.
  std::size_t open = 0;
  bool nested = false;
  for (const SensorEvent& e : events) {
    if (!e.annotation) continue;
    if (e.annotation->marker == Marker::kBegin) {
      if (open > 0) nested = true;
      ++open;
    } else if (open > 0) {
      --open;
    }
  }
  CHECK(nested);

  // The pipeline still consumes the interleaved log without losing events.
  const auto labeled = annotate(events, nullptr);
  const auto sequences = segment(labeled);
  std::size_t total = 0;
  for (const ActivitySequence& s : sequences) total += s.events.size();
  CHECK(total == events.size());
}

TEST_CASE("default scenarios mirror the CASAS resident structures") {
  const auto scenarios = default_scenarios();
  const HomeSpec& aruba = scenarios.at("aruba_like");
  CHECK(aruba.residents == 1);
  CHECK(aruba.pet_noise_rate == 0.0);
  const HomeSpec& milan = scenarios.at("milan_like");
  CHECK(milan.residents == 1);
  CHECK(milan.pet_noise_rate > 0.0);
  const HomeSpec& cairo = scenarios.at("cairo_like");
  CHECK(cairo.residents == 2);

  for (const auto& [name, spec] : scenarios) {
    std::size_t sensors = 0;
    for (const RoomSpec& room : spec.rooms)
      sensors += room.motion_sensors.size() + room.temperature_sensors.size();
    CHECK(sensors >= 8);
    CHECK(sensors <= 12);
    CHECK(spec.activities.size() >= 5);
    CHECK(spec.activities.size() <= 8);
    CHECK(spec.days >= 30);
    CHECK(spec.days <= 60);
  }
}

TEST_CASE("invalid specs are rejected") {
  HomeSpec home = aruba_like();
  home.activities[0].room = "spaceship";
  CHECK_THROWS_AS(generate(home), std::invalid_argument);

  HomeSpec home2 = aruba_like();
  home2.residents = 3;
  CHECK_THROWS_AS(generate(home2), std::invalid_argument);

  HomeSpec home3 = aruba_like();
  home3.activities[0].grammar.states[0].first = "M999";
  CHECK_THROWS_AS(generate(home3), std::invalid_argument);
}

TEST_CASE("cycle grammar follows the cycle with high probability") {
  const ActivityGrammar g =
      cycle_grammar({{"M001", "ON"}, {"M001", "OFF"}, {"M002", "ON"}}, 0.9);
  REQUIRE(g.states.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    double total = 0;
    for (double p : g.transition[i]) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(g.transition[i][(i + 1) % 3] > 0.9);
  }
}

TEST_CASE("sensor renaming keeps structure and changes every id") {
  const HomeSpec original = cairo_like();
  const HomeSpec renamed = with_renamed_sensors(original);
  std::set<std::string> old_ids, new_ids;
  for (const RoomSpec& room : original.rooms)
    for (const std::string& s : room.motion_sensors) old_ids.insert(s);
  for (const RoomSpec& room : renamed.rooms)
    for (const std::string& s : room.motion_sensors) new_ids.insert(s);
  CHECK(old_ids.size() == new_ids.size());
  for (const std::string& id : new_ids) CHECK(old_ids.count(id) == 0);
  CHECK_NOTHROW(generate(renamed));
}

TEST_CASE("write emits a parseable log plus a ground-truth sidecar") {
  const GeneratedDataset gen = generate(tiny_home(5));
  const std::string log_path = "synth_test.log";
  const std::string sidecar_path = "synth_test.json";
  gen.write(log_path, sidecar_path);

  std::vector<std::string> warnings;
  const auto events = parse_file(log_path, &warnings);
  CHECK(events.size() == gen.log_lines.size());

  std::ifstream side(sidecar_path);
  nlohmann::json j;
  side >> j;
  CHECK(j.at("scheduled_activities").size() == gen.ground_truth.size());
  CHECK(j.at("room_of_sensor").size() == gen.room_of_sensor.size());
  std::remove(log_path.c_str());
  std::remove(sidecar_path.c_str());
}

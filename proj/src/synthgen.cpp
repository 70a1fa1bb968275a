#include "har/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "har/rng.hpp"
#include "json.hpp"

namespace har {

namespace {

struct RawEvent {
  Timestamp ts;
  std::string sensor;
  std::string value;
  std::string annotation;  // "", "<name> begin", "<name> end"
};

void validate(const HomeSpec& spec) {
  if (spec.residents < 1 || spec.residents > 2)
    throw std::invalid_argument("HomeSpec: residents must be 1 or 2");
  if (!(spec.pet_noise_rate >= 0) || !std::isfinite(spec.pet_noise_rate))
    throw std::invalid_argument("HomeSpec: bad pet noise rate");
  if (spec.days == 0 || spec.activities.empty() || spec.rooms.empty())
    throw std::invalid_argument("HomeSpec: empty scenario");

  std::set<std::string> sensors;
  std::set<std::string> rooms;
  for (const RoomSpec& room : spec.rooms) {
    rooms.insert(room.name);
    for (const std::string& s : room.motion_sensors) sensors.insert(s);
    for (const std::string& s : room.temperature_sensors) sensors.insert(s);
  }
  for (const ActivitySpec& act : spec.activities) {
    if (!rooms.count(act.room))
      throw std::invalid_argument("HomeSpec: unknown room " + act.room);
    if (act.min_events < 2 || act.max_events < act.min_events)
      throw std::invalid_argument("HomeSpec: bad event count range for " +
                                  act.name);
    if (act.resident < 1 || act.resident > spec.residents)
      throw std::invalid_argument("HomeSpec: bad resident for " + act.name);
    if (act.grammar.states.empty())
      throw std::invalid_argument("HomeSpec: empty grammar for " + act.name);
    for (const auto& [sensor, value] : act.grammar.states)
      if (!sensors.count(sensor))
        throw std::invalid_argument("HomeSpec: unknown sensor " + sensor);
    if (act.grammar.start.size() != act.grammar.states.size() ||
        act.grammar.transition.size() != act.grammar.states.size())
      throw std::invalid_argument("HomeSpec: grammar shape mismatch for " +
                                  act.name);
  }
}

}  // namespace

ActivityGrammar cycle_grammar(
    const std::vector<std::pair<std::string, std::string>>& cycle,
    double follow_probability) {
  const std::size_t n = cycle.size();
  ActivityGrammar g;
  g.states = cycle;
  g.start.assign(n, 0.0);
  g.start[0] = 1.0;
  g.transition.assign(n, std::vector<double>(n, (1.0 - follow_probability) /
                                                    static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i)
    g.transition[i][(i + 1) % n] += follow_probability;
  return g;
}

ActivityGrammar braided_grammar(
    const std::vector<std::vector<std::pair<std::string, std::string>>>& steps,
    double follow_probability) {
  ActivityGrammar g;
  std::vector<std::size_t> step_of_state;
  for (std::size_t s = 0; s < steps.size(); ++s)
    for (const auto& variant : steps[s]) {
      g.states.push_back(variant);
      step_of_state.push_back(s);
    }
  const std::size_t n = g.states.size();
  g.start.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (step_of_state[i] == 0) g.start[i] = 1.0;
  g.transition.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t next = (step_of_state[i] + 1) % steps.size();
    const double stray = (1.0 - follow_probability) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      g.transition[i][j] = stray;
      if (step_of_state[j] == next)
        g.transition[i][j] += follow_probability /
                              static_cast<double>(steps[next].size());
    }
  }
  return g;
}

GeneratedDataset generate(const HomeSpec& spec) {
  validate(spec);
  GeneratedDataset out;
  for (const RoomSpec& room : spec.rooms) {
    for (const std::string& s : room.motion_sensors)
      out.room_of_sensor[s] = room.name;
    for (const std::string& s : room.temperature_sensors)
      out.room_of_sensor[s] = room.name;
  }
  std::vector<std::string> all_motion;
  for (const RoomSpec& room : spec.rooms)
    for (const std::string& s : room.motion_sensors)
      all_motion.push_back(s);

  Rng root(spec.seed);
  Rng activity_rng = root.fork(1);
  Rng noise_rng = root.fork(2);

  // Per-resident activity pools.
  std::vector<std::vector<std::size_t>> pools(
      static_cast<std::size_t>(spec.residents));
  for (std::size_t a = 0; a < spec.activities.size(); ++a)
    pools[static_cast<std::size_t>(spec.activities[a].resident - 1)]
        .push_back(a);
  for (int r = 0; r < spec.residents; ++r)
    if (pools[static_cast<std::size_t>(r)].empty())
      throw std::invalid_argument("HomeSpec: resident " + std::to_string(r + 1) +
                                  " has no activities");

  std::vector<RawEvent> events;
  const Timestamp day0 = parse_timestamp("2024-01-01", "00:00:00");

  for (std::size_t day = 0; day < spec.days; ++day) {
    const Timestamp day_start =
        day0 + static_cast<Timestamp>(day) * kMicrosPerDay;

    for (int resident = 1; resident <= spec.residents; ++resident) {
      const auto& pool = pools[static_cast<std::size_t>(resident - 1)];
      // Residents start their day at staggered times so two-resident homes
      // naturally produce overlapping and nested annotations.
      double clock_s = 6.0 * 3600.0 + (resident - 1) * 900.0 +
                       activity_rng.uniform(0.0, 1800.0);
      std::size_t previous = spec.activities.size();  // none yet
      for (std::size_t slot = 0; slot < spec.activities_per_day; ++slot) {
        std::vector<double> weights;
        weights.reserve(pool.size());
        for (std::size_t a : pool)
          weights.push_back(spec.activities[a].daily_weight);
        // Never repeat the previous slot's activity: consecutive equal
        // labels would merge into one segmented sequence.
        if (pool.size() > 1)
          for (std::size_t i = 0; i < pool.size(); ++i)
            if (pool[i] == previous) weights[i] = 0.0;
        const std::size_t chosen = pool[activity_rng.categorical(weights)];
        const ActivitySpec& act = spec.activities[chosen];
        previous = chosen;

        const std::size_t n_events =
            act.min_events +
            static_cast<std::size_t>(activity_rng.below(
                static_cast<std::uint64_t>(act.max_events - act.min_events + 1)));

        std::size_t state = activity_rng.categorical(act.grammar.start);
        ScheduledActivity window;
        window.name = act.name;
        window.resident = resident;
        for (std::size_t i = 0; i < n_events; ++i) {
          clock_s += activity_rng.exponential(1.0 / act.mean_gap_seconds);
          RawEvent e;
          e.ts = day_start + static_cast<Timestamp>(clock_s * 1e6);
          e.sensor = act.grammar.states[state].first;
          e.value = act.grammar.states[state].second;
          if (i == 0) {
            e.annotation = act.name + " begin";
            window.start = e.ts;
          } else if (i + 1 == n_events) {
            e.annotation = act.name + " end";
            window.end = e.ts;
          }
          events.push_back(std::move(e));
          state = activity_rng.categorical(act.grammar.transition[state]);
        }
        out.ground_truth.push_back(window);
        clock_s += activity_rng.exponential(1.0 / (spec.mean_idle_minutes * 60.0));
      }
    }

    // Pet noise: uninformative motion events anywhere, any time of day.
    if (spec.pet_noise_rate > 0) {
      double clock_s = 6.0 * 3600.0;
      const double day_end_s = 22.0 * 3600.0;
      while (true) {
        clock_s += noise_rng.exponential(spec.pet_noise_rate / 3600.0);
        if (clock_s >= day_end_s) break;
        RawEvent e;
        e.ts = day_start + static_cast<Timestamp>(clock_s * 1e6);
        e.sensor = all_motion[noise_rng.below(all_motion.size())];
        e.value = noise_rng.below(2) ? "ON" : "OFF";
        events.push_back(std::move(e));
      }
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const RawEvent& a, const RawEvent& b) {
                     return a.ts < b.ts;
                   });
  std::sort(out.ground_truth.begin(), out.ground_truth.end(),
            [](const ScheduledActivity& a, const ScheduledActivity& b) {
              return a.start < b.start;
            });

  out.log_lines.reserve(events.size());
  for (const RawEvent& e : events) {
    std::string line =
        format_timestamp(e.ts) + " " + e.sensor + " " + e.value;
    if (!e.annotation.empty()) line += " " + e.annotation;
    out.log_lines.push_back(std::move(line));
  }
  return out;
}

void GeneratedDataset::write(const std::string& log_path,
                             const std::string& sidecar_path) const {
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write: " + log_path);
  for (const std::string& line : log_lines) log << line << "\n";

  nlohmann::json j;
  j["room_of_sensor"] = room_of_sensor;
  nlohmann::json truth = nlohmann::json::array();
  for (const ScheduledActivity& s : ground_truth)
    truth.push_back({{"name", s.name},
                     {"resident", s.resident},
                     {"start", format_timestamp(s.start)},
                     {"end", format_timestamp(s.end)}});
  j["scheduled_activities"] = truth;
  std::ofstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot write: " + sidecar_path);
  side << j.dump(2) << "\n";
}

namespace {

using TokenList = std::vector<std::pair<std::string, std::string>>;

TokenList onoff_sweep(const std::vector<std::string>& sensors) {
  TokenList cycle;
  for (const std::string& s : sensors) {
    cycle.push_back({s, "ON"});
    cycle.push_back({s, "OFF"});
  }
  return cycle;
}

TokenList interleaved(const std::vector<std::string>& sensors) {
  TokenList cycle;
  for (const std::string& s : sensors) cycle.push_back({s, "ON"});
  for (const std::string& s : sensors) cycle.push_back({s, "OFF"});
  return cycle;
}

}  // namespace

HomeSpec aruba_like() {
  HomeSpec home;
  home.name = "aruba_like";
  home.residents = 1;
  home.pet_noise_rate = 0.0;
  home.days = 40;
  home.activities_per_day = 6;
  home.seed = 7001;
  home.rooms = {
      {"bedroom", {"M001", "M002", "M003"}, {"T001"}, "20.5"},
      {"kitchen", {"M004", "M005", "M006"}, {"T002"}, "23.5"},
      {"living", {"M007", "M008", "M009"}, {"T003"}, "21.5"},
  };

  auto add = [&home](const std::string& name, const std::string& room,
                     const TokenList& cycle, double weight,
                     std::size_t min_events, std::size_t max_events) {
    ActivitySpec act;
    act.name = name;
    act.room = room;
    act.grammar = cycle_grammar(cycle);
    act.daily_weight = weight;
    act.min_events = min_events;
    act.max_events = max_events;
    home.activities.push_back(std::move(act));
  };

  add("Sleep", "bedroom",
      onoff_sweep({"M001", "M002"}), 1.0, 8, 16);
  add("Bed_to_Toilet", "bedroom",
      {{"M003", "ON"}, {"M003", "OFF"}, {"M002", "ON"}, {"M002", "OFF"}},
      0.7, 4, 8);
  add("Cook", "kitchen",
      {{"M004", "ON"}, {"M004", "OFF"}, {"M005", "ON"}, {"T002", "23.5"},
       {"M005", "OFF"}, {"M006", "ON"}, {"M006", "OFF"}},
      1.2, 10, 20);
  add("Eat", "kitchen", interleaved({"M006", "M005"}), 1.0, 6, 12);
  add("Relax", "living",
      {{"M007", "ON"}, {"M007", "OFF"}, {"M008", "ON"}, {"M008", "OFF"},
       {"T003", "21.5"}},
      1.2, 8, 16);
  add("Work", "living", interleaved({"M009", "M008"}), 0.9, 8, 16);
  return home;
}

HomeSpec milan_like() {
  HomeSpec home = aruba_like();
  home.name = "milan_like";
  home.pet_noise_rate = 1.5;  // events per hour
  home.days = 40;
  home.seed = 7002;
  return home;
}

HomeSpec cairo_like() {
  HomeSpec home;
  home.name = "cairo_like";
  home.residents = 2;
  home.pet_noise_rate = 2.0;
  home.days = 30;
  home.activities_per_day = 4;
  home.mean_idle_minutes = 30.0;
  home.seed = 7003;
  home.rooms = {
      {"bedroom", {"M001", "M002", "M003"}, {"T001"}, "20.5"},
      {"kitchen", {"M004", "M005", "M006"}, {"T002"}, "23.5"},
      {"office", {"M007", "M008"}, {"T003"}, "22.0"},
  };

  using Steps = std::vector<TokenList>;
  auto add = [&home](const std::string& name, const std::string& room,
                     const Steps& steps, int resident, double weight,
                     std::size_t min_events, std::size_t max_events) {
    ActivitySpec act;
    act.name = name;
    act.room = room;
    act.grammar = braided_grammar(steps, 0.8);
    act.resident = resident;
    act.daily_weight = weight;
    act.min_events = min_events;
    act.max_events = max_events;
    home.activities.push_back(std::move(act));
  };

  // Both residents share rooms and sensors. Classes differ only in the
  // order of steps; each step draws among interchangeable sensor variants,
  // so surface forms vary while the underlying routine stays fixed, and
  // temperature readings recur across classes of the same room.
  const TokenList bed_on{{"M001", "ON"}, {"M002", "ON"}, {"M003", "ON"}};
  const TokenList bed_off{{"M001", "OFF"}, {"M002", "OFF"}, {"M003", "OFF"}};
  const TokenList kitchen_on{{"M004", "ON"}, {"M005", "ON"}, {"M006", "ON"}};
  const TokenList kitchen_off{
      {"M004", "OFF"}, {"M005", "OFF"}, {"M006", "OFF"}};
  const TokenList bed_temp{{"T001", "20.0"}, {"T001", "20.5"},
                           {"T001", "21.0"}, {"T001", "21.5"}};
  const TokenList kitchen_temp{{"T002", "23.0"}, {"T002", "23.5"},
                               {"T002", "24.0"}, {"T002", "24.5"}};
  const TokenList office_temp{{"T003", "21.5"}, {"T003", "22.0"},
                              {"T003", "22.5"}, {"T003", "23.0"}};

  add("R1_Sleep", "bedroom",
      Steps{bed_on, bed_off, bed_temp, bed_on, bed_off},
      1, 1.0, 10, 22);
  add("R2_Sleep", "bedroom",
      Steps{bed_on, bed_temp, bed_temp, bed_off, bed_temp},
      2, 1.0, 10, 22);
  add("R1_Cook", "kitchen",
      Steps{kitchen_on, kitchen_off, kitchen_on, kitchen_on, kitchen_off,
            kitchen_temp},
      1, 1.2, 10, 22);
  add("R1_Work", "office",
      Steps{{{"M007", "ON"}, {"M008", "ON"}},
            {{"M007", "OFF"}, {"M008", "OFF"}},
            office_temp},
      1, 0.9, 10, 22);
  add("R2_Work", "office",
      Steps{{{"M008", "ON"}, {"M007", "ON"}},
            office_temp,
            {{"M008", "OFF"}, {"M007", "OFF"}},
            {{"M008", "ON"}, {"M007", "ON"}},
            {{"M008", "OFF"}, {"M007", "OFF"}}},
      2, 1.0, 10, 22);
  return home;
}

std::map<std::string, HomeSpec> default_scenarios() {
  return {{"aruba_like", aruba_like()},
          {"milan_like", milan_like()},
          {"cairo_like", cairo_like()}};
}

HomeSpec with_renamed_sensors(HomeSpec spec) {
  auto rename = [](std::string id) {
    if (!id.empty()) id[0] = static_cast<char>(id[0] + 1);
    return id;
  };
  for (RoomSpec& room : spec.rooms) {
    for (std::string& s : room.motion_sensors) s = rename(s);
    for (std::string& s : room.temperature_sensors) s = rename(s);
  }
  for (ActivitySpec& act : spec.activities)
    for (auto& [sensor, value] : act.grammar.states) sensor = rename(sensor);
  return spec;
}

}  // namespace har

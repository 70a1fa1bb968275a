#ifndef HAR_SYNTHGEN_HPP
#define HAR_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "har/event_log.hpp"

namespace har {

struct RoomSpec {
  std::string name;
  std::vector<std::string> motion_sensors;
  std::vector<std::string> temperature_sensors;
  std::string temperature_value = "21.5";
};

// Markov chain over (sensor, value) states; gives each activity a syntax the
// sequence models can learn, with computable entropy.
struct ActivityGrammar {
  std::vector<std::pair<std::string, std::string>> states;
  std::vector<double> start;                    // unnormalized
  std::vector<std::vector<double>> transition;  // row-unnormalized
};

struct ActivitySpec {
  std::string name;
  std::string room;
  ActivityGrammar grammar;
  double daily_weight = 1.0;  // schedule draw weight
  std::size_t min_events = 6;
  std::size_t max_events = 18;
  double mean_gap_seconds = 8.0;  // exponential inter-event gap
  int resident = 1;
};

struct HomeSpec {
  std::string name;
  std::vector<RoomSpec> rooms;
  std::vector<ActivitySpec> activities;
  int residents = 1;
  double pet_noise_rate = 0.0;  // motion events per hour, anywhere
  std::size_t days = 30;
  std::size_t activities_per_day = 5;  // slots per resident per day
  double mean_idle_minutes = 45.0;     // gap between scheduled activities
  std::uint64_t seed = 1;
};

struct ScheduledActivity {
  std::string name;
  int resident = 1;
  Timestamp start = 0;
  Timestamp end = 0;
};

struct GeneratedDataset {
  std::vector<std::string> log_lines;  // CASAS line format, time-sorted
  std::vector<ScheduledActivity> ground_truth;
  std::map<std::string, std::string> room_of_sensor;

  void write(const std::string& log_path, const std::string& sidecar_path) const;
};

// Deterministic for a given spec; the activity stream and the noise stream
// draw from independent substreams so changing the noise rate leaves the
// scheduled activities untouched.
GeneratedDataset generate(const HomeSpec& spec);

// Cycle through the given states with follow probability p and the rest
// spread uniformly; the workhorse grammar for the built-in scenarios.
ActivityGrammar cycle_grammar(
    const std::vector<std::pair<std::string, std::string>>& cycle,
    double follow_probability = 0.85);

// Cycle over steps where each step draws uniformly among interchangeable
// variant tokens (synonymous sensors). Surface forms vary freely while the
// step order stays fixed, so token similarity carries real signal.
ActivityGrammar braided_grammar(
    const std::vector<std::vector<std::pair<std::string, std::string>>>& steps,
    double follow_probability = 0.85);

// Desk-scale stand-ins mirroring the resident structure of the three
// CASAS homes: single resident, resident with a pet, and two residents
// with a pet.
HomeSpec aruba_like();
HomeSpec milan_like();
HomeSpec cairo_like();
std::map<std::string, HomeSpec> default_scenarios();

// Same home with every sensor id renamed (first letter shifted), for
// cross-home transfer fixtures.
HomeSpec with_renamed_sensors(HomeSpec spec);

}  // namespace har

#endif  // HAR_SYNTHGEN_HPP

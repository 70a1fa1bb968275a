#include "har/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "har/rng.hpp"
#include "json.hpp"

namespace har {

std::string tokenize_event(const std::string& sensor_id,
                           const std::string& value) {
  if (sensor_id.empty() || value.empty())
    throw std::invalid_argument("tokenize_event: empty sensor id or value");
  return sensor_id + value;
}

Vocabulary Vocabulary::build(
    const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty())
    throw std::invalid_argument("Vocabulary::build: empty corpus");

  std::unordered_map<std::string, std::uint64_t> counts;
  std::unordered_map<std::string, std::size_t> first_seen;
  std::size_t position = 0;
  for (const auto& seq : corpus) {
    for (const std::string& tok : seq) {
      if (counts.emplace(tok, 0).second) first_seen[tok] = position;
      ++counts[tok];
      ++position;
    }
  }

  std::vector<std::string> ranked;
  ranked.reserve(counts.size());
  for (const auto& [tok, _] : counts) ranked.push_back(tok);
  std::sort(ranked.begin(), ranked.end(),
            [&](const std::string& a, const std::string& b) {
              if (counts[a] != counts[b]) return counts[a] > counts[b];
              return first_seen[a] < first_seen[b];
            });

  Vocabulary v;
  v.tokens_ = std::move(ranked);
  v.frequency_.reserve(v.tokens_.size());
  for (std::size_t r = 0; r < v.tokens_.size(); ++r) {
    v.frequency_.push_back(counts[v.tokens_[r]]);
    v.index_[v.tokens_[r]] = static_cast<int>(r) + 1;
  }
  return v;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_index() : it->second;
}

const std::string& Vocabulary::token_of(int index) const {
  if (index < 1 || index > static_cast<int>(tokens_.size()))
    throw std::out_of_range("Vocabulary::token_of: no token at index " +
                            std::to_string(index));
  return tokens_[static_cast<std::size_t>(index) - 1];
}

std::uint64_t Vocabulary::frequency_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : frequency_[it->second - 1];
}

std::uint64_t Vocabulary::frequency_at(int index) const {
  if (index < 1 || index > static_cast<int>(tokens_.size())) return 0;
  return frequency_[static_cast<std::size_t>(index) - 1];
}

std::string Vocabulary::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t r = 0; r < tokens_.size(); ++r) {
    entries.push_back({{"token", tokens_[r]},
                       {"index", r + 1},
                       {"frequency", frequency_[r]}});
  }
  nlohmann::json j;
  j["pad_index"] = kPadIndex;
  j["unk_index"] = unk_index();
  j["entries"] = entries;
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  Vocabulary v;
  for (const auto& e : j.at("entries")) {
    const int index = e.at("index").get<int>();
    if (index != static_cast<int>(v.tokens_.size()) + 1)
      throw std::runtime_error("Vocabulary::from_json: non-contiguous indexes");
    v.tokens_.push_back(e.at("token").get<std::string>());
    v.frequency_.push_back(e.at("frequency").get<std::uint64_t>());
    v.index_[v.tokens_.back()] = index;
  }
  return v;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t r = 0; r < tokens_.size(); ++r) {
    h = fnv1a(tokens_[r].data(), tokens_[r].size(), h);
    h = fnv1a(&frequency_[r], sizeof frequency_[r], h);
  }
  return h;
}

std::string RelabelMap::relabel(const std::string& raw) const {
  if (map_.empty()) return raw;  // identity map: labels used as-is
  auto it = map_.find(raw);
  if (it != map_.end()) return it->second;
  std::string spaced = raw;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  it = map_.find(spaced);
  if (it != map_.end()) return it->second;
  return "Other";
}

RelabelMap RelabelMap::milan_default() {
  return RelabelMap({
      {"Master Bathroom", "Bathing"},
      {"Guest Bathroom", "Bathing"},
      {"Bed to toilet", "Bed to toilet"},
      {"Kitchen Activity", "Cook"},
      {"Dining Rm Activity", "Eat"},
      {"Dining Room Activity", "Eat"},
      {"Leave Home", "Leave home"},
      {"Leave home", "Leave home"},
      {"Read", "Relax"},
      {"Watch TV", "Relax"},
      {"Watch Tv", "Relax"},
      {"Sleep", "Sleep"},
      {"Eve Meds", "Take medicine"},
      {"Evening Meds", "Take medicine"},
      {"Morning Meds", "Take medicine"},
      {"Desk Activity", "Work"},
      {"Chores", "Work"},
      {"Meditate", "Other"},
      {"Master Bedroom Activity", "Other"},
      {"Other", "Other"},
  });
}

RelabelMap RelabelMap::cairo_default() {
  return RelabelMap({
      {"Bed to toilet", "Bed to toilet"},
      {"Lunch", "Cook"},
      {"Dinner", "Cook"},
      {"Breakfast", "Cook"},
      {"Leave Home", "Leave home"},
      {"Leave home", "Leave home"},
      {"R1 sleep", "Sleep"},
      {"R2 sleep", "Sleep"},
      {"R2 take medecine", "Take medicine"},
      {"R2 take medicine", "Take medicine"},
      {"Laundry", "Work"},
      {"R1 work in office", "Work"},
      {"Night wandering", "Other"},
      {"R2 wake", "Other"},
      {"R1 wake", "Other"},
      {"Other", "Other"},
  });
}

RelabelMap RelabelMap::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open relabel map: " + path);
  nlohmann::json j;
  in >> j;
  std::map<std::string, std::string> m;
  for (auto it = j.begin(); it != j.end(); ++it)
    m[it.key()] = it.value().get<std::string>();
  return RelabelMap(std::move(m));
}

std::string RelabelMap::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [raw, group] : map_) j[raw] = group;
  return j.dump(2);
}

EncodedSequence encode(const std::vector<std::string>& tokens,
                       const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  EncodedSequence out;
  out.indexes.assign(max_len, Vocabulary::kPadIndex);
  out.mask.assign(max_len, 0);

  // Truncation keeps the most recent events.
  const std::size_t keep = std::min(tokens.size(), max_len);
  const std::size_t src_begin = tokens.size() - keep;
  const std::size_t dst_begin = max_len - keep;
  for (std::size_t i = 0; i < keep; ++i) {
    out.indexes[dst_begin + i] = vocab.index_of(tokens[src_begin + i]);
    out.mask[dst_begin + i] = 1;
  }
  out.original_length = keep;
  return out;
}

std::vector<std::string> decode(const EncodedSequence& seq,
                                const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(seq.original_length);
  for (std::size_t i = 0; i < seq.indexes.size(); ++i) {
    if (!seq.mask[i]) continue;
    const int idx = seq.indexes[i];
    tokens.push_back(idx == vocab.unk_index() ? "<UNK>" : vocab.token_of(idx));
  }
  return tokens;
}

std::vector<std::string> tokens_of_sequence(const ActivitySequence& seq) {
  std::vector<std::string> tokens;
  tokens.reserve(seq.events.size());
  for (const LabeledEvent& le : seq.events)
    tokens.push_back(tokenize_event(le.event.sensor_id, le.event.value));
  return tokens;
}

}  // namespace har

#ifndef HAR_TOKENIZER_HPP
#define HAR_TOKENIZER_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "har/event_log.hpp"

namespace har {

// The "word" for one sensor activation: sensor id and value concatenated
// verbatim, e.g. M001 + ON -> M001ON.
std::string tokenize_event(const std::string& sensor_id,
                           const std::string& value);

// Frequency-ranked token index map. Index 0 is reserved for padding and maps
// to no token; the most frequent token gets index 1; the single largest
// index is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr int kPadIndex = 0;

  // Tokens ranked by descending corpus frequency, ties broken by first
  // occurrence in the corpus.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus);

  // Total table size including the PAD and UNK rows.
  std::size_t size() const { return tokens_.size() + 2; }
  std::size_t real_token_count() const { return tokens_.size(); }
  int unk_index() const { return static_cast<int>(tokens_.size()) + 1; }

  bool contains(const std::string& token) const {
    return index_.count(token) != 0;
  }

  // UNK index for tokens never seen at build time.
  int index_of(const std::string& token) const;

  // Real tokens only; PAD and UNK have no token text.
  const std::string& token_of(int index) const;

  std::uint64_t frequency_of(const std::string& token) const;
  std::uint64_t frequency_at(int index) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json_text);

  // Content fingerprint used by checkpoints to detect vocabulary mismatch.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;       // rank order; tokens_[r] has index r+1
  std::vector<std::uint64_t> frequency_;  // parallel to tokens_
  std::unordered_map<std::string, int> index_;
};

// Raw activity label -> group label, total via default "Other".
class RelabelMap {
 public:
  RelabelMap() = default;
  explicit RelabelMap(std::map<std::string, std::string> mapping)
      : map_(std::move(mapping)) {}

  // Unmapped labels collapse to "Other". Raw CASAS files join words with
  // underscores while the canonical group tables use spaces, so a miss is
  // retried with underscores replaced by spaces.
  std::string relabel(const std::string& raw) const;

  bool empty() const { return map_.empty(); }
  const std::map<std::string, std::string>& mapping() const { return map_; }

  static RelabelMap identity() { return RelabelMap(); }
  static RelabelMap milan_default();
  static RelabelMap cairo_default();
  static RelabelMap from_json_file(const std::string& path);
  std::string to_json() const;

 private:
  std::map<std::string, std::string> map_;  // empty -> identity (no grouping)
};

struct EncodedSequence {
  std::vector<int> indexes;          // fixed length, left-padded with 0
  std::vector<std::uint8_t> mask;    // true on real positions
  int label_id = -1;
  std::size_t original_length = 0;   // real tokens after truncation

  std::size_t padded_length() const { return indexes.size(); }
  std::size_t first_real() const { return indexes.size() - original_length; }
};

// Tokens longer than max_len keep the most recent max_len entries; shorter
// sequences are left-padded with PAD. Unknown tokens map to UNK.
EncodedSequence encode(const std::vector<std::string>& tokens,
                       const Vocabulary& vocab, std::size_t max_len);

// Mask-true positions back to tokens; inverse of encode for known tokens.
std::vector<std::string> decode(const EncodedSequence& seq,
                                const Vocabulary& vocab);

std::vector<std::string> tokens_of_sequence(const ActivitySequence& seq);

}  // namespace har

#endif  // HAR_TOKENIZER_HPP

#include <algorithm>

#include "doctest.h"
#include "har/rng.hpp"
#include "har/tokenizer.hpp"

using namespace har;

TEST_CASE("tokenize_event concatenates id and value verbatim") {
  CHECK(tokenize_event("M001", "ON") == "M001ON");
  CHECK(tokenize_event("T004", "24.5") == "T00424.5");
  CHECK(tokenize_event("M004", "OFF") == "M004OFF");
  CHECK_THROWS_AS(tokenize_event("", "ON"), std::invalid_argument);
  CHECK_THROWS_AS(tokenize_event("M001", ""), std::invalid_argument);
}

TEST_CASE("vocabulary ranks by descending frequency from index 1") {
  const std::vector<std::vector<std::string>> corpus{
      {"M004ON", "M005OFF", "M004ON"},
      {"M004ON", "M007ON", "M005OFF"},
  };
  const Vocabulary vocab = Vocabulary::build(corpus);
  CHECK(vocab.index_of("M004ON") == 1);  // most frequent gets the lowest index
  CHECK(vocab.index_of("M005OFF") == 2);
  CHECK(vocab.index_of("M007ON") == 3);
  CHECK(vocab.real_token_count() == 3);
  CHECK(vocab.size() == 5);  // plus PAD and UNK
  CHECK(vocab.unk_index() == 4);
  CHECK(vocab.frequency_of("M004ON") == 3);
}

TEST_CASE("vocabulary tie-break: earlier-seen token gets the smaller index") {
  const std::vector<std::vector<std::string>> corpus{{"B", "A", "B", "A"}};
  const Vocabulary vocab = Vocabulary::build(corpus);
  CHECK(vocab.index_of("B") == 1);
  CHECK(vocab.index_of("A") == 2);

  const std::vector<std::vector<std::string>> flipped{{"A", "B", "A", "B"}};
  const Vocabulary vocab2 = Vocabulary::build(flipped);
  CHECK(vocab2.index_of("A") == 1);
  CHECK(vocab2.index_of("B") == 2);
}

TEST_CASE("single-token corpus still carries the reserved entries") {
  const Vocabulary vocab = Vocabulary::build({{"M001ON"}});
  CHECK(vocab.real_token_count() == 1);
  CHECK(vocab.size() == 3);
  CHECK(vocab.index_of("M001ON") == 1);
  CHECK_THROWS_AS(vocab.token_of(0), std::out_of_range);
  CHECK_THROWS_AS(vocab.token_of(2), std::out_of_range);
}

TEST_CASE("vocabulary index order is consistent with frequency") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::string>> corpus;
    const std::size_t seqs = 1 + rng.below(6);
    for (std::size_t s = 0; s < seqs; ++s) {
      std::vector<std::string> seq;
      const std::size_t len = 1 + rng.below(30);
      for (std::size_t i = 0; i < len; ++i)
        seq.push_back("tok" + std::to_string(rng.below(12)));
      corpus.push_back(std::move(seq));
    }
    const Vocabulary vocab = Vocabulary::build(corpus);
    for (int a = 1; a <= static_cast<int>(vocab.real_token_count()); ++a)
      for (int b = a + 1; b <= static_cast<int>(vocab.real_token_count()); ++b)
        CHECK(vocab.frequency_at(a) >= vocab.frequency_at(b));
    // token_of and index_of are mutually inverse over real tokens
    for (int idx = 1; idx <= static_cast<int>(vocab.real_token_count()); ++idx)
      CHECK(vocab.index_of(vocab.token_of(idx)) == idx);
  }
}

TEST_CASE("encode: left padding, masks and truncation") {
  const Vocabulary vocab = Vocabulary::build({{"A", "A", "B", "C"}});
  SUBCASE("shorter sequence is left-padded") {
    const EncodedSequence enc = encode({"B", "A"}, vocab, 5);
    CHECK(enc.indexes == std::vector<int>{0, 0, 0, 2, 1});
    CHECK(enc.mask == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
    CHECK(enc.original_length == 2);
    CHECK(enc.first_real() == 3);
  }
  SUBCASE("longer sequence keeps the most recent tokens") {
    const EncodedSequence enc = encode({"A", "B", "C", "A", "B"}, vocab, 3);
    CHECK(enc.indexes == std::vector<int>{3, 1, 2});  // C A B
    CHECK(enc.original_length == 3);
  }
  SUBCASE("empty token list is all padding") {
    const EncodedSequence enc = encode({}, vocab, 4);
    CHECK(enc.indexes == std::vector<int>{0, 0, 0, 0});
    CHECK(enc.mask == std::vector<std::uint8_t>{0, 0, 0, 0});
    CHECK(enc.original_length == 0);
  }
  SUBCASE("unseen token maps to UNK") {
    const EncodedSequence enc = encode({"A", "ZZZ"}, vocab, 4);
    CHECK(enc.indexes[3] == vocab.unk_index());
  }
}

TEST_CASE("worked index-encoding example over a fixture vocabulary") {
  // Frequencies in this corpus: M004OFF > M004ON > M007ON > M005OFF >
  // M007OFF > M005ON, so indexes run 1..6 in that order.
  const std::vector<std::string> seq{
      "M005OFF", "M007OFF", "M004OFF", "M004ON", "M004OFF", "M007ON",
      "M004ON",  "M007OFF", "M007ON",  "M005ON", "M004OFF"};
  const std::vector<std::vector<std::string>> corpus{
      seq, {"M004OFF", "M004ON", "M007ON", "M004OFF"}};
  const Vocabulary vocab = Vocabulary::build(corpus);
  CHECK(vocab.index_of("M004OFF") == 1);
  CHECK(vocab.index_of("M004ON") == 2);
  CHECK(vocab.index_of("M007ON") == 3);
  const EncodedSequence enc = encode(seq, vocab, seq.size());
  std::vector<int> expected;
  for (const std::string& tok : seq) expected.push_back(vocab.index_of(tok));
  CHECK(enc.indexes == expected);
  CHECK(enc.mask == std::vector<std::uint8_t>(seq.size(), 1));
}

TEST_CASE("decode restricted to mask-true positions inverts encode") {
  Rng rng(92);
  const std::vector<std::vector<std::string>> corpus{
      {"A", "B", "C", "D", "E", "A", "B", "A"}};
  const Vocabulary vocab = Vocabulary::build(corpus);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> tokens;
    const std::size_t len = 1 + rng.below(12);
    const std::vector<std::string> alphabet{"A", "B", "C", "D", "E"};
    for (std::size_t i = 0; i < len; ++i)
      tokens.push_back(alphabet[rng.below(alphabet.size())]);
    const std::size_t max_len = 12;
    const EncodedSequence enc = encode(tokens, vocab, max_len);
    CHECK(enc.indexes.size() == max_len);
    CHECK(enc.original_length <= max_len);
    const std::vector<std::string> back = decode(enc, vocab);
    CHECK(back == tokens);
  }
}

TEST_CASE("relabel: Table-style groupings for the two multi-label homes") {
  const RelabelMap milan = RelabelMap::milan_default();
  CHECK(milan.relabel("Master Bathroom") == "Bathing");
  CHECK(milan.relabel("Guest Bathroom") == "Bathing");
  CHECK(milan.relabel("Kitchen Activity") == "Cook");
  CHECK(milan.relabel("Read") == "Relax");
  CHECK(milan.relabel("Morning Meds") == "Take medicine");
  CHECK(milan.relabel("Desk Activity") == "Work");
  CHECK(milan.relabel("Meditate") == "Other");
  CHECK(milan.relabel("Unknown_Label_X") == "Other");

  const RelabelMap cairo = RelabelMap::cairo_default();
  CHECK(cairo.relabel("R2 sleep") == "Sleep");
  CHECK(cairo.relabel("R1 sleep") == "Sleep");
  CHECK(cairo.relabel("Breakfast") == "Cook");
  CHECK(cairo.relabel("Laundry") == "Work");
  CHECK(cairo.relabel("Night wandering") == "Other");
}

TEST_CASE("relabel: underscore-joined raw labels reach the spaced keys") {
  const RelabelMap milan = RelabelMap::milan_default();
  CHECK(milan.relabel("Master_Bathroom") == "Bathing");
  CHECK(milan.relabel("Kitchen_Activity") == "Cook");
}

TEST_CASE("identity relabel map keeps labels as-is") {
  const RelabelMap identity = RelabelMap::identity();
  CHECK(identity.relabel("Meal_Preparation") == "Meal_Preparation");
  CHECK(identity.relabel("anything") == "anything");
}

TEST_CASE("shipped relabel files match the built-in defaults") {
  const RelabelMap milan =
      RelabelMap::from_json_file(std::string(HAR_SOURCE_DIR) +
                                 "/data/relabel_milan.json");
  CHECK(milan.mapping() == RelabelMap::milan_default().mapping());
  const RelabelMap cairo =
      RelabelMap::from_json_file(std::string(HAR_SOURCE_DIR) +
                                 "/data/relabel_cairo.json");
  CHECK(cairo.mapping() == RelabelMap::cairo_default().mapping());
}

TEST_CASE("vocabulary JSON round-trip") {
  const Vocabulary vocab =
      Vocabulary::build({{"M004ON", "M004ON", "M005OFF", "T00424.5"}});
  const Vocabulary back = Vocabulary::from_json(vocab.to_json());
  CHECK(back.size() == vocab.size());
  CHECK(back.index_of("M004ON") == vocab.index_of("M004ON"));
  CHECK(back.index_of("T00424.5") == vocab.index_of("T00424.5"));
  CHECK(back.frequency_of("M004ON") == 2);
  CHECK(back.hash() == vocab.hash());
}

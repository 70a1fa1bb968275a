#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "har/nn.hpp"
#include "har/word2vec.hpp"

using namespace har;
using nn::Real;

namespace {

Vocabulary vocab_of_tokens(const std::vector<std::string>& tokens) {
  return Vocabulary::build({tokens});
}

}  // namespace

TEST_CASE("skip-gram pairs stay inside the window and the sequence") {
  const std::vector<std::vector<int>> corpus{{1, 2, 3, 4, 5}, {1, 2}, {3}};
  const std::size_t window = 2;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for_each_skipgram_pair(corpus, window,
                         [&](std::size_t s, std::size_t c, std::size_t q) {
                           CHECK(q != c);
                           CHECK(q < corpus[s].size());
                           const std::size_t lo = c > window ? c - window : 0;
                           CHECK(q >= lo);
                           CHECK(q <= c + window);
                           seen.insert({s, c, q});
                         });
  // Position 0 of sequence 0 pairs with exactly positions 1 and 2.
  CHECK(seen.count({0, 0, 1}) == 1);
  CHECK(seen.count({0, 0, 2}) == 1);
  CHECK(seen.count({0, 0, 3}) == 0);
  // The two-token sequence contributes exactly two ordered pairs.
  CHECK(seen.count({1, 0, 1}) == 1);
  CHECK(seen.count({1, 1, 0}) == 1);
  // A single-token sequence contributes nothing and no pair crosses
  // sequence boundaries by construction of the (s, c, q) key.
  for (const auto& [s, c, q] : seen) {
    CHECK(c < corpus[s].size());
    CHECK(q < corpus[s].size());
  }
}

TEST_CASE("skip-gram tuple loss gradient matches finite differences") {
  Rng rng(101);
  const std::size_t dim = 7;
  for (int trial = 0; trial < 10; ++trial) {
    nn::Parameter center("center", {dim});
    nn::Parameter context("context", {dim});
    nn::Parameter neg_a("neg_a", {dim});
    nn::Parameter neg_b("neg_b", {dim});
    for (nn::Parameter* p : {&center, &context, &neg_a, &neg_b})
      for (Real& x : p->value.v) x = rng.uniform(-1, 1);

    auto loss_only = [&] {
      return skipgram_tuple_loss(center.value.v.data(),
                                 context.value.v.data(),
                                 {neg_a.value.v.data(), neg_b.value.v.data()},
                                 dim, nullptr, nullptr, {});
    };
    skipgram_tuple_loss(center.value.v.data(), context.value.v.data(),
                        {neg_a.value.v.data(), neg_b.value.v.data()}, dim,
                        center.grad.v.data(), context.grad.v.data(),
                        {neg_a.grad.v.data(), neg_b.grad.v.data()});
    const Real err =
        nn::grad_check(loss_only, {&center, &context, &neg_a, &neg_b});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("degenerate one-token corpus trains with decreasing loss") {
  const Vocabulary vocab = vocab_of_tokens({"M001ON"});
  const std::vector<std::vector<int>> corpus{
      std::vector<int>(12, vocab.index_of("M001ON"))};
  SkipGramConfig cfg;
  cfg.embedding_size = 8;
  cfg.window = 3;
  cfg.epochs = 6;
  cfg.seed = 5;
  const SkipGramResult result = train_skipgram(corpus, vocab, cfg);
  REQUIRE(result.epoch_loss.size() == 6);
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e)
    CHECK(result.epoch_loss[e] < result.epoch_loss[e - 1]);
}

TEST_CASE("fixed seed gives a bit-identical embedding matrix") {
  const Vocabulary vocab = vocab_of_tokens({"A", "B", "C", "A", "B", "A"});
  const std::vector<std::vector<int>> corpus{{1, 2, 3, 1, 2}, {3, 2, 1}};
  SkipGramConfig cfg;
  cfg.embedding_size = 16;
  cfg.window = 2;
  cfg.epochs = 10;
  cfg.seed = 77;
  const SkipGramResult a = train_skipgram(corpus, vocab, cfg);
  const SkipGramResult b = train_skipgram(corpus, vocab, cfg);
  CHECK(a.embedding.matrix.v == b.embedding.matrix.v);
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("PAD row stays exactly zero through training") {
  const Vocabulary vocab = vocab_of_tokens({"A", "B", "C"});
  const std::vector<std::vector<int>> corpus{{1, 2, 3, 2, 1, 3, 2}};
  SkipGramConfig cfg;
  cfg.embedding_size = 12;
  cfg.epochs = 20;
  cfg.window = 4;
  cfg.seed = 3;
  const SkipGramResult result = train_skipgram(corpus, vocab, cfg);
  for (std::size_t c = 0; c < cfg.embedding_size; ++c)
    CHECK(result.embedding.matrix.at(Vocabulary::kPadIndex, c) == 0.0);
}

TEST_CASE("train_skipgram rejects out-of-range indexes") {
  const Vocabulary vocab = vocab_of_tokens({"A"});
  SkipGramConfig cfg;
  CHECK_THROWS_AS(train_skipgram({{0, 1}}, vocab, cfg), std::out_of_range);
  CHECK_THROWS_AS(train_skipgram({{9}}, vocab, cfg), std::out_of_range);
  CHECK_THROWS_AS(train_skipgram({}, vocab, cfg), std::invalid_argument);
}

TEST_CASE("cosine basics") {
  EmbeddingMatrix emb;
  emb.vocab = vocab_of_tokens({"A", "B", "C"});
  emb.matrix = nn::Tensor::zeros(5, 2);
  emb.matrix.at(1, 0) = 1.0;  // A
  emb.matrix.at(2, 1) = 2.0;  // B
  emb.matrix.at(3, 0) = -1.0;
  emb.matrix.at(3, 1) = 1.0;  // C

  CHECK(cosine("A", "A", emb) == doctest::Approx(1.0));
  CHECK(cosine("A", "B", emb) == doctest::Approx(0.0));
  CHECK(cosine("A", "C", emb) == doctest::Approx(cosine("C", "A", emb)));
  CHECK(cosine("A", "C", emb) < 0.0);
  CHECK_THROWS_AS(cosine("A", "missing", emb), std::invalid_argument);
}

TEST_CASE("cosine rejects zero rows") {
  EmbeddingMatrix emb;
  emb.vocab = vocab_of_tokens({"A", "B"});
  emb.matrix = nn::Tensor::zeros(4, 3);
  emb.matrix.at(1, 0) = 1.0;
  CHECK_THROWS_AS(cosine("A", "B", emb), std::invalid_argument);
}

TEST_CASE("global average pooling of a sequence") {
  EmbeddingMatrix emb;
  emb.vocab = vocab_of_tokens({"A", "B"});
  emb.matrix = nn::Tensor::zeros(4, 2);
  emb.matrix.at(1, 0) = 1.0;
  emb.matrix.at(1, 1) = 3.0;
  emb.matrix.at(2, 0) = -1.0;
  emb.matrix.at(2, 1) = 1.0;

  SUBCASE("single token returns its row") {
    const nn::Tensor pooled = sequence_embedding_gap({1}, {1}, emb);
    CHECK(pooled[0] == 1.0);
    CHECK(pooled[1] == 3.0);
  }
  SUBCASE("two tokens average") {
    const nn::Tensor pooled = sequence_embedding_gap({1, 2}, {1, 1}, emb);
    CHECK(pooled[0] == doctest::Approx(0.0));
    CHECK(pooled[1] == doctest::Approx(2.0));
  }
  SUBCASE("padding does not change the mean") {
    const nn::Tensor pooled =
        sequence_embedding_gap({0, 0, 1, 2}, {0, 0, 1, 1}, emb);
    CHECK(pooled[0] == doctest::Approx(0.0));
    CHECK(pooled[1] == doctest::Approx(2.0));
  }
  SUBCASE("all padding is an error") {
    CHECK_THROWS_AS(sequence_embedding_gap({0, 0}, {0, 0}, emb),
                    std::invalid_argument);
  }
}

TEST_CASE("embedding CSV export") {
  EmbeddingMatrix emb;
  emb.vocab = vocab_of_tokens({"M004ON"});
  emb.matrix = nn::Tensor::zeros(3, 2);
  emb.matrix.at(1, 0) = 0.125;
  emb.matrix.at(1, 1) = -2.5;
  emb.matrix.at(2, 0) = 1.0 / 3.0;
  emb.matrix.at(2, 1) = 7.75;

  const std::string path = "w2v_export_test.csv";
  export_embeddings(emb, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "token,frequency,dim_0,dim_1");
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 2);  // PAD skipped, UNK row kept
  CHECK(rows[0].substr(0, 7) == "M004ON,");
  CHECK(rows[1].substr(0, 6) == "<UNK>,");

  // Round-trip the coordinates.
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::stringstream ss(rows[r]);
    std::string token, freq, d0, d1;
    std::getline(ss, token, ',');
    std::getline(ss, freq, ',');
    std::getline(ss, d0, ',');
    std::getline(ss, d1, ',');
    CHECK(std::abs(std::stod(d0) - emb.matrix.at(r + 1, 0)) < 1e-6);
    CHECK(std::abs(std::stod(d1) - emb.matrix.at(r + 1, 1)) < 1e-6);
  }
  std::remove(path.c_str());
}

TEST_CASE("embedding checkpoint round-trip") {
  const Vocabulary vocab = vocab_of_tokens({"A", "B", "C", "B", "A", "A"});
  const std::vector<std::vector<int>> corpus{{1, 2, 3, 2, 1}};
  SkipGramConfig cfg;
  cfg.embedding_size = 6;
  cfg.epochs = 4;
  cfg.seed = 11;
  const SkipGramResult trained = train_skipgram(corpus, vocab, cfg);
  const std::string path = "w2v_ckpt_test.bin";
  save_embedding(trained.embedding, path, cfg);
  const EmbeddingMatrix loaded = load_embedding(path);
  CHECK(loaded.matrix.v == trained.embedding.matrix.v);
  CHECK(loaded.vocab.hash() == vocab.hash());
  std::remove(path.c_str());
}

TEST_CASE("three-room toy corpus clusters by room") {
  // Tokens 1..9; rooms {1,2,3}, {4,5,6}, {7,8,9}. Sequences never mix rooms.
  std::vector<std::vector<int>> corpus;
  Rng rng(202);
  for (int rep = 0; rep < 60; ++rep) {
    for (int room = 0; room < 3; ++room) {
      std::vector<int> seq;
      for (int i = 0; i < 10; ++i)
        seq.push_back(3 * room + 1 + static_cast<int>(rng.below(3)));
      corpus.push_back(std::move(seq));
    }
  }
  const Vocabulary vocab = vocab_of_tokens(
      {"r1a", "r1b", "r1c", "r2a", "r2b", "r2c", "r3a", "r3b", "r3c"});
  // The fixture needs all nine tokens to exist; rename indexes to match the
  // vocabulary built from a flat listing (frequencies equal, order kept).
  SkipGramConfig cfg;
  cfg.embedding_size = 12;
  cfg.window = 5;
  cfg.epochs = 30;
  cfg.negatives = 4;
  cfg.seed = 17;
  const SkipGramResult result = train_skipgram(corpus, vocab, cfg);

  auto row_cos = [&](int a, int b) {
    const Real* ra = result.embedding.matrix.row(static_cast<std::size_t>(a));
    const Real* rb = result.embedding.matrix.row(static_cast<std::size_t>(b));
    const Real na = std::sqrt(nn::dot(ra, ra, cfg.embedding_size));
    const Real nb = std::sqrt(nn::dot(rb, rb, cfg.embedding_size));
    return nn::dot(ra, rb, cfg.embedding_size) / (na * nb);
  };
  double within = 0, cross = 0;
  int within_n = 0, cross_n = 0;
  for (int a = 1; a <= 9; ++a)
    for (int b = a + 1; b <= 9; ++b) {
      const bool same_room = (a - 1) / 3 == (b - 1) / 3;
      (same_room ? within : cross) += row_cos(a, b);
      (same_room ? within_n : cross_n) += 1;
    }
  within /= within_n;
  cross /= cross_n;
  CHECK(within > cross + 0.15);
}

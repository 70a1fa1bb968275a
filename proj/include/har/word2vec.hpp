#ifndef HAR_WORD2VEC_HPP
#define HAR_WORD2VEC_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "har/tensor.hpp"
#include "har/tokenizer.hpp"

namespace har {

struct SkipGramConfig {
  std::size_t embedding_size = 64;
  std::size_t window = 20;
  std::size_t epochs = 100;
  std::size_t negatives = 5;
  double noise_exponent = 0.75;
  double learning_rate = 0.025;  // fixed, no decay
  std::uint64_t seed = 1;
};

// Input-side skip-gram embedding plus the vocabulary it indexes.
// Row 0 (PAD) is all-zero and never updated.
struct EmbeddingMatrix {
  nn::Tensor matrix;  // V x E
  Vocabulary vocab;

  std::size_t embedding_size() const { return matrix.cols(); }
};

// Every (center, context) pair within the window, never across sequence
// boundaries. Exposed so tests can audit exactly which pairs training sees.
void for_each_skipgram_pair(
    const std::vector<std::vector<int>>& corpus, std::size_t window,
    const std::function<void(std::size_t seq, std::size_t center,
                             std::size_t context)>& fn);

// Loss and gradients for one (center, context, negatives) tuple:
//   -log sigmoid(v.u_ctx) - sum_j log sigmoid(-v.u_negj)
// Gradient buffers may be null when not needed; they are accumulated into.
nn::Real skipgram_tuple_loss(const nn::Real* center, const nn::Real* context,
                             const std::vector<const nn::Real*>& negatives,
                             std::size_t dim, nn::Real* d_center,
                             nn::Real* d_context,
                             const std::vector<nn::Real*>& d_negatives);

struct SkipGramResult {
  EmbeddingMatrix embedding;
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

// Skip-gram with negative sampling over index sequences. Negatives are drawn
// from the unigram^exponent distribution of the corpus; a draw equal to the
// context token is skipped, not resampled. Runs exactly cfg.epochs epochs.
SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus,
                              const Vocabulary& vocab,
                              const SkipGramConfig& cfg);

double cosine(const std::string& a, const std::string& b,
              const EmbeddingMatrix& emb);

// Arithmetic mean of embedding rows at mask-true positions.
nn::Tensor sequence_embedding_gap(const std::vector<int>& indexes,
                                  const std::vector<std::uint8_t>& mask,
                                  const EmbeddingMatrix& emb);

// CSV with header token,frequency,dim_0..dim_{E-1}; one row per non-PAD row.
void export_embeddings(const EmbeddingMatrix& emb, const std::string& path);

void save_embedding(const EmbeddingMatrix& emb, const std::string& path,
                    const SkipGramConfig& cfg);
EmbeddingMatrix load_embedding(const std::string& path);

}  // namespace har

#endif  // HAR_WORD2VEC_HPP

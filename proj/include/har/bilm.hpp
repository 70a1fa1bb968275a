#ifndef HAR_BILM_HPP
#define HAR_BILM_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "har/nn.hpp"
#include "har/tokenizer.hpp"

namespace har {

struct BiLmConfig {
  std::size_t embedding_size = 64;  // must equal hidden_size
  std::size_t hidden_size = 64;     // per direction
  std::size_t window = 60;          // truncated-BPTT chunk length
  std::size_t max_epochs = 400;
  std::size_t batch_size = 512;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
};

enum class ElmoOutputMode { kWeightedSum, kSum, kLast, kConcat };

ElmoOutputMode elmo_mode_from_string(const std::string& name);
std::string to_string(ElmoOutputMode mode);

// Per-position representations from the three layers, forward and backward
// tracks. The token layer is shared by both tracks.
struct BiLmReps {
  nn::Tensor r0;      // T x E, token embedding
  nn::Tensor r1_fwd;  // T x H
  nn::Tensor r1_bwd;
  nn::Tensor r2_fwd;  // layer-2 output with the layer-1 residual added
  nn::Tensor r2_bwd;
};

struct BiLmLossStats {
  double nll_fwd = 0;
  double nll_bwd = 0;
  std::size_t count_fwd = 0;
  std::size_t count_bwd = 0;

  std::size_t count() const { return count_fwd + count_bwd; }
  // Mean of both cross-entropies over valid prediction positions, pooled.
  double loss() const {
    return count() ? (nll_fwd + nll_bwd) / static_cast<double>(count()) : 0.0;
  }
};

// Token embedding, two stacked LSTMs per direction with a residual
// connection from layer 1 into layer 2, and one vocabulary projection per
// direction. Trained to predict the next token (forward track) and the
// previous token (backward track).
class BiLmModel {
 public:
  BiLmModel(const Vocabulary& vocab, const BiLmConfig& cfg, Rng& rng);

  const BiLmConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t hidden_size() const { return cfg_.hidden_size; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  // Throws when frozen; training goes through this accessor.
  std::vector<nn::Parameter*> trainable_parameters();
  std::vector<std::pair<std::string, const nn::Tensor*>> named_tensors() const;

  BiLmReps forward(const std::vector<int>& indexes, const nn::Mask& mask) const;

  BiLmLossStats loss(const std::vector<int>& indexes,
                     const nn::Mask& mask) const;

  // Forward + backward; parameter gradients accumulate scaled by grad_scale
  // (gradient of grad_scale * summed NLL). Throws when frozen.
  BiLmLossStats loss_backward(const std::vector<int>& indexes,
                              const nn::Mask& mask, double grad_scale);

  // Default scalar-mix values for the weighted-sum output mode; a downstream
  // classifier copies and trains its own.
  std::array<double, 3> mix_logits{{0.0, 0.0, 0.0}};
  double gamma = 1.0;

  nn::Parameter embedding;  // V x E, PAD row zero
  nn::LstmCellParams fwd1, fwd2, bwd1, bwd2;
  nn::DenseParams proj_fwd, proj_bwd;  // H -> V, zero-init

 private:
  BiLmConfig cfg_;
  Vocabulary vocab_;
  bool frozen_ = false;
};

// Width of one elmo_embed position vector.
std::size_t elmo_width(ElmoOutputMode mode, std::size_t hidden_size);

// Combine the layer representations per position. R0 is duplicated to 2H so
// the sum and weighted modes are well formed; concat is [R0dup;R1;R2].
// Masked positions give zero vectors in every mode.
nn::Tensor elmo_embed(const std::vector<int>& indexes, const nn::Mask& mask,
                      const BiLmModel& model, ElmoOutputMode mode);

// Chunked the same way as training (window-length pieces); pooled over both
// directions: exp(total NLL / total predicted tokens).
double perplexity(const std::vector<std::vector<int>>& corpus,
                  const BiLmModel& model);

struct BiLmTrainResult {
  BiLmModel model;
  std::vector<double> validation_perplexity;  // entry 0 is the untrained value
  std::size_t best_epoch = 0;
};

// 80/20 sequence-level train/validation split, chunks of cfg.window,
// mini-batches of cfg.batch_size, Adam, early stopping on validation
// perplexity with cfg.patience, best weights restored, model frozen.
BiLmTrainResult train_bilm(const std::vector<std::vector<int>>& corpus,
                           const Vocabulary& vocab, const BiLmConfig& cfg);

// Splits a sequence into consecutive window-length chunks.
std::vector<std::vector<int>> chunk_sequence(const std::vector<int>& seq,
                                             std::size_t window);

void save_bilm(const BiLmModel& model,
               const std::vector<double>& validation_perplexity,
               const std::string& path);
BiLmModel load_bilm(const std::string& path);

}  // namespace har

#endif  // HAR_BILM_HPP

#ifndef HAR_CLASSIFIER_HPP
#define HAR_CLASSIFIER_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "har/bilm.hpp"
#include "har/nn.hpp"
#include "har/tokenizer.hpp"
#include "har/word2vec.hpp"

namespace har {

enum class EncoderKind {
  kNone,                // one-hot token vectors
  kTrainableEmbedding,  // learned lookup, trained with the classifier
  kWord2VecFrozen,
  kElmoFrozen,
};

EncoderKind encoder_from_string(const std::string& name);
std::string to_string(EncoderKind kind);

enum class Directionality { kUni, kBi };

struct ClassifierConfig {
  EncoderKind encoder = EncoderKind::kTrainableEmbedding;
  ElmoOutputMode elmo_mode = ElmoOutputMode::kConcat;
  Directionality directionality = Directionality::kBi;
  std::size_t recurrent_layers = 1;  // 1 or 2
  std::size_t units = 64;
  std::size_t embedding_size = 64;  // trainable-embedding width
  std::size_t batch_size = 64;
  std::size_t max_epochs = 400;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::size_t class_count = 0;
};

// Per-position input vectors for one sequence's real span, plus the layer
// stack when the combination itself is trainable (weighted-sum mix).
struct EncodedInput {
  nn::Tensor features;  // L x D, already combined
  // Only for the elmo weighted-sum mode: the three 2H-wide layers.
  std::optional<BiLmReps> stack;
};

class ClassifierModel {
 public:
  ClassifierModel(const ClassifierConfig& cfg, std::size_t vocab_size,
                  std::shared_ptr<const EmbeddingMatrix> w2v,
                  std::shared_ptr<const BiLmModel> bilm);

  const ClassifierConfig& config() const { return cfg_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t final_width() const;

  // Per-position vectors for the sequence's real span (PAD positions carry
  // zero vectors for every encoder and are skipped entirely here).
  EncodedInput encode_input(const EncodedSequence& seq) const;

  // Probability vector over the classes; softmax of the head logits.
  nn::Tensor classify(const EncodedSequence& seq) const;
  std::size_t predict(const EncodedSequence& seq) const;

  // Cross-entropy of one sequence against its label.
  double loss(const EncodedSequence& seq) const;
  // Forward + backward, accumulating grad_scale * d(loss) into parameters.
  double loss_backward(const EncodedSequence& seq, double grad_scale);

  // Variants over a pre-encoded input; valid for frozen-feature encoders
  // where the features do not change between epochs.
  nn::Tensor logits_from_input(const EncodedInput& input) const;
  double loss_backward_input(const EncodedInput& input, int label_id,
                             double grad_scale);

  std::vector<nn::Parameter*> trainable_parameters();

  // Encoder parameters excluded from training (empty unless frozen encoder).
  const nn::Tensor* frozen_embedding_view() const;

  std::vector<std::pair<std::string, const nn::Tensor*>> named_tensors() const;
  void load_tensors(const std::map<std::string, nn::Tensor>& tensors);

  void init(Rng& rng);

  nn::Parameter embedding;    // trainable-embedding encoder only
  nn::Parameter mix_logits;   // weighted-sum mode only (3 values)
  nn::Parameter mix_gamma;    // weighted-sum mode only (1 value)
  nn::LstmCellParams l1_fwd, l1_bwd, l2_fwd, l2_bwd;
  nn::DenseParams head;       // final representation -> class logits

 private:
  struct ForwardCache;
  nn::Tensor forward_features(const EncodedInput& input,
                              ForwardCache* cache) const;
  void backward_features(const EncodedInput& input, const nn::Tensor& d_logits,
                         ForwardCache& cache, nn::Tensor* d_features);

  ClassifierConfig cfg_;
  std::size_t vocab_size_ = 0;
  std::size_t input_width_ = 0;
  std::shared_ptr<const EmbeddingMatrix> w2v_;
  std::shared_ptr<const BiLmModel> bilm_;
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct ClassifierTrainResult {
  ClassifierModel model;
  std::vector<TrainLogEntry> log;
  std::size_t best_epoch = 0;  // 1-based epoch with the lowest val loss
};

// Mean cross-entropy in mini-batches with Adam, at most cfg.max_epochs
// epochs, early stopping on validation loss with cfg.patience, best weights
// restored. Frozen encoders are shared read-only and never updated.
ClassifierTrainResult train_classifier(
    const std::vector<EncodedSequence>& train,
    const std::vector<EncodedSequence>& val, const ClassifierConfig& cfg,
    std::shared_ptr<const EmbeddingMatrix> w2v = nullptr,
    std::shared_ptr<const BiLmModel> bilm = nullptr);

void write_training_log(const std::vector<TrainLogEntry>& log,
                        const std::string& path);

}  // namespace har

#endif  // HAR_CLASSIFIER_HPP

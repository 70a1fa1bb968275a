#ifndef HAR_EVAL_HPP
#define HAR_EVAL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "har/classifier.hpp"
#include "har/dataset.hpp"
#include "har/word2vec.hpp"
#include "json.hpp"

namespace har {

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;  // sequence ids per fold
  // class name -> per-fold sequence counts
  std::map<std::string, std::vector<std::size_t>> per_class_counts;
  std::vector<std::string> warnings;  // classes with fewer than K samples
};

// Per class: sort ids by sequence content (input-order invariance), shuffle
// with a class-keyed seeded generator, deal round-robin into K folds.
FoldSplit stratified_kfold(const std::vector<EncodedSequence>& sequences,
                           const std::vector<std::string>& class_names,
                           std::size_t k, std::uint64_t seed);

// Seeded stratified holdout; returns (train ids, holdout ids).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<EncodedSequence>& sequences,
                 const std::vector<std::size_t>& ids, double holdout_fraction,
                 std::uint64_t seed);

// Full metric suite over one prediction set. Per-class divisions by zero
// yield 0 for that class and set a flag. The common reporting convention in
// this domain labels support-weighted averages as the plain metrics and
// macro averages as the "weighted" ones; compat_view() emits that naming.
struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::vector<double>> confusion;  // rows = true class
  double micro_accuracy = 0;
  double weighted_precision = 0;  // support-weighted
  double weighted_recall = 0;
  double weighted_f1 = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  double balanced_accuracy = 0;  // equals macro recall
  std::vector<std::string> zero_division_flags;

  nlohmann::json to_json() const;
  nlohmann::json compat_view() const;  // conventional names, scores x100
  std::string metrics_csv_row(const std::string& run_label) const;
  static std::string metrics_csv_header();
  void write_confusion_csv(const std::string& path) const;
};

EvalReport compute_metrics(const std::vector<std::size_t>& predictions,
                           const std::vector<std::size_t>& truths,
                           const std::vector<std::string>& class_names);

struct EmbeddingConfig {
  EncoderKind kind = EncoderKind::kTrainableEmbedding;
  ElmoOutputMode elmo_mode = ElmoOutputMode::kConcat;
  SkipGramConfig w2v;
  BiLmConfig bilm;
};

struct ExperimentConfig {
  ClassifierConfig classifier;
  EmbeddingConfig embedding;
  std::size_t k = 3;
  double inner_validation_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // folds may run in parallel
};

struct ExperimentResult {
  EvalReport averaged;  // metric fields are fold means; confusion is pooled
  std::vector<EvalReport> per_fold;
  std::vector<std::vector<TrainLogEntry>> fold_logs;
  FoldSplit split;
  std::vector<double> bilm_perplexity_curve;  // when an elmo encoder trained

  nlohmann::json to_json() const;
};

// K-fold protocol: unsupervised embeddings train once on the whole corpus,
// then per fold a fresh classifier trains on K-1 folds (with an inner
// stratified validation holdout) and is scored on the held-out fold.
// Averaged metrics are the unweighted arithmetic means across folds.
ExperimentResult run_experiment(const LabeledDataset& dataset,
                                const ExperimentConfig& cfg);

// Same protocol with the bi-LM taken from another home: target sequences are
// re-encoded into the source index space and only the classifier trains.
ExperimentResult transfer_experiment(const BiLmModel& source_bilm,
                                     const LabeledDataset& target,
                                     const ExperimentConfig& cfg);

}  // namespace har

#endif  // HAR_EVAL_HPP

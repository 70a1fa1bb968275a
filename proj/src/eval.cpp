#include "har/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "har/bilm.hpp"
#include "har/rng.hpp"

namespace har {

namespace {

// Content key so fold assignment does not depend on input order.
bool content_less(const EncodedSequence& a, const EncodedSequence& b) {
  if (a.label_id != b.label_id) return a.label_id < b.label_id;
  if (a.original_length != b.original_length)
    return a.original_length < b.original_length;
  return a.indexes < b.indexes;
}

std::vector<std::vector<std::size_t>> ids_by_class(
    const std::vector<EncodedSequence>& sequences,
    const std::vector<std::size_t>& ids, std::size_t class_count) {
  std::vector<std::vector<std::size_t>> by_class(class_count);
  for (std::size_t id : ids) {
    const int label = sequences[id].label_id;
    if (label < 0 || label >= static_cast<int>(class_count))
      throw std::out_of_range("sequence label outside class set");
    by_class[static_cast<std::size_t>(label)].push_back(id);
  }
  for (auto& group : by_class)
    std::sort(group.begin(), group.end(),
              [&sequences](std::size_t x, std::size_t y) {
                if (content_less(sequences[x], sequences[y])) return true;
                if (content_less(sequences[y], sequences[x])) return false;
                return x < y;
              });
  return by_class;
}

}  // namespace

FoldSplit stratified_kfold(const std::vector<EncodedSequence>& sequences,
                           const std::vector<std::string>& class_names,
                           std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: K must be >= 2");
  if (sequences.size() < k)
    throw std::invalid_argument("stratified_kfold: fewer sequences than folds");

  std::vector<std::size_t> all(sequences.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto by_class = ids_by_class(sequences, all, class_names.size());

  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& group = by_class[c];
    if (group.empty()) continue;
    if (group.size() < k)
      split.warnings.push_back("class '" + class_names[c] + "' has only " +
                               std::to_string(group.size()) +
                               " sequences for " + std::to_string(k) +
                               " folds");
    Rng rng(seed ^ fnv1a(class_names[c]));
    rng.shuffle(group);
    auto& counts = split.per_class_counts[class_names[c]];
    counts.assign(k, 0);
    for (std::size_t i = 0; i < group.size(); ++i) {
      split.folds[i % k].push_back(group[i]);
      ++counts[i % k];
    }
  }
  for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
  return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<EncodedSequence>& sequences,
                 const std::vector<std::size_t>& ids, double holdout_fraction,
                 std::uint64_t seed) {
  std::size_t class_count = 0;
  for (std::size_t id : ids)
    class_count = std::max(class_count,
                           static_cast<std::size_t>(sequences[id].label_id) + 1);
  auto by_class = ids_by_class(sequences, ids, class_count);

  std::vector<std::size_t> train, holdout;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& group = by_class[c];
    if (group.empty()) continue;
    Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (c + 1)));
    rng.shuffle(group);
    const std::size_t take = static_cast<std::size_t>(
        std::floor(static_cast<double>(group.size()) * holdout_fraction));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < take ? holdout : train).push_back(group[i]);
  }
  if (holdout.empty() && train.size() > 1) {
    holdout.push_back(train.back());
    train.pop_back();
  }
  std::sort(train.begin(), train.end());
  std::sort(holdout.begin(), holdout.end());
  return {train, holdout};
}

EvalReport compute_metrics(const std::vector<std::size_t>& predictions,
                           const std::vector<std::size_t>& truths,
                           const std::vector<std::string>& class_names) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("compute_metrics: length mismatch");
  const std::size_t c_count = class_names.size();

  EvalReport r;
  r.class_names = class_names;
  r.confusion.assign(c_count, std::vector<double>(c_count, 0.0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truths[i] >= c_count || predictions[i] >= c_count)
      throw std::out_of_range("compute_metrics: label outside class set");
    r.confusion[truths[i]][predictions[i]] += 1.0;
  }

  const double total = static_cast<double>(predictions.size());
  double trace = 0;
  std::vector<double> support(c_count, 0), predicted(c_count, 0);
  for (std::size_t t = 0; t < c_count; ++t) {
    for (std::size_t p = 0; p < c_count; ++p) {
      support[t] += r.confusion[t][p];
      predicted[p] += r.confusion[t][p];
    }
    trace += r.confusion[t][t];
  }
  r.micro_accuracy = total > 0 ? trace / total : 0.0;

  for (std::size_t c = 0; c < c_count; ++c) {
    const double tp = r.confusion[c][c];
    double precision = 0, recall = 0, f1 = 0;
    if (predicted[c] > 0) {
      precision = tp / predicted[c];
    } else {
      r.zero_division_flags.push_back("precision undefined for class '" +
                                      class_names[c] + "' (never predicted)");
    }
    if (support[c] > 0) {
      recall = tp / support[c];
    } else {
      r.zero_division_flags.push_back("recall undefined for class '" +
                                      class_names[c] + "' (no support)");
    }
    if (precision + recall > 0)
      f1 = 2 * precision * recall / (precision + recall);

    const double weight = total > 0 ? support[c] / total : 0.0;
    r.weighted_precision += weight * precision;
    r.weighted_recall += weight * recall;
    r.weighted_f1 += weight * f1;
    r.macro_precision += precision / static_cast<double>(c_count);
    r.macro_recall += recall / static_cast<double>(c_count);
    r.macro_f1 += f1 / static_cast<double>(c_count);
  }
  r.balanced_accuracy = r.macro_recall;
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["class_names"] = class_names;
  j["confusion"] = confusion;
  j["micro_accuracy"] = micro_accuracy;
  j["weighted_precision"] = weighted_precision;
  j["weighted_recall"] = weighted_recall;
  j["weighted_f1"] = weighted_f1;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["balanced_accuracy"] = balanced_accuracy;
  j["zero_division_flags"] = zero_division_flags;
  j["averaging_modes"] = {
      {"micro_accuracy", "micro"},
      {"weighted_precision", "support-weighted"},
      {"weighted_recall", "support-weighted"},
      {"weighted_f1", "support-weighted"},
      {"macro_precision", "macro"},
      {"macro_recall", "macro"},
      {"macro_f1", "macro"},
      {"balanced_accuracy", "macro recall"},
  };
  j["compat_view"] = compat_view();
  return j;
}

nlohmann::json EvalReport::compat_view() const {
  // Support-weighted metrics under the plain names, macro averages under
  // the "weighted" names, scores x100.
  nlohmann::json j;
  j["Accuracy"] = 100.0 * micro_accuracy;
  j["Precision"] = 100.0 * weighted_precision;
  j["Recall"] = 100.0 * weighted_recall;
  j["F1-score"] = 100.0 * weighted_f1;
  j["Balance Accuracy"] = 100.0 * balanced_accuracy;
  j["Weighted Precision"] = 100.0 * macro_precision;
  j["Weighted Recall"] = 100.0 * macro_recall;
  j["Weighted F1 score"] = 100.0 * macro_f1;
  return j;
}

std::string EvalReport::metrics_csv_header() {
  return "run,micro_accuracy,weighted_precision,weighted_recall,weighted_f1,"
         "macro_precision,macro_recall,macro_f1,balanced_accuracy";
}

std::string EvalReport::metrics_csv_row(const std::string& run_label) const {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                run_label.c_str(), micro_accuracy, weighted_precision,
                weighted_recall, weighted_f1, macro_precision, macro_recall,
                macro_f1, balanced_accuracy);
  return buf;
}

void EvalReport::write_confusion_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "true\\predicted";
  for (const std::string& name : class_names) out << "," << name;
  out << "\n";
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    out << class_names[t];
    for (double x : confusion[t]) out << "," << x;
    out << "\n";
  }
}

namespace {

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no fold reports");
  EvalReport avg;
  avg.class_names = reports.front().class_names;
  const std::size_t c_count = avg.class_names.size();
  avg.confusion.assign(c_count, std::vector<double>(c_count, 0.0));
  const double n = static_cast<double>(reports.size());
  for (const EvalReport& r : reports) {
    for (std::size_t t = 0; t < c_count; ++t)
      for (std::size_t p = 0; p < c_count; ++p)
        avg.confusion[t][p] += r.confusion[t][p];  // pooled counts
    avg.micro_accuracy += r.micro_accuracy / n;
    avg.weighted_precision += r.weighted_precision / n;
    avg.weighted_recall += r.weighted_recall / n;
    avg.weighted_f1 += r.weighted_f1 / n;
    avg.macro_precision += r.macro_precision / n;
    avg.macro_recall += r.macro_recall / n;
    avg.macro_f1 += r.macro_f1 / n;
    avg.balanced_accuracy += r.balanced_accuracy / n;
    for (const std::string& f : r.zero_division_flags)
      avg.zero_division_flags.push_back(f);
  }
  return avg;
}

std::vector<EncodedSequence> gather(const std::vector<EncodedSequence>& all,
                                    const std::vector<std::size_t>& ids) {
  std::vector<EncodedSequence> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(all[id]);
  return out;
}

struct FoldJob {
  std::vector<std::size_t> train_ids, val_ids, test_ids;
  std::uint64_t seed = 0;
};

ExperimentResult run_folds(const std::vector<EncodedSequence>& sequences,
                           const std::vector<std::string>& class_names,
                           const ExperimentConfig& cfg,
                           std::shared_ptr<const EmbeddingMatrix> w2v,
                           std::shared_ptr<const BiLmModel> bilm) {
  ExperimentResult result;
  result.split = stratified_kfold(sequences, class_names, cfg.k, cfg.seed);

  Rng seeder(cfg.seed ^ 0x5eedf01dull);
  std::vector<FoldJob> jobs(cfg.k);
  for (std::size_t f = 0; f < cfg.k; ++f) {
    FoldJob& job = jobs[f];
    job.seed = seeder.next_u64();
    job.test_ids = result.split.folds[f];
    std::vector<std::size_t> pool;
    for (std::size_t g = 0; g < cfg.k; ++g)
      if (g != f)
        pool.insert(pool.end(), result.split.folds[g].begin(),
                    result.split.folds[g].end());
    auto [train_ids, val_ids] = stratified_split(
        sequences, pool, cfg.inner_validation_fraction, job.seed);
    job.train_ids = std::move(train_ids);
    job.val_ids = std::move(val_ids);
  }

  ClassifierConfig base = cfg.classifier;
  base.encoder = cfg.embedding.kind;
  base.elmo_mode = cfg.embedding.elmo_mode;
  if (base.class_count == 0) base.class_count = class_names.size();

  result.per_fold.resize(cfg.k);
  result.fold_logs.resize(cfg.k);

  auto run_one = [&](std::size_t f) {
    const FoldJob& job = jobs[f];
    ClassifierConfig cc = base;
    cc.seed = job.seed;
    ClassifierTrainResult trained =
        train_classifier(gather(sequences, job.train_ids),
                         gather(sequences, job.val_ids), cc, w2v, bilm);
    std::vector<std::size_t> predictions, truths;
    predictions.reserve(job.test_ids.size());
    truths.reserve(job.test_ids.size());
    for (std::size_t id : job.test_ids) {
      predictions.push_back(trained.model.predict(sequences[id]));
      truths.push_back(static_cast<std::size_t>(sequences[id].label_id));
    }
    result.per_fold[f] = compute_metrics(predictions, truths, class_names);
    result.fold_logs[f] = std::move(trained.log);
  };

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t f = 0; f < cfg.k; ++f) run_one(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(workers, cfg.k);
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i)
      pool.emplace_back([&] {
        for (std::size_t f = next.fetch_add(1); f < cfg.k;
             f = next.fetch_add(1))
          run_one(f);
      });
    for (std::thread& t : pool) t.join();
  }

  result.averaged = average_reports(result.per_fold);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const LabeledDataset& dataset,
                                const ExperimentConfig& cfg) {
  std::shared_ptr<const EmbeddingMatrix> w2v;
  std::shared_ptr<const BiLmModel> bilm;
  std::vector<double> curve;

  // Unsupervised pretraining sees the whole corpus, matching the protocol of
  // training the embeddings once per dataset before classification.
  if (cfg.embedding.kind == EncoderKind::kWord2VecFrozen) {
    SkipGramConfig wc = cfg.embedding.w2v;
    SkipGramResult trained =
        train_skipgram(dataset.index_corpus, dataset.vocab, wc);
    w2v = std::make_shared<EmbeddingMatrix>(std::move(trained.embedding));
  } else if (cfg.embedding.kind == EncoderKind::kElmoFrozen) {
    BiLmConfig bc = cfg.embedding.bilm;
    BiLmTrainResult trained =
        train_bilm(dataset.index_corpus, dataset.vocab, bc);
    curve = trained.validation_perplexity;
    bilm = std::make_shared<BiLmModel>(std::move(trained.model));
  }

  ExperimentResult result =
      run_folds(dataset.sequences, dataset.class_names, cfg, w2v, bilm);
  result.bilm_perplexity_curve = std::move(curve);
  return result;
}

ExperimentResult transfer_experiment(const BiLmModel& source_bilm,
                                     const LabeledDataset& target,
                                     const ExperimentConfig& cfg) {
  if (!source_bilm.frozen())
    throw std::invalid_argument("transfer_experiment: source must be frozen");
  if (cfg.embedding.kind != EncoderKind::kElmoFrozen)
    throw std::invalid_argument(
        "transfer_experiment: embedding kind must be elmo_frozen");

  const std::vector<EncodedSequence> remapped =
      remap_to_vocabulary(target.sequences, source_bilm.vocab());
  auto bilm = std::make_shared<const BiLmModel>(source_bilm);
  return run_folds(remapped, target.class_names, cfg, nullptr, bilm);
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json j;
  j["averaged"] = averaged.to_json();
  nlohmann::json folds = nlohmann::json::array();
  for (const EvalReport& r : per_fold) folds.push_back(r.to_json());
  j["per_fold"] = folds;
  j["fold_sizes"] = nlohmann::json::array();
  for (const auto& fold : split.folds) j["fold_sizes"].push_back(fold.size());
  j["per_class_fold_counts"] = split.per_class_counts;
  j["split_warnings"] = split.warnings;
  if (!bilm_perplexity_curve.empty())
    j["bilm_validation_perplexity"] = bilm_perplexity_curve;
  nlohmann::json logs = nlohmann::json::array();
  for (const auto& log : fold_logs) {
    nlohmann::json fold_log = nlohmann::json::array();
    for (const TrainLogEntry& e : log)
      fold_log.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_loss", e.val_loss},
                          {"val_accuracy", e.val_accuracy}});
    logs.push_back(fold_log);
  }
  j["fold_training_logs"] = logs;
  return j;
}

}  // namespace har

#include "har/bilm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "har/checkpoint.hpp"
#include "json.hpp"

namespace har {

using nn::Mask;
using nn::Real;
using nn::Tensor;

ElmoOutputMode elmo_mode_from_string(const std::string& name) {
  if (name == "weighted_sum") return ElmoOutputMode::kWeightedSum;
  if (name == "sum") return ElmoOutputMode::kSum;
  if (name == "last") return ElmoOutputMode::kLast;
  if (name == "concat") return ElmoOutputMode::kConcat;
  throw std::invalid_argument("unknown elmo output mode: " + name);
}

std::string to_string(ElmoOutputMode mode) {
  switch (mode) {
    case ElmoOutputMode::kWeightedSum: return "weighted_sum";
    case ElmoOutputMode::kSum: return "sum";
    case ElmoOutputMode::kLast: return "last";
    case ElmoOutputMode::kConcat: return "concat";
  }
  throw std::logic_error("bad elmo mode");
}

BiLmModel::BiLmModel(const Vocabulary& vocab, const BiLmConfig& cfg, Rng& rng)
    : embedding("bilm.embedding", {vocab.size(), cfg.embedding_size}),
      fwd1("bilm.fwd1", cfg.embedding_size, cfg.hidden_size),
      fwd2("bilm.fwd2", cfg.hidden_size, cfg.hidden_size),
      bwd1("bilm.bwd1", cfg.embedding_size, cfg.hidden_size),
      bwd2("bilm.bwd2", cfg.hidden_size, cfg.hidden_size),
      proj_fwd("bilm.proj_fwd", cfg.hidden_size, vocab.size()),
      proj_bwd("bilm.proj_bwd", cfg.hidden_size, vocab.size()),
      cfg_(cfg),
      vocab_(vocab) {
  if (cfg.window < 2)
    throw std::invalid_argument("BiLmConfig: window must be >= 2");
  if (cfg.embedding_size != cfg.hidden_size)
    throw std::invalid_argument(
        "BiLmConfig: embedding size must equal hidden size so the token "
        "layer can pair with the recurrent layers");
  nn::init_normal(embedding, 0.05, rng);
  for (std::size_t c = 0; c < cfg.embedding_size; ++c)
    embedding.value.at(Vocabulary::kPadIndex, c) = 0;
  fwd1.init(rng);
  fwd2.init(rng);
  bwd1.init(rng);
  bwd2.init(rng);
  // Projections stay zero: an untrained model predicts the uniform
  // distribution, so its perplexity equals the vocabulary size.
}

std::vector<nn::Parameter*> BiLmModel::trainable_parameters() {
  if (frozen_)
    throw std::logic_error("BiLmModel is frozen; parameters are read-only");
  std::vector<nn::Parameter*> params{&embedding};
  for (nn::LstmCellParams* cell : {&fwd1, &fwd2, &bwd1, &bwd2})
    for (nn::Parameter* p : cell->parameters()) params.push_back(p);
  for (nn::Parameter* p : proj_fwd.parameters()) params.push_back(p);
  for (nn::Parameter* p : proj_bwd.parameters()) params.push_back(p);
  return params;
}

std::vector<std::pair<std::string, const Tensor*>> BiLmModel::named_tensors()
    const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  auto add = [&out](const nn::Parameter& p) {
    out.push_back({p.name, &p.value});
  };
  add(embedding);
  for (const nn::LstmCellParams* cell : {&fwd1, &fwd2, &bwd1, &bwd2}) {
    add(cell->w_ih);
    add(cell->w_hh);
    add(cell->bias);
  }
  add(proj_fwd.w);
  add(proj_fwd.b);
  add(proj_bwd.w);
  add(proj_bwd.b);
  return out;
}

namespace {

Tensor embed_lookup(const std::vector<int>& indexes, const Mask& mask,
                    const nn::Parameter& embedding) {
  const std::size_t t_len = indexes.size();
  const std::size_t dim = embedding.value.cols();
  Tensor xs = Tensor::zeros(t_len, dim);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    const int idx = indexes[t];
    if (idx < 0 || idx >= static_cast<int>(embedding.value.rows()))
      throw std::out_of_range("bilm: token index outside vocabulary");
    const Real* row = embedding.value.row(static_cast<std::size_t>(idx));
    std::copy(row, row + dim, xs.row(t));
  }
  return xs;
}

struct StackCaches {
  nn::LstmCache l1_fwd, l2_fwd, l1_bwd, l2_bwd;
  Tensor xs;                    // embedded input
  Tensor r1_fwd, r1_bwd;        // layer-1 outputs
  Tensor out2_fwd, out2_bwd;    // layer-2 LSTM outputs (pre-residual)
};

BiLmReps run_stacks(const std::vector<int>& indexes, const Mask& mask,
                    const BiLmModel& m, StackCaches* caches) {
  if (indexes.size() != mask.size())
    throw std::invalid_argument("bilm: mask length mismatch");
  StackCaches local;
  StackCaches& c = caches ? *caches : local;
  c.xs = embed_lookup(indexes, mask, m.embedding);

  c.r1_fwd = nn::lstm_sequence_forward(c.xs, mask, m.fwd1, false,
                                       caches ? &c.l1_fwd : nullptr);
  c.out2_fwd = nn::lstm_sequence_forward(c.r1_fwd, mask, m.fwd2, false,
                                         caches ? &c.l2_fwd : nullptr);
  c.r1_bwd = nn::lstm_sequence_forward(c.xs, mask, m.bwd1, true,
                                       caches ? &c.l1_bwd : nullptr);
  c.out2_bwd = nn::lstm_sequence_forward(c.r1_bwd, mask, m.bwd2, true,
                                         caches ? &c.l2_bwd : nullptr);

  BiLmReps reps;
  reps.r0 = c.xs;
  reps.r1_fwd = c.r1_fwd;
  reps.r1_bwd = c.r1_bwd;
  reps.r2_fwd = c.out2_fwd;
  reps.r2_fwd.add(c.r1_fwd);  // residual connection
  reps.r2_bwd = c.out2_bwd;
  reps.r2_bwd.add(c.r1_bwd);
  return reps;
}

}  // namespace

BiLmReps BiLmModel::forward(const std::vector<int>& indexes,
                            const Mask& mask) const {
  return run_stacks(indexes, mask, *this, nullptr);
}

BiLmLossStats BiLmModel::loss(const std::vector<int>& indexes,
                              const Mask& mask) const {
  BiLmReps reps = run_stacks(indexes, mask, *this, nullptr);
  const std::size_t t_len = indexes.size();
  const std::size_t v_size = vocab_.size();
  BiLmLossStats stats;
  Tensor logits = Tensor::zeros(v_size);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    if (t + 1 < t_len && mask[t + 1]) {  // forward: predict the next token
      nn::dense_forward(reps.r2_fwd.row(t), proj_fwd, logits.v.data());
      stats.nll_fwd +=
          nn::softmax_cross_entropy(logits,
                                    static_cast<std::size_t>(indexes[t + 1]))
              .first;
      ++stats.count_fwd;
    }
    if (t > 0 && mask[t - 1]) {  // backward: predict the previous token
      nn::dense_forward(reps.r2_bwd.row(t), proj_bwd, logits.v.data());
      stats.nll_bwd +=
          nn::softmax_cross_entropy(logits,
                                    static_cast<std::size_t>(indexes[t - 1]))
              .first;
      ++stats.count_bwd;
    }
  }
  return stats;
}

BiLmLossStats BiLmModel::loss_backward(const std::vector<int>& indexes,
                                       const Mask& mask, double grad_scale) {
  if (frozen_)
    throw std::logic_error("BiLmModel is frozen; parameters are read-only");
  StackCaches caches;
  BiLmReps reps = run_stacks(indexes, mask, *this, &caches);
  const std::size_t t_len = indexes.size();
  const std::size_t hs = cfg_.hidden_size;
  const std::size_t v_size = vocab_.size();

  BiLmLossStats stats;
  Tensor d_r2_fwd = Tensor::zeros(t_len, hs);
  Tensor d_r2_bwd = Tensor::zeros(t_len, hs);
  Tensor logits = Tensor::zeros(v_size);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    if (t + 1 < t_len && mask[t + 1]) {
      nn::dense_forward(reps.r2_fwd.row(t), proj_fwd, logits.v.data());
      auto [nll, d_logits] = nn::softmax_cross_entropy(
          logits, static_cast<std::size_t>(indexes[t + 1]));
      stats.nll_fwd += nll;
      ++stats.count_fwd;
      for (Real& g : d_logits.v) g *= grad_scale;
      nn::dense_backward(reps.r2_fwd.row(t), d_logits.v.data(), proj_fwd,
                         d_r2_fwd.row(t));
    }
    if (t > 0 && mask[t - 1]) {
      nn::dense_forward(reps.r2_bwd.row(t), proj_bwd, logits.v.data());
      auto [nll, d_logits] = nn::softmax_cross_entropy(
          logits, static_cast<std::size_t>(indexes[t - 1]));
      stats.nll_bwd += nll;
      ++stats.count_bwd;
      for (Real& g : d_logits.v) g *= grad_scale;
      nn::dense_backward(reps.r2_bwd.row(t), d_logits.v.data(), proj_bwd,
                         d_r2_bwd.row(t));
    }
  }

  // Residual: the layer-2 gradient reaches both the layer-2 LSTM output and
  // the layer-1 output directly.
  Tensor d_r1_fwd = d_r2_fwd;
  nn::lstm_sequence_backward(d_r2_fwd, caches.r1_fwd, mask, fwd2, false,
                             caches.l2_fwd, &d_r1_fwd);
  Tensor d_xs = Tensor::zeros(t_len, cfg_.embedding_size);
  nn::lstm_sequence_backward(d_r1_fwd, caches.xs, mask, fwd1, false,
                             caches.l1_fwd, &d_xs);

  Tensor d_r1_bwd = d_r2_bwd;
  nn::lstm_sequence_backward(d_r2_bwd, caches.r1_bwd, mask, bwd2, true,
                             caches.l2_bwd, &d_r1_bwd);
  nn::lstm_sequence_backward(d_r1_bwd, caches.xs, mask, bwd1, true,
                             caches.l1_bwd, &d_xs);

  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    Real* grow = embedding.grad.row(static_cast<std::size_t>(indexes[t]));
    const Real* src = d_xs.row(t);
    for (std::size_t ccol = 0; ccol < cfg_.embedding_size; ++ccol)
      grow[ccol] += src[ccol];
  }
  return stats;
}

std::size_t elmo_width(ElmoOutputMode mode, std::size_t hidden_size) {
  return mode == ElmoOutputMode::kConcat ? 6 * hidden_size : 2 * hidden_size;
}

Tensor elmo_embed(const std::vector<int>& indexes, const Mask& mask,
                  const BiLmModel& model, ElmoOutputMode mode) {
  const BiLmReps reps = model.forward(indexes, mask);
  const std::size_t t_len = indexes.size();
  const std::size_t hs = model.hidden_size();
  Tensor out = Tensor::zeros(t_len, elmo_width(mode, hs));

  std::array<double, 3> weights{};
  if (mode == ElmoOutputMode::kWeightedSum) {
    Tensor logits = Tensor::zeros(3);
    for (std::size_t i = 0; i < 3; ++i) logits[i] = model.mix_logits[i];
    nn::softmax_inplace(logits.v.data(), 3);
    for (std::size_t i = 0; i < 3; ++i)
      weights[i] = model.gamma * logits[i];
  }

  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    const Real* r0 = reps.r0.row(t);
    const Real* r1f = reps.r1_fwd.row(t);
    const Real* r1b = reps.r1_bwd.row(t);
    const Real* r2f = reps.r2_fwd.row(t);
    const Real* r2b = reps.r2_bwd.row(t);
    Real* dst = out.row(t);
    switch (mode) {
      case ElmoOutputMode::kConcat:
        for (std::size_t j = 0; j < hs; ++j) {
          dst[j] = r0[j];
          dst[hs + j] = r0[j];
          dst[2 * hs + j] = r1f[j];
          dst[3 * hs + j] = r1b[j];
          dst[4 * hs + j] = r2f[j];
          dst[5 * hs + j] = r2b[j];
        }
        break;
      case ElmoOutputMode::kSum:
        for (std::size_t j = 0; j < hs; ++j) {
          dst[j] = r0[j] + r1f[j] + r2f[j];
          dst[hs + j] = r0[j] + r1b[j] + r2b[j];
        }
        break;
      case ElmoOutputMode::kLast:
        for (std::size_t j = 0; j < hs; ++j) {
          dst[j] = r2f[j];
          dst[hs + j] = r2b[j];
        }
        break;
      case ElmoOutputMode::kWeightedSum:
        for (std::size_t j = 0; j < hs; ++j) {
          dst[j] = weights[0] * r0[j] + weights[1] * r1f[j] +
                   weights[2] * r2f[j];
          dst[hs + j] = weights[0] * r0[j] + weights[1] * r1b[j] +
                        weights[2] * r2b[j];
        }
        break;
    }
  }
  return out;
}

std::vector<std::vector<int>> chunk_sequence(const std::vector<int>& seq,
                                             std::size_t window) {
  std::vector<std::vector<int>> chunks;
  for (std::size_t begin = 0; begin < seq.size(); begin += window) {
    const std::size_t end = std::min(seq.size(), begin + window);
    chunks.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(begin),
                        seq.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return chunks;
}

namespace {

BiLmLossStats corpus_stats(const std::vector<std::vector<int>>& chunks,
                           const BiLmModel& model) {
  BiLmLossStats total;
  for (const auto& chunk : chunks) {
    if (chunk.size() < 2) continue;  // nothing predictable
    const Mask mask(chunk.size(), 1);
    const BiLmLossStats s = model.loss(chunk, mask);
    total.nll_fwd += s.nll_fwd;
    total.nll_bwd += s.nll_bwd;
    total.count_fwd += s.count_fwd;
    total.count_bwd += s.count_bwd;
  }
  return total;
}

std::vector<std::vector<int>> chunk_corpus(
    const std::vector<std::vector<int>>& corpus, std::size_t window) {
  std::vector<std::vector<int>> chunks;
  for (const auto& seq : corpus)
    for (auto& chunk : chunk_sequence(seq, window))
      chunks.push_back(std::move(chunk));
  return chunks;
}

}  // namespace

double perplexity(const std::vector<std::vector<int>>& corpus,
                  const BiLmModel& model) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  const BiLmLossStats total =
      corpus_stats(chunk_corpus(corpus, model.config().window), model);
  if (total.count() == 0)
    throw std::invalid_argument("perplexity: no predictable positions");
  return std::exp((total.nll_fwd + total.nll_bwd) /
                  static_cast<double>(total.count()));
}

BiLmTrainResult train_bilm(const std::vector<std::vector<int>>& corpus,
                           const Vocabulary& vocab, const BiLmConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_bilm: empty corpus");
  Rng rng(cfg.seed);
  Rng init_rng = rng.fork(1);
  Rng split_rng = rng.fork(2);
  Rng epoch_rng = rng.fork(3);

  // Sequence-granularity 80/20 split.
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  split_rng.shuffle(order);
  std::size_t val_count = static_cast<std::size_t>(
      std::floor(static_cast<double>(corpus.size()) * cfg.validation_fraction));
  if (val_count == 0 && corpus.size() > 1) val_count = 1;
  std::vector<std::vector<int>> train_seqs, val_seqs;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < val_count ? val_seqs : train_seqs).push_back(corpus[order[i]]);
  if (train_seqs.empty()) train_seqs = val_seqs;

  std::vector<std::vector<int>> train_chunks =
      chunk_corpus(train_seqs, cfg.window);
  std::vector<std::vector<int>> val_chunks = chunk_corpus(val_seqs, cfg.window);
  std::erase_if(train_chunks,
                [](const std::vector<int>& c) { return c.size() < 2; });

  BiLmModel model(vocab, cfg, init_rng);
  nn::Adam optimizer({cfg.learning_rate});

  const BiLmLossStats initial = corpus_stats(val_chunks, model);
  if (initial.count() == 0)
    throw std::invalid_argument(
        "train_bilm: validation corpus has no predictable positions");

  std::vector<double> curve;
  curve.push_back(std::exp((initial.nll_fwd + initial.nll_bwd) /
                           static_cast<double>(initial.count())));

  BiLmModel best = model;
  double best_ppl = curve[0];
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    epoch_rng.shuffle(train_chunks);
    std::size_t pos = 0;
    while (pos < train_chunks.size()) {
      const std::size_t batch_end =
          std::min(train_chunks.size(), pos + cfg.batch_size);
      std::size_t predictions = 0;
      for (std::size_t i = pos; i < batch_end; ++i)
        predictions += 2 * (train_chunks[i].size() - 1);
      if (predictions == 0) {
        pos = batch_end;
        continue;
      }
      const double scale = 1.0 / static_cast<double>(predictions);
      for (std::size_t i = pos; i < batch_end; ++i) {
        const Mask mask(train_chunks[i].size(), 1);
        model.loss_backward(train_chunks[i], mask, scale);
      }
      optimizer.step(model.trainable_parameters());
      // PAD embedding never trains; clear any numerical drift outright.
      for (std::size_t c = 0; c < cfg.embedding_size; ++c)
        model.embedding.value.at(Vocabulary::kPadIndex, c) = 0;
      pos = batch_end;
    }

    const BiLmLossStats vs = corpus_stats(val_chunks, model);
    const double ppl = std::exp((vs.nll_fwd + vs.nll_bwd) /
                                static_cast<double>(vs.count()));
    curve.push_back(ppl);
    if (ppl < best_ppl) {
      best_ppl = ppl;
      best_epoch = epoch;
      best = model;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  best.freeze();
  BiLmTrainResult result{std::move(best), std::move(curve), best_epoch};
  return result;
}

void save_bilm(const BiLmModel& model,
               const std::vector<double>& validation_perplexity,
               const std::string& path) {
  const BiLmConfig& cfg = model.config();
  nlohmann::json meta;
  meta["kind"] = "bilm";
  meta["vocab"] = nlohmann::json::parse(model.vocab().to_json());
  meta["vocab_hash"] = model.vocab().hash();
  meta["frozen"] = model.frozen();
  meta["mix_logits"] = model.mix_logits;
  meta["gamma"] = model.gamma;
  meta["config"] = {{"embedding_size", cfg.embedding_size},
                    {"hidden_size", cfg.hidden_size},
                    {"window", cfg.window},
                    {"max_epochs", cfg.max_epochs},
                    {"batch_size", cfg.batch_size},
                    {"patience", cfg.patience},
                    {"learning_rate", cfg.learning_rate},
                    {"validation_fraction", cfg.validation_fraction},
                    {"seed", cfg.seed}};
  save_checkpoint(path, model.named_tensors(), meta);

  // Sidecar: vocabulary hash + config + pointer to the perplexity curve.
  nlohmann::json sidecar;
  sidecar["vocab_hash"] = meta["vocab_hash"];
  sidecar["config"] = meta["config"];
  sidecar["curve_csv"] = path + ".curve.csv";
  std::ofstream side(path + ".meta.json");
  side << sidecar.dump(2) << "\n";

  std::ofstream curve(path + ".curve.csv");
  curve << "epoch,validation_perplexity\n";
  char buf[40];
  for (std::size_t i = 0; i < validation_perplexity.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", validation_perplexity[i]);
    curve << i << "," << buf << "\n";
  }
}

BiLmModel load_bilm(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "bilm")
    throw std::runtime_error("not a bilm checkpoint: " + path);
  const nlohmann::json& jc = ck.meta.at("config");
  BiLmConfig cfg;
  cfg.embedding_size = jc.at("embedding_size").get<std::size_t>();
  cfg.hidden_size = jc.at("hidden_size").get<std::size_t>();
  cfg.window = jc.at("window").get<std::size_t>();
  cfg.max_epochs = jc.at("max_epochs").get<std::size_t>();
  cfg.batch_size = jc.at("batch_size").get<std::size_t>();
  cfg.patience = jc.at("patience").get<std::size_t>();
  cfg.learning_rate = jc.at("learning_rate").get<double>();
  cfg.validation_fraction = jc.at("validation_fraction").get<double>();
  cfg.seed = jc.at("seed").get<std::uint64_t>();

  Vocabulary vocab = Vocabulary::from_json(ck.meta.at("vocab").dump());
  Rng rng(cfg.seed);
  BiLmModel model(vocab, cfg, rng);
  auto assign = [&ck](nn::Parameter& p) { p.value = ck.require(p.name); };
  assign(model.embedding);
  for (nn::LstmCellParams* cell :
       {&model.fwd1, &model.fwd2, &model.bwd1, &model.bwd2}) {
    assign(cell->w_ih);
    assign(cell->w_hh);
    assign(cell->bias);
  }
  assign(model.proj_fwd.w);
  assign(model.proj_fwd.b);
  assign(model.proj_bwd.w);
  assign(model.proj_bwd.b);
  model.mix_logits = ck.meta.at("mix_logits").get<std::array<double, 3>>();
  model.gamma = ck.meta.at("gamma").get<double>();
  if (ck.meta.value("frozen", false)) model.freeze();
  return model;
}

}  // namespace har

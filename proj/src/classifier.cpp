#include "har/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace har {

using nn::Mask;
using nn::Real;
using nn::Tensor;

EncoderKind encoder_from_string(const std::string& name) {
  if (name == "none") return EncoderKind::kNone;
  if (name == "trainable_embedding") return EncoderKind::kTrainableEmbedding;
  if (name == "word2vec_frozen") return EncoderKind::kWord2VecFrozen;
  if (name == "elmo_frozen") return EncoderKind::kElmoFrozen;
  throw std::invalid_argument("unknown encoder: " + name);
}

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kNone: return "none";
    case EncoderKind::kTrainableEmbedding: return "trainable_embedding";
    case EncoderKind::kWord2VecFrozen: return "word2vec_frozen";
    case EncoderKind::kElmoFrozen: return "elmo_frozen";
  }
  throw std::logic_error("bad encoder kind");
}

namespace {

std::size_t layer2_input_width(const ClassifierConfig& cfg) {
  return cfg.directionality == Directionality::kBi ? 2 * cfg.units : cfg.units;
}

}  // namespace

ClassifierModel::ClassifierModel(const ClassifierConfig& cfg,
                                 std::size_t vocab_size,
                                 std::shared_ptr<const EmbeddingMatrix> w2v,
                                 std::shared_ptr<const BiLmModel> bilm)
    : cfg_(cfg), vocab_size_(vocab_size), w2v_(std::move(w2v)),
      bilm_(std::move(bilm)) {
  if (cfg.class_count < 2)
    throw std::invalid_argument("ClassifierConfig: class_count must be >= 2");
  if (cfg.units < 1)
    throw std::invalid_argument("ClassifierConfig: units must be >= 1");
  if (cfg.recurrent_layers < 1 || cfg.recurrent_layers > 2)
    throw std::invalid_argument("ClassifierConfig: 1 or 2 recurrent layers");

  switch (cfg.encoder) {
    case EncoderKind::kNone:
      input_width_ = vocab_size_;
      break;
    case EncoderKind::kTrainableEmbedding:
      input_width_ = cfg.embedding_size;
      embedding = nn::Parameter("classifier.embedding",
                                {vocab_size_, cfg.embedding_size});
      break;
    case EncoderKind::kWord2VecFrozen:
      if (!w2v_)
        throw std::invalid_argument("word2vec encoder requires an embedding");
      if (w2v_->matrix.rows() != vocab_size_)
        throw std::invalid_argument(
            "word2vec embedding does not match the vocabulary");
      input_width_ = w2v_->embedding_size();
      break;
    case EncoderKind::kElmoFrozen:
      if (!bilm_)
        throw std::invalid_argument("elmo encoder requires a bilm model");
      if (!bilm_->frozen())
        throw std::invalid_argument("elmo encoder requires a frozen bilm");
      if (bilm_->vocab().size() != vocab_size_)
        throw std::invalid_argument("bilm does not match the vocabulary");
      input_width_ = elmo_width(cfg.elmo_mode, bilm_->hidden_size());
      if (cfg.elmo_mode == ElmoOutputMode::kWeightedSum) {
        mix_logits = nn::Parameter("classifier.mix_logits", {3});
        for (std::size_t i = 0; i < 3; ++i)
          mix_logits.value[i] = bilm_->mix_logits[i];
        mix_gamma = nn::Parameter("classifier.mix_gamma", {1});
        mix_gamma.value[0] = bilm_->gamma;
      }
      break;
  }

  l1_fwd = nn::LstmCellParams("classifier.l1_fwd", input_width_, cfg.units);
  if (cfg.directionality == Directionality::kBi)
    l1_bwd = nn::LstmCellParams("classifier.l1_bwd", input_width_, cfg.units);
  if (cfg.recurrent_layers == 2) {
    const std::size_t w = layer2_input_width(cfg);
    l2_fwd = nn::LstmCellParams("classifier.l2_fwd", w, cfg.units);
    if (cfg.directionality == Directionality::kBi)
      l2_bwd = nn::LstmCellParams("classifier.l2_bwd", w, cfg.units);
  }
  head = nn::DenseParams("classifier.head", final_width(), cfg.class_count);
}

std::size_t ClassifierModel::final_width() const {
  return cfg_.directionality == Directionality::kBi ? 2 * cfg_.units
                                                    : cfg_.units;
}

void ClassifierModel::init(Rng& rng) {
  if (cfg_.encoder == EncoderKind::kTrainableEmbedding) {
    nn::init_normal(embedding, 0.05, rng);
    for (std::size_t c = 0; c < cfg_.embedding_size; ++c)
      embedding.value.at(Vocabulary::kPadIndex, c) = 0;
  }
  l1_fwd.init(rng);
  if (cfg_.directionality == Directionality::kBi) l1_bwd.init(rng);
  if (cfg_.recurrent_layers == 2) {
    l2_fwd.init(rng);
    if (cfg_.directionality == Directionality::kBi) l2_bwd.init(rng);
  }
  // Head stays zero so an untrained model outputs the uniform distribution.
}

std::vector<nn::Parameter*> ClassifierModel::trainable_parameters() {
  std::vector<nn::Parameter*> params;
  if (cfg_.encoder == EncoderKind::kTrainableEmbedding)
    params.push_back(&embedding);
  if (cfg_.encoder == EncoderKind::kElmoFrozen &&
      cfg_.elmo_mode == ElmoOutputMode::kWeightedSum) {
    params.push_back(&mix_logits);
    params.push_back(&mix_gamma);
  }
  for (nn::Parameter* p : l1_fwd.parameters()) params.push_back(p);
  if (cfg_.directionality == Directionality::kBi)
    for (nn::Parameter* p : l1_bwd.parameters()) params.push_back(p);
  if (cfg_.recurrent_layers == 2) {
    for (nn::Parameter* p : l2_fwd.parameters()) params.push_back(p);
    if (cfg_.directionality == Directionality::kBi)
      for (nn::Parameter* p : l2_bwd.parameters()) params.push_back(p);
  }
  for (nn::Parameter* p : head.parameters()) params.push_back(p);
  return params;
}

const Tensor* ClassifierModel::frozen_embedding_view() const {
  if (cfg_.encoder == EncoderKind::kWord2VecFrozen) return &w2v_->matrix;
  if (cfg_.encoder == EncoderKind::kElmoFrozen)
    return &bilm_->embedding.value;
  return nullptr;
}

EncodedInput ClassifierModel::encode_input(const EncodedSequence& seq) const {
  const std::size_t len = seq.original_length;
  const std::size_t first = seq.first_real();
  EncodedInput input;

  if (cfg_.encoder == EncoderKind::kElmoFrozen) {
    std::vector<int> indexes(seq.indexes.begin() +
                                 static_cast<std::ptrdiff_t>(first),
                             seq.indexes.end());
    const Mask mask(len, 1);
    if (cfg_.elmo_mode == ElmoOutputMode::kWeightedSum) {
      input.stack = bilm_->forward(indexes, mask);
      input.features = Tensor();  // combined lazily with the current mix
    } else {
      input.features = elmo_embed(indexes, mask, *bilm_, cfg_.elmo_mode);
    }
    return input;
  }

  input.features = Tensor::zeros(len, input_width_);
  for (std::size_t t = 0; t < len; ++t) {
    const int idx = seq.indexes[first + t];
    switch (cfg_.encoder) {
      case EncoderKind::kNone:
        input.features.at(t, static_cast<std::size_t>(idx)) = Real(1);
        break;
      case EncoderKind::kTrainableEmbedding: {
        const Real* row = embedding.value.row(static_cast<std::size_t>(idx));
        std::copy(row, row + input_width_, input.features.row(t));
        break;
      }
      case EncoderKind::kWord2VecFrozen: {
        const Real* row = w2v_->matrix.row(static_cast<std::size_t>(idx));
        std::copy(row, row + input_width_, input.features.row(t));
        break;
      }
      case EncoderKind::kElmoFrozen:
        break;  // handled above
    }
  }
  return input;
}

struct ClassifierModel::ForwardCache {
  Tensor feats;  // combined input actually fed to the recurrent stack
  nn::LstmCache c1f, c1b, c2f, c2b;
  Tensor ys1, ys2;
  Tensor final_rep;
  Tensor probs;
  std::array<double, 3> mix_weights{};  // softmax(mix) * gamma pieces
};

namespace {

// [r0;r0], [r1f;r1b], [r2f;r2b] as L x 2H blocks of the weighted-sum stack.
Tensor stack_layer(const BiLmReps& reps, std::size_t layer) {
  const std::size_t len = reps.r0.rows();
  const std::size_t hs = reps.r1_fwd.cols();
  Tensor out = Tensor::zeros(len, 2 * hs);
  for (std::size_t t = 0; t < len; ++t) {
    const Real* a = layer == 0   ? reps.r0.row(t)
                    : layer == 1 ? reps.r1_fwd.row(t)
                                 : reps.r2_fwd.row(t);
    const Real* b = layer == 0   ? reps.r0.row(t)
                    : layer == 1 ? reps.r1_bwd.row(t)
                                 : reps.r2_bwd.row(t);
    for (std::size_t j = 0; j < hs; ++j) {
      out.at(t, j) = a[j];
      out.at(t, hs + j) = b[j];
    }
  }
  return out;
}

}  // namespace

Tensor ClassifierModel::forward_features(const EncodedInput& input,
                                         ForwardCache* cache) const {
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  if (input.stack) {
    // Weighted-sum combination with the classifier's current mix weights.
    Tensor s = Tensor::zeros(3);
    for (std::size_t i = 0; i < 3; ++i) s[i] = mix_logits.value[i];
    nn::softmax_inplace(s.v.data(), 3);
    const double gamma = mix_gamma.value[0];
    const std::size_t len = input.stack->r0.rows();
    const std::size_t hs = input.stack->r1_fwd.cols();
    c.feats = Tensor::zeros(len, 2 * hs);
    for (std::size_t i = 0; i < 3; ++i) {
      c.mix_weights[i] = s[i];
      const Tensor layer = stack_layer(*input.stack, i);
      const double w = gamma * s[i];
      for (std::size_t k = 0; k < layer.v.size(); ++k)
        c.feats.v[k] += w * layer.v[k];
    }
  } else {
    c.feats = input.features;
  }

  const std::size_t len = c.feats.rows();
  if (len == 0)
    throw std::invalid_argument("classifier: all-padding sequence");
  const Mask mask(len, 1);
  const bool bi = cfg_.directionality == Directionality::kBi;

  c.ys1 = bi ? nn::bidirectional_forward(c.feats, mask, l1_fwd, l1_bwd,
                                         cache ? &c.c1f : nullptr,
                                         cache ? &c.c1b : nullptr)
             : nn::lstm_sequence_forward(c.feats, mask, l1_fwd, false,
                                         cache ? &c.c1f : nullptr);
  const Tensor* top = &c.ys1;
  if (cfg_.recurrent_layers == 2) {
    c.ys2 = bi ? nn::bidirectional_forward(c.ys1, mask, l2_fwd, l2_bwd,
                                           cache ? &c.c2f : nullptr,
                                           cache ? &c.c2b : nullptr)
               : nn::lstm_sequence_forward(c.ys1, mask, l2_fwd, false,
                                           cache ? &c.c2f : nullptr);
    top = &c.ys2;
  }

  // Last real step forward state; for bi, also the backward state at the
  // first real step (the full-sequence summary of that direction).
  c.final_rep = Tensor::zeros(final_width());
  const std::size_t units = cfg_.units;
  for (std::size_t j = 0; j < units; ++j)
    c.final_rep[j] = top->at(len - 1, j);
  if (bi)
    for (std::size_t j = 0; j < units; ++j)
      c.final_rep[units + j] = top->at(0, units + j);

  Tensor logits = Tensor::zeros(cfg_.class_count);
  nn::dense_forward(c.final_rep.v.data(), head, logits.v.data());
  c.probs = logits;
  nn::softmax_inplace(c.probs.v.data(), cfg_.class_count);
  return logits;
}

void ClassifierModel::backward_features(const EncodedInput& input,
                                        const Tensor& d_logits,
                                        ForwardCache& c, Tensor* d_features) {
  Tensor d_final = Tensor::zeros(final_width());
  dense_backward(c.final_rep.v.data(), d_logits.v.data(), head,
                 d_final.v.data());

  const bool bi = cfg_.directionality == Directionality::kBi;
  const std::size_t units = cfg_.units;
  const std::size_t len = c.feats.rows();
  const Mask mask(len, 1);

  const std::size_t top_width = bi ? 2 * units : units;
  Tensor d_top = Tensor::zeros(len, top_width);
  for (std::size_t j = 0; j < units; ++j)
    d_top.at(len - 1, j) = d_final[j];
  if (bi)
    for (std::size_t j = 0; j < units; ++j)
      d_top.at(0, units + j) = d_final[units + j];

  Tensor d_feats = Tensor::zeros(len, c.feats.cols());
  if (cfg_.recurrent_layers == 2) {
    Tensor d_ys1 = Tensor::zeros(len, c.ys1.cols());
    if (bi)
      nn::bidirectional_backward(d_top, c.ys1, mask, l2_fwd, l2_bwd, c.c2f,
                                 c.c2b, &d_ys1);
    else
      nn::lstm_sequence_backward(d_top, c.ys1, mask, l2_fwd, false, c.c2f,
                                 &d_ys1);
    if (bi)
      nn::bidirectional_backward(d_ys1, c.feats, mask, l1_fwd, l1_bwd, c.c1f,
                                 c.c1b, &d_feats);
    else
      nn::lstm_sequence_backward(d_ys1, c.feats, mask, l1_fwd, false, c.c1f,
                                 &d_feats);
  } else {
    if (bi)
      nn::bidirectional_backward(d_top, c.feats, mask, l1_fwd, l1_bwd, c.c1f,
                                 c.c1b, &d_feats);
    else
      nn::lstm_sequence_backward(d_top, c.feats, mask, l1_fwd, false, c.c1f,
                                 &d_feats);
  }

  if (input.stack) {
    // d/d(mix): feats = gamma * sum_i s_i L_i with s = softmax(logits).
    const double gamma = mix_gamma.value[0];
    std::array<double, 3> d_s{};
    for (std::size_t i = 0; i < 3; ++i) {
      const Tensor layer = stack_layer(*input.stack, i);
      double acc = 0;
      for (std::size_t k = 0; k < layer.v.size(); ++k)
        acc += d_feats.v[k] * layer.v[k];
      d_s[i] = acc;  // d loss / d (s_i * gamma) piece, see below
      mix_gamma.grad[0] += c.mix_weights[i] * acc;
    }
    double dot_sw = 0;
    for (std::size_t i = 0; i < 3; ++i) dot_sw += c.mix_weights[i] * d_s[i];
    for (std::size_t i = 0; i < 3; ++i)
      mix_logits.grad[i] += gamma * c.mix_weights[i] * (d_s[i] - dot_sw);
  }

  if (d_features) *d_features = std::move(d_feats);
}

Tensor ClassifierModel::logits_from_input(const EncodedInput& input) const {
  return forward_features(input, nullptr);
}

double ClassifierModel::loss_backward_input(const EncodedInput& input,
                                            int label_id, double grad_scale) {
  if (label_id < 0 || label_id >= static_cast<int>(cfg_.class_count))
    throw std::out_of_range("classifier: label out of range");
  ForwardCache cache;
  const Tensor logits = forward_features(input, &cache);
  auto [nll, d_logits] =
      nn::softmax_cross_entropy(logits, static_cast<std::size_t>(label_id));
  for (Real& g : d_logits.v) g *= grad_scale;
  backward_features(input, d_logits, cache, nullptr);
  return nll;
}

Tensor ClassifierModel::classify(const EncodedSequence& seq) const {
  const EncodedInput input = encode_input(seq);
  ForwardCache cache;
  forward_features(input, &cache);
  return cache.probs;
}

std::size_t ClassifierModel::predict(const EncodedSequence& seq) const {
  const Tensor probs = classify(seq);
  return static_cast<std::size_t>(
      std::max_element(probs.v.begin(), probs.v.end()) - probs.v.begin());
}

double ClassifierModel::loss(const EncodedSequence& seq) const {
  if (seq.label_id < 0 ||
      seq.label_id >= static_cast<int>(cfg_.class_count))
    throw std::out_of_range("classifier: label out of range");
  const EncodedInput input = encode_input(seq);
  const Tensor logits = forward_features(input, nullptr);
  return nn::softmax_cross_entropy(logits,
                                   static_cast<std::size_t>(seq.label_id))
      .first;
}

double ClassifierModel::loss_backward(const EncodedSequence& seq,
                                      double grad_scale) {
  if (seq.label_id < 0 ||
      seq.label_id >= static_cast<int>(cfg_.class_count))
    throw std::out_of_range("classifier: label out of range");
  const EncodedInput input = encode_input(seq);
  ForwardCache cache;
  const Tensor logits = forward_features(input, &cache);
  auto [nll, d_logits] = nn::softmax_cross_entropy(
      logits, static_cast<std::size_t>(seq.label_id));
  for (Real& g : d_logits.v) g *= grad_scale;

  const bool need_input_grads =
      cfg_.encoder == EncoderKind::kTrainableEmbedding;
  Tensor d_feats;
  backward_features(input, d_logits, cache,
                    need_input_grads ? &d_feats : nullptr);

  if (need_input_grads) {
    const std::size_t first = seq.first_real();
    for (std::size_t t = 0; t < seq.original_length; ++t) {
      const int idx = seq.indexes[first + t];
      Real* grow = embedding.grad.row(static_cast<std::size_t>(idx));
      for (std::size_t ccol = 0; ccol < cfg_.embedding_size; ++ccol)
        grow[ccol] += d_feats.at(t, ccol);
    }
  }
  return nll;
}

std::vector<std::pair<std::string, const Tensor*>>
ClassifierModel::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  auto add_param = [&out](const nn::Parameter& p) {
    if (!p.value.v.empty()) out.push_back({p.name, &p.value});
  };
  add_param(embedding);
  add_param(mix_logits);
  add_param(mix_gamma);
  for (const nn::LstmCellParams* cell : {&l1_fwd, &l1_bwd, &l2_fwd, &l2_bwd}) {
    if (cell->hidden_size == 0) continue;
    add_param(cell->w_ih);
    add_param(cell->w_hh);
    add_param(cell->bias);
  }
  add_param(head.w);
  add_param(head.b);
  return out;
}

void ClassifierModel::load_tensors(
    const std::map<std::string, Tensor>& tensors) {
  auto load = [&tensors](nn::Parameter& p) {
    if (p.value.v.empty()) return;
    auto it = tensors.find(p.name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint is missing tensor: " + p.name);
    if (!(it->second.shape == p.value.shape))
      throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    p.value = it->second;
  };
  load(embedding);
  load(mix_logits);
  load(mix_gamma);
  for (nn::LstmCellParams* cell : {&l1_fwd, &l1_bwd, &l2_fwd, &l2_bwd}) {
    if (cell->hidden_size == 0) continue;
    load(cell->w_ih);
    load(cell->w_hh);
    load(cell->bias);
  }
  load(head.w);
  load(head.b);
}

ClassifierTrainResult train_classifier(
    const std::vector<EncodedSequence>& train,
    const std::vector<EncodedSequence>& val, const ClassifierConfig& cfg,
    std::shared_ptr<const EmbeddingMatrix> w2v,
    std::shared_ptr<const BiLmModel> bilm) {
  if (train.empty() || val.empty())
    throw std::invalid_argument("train_classifier: empty train or val set");

  std::size_t vocab_size = 0;
  if (w2v) vocab_size = w2v->matrix.rows();
  if (bilm) vocab_size = bilm->vocab().size();
  if (vocab_size == 0) {
    int max_index = 0;
    for (const auto* set : {&train, &val})
      for (const EncodedSequence& s : *set)
        for (int idx : s.indexes) max_index = std::max(max_index, idx);
    vocab_size = static_cast<std::size_t>(max_index) + 1;
  }

  Rng rng(cfg.seed);
  Rng init_rng = rng.fork(1);
  Rng epoch_rng = rng.fork(2);

  ClassifierModel model(cfg, vocab_size, std::move(w2v), std::move(bilm));
  model.init(init_rng);
  nn::Adam optimizer({cfg.learning_rate});

  // Frozen encoders never change, so their features are computed once.
  const bool fixed_features =
      cfg.encoder == EncoderKind::kNone ||
      cfg.encoder == EncoderKind::kWord2VecFrozen ||
      cfg.encoder == EncoderKind::kElmoFrozen;
  std::vector<EncodedInput> train_inputs, val_inputs;
  if (fixed_features) {
    train_inputs.reserve(train.size());
    for (const EncodedSequence& s : train)
      train_inputs.push_back(model.encode_input(s));
    val_inputs.reserve(val.size());
    for (const EncodedSequence& s : val)
      val_inputs.push_back(model.encode_input(s));
  }

  struct Scratch {
    double nll = 0;
    std::size_t correct = 0;
  };
  auto evaluate = [&](const std::vector<EncodedSequence>& set,
                      const std::vector<EncodedInput>& inputs) {
    Scratch sc;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const Tensor logits =
          fixed_features ? model.logits_from_input(inputs[i])
                         : model.logits_from_input(model.encode_input(set[i]));
      sc.nll += nn::softmax_cross_entropy(
                    logits, static_cast<std::size_t>(set[i].label_id))
                    .first;
      const std::size_t pred = static_cast<std::size_t>(
          std::max_element(logits.v.begin(), logits.v.end()) -
          logits.v.begin());
      if (pred == static_cast<std::size_t>(set[i].label_id)) ++sc.correct;
    }
    return sc;
  };

  std::vector<TrainLogEntry> log;
  ClassifierModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    epoch_rng.shuffle(order);
    double train_nll = 0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), pos + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(batch_end - pos);
      for (std::size_t i = pos; i < batch_end; ++i) {
        const std::size_t idx = order[i];
        if (fixed_features)
          train_nll += model.loss_backward_input(train_inputs[idx],
                                                 train[idx].label_id, scale);
        else
          train_nll += model.loss_backward(train[idx], scale);
      }
      optimizer.step(model.trainable_parameters());
      if (cfg.encoder == EncoderKind::kTrainableEmbedding)
        for (std::size_t c = 0; c < cfg.embedding_size; ++c)
          model.embedding.value.at(Vocabulary::kPadIndex, c) = 0;
      pos = batch_end;
    }

    const Scratch vs = evaluate(val, val_inputs);
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.train_loss = train_nll / static_cast<double>(train.size());
    entry.val_loss = vs.nll / static_cast<double>(val.size());
    entry.val_accuracy =
        static_cast<double>(vs.correct) / static_cast<double>(val.size());
    log.push_back(entry);

    if (entry.val_loss < best_val) {
      best_val = entry.val_loss;
      best_epoch = epoch;
      best = model;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  return {std::move(best), std::move(log), best_epoch};
}

void write_training_log(const std::vector<TrainLogEntry>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  char buf[128];
  for (const TrainLogEntry& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g", e.epoch,
                  e.train_loss, e.val_loss, e.val_accuracy);
    out << buf << "\n";
  }
}

}  // namespace har

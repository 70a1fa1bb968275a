#include "har/word2vec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "har/checkpoint.hpp"
#include "har/nn.hpp"
#include "har/rng.hpp"

namespace har {

using nn::Real;

void for_each_skipgram_pair(
    const std::vector<std::vector<int>>& corpus, std::size_t window,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const std::size_t n = corpus[s].size();
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t lo = p > window ? p - window : 0;
      const std::size_t hi = std::min(n - 1, p + window);
      for (std::size_t q = lo; q <= hi; ++q) {
        if (q == p) continue;
        fn(s, p, q);
      }
    }
  }
}

Real skipgram_tuple_loss(const Real* center, const Real* context,
                         const std::vector<const Real*>& negatives,
                         std::size_t dim, Real* d_center, Real* d_context,
                         const std::vector<Real*>& d_negatives) {
  const Real pos_score = nn::dot(center, context, dim);
  const Real pos_sig = nn::sigmoid(pos_score);
  Real loss = -std::log(std::max(pos_sig, Real(1e-300)));
  const Real pos_coef = pos_sig - Real(1);  // d loss / d pos_score
  if (d_context)
    for (std::size_t i = 0; i < dim; ++i) d_context[i] += pos_coef * center[i];
  if (d_center)
    for (std::size_t i = 0; i < dim; ++i) d_center[i] += pos_coef * context[i];

  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const Real* neg = negatives[j];
    const Real score = nn::dot(center, neg, dim);
    const Real sig = nn::sigmoid(score);
    loss -= std::log(std::max(Real(1) - sig, Real(1e-300)));
    if (!d_negatives.empty() && d_negatives[j])
      for (std::size_t i = 0; i < dim; ++i)
        d_negatives[j][i] += sig * center[i];
    if (d_center)
      for (std::size_t i = 0; i < dim; ++i) d_center[i] += sig * neg[i];
  }
  return loss;
}

namespace {

// Cumulative unigram^exponent table over real token indexes for negative
// draws by binary search.
struct NoiseTable {
  std::vector<double> cumulative;
  std::vector<int> index;

  int sample(Rng& rng) const {
    const double target = rng.uniform() * cumulative.back();
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), target);
    const std::size_t pos = std::min(
        static_cast<std::size_t>(it - cumulative.begin()), index.size() - 1);
    return index[pos];
  }
};

NoiseTable build_noise_table(const std::vector<std::vector<int>>& corpus,
                             const Vocabulary& vocab, double exponent) {
  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (const auto& seq : corpus)
    for (int idx : seq) ++counts[static_cast<std::size_t>(idx)];
  NoiseTable table;
  double acc = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    acc += std::pow(static_cast<double>(counts[i]), exponent);
    table.cumulative.push_back(acc);
    table.index.push_back(static_cast<int>(i));
  }
  if (table.index.empty())
    throw std::invalid_argument("train_skipgram: empty corpus");
  return table;
}

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus,
                              const Vocabulary& vocab,
                              const SkipGramConfig& cfg) {
  if (corpus.empty())
    throw std::invalid_argument("train_skipgram: empty corpus");
  if (cfg.embedding_size < 1 || cfg.window < 1 || cfg.negatives < 1)
    throw std::invalid_argument("train_skipgram: bad config");
  const std::size_t v_size = vocab.size();
  for (const auto& seq : corpus)
    for (int idx : seq)
      if (idx < 1 || idx >= static_cast<int>(v_size))
        throw std::out_of_range("train_skipgram: index out of range: " +
                                std::to_string(idx));

  const std::size_t dim = cfg.embedding_size;
  Rng rng(cfg.seed);

  // Classic init: input rows small uniform, context rows zero, PAD row zero.
  nn::Tensor input = nn::Tensor::zeros(v_size, dim);
  nn::Tensor output = nn::Tensor::zeros(v_size, dim);
  for (std::size_t r = 1; r < v_size; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      input.at(r, c) = rng.uniform(-0.5 / static_cast<double>(dim),
                                   0.5 / static_cast<double>(dim));

  const NoiseTable noise =
      build_noise_table(corpus, vocab, cfg.noise_exponent);

  std::vector<double> epoch_loss;
  std::vector<Real> d_center(dim);
  std::vector<const Real*> negs;
  std::vector<Real*> d_negs;
  const Real lr = cfg.learning_rate;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total_loss = 0;
    std::size_t pair_count = 0;
    for (const auto& seq : corpus) {
      const std::size_t n = seq.size();
      for (std::size_t p = 0; p < n; ++p) {
        const int center_idx = seq[p];
        Real* center = input.row(static_cast<std::size_t>(center_idx));
        const std::size_t lo = p > cfg.window ? p - cfg.window : 0;
        const std::size_t hi = std::min(n - 1, p + cfg.window);
        for (std::size_t q = lo; q <= hi; ++q) {
          if (q == p) continue;
          const int ctx_idx = seq[q];
          Real* ctx = output.row(static_cast<std::size_t>(ctx_idx));

          negs.clear();
          d_negs.clear();
          for (std::size_t j = 0; j < cfg.negatives; ++j) {
            const int neg_idx = noise.sample(rng);
            if (neg_idx == ctx_idx) continue;  // skip, do not resample
            negs.push_back(output.row(static_cast<std::size_t>(neg_idx)));
            d_negs.push_back(output.row(static_cast<std::size_t>(neg_idx)));
          }

          std::fill(d_center.begin(), d_center.end(), Real(0));
          std::vector<Real> d_ctx(dim, Real(0));
          // Gradients for context/negative rows are applied through these
          // temporaries so the loss uses pre-update values throughout.
          std::vector<std::vector<Real>> d_neg_buf(negs.size(),
                                                   std::vector<Real>(dim, 0));
          std::vector<Real*> d_neg_ptrs(negs.size());
          for (std::size_t j = 0; j < negs.size(); ++j)
            d_neg_ptrs[j] = d_neg_buf[j].data();

          total_loss += skipgram_tuple_loss(center, ctx, negs, dim,
                                            d_center.data(), d_ctx.data(),
                                            d_neg_ptrs);
          ++pair_count;

          for (std::size_t i = 0; i < dim; ++i) ctx[i] -= lr * d_ctx[i];
          for (std::size_t j = 0; j < negs.size(); ++j) {
            Real* neg = d_negs[j];
            for (std::size_t i = 0; i < dim; ++i)
              neg[i] -= lr * d_neg_buf[j][i];
          }
          for (std::size_t i = 0; i < dim; ++i) center[i] -= lr * d_center[i];
        }
      }
    }
    epoch_loss.push_back(pair_count ? total_loss / pair_count : 0.0);
  }

  SkipGramResult result;
  result.embedding.matrix = std::move(input);
  result.embedding.vocab = vocab;
  result.epoch_loss = std::move(epoch_loss);
  return result;
}

double cosine(const std::string& a, const std::string& b,
              const EmbeddingMatrix& emb) {
  const int ia = emb.vocab.index_of(a);
  const int ib = emb.vocab.index_of(b);
  if (!emb.vocab.contains(a) || !emb.vocab.contains(b))
    throw std::invalid_argument("cosine: token not in vocabulary");
  const std::size_t dim = emb.embedding_size();
  const Real* ra = emb.matrix.row(static_cast<std::size_t>(ia));
  const Real* rb = emb.matrix.row(static_cast<std::size_t>(ib));
  const Real na = std::sqrt(nn::dot(ra, ra, dim));
  const Real nb = std::sqrt(nn::dot(rb, rb, dim));
  if (na == 0 || nb == 0)
    throw std::invalid_argument("cosine: zero embedding row");
  return nn::dot(ra, rb, dim) / (na * nb);
}

nn::Tensor sequence_embedding_gap(const std::vector<int>& indexes,
                                  const std::vector<std::uint8_t>& mask,
                                  const EmbeddingMatrix& emb) {
  const std::size_t dim = emb.embedding_size();
  nn::Tensor pooled = nn::Tensor::zeros(dim);
  std::size_t count = 0;
  for (std::size_t i = 0; i < indexes.size(); ++i) {
    if (!mask[i]) continue;
    const Real* row = emb.matrix.row(static_cast<std::size_t>(indexes[i]));
    for (std::size_t c = 0; c < dim; ++c) pooled[c] += row[c];
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("sequence_embedding_gap: all-padding input");
  for (std::size_t c = 0; c < dim; ++c) pooled[c] /= static_cast<Real>(count);
  return pooled;
}

void export_embeddings(const EmbeddingMatrix& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  const std::size_t dim = emb.embedding_size();
  out << "token,frequency";
  for (std::size_t c = 0; c < dim; ++c) out << ",dim_" << c;
  out << "\n";
  char buf[40];
  for (std::size_t r = 1; r < emb.matrix.rows(); ++r) {
    const int idx = static_cast<int>(r);
    const bool is_unk = idx == emb.vocab.unk_index();
    out << (is_unk ? "<UNK>" : emb.vocab.token_of(idx)) << ","
        << emb.vocab.frequency_at(idx);
    for (std::size_t c = 0; c < dim; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", emb.matrix.at(r, c));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_embedding(const EmbeddingMatrix& emb, const std::string& path,
                    const SkipGramConfig& cfg) {
  nlohmann::json meta;
  meta["kind"] = "word2vec";
  meta["vocab"] = nlohmann::json::parse(emb.vocab.to_json());
  meta["vocab_hash"] = emb.vocab.hash();
  meta["config"] = {{"embedding_size", cfg.embedding_size},
                    {"window", cfg.window},
                    {"epochs", cfg.epochs},
                    {"negatives", cfg.negatives},
                    {"noise_exponent", cfg.noise_exponent},
                    {"learning_rate", cfg.learning_rate},
                    {"seed", cfg.seed}};
  save_checkpoint(path, {{"embedding", &emb.matrix}}, meta);
}

EmbeddingMatrix load_embedding(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "word2vec")
    throw std::runtime_error("not a word2vec checkpoint: " + path);
  EmbeddingMatrix emb;
  emb.matrix = ck.require("embedding");
  emb.vocab = Vocabulary::from_json(ck.meta.at("vocab").dump());
  return emb;
}

}  // namespace har

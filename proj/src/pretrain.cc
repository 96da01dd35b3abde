#include "mtnews/pretrain.h"

#include <cmath>
#include <numeric>

namespace mtnews {
namespace {

RowVector softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  RowVector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

bool is_special(std::int32_t id) {
  return id >= 0 && static_cast<std::size_t>(id) < Vocabulary::kNumSpecials;
}

std::vector<MaskedExample> mask_corpus(const std::vector<SentencePair>& pairs,
                                       const Vocabulary& vocab, const EncoderConfig& config,
                                       const PretrainConfig& pretrain, Rng& rng) {
  std::vector<MaskedExample> out;
  out.reserve(pairs.size());
  for (const SentencePair& p : pairs) {
    const EncodedPair e = encode_pair(p.first, p.second, pretrain.max_a, pretrain.max_b, vocab);
    out.push_back(mask_tokens(e, p.is_next, pretrain.mask_probability, config.vocab_size, rng));
  }
  return out;
}

}  // namespace

std::vector<SentencePair> make_nsp_pairs(const std::vector<std::vector<std::string>>& documents,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (std::size_t s = 0; s < documents[d].size(); ++s) all.emplace_back(d, s);
  }
  std::vector<SentencePair> pairs;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (std::size_t s = 0; s + 1 < documents[d].size(); ++s) {
      SentencePair p;
      p.first = documents[d][s];
      if (rng.uniform() < 0.5 && documents.size() > 1) {
        // Draw until the sentence comes from another document.
        std::pair<std::size_t, std::size_t> pick;
        do {
          pick = all[static_cast<std::size_t>(rng.uniform_int(all.size()))];
        } while (pick.first == d);
        p.second = documents[pick.first][pick.second];
        p.is_next = false;
      } else {
        p.second = documents[d][s + 1];
        p.is_next = true;
      }
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

PretrainHeads init_pretrain_heads(const EncoderConfig& config) {
  PretrainHeads h;
  h.mlm_bias = Tensor("pretrain.mlm.bias", 1, static_cast<Eigen::Index>(config.vocab_size));
  h.nsp_w = Tensor("pretrain.nsp.weight", static_cast<Eigen::Index>(config.d_model), 2);
  h.nsp_b = Tensor("pretrain.nsp.bias", 1, 2);
  return h;
}

MaskedExample mask_tokens(const EncodedPair& input, bool is_next, double mask_probability,
                          std::size_t vocab_size, Rng& rng) {
  MaskedExample ex;
  ex.input = input;
  ex.is_next = is_next;
  const std::size_t n_regular = vocab_size > Vocabulary::kNumSpecials ? vocab_size - Vocabulary::kNumSpecials : 0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::int32_t id = input.token_ids[i];
    if (is_special(id) || !input.attention_mask[i]) continue;
    if (!(rng.uniform() < mask_probability)) continue;
    ex.positions.push_back(i);
    ex.targets.push_back(id);
    const double r = rng.uniform();
    if (r < 0.8) {
      ex.input.token_ids[i] = Vocabulary::kMask;
    } else if (r < 0.9 && n_regular > 0) {
      ex.input.token_ids[i] = static_cast<std::int32_t>(Vocabulary::kNumSpecials + rng.uniform_int(n_regular));
    }
  }
  return ex;
}

PretrainLoss pretrain_example_loss(const MaskedExample& example, EncoderParams& params,
                                   PretrainHeads& heads, const EncoderConfig& config,
                                   bool with_grad, double grad_scale) {
  ForwardCache cache;
  const EncoderOutput out = forward(example.input, params, config, with_grad ? &cache : nullptr);
  PretrainLoss loss;

  Matrix d_states = Matrix::Zero(out.states.rows(), out.states.cols());
  const Matrix& emb = params.token_embedding.value;
  if (!example.positions.empty()) {
    const double inv_m = 1.0 / static_cast<double>(example.positions.size());
    for (std::size_t k = 0; k < example.positions.size(); ++k) {
      const auto pos = static_cast<Eigen::Index>(example.positions[k]);
      const RowVector logits = out.states.row(pos) * emb.transpose() + heads.mlm_bias.value.row(0);
      RowVector probs = softmax(logits);
      loss.mlm -= std::log(std::max(probs(example.targets[k]), 1e-300)) * inv_m;
      if (with_grad) {
        probs(example.targets[k]) -= 1.0;
        probs *= inv_m * grad_scale;
        heads.mlm_bias.grad.row(0) += probs;
        params.token_embedding.grad.noalias() += probs.transpose() * out.states.row(pos);
        d_states.row(pos) += probs * emb;
      }
    }
  }

  const RowVector nsp_logits = out.pooled * heads.nsp_w.value + heads.nsp_b.value.row(0);
  RowVector nsp_probs = softmax(nsp_logits);
  const Eigen::Index target = example.is_next ? 0 : 1;
  loss.nsp = -std::log(std::max(nsp_probs(target), 1e-300));
  if (with_grad) {
    nsp_probs(target) -= 1.0;
    nsp_probs *= grad_scale;
    heads.nsp_w.grad.noalias() += out.pooled.transpose() * nsp_probs;
    heads.nsp_b.grad.row(0) += nsp_probs;
    const RowVector d_pooled = nsp_probs * heads.nsp_w.value.transpose();
    backward(example.input, params, config, cache, out, d_states, d_pooled);
  }
  return loss;
}

PretrainResult pretrain_mlm_nsp(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                                const EncoderConfig& config, const PretrainConfig& pretrain,
                                std::optional<EncoderParams> initial) {
  if (pairs.empty()) throw DomainError("pretrain_mlm_nsp: empty corpus");
  if (pretrain.batch_size == 0) throw DomainError("pretrain_mlm_nsp: batch_size must be positive");
  config.validate();
  Rng rng(pretrain.seed);

  PretrainResult result;
  result.params = initial ? std::move(*initial) : init_encoder_params(config, rng.next());
  result.heads = init_pretrain_heads(config);
  SgdOptimizer optimizer(pretrain.optimizer);

  std::vector<Tensor*> tensors = result.params.tensors();
  tensors.push_back(&result.heads.mlm_bias);
  tensors.push_back(&result.heads.nsp_w);
  tensors.push_back(&result.heads.nsp_b);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  for (std::size_t step = 0; step < pretrain.steps; ++step) {
    for (Tensor* t : tensors) t->zero_grad();
    const std::size_t batch = std::min(pretrain.batch_size, pairs.size());
    const double inv_b = 1.0 / static_cast<double>(batch);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const SentencePair& p = pairs[order[cursor++]];
      const EncodedPair e = encode_pair(p.first, p.second, pretrain.max_a, pretrain.max_b, vocab);
      const MaskedExample ex = mask_tokens(e, p.is_next, pretrain.mask_probability, config.vocab_size, rng);
      batch_loss += pretrain_example_loss(ex, result.params, result.heads, config, true, inv_b).total() * inv_b;
    }
    if (!std::isfinite(batch_loss)) {
      throw TrainingError("pretrain_mlm_nsp: non-finite loss at step " + std::to_string(step + 1));
    }
    result.loss_history.push_back(batch_loss);
    optimizer.step(tensors);
  }
  return result;
}

PretrainLoss corpus_pretrain_loss(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                                  const EncoderConfig& config, const PretrainConfig& pretrain,
                                  EncoderParams& params, PretrainHeads& heads,
                                  std::uint64_t mask_seed) {
  if (pairs.empty()) throw DomainError("corpus_pretrain_loss: empty corpus");
  Rng rng(mask_seed);
  const auto examples = mask_corpus(pairs, vocab, config, pretrain, rng);
  PretrainLoss mean;
  for (const MaskedExample& ex : examples) {
    const PretrainLoss l = pretrain_example_loss(ex, params, heads, config, false);
    mean.mlm += l.mlm;
    mean.nsp += l.nsp;
  }
  mean.mlm /= static_cast<double>(examples.size());
  mean.nsp /= static_cast<double>(examples.size());
  return mean;
}

}  // namespace mtnews

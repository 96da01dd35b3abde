#ifndef MTNEWS_PRETRAIN_H_
#define MTNEWS_PRETRAIN_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtnews/encoder.h"
#include "mtnews/optimizer.h"

namespace mtnews {

struct SentencePair {
  std::string first;
  std::string second;
  bool is_next = true;
};

// Consecutive sentences of each document, with the second sentence replaced
// by a random sentence from another document with probability 0.5.
std::vector<SentencePair> make_nsp_pairs(const std::vector<std::vector<std::string>>& documents,
                                         std::uint64_t seed);

struct PretrainConfig {
  double mask_probability = 0.15;
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  std::size_t max_a = 32;
  std::size_t max_b = 32;
  SgdConfig optimizer{0.1, 0.9, 1.0};
  std::uint64_t seed = 0;
};

// Output layers used only while pretraining. Masked-token logits reuse the
// token embedding matrix plus `mlm_bias`.
struct PretrainHeads {
  Tensor mlm_bias;  // 1 x V
  Tensor nsp_w;     // d x 2
  Tensor nsp_b;     // 1 x 2
};

PretrainHeads init_pretrain_heads(const EncoderConfig& config);

struct MaskedExample {
  EncodedPair input;
  std::vector<std::size_t> positions;  // masked positions
  std::vector<std::int32_t> targets;   // original ids at those positions
  bool is_next = true;
};

// Selects each non-special token with `mask_probability`; a selected token
// becomes [MASK] 80% of the time, a random non-special token 10%, and stays
// unchanged 10%.
MaskedExample mask_tokens(const EncodedPair& input, bool is_next, double mask_probability,
                          std::size_t vocab_size, Rng& rng);

struct PretrainLoss {
  double mlm = 0.0;  // mean over masked positions, 0 when none
  double nsp = 0.0;
  double total() const { return mlm + nsp; }
};

// Loss of one example; accumulates gradients (scaled by `grad_scale`) when
// `with_grad` is set.
PretrainLoss pretrain_example_loss(const MaskedExample& example, EncoderParams& params,
                                   PretrainHeads& heads, const EncoderConfig& config,
                                   bool with_grad, double grad_scale = 1.0);

struct PretrainResult {
  EncoderParams params;
  PretrainHeads heads;
  std::vector<double> loss_history;  // mean batch loss per step, before the update
};

// Joint masked-token + next-sentence training. Throws DomainError for an
// empty corpus, TrainingError on a non-finite loss.
PretrainResult pretrain_mlm_nsp(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                                const EncoderConfig& config, const PretrainConfig& pretrain,
                                std::optional<EncoderParams> initial = std::nullopt);

// Mean joint loss over the whole corpus with masks drawn from `mask_seed`.
PretrainLoss corpus_pretrain_loss(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                                  const EncoderConfig& config, const PretrainConfig& pretrain,
                                  EncoderParams& params, PretrainHeads& heads,
                                  std::uint64_t mask_seed);

}  // namespace mtnews

#endif  // MTNEWS_PRETRAIN_H_

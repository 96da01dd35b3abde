#ifndef MTNEWS_ENCODER_H_
#define MTNEWS_ENCODER_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtnews/common.h"
#include "mtnews/tensor.h"
#include "mtnews/vocabulary.h"

namespace mtnews {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t max_positions = 128;
  std::size_t vocab_size = 1000;
  double dropout = 0.0;
  double init_std = 0.02;
  double layer_norm_eps = 1e-12;

  // Throws DomainError for inconsistent settings (d_model % heads != 0, ...).
  void validate() const;
  std::size_t head_dim() const { return d_model / heads; }
  bool operator==(const EncoderConfig&) const = default;
};

// `[CLS] a... [SEP] b... [SEP]`, padded positions carry mask 0.
struct EncodedPair {
  std::vector<std::int32_t> token_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> attention_mask;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const EncodedPair&) const = default;
};

// Segments are truncated from the tail to max_a / max_b tokens. Without
// segment_b the layout is `[CLS] a... [SEP]`. Throws DomainError when
// segment_a has no tokens or a max length is zero.
EncodedPair encode_pair(const std::string& segment_a, const std::optional<std::string>& segment_b,
                        std::size_t max_a, std::size_t max_b, const Vocabulary& vocab);
// Appends [PAD] positions up to `length` (no-op when already longer).
void pad_to(EncodedPair& encoded, std::size_t length);

struct LayerParams {
  Tensor query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;
  Tensor attn_ln_gamma, attn_ln_beta;
  Tensor ff_in_w, ff_in_b, ff_out_w, ff_out_b;
  Tensor ff_ln_gamma, ff_ln_beta;
};

// Every trainable tensor of the shared encoder.
struct EncoderParams {
  Tensor token_embedding;     // V x d
  Tensor position_embedding;  // P x d
  Tensor segment_embedding;   // 2 x d
  Tensor embedding_ln_gamma, embedding_ln_beta;
  std::vector<LayerParams> layers;
  Tensor pooler_w, pooler_b;

  // Fixed traversal order, used for checkpoints and optimizers.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  void zero_grad();
  bool all_finite() const;
};

EncoderParams init_encoder_params(const EncoderConfig& config, std::uint64_t seed);

struct LayerCache {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> attention;  // per head, rows are probability vectors
  Matrix context;
  Matrix attn_dropout;
  Matrix attn_xhat;
  Vector attn_inv_std;
  Matrix attn_out;  // post layer norm
  Matrix ff_pre;
  Matrix ff_act;
  Matrix ff_dropout;
  Matrix ff_xhat;
  Vector ff_inv_std;
};

struct ForwardCache {
  Matrix embedding_xhat;
  Vector embedding_inv_std;
  Matrix embedding_dropout;
  std::vector<LayerCache> layers;
};

struct EncoderOutput {
  Matrix states;     // length x d
  RowVector pooled;  // d
};

// Post-layer-norm transformer encoder. Dropout is active only when
// `dropout_rng` is given and config.dropout > 0. Throws DomainError when the
// input is longer than max_positions or carries out-of-range ids.
EncoderOutput forward(const EncodedPair& input, const EncoderParams& params,
                      const EncoderConfig& config, ForwardCache* cache = nullptr,
                      Rng* dropout_rng = nullptr);

// Accumulates parameter gradients into params[*].grad given the upstream
// gradients of the states and the pooled vector. `cache` must come from the
// forward call on the same input and parameters.
void backward(const EncodedPair& input, EncoderParams& params, const EncoderConfig& config,
              const ForwardCache& cache, const EncoderOutput& output, const Matrix& d_states,
              const RowVector& d_pooled);

void save_encoder(std::ostream& out, const EncoderConfig& config, const EncoderParams& params);
// Reads the config header and parameter blocks written by save_encoder.
std::pair<EncoderConfig, EncoderParams> load_encoder(std::istream& in);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace mtnews

#endif  // MTNEWS_ENCODER_H_

#include "mtnews/encoder.h"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

namespace mtnews {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Row-wise layer norm. Stores the normalized input and 1/std per row.
Matrix layer_norm(const Matrix& x, const Tensor& gamma, const Tensor& beta, double eps,
                  Matrix& xhat, Vector& inv_std) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const RowVector centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / d;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std(i);
  }
  Matrix y = xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& inv_std,
                           Tensor& gamma, Tensor& beta) {
  gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double sum = dxhat.row(i).sum();
    const double dot = dxhat.row(i).dot(xhat.row(i));
    dx.row(i) = (inv_std(i) / d) * (d * dxhat.row(i).array() - sum - xhat.row(i).array() * dot).matrix();
  }
  return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

Matrix affine(const Matrix& x, const Tensor& w, const Tensor& b) {
  Matrix y = x * w.value;
  y.rowwise() += b.value.row(0);
  return y;
}

void affine_backward(const Matrix& x, const Matrix& dy, Tensor& w, Tensor& b) {
  w.grad.noalias() += x.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
}

void fill_normal(Tensor& t, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = rng.normal(0.0, stddev);
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void EncoderConfig::validate() const {
  if (layers == 0) throw DomainError("encoder config: layers must be positive");
  if (heads == 0 || d_model == 0 || d_model % heads != 0) {
    throw DomainError("encoder config: d_model must be a positive multiple of heads");
  }
  if (d_ff == 0) throw DomainError("encoder config: d_ff must be positive");
  if (max_positions < 3) throw DomainError("encoder config: max_positions must be >= 3");
  if (vocab_size < Vocabulary::kNumSpecials) {
    throw DomainError("encoder config: vocab_size smaller than the special tokens");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("encoder config: dropout must be in [0, 1)");
  if (!(init_std >= 0.0)) throw DomainError("encoder config: init_std must be >= 0");
}

EncodedPair encode_pair(const std::string& segment_a, const std::optional<std::string>& segment_b,
                        std::size_t max_a, std::size_t max_b, const Vocabulary& vocab) {
  if (max_a == 0 || max_b == 0) throw DomainError("encode_pair: max lengths must be >= 1");
  std::vector<std::int32_t> a = vocab.ids(segment_a);
  if (a.empty()) throw DomainError("encode_pair: segment_a is empty");
  if (a.size() > max_a) a.resize(max_a);

  EncodedPair e;
  e.token_ids.push_back(Vocabulary::kCls);
  e.token_ids.insert(e.token_ids.end(), a.begin(), a.end());
  e.token_ids.push_back(Vocabulary::kSep);
  e.segment_ids.assign(e.token_ids.size(), 0);
  if (segment_b) {
    std::vector<std::int32_t> b = vocab.ids(*segment_b);
    if (b.size() > max_b) b.resize(max_b);
    e.token_ids.insert(e.token_ids.end(), b.begin(), b.end());
    e.token_ids.push_back(Vocabulary::kSep);
    e.segment_ids.resize(e.token_ids.size(), 1);
  }
  e.attention_mask.assign(e.token_ids.size(), 1);
  return e;
}

void pad_to(EncodedPair& encoded, std::size_t length) {
  while (encoded.token_ids.size() < length) {
    encoded.token_ids.push_back(Vocabulary::kPad);
    encoded.segment_ids.push_back(0);
    encoded.attention_mask.push_back(0);
  }
}

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out = {&token_embedding, &position_embedding, &segment_embedding,
                              &embedding_ln_gamma, &embedding_ln_beta};
  for (LayerParams& l : layers) {
    for (Tensor* t : {&l.query_w, &l.query_b, &l.key_w, &l.key_b, &l.value_w, &l.value_b,
                      &l.output_w, &l.output_b, &l.attn_ln_gamma, &l.attn_ln_beta, &l.ff_in_w,
                      &l.ff_in_b, &l.ff_out_w, &l.ff_out_b, &l.ff_ln_gamma, &l.ff_ln_beta}) {
      out.push_back(t);
    }
  }
  out.push_back(&pooler_w);
  out.push_back(&pooler_b);
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  auto mutable_list = const_cast<EncoderParams*>(this)->tensors();
  return {mutable_list.begin(), mutable_list.end()};
}

void EncoderParams::zero_grad() {
  for (Tensor* t : tensors()) t->zero_grad();
}

bool EncoderParams::all_finite() const {
  for (const Tensor* t : tensors()) {
    if (!t->value.allFinite()) return false;
  }
  return true;
}

EncoderParams init_encoder_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto ff = static_cast<Eigen::Index>(config.d_ff);
  const double s = config.init_std;
  Rng rng(seed);

  EncoderParams p;
  p.token_embedding = Tensor("embeddings.token", static_cast<Eigen::Index>(config.vocab_size), d);
  p.position_embedding = Tensor("embeddings.position", static_cast<Eigen::Index>(config.max_positions), d);
  p.segment_embedding = Tensor("embeddings.segment", 2, d);
  p.embedding_ln_gamma = Tensor("embeddings.ln.gamma", 1, d);
  p.embedding_ln_beta = Tensor("embeddings.ln.beta", 1, d);
  fill_normal(p.token_embedding, s, rng);
  fill_normal(p.position_embedding, s, rng);
  fill_normal(p.segment_embedding, s, rng);
  p.embedding_ln_gamma.value.setOnes();

  for (std::size_t i = 0; i < config.layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    LayerParams l;
    l.query_w = Tensor(prefix + "attention.query.weight", d, d);
    l.query_b = Tensor(prefix + "attention.query.bias", 1, d);
    l.key_w = Tensor(prefix + "attention.key.weight", d, d);
    l.key_b = Tensor(prefix + "attention.key.bias", 1, d);
    l.value_w = Tensor(prefix + "attention.value.weight", d, d);
    l.value_b = Tensor(prefix + "attention.value.bias", 1, d);
    l.output_w = Tensor(prefix + "attention.output.weight", d, d);
    l.output_b = Tensor(prefix + "attention.output.bias", 1, d);
    l.attn_ln_gamma = Tensor(prefix + "attention.ln.gamma", 1, d);
    l.attn_ln_beta = Tensor(prefix + "attention.ln.beta", 1, d);
    l.ff_in_w = Tensor(prefix + "ff.in.weight", d, ff);
    l.ff_in_b = Tensor(prefix + "ff.in.bias", 1, ff);
    l.ff_out_w = Tensor(prefix + "ff.out.weight", ff, d);
    l.ff_out_b = Tensor(prefix + "ff.out.bias", 1, d);
    l.ff_ln_gamma = Tensor(prefix + "ff.ln.gamma", 1, d);
    l.ff_ln_beta = Tensor(prefix + "ff.ln.beta", 1, d);
    for (Tensor* t : {&l.query_w, &l.key_w, &l.value_w, &l.output_w, &l.ff_in_w, &l.ff_out_w}) {
      fill_normal(*t, s, rng);
    }
    l.attn_ln_gamma.value.setOnes();
    l.ff_ln_gamma.value.setOnes();
    p.layers.push_back(std::move(l));
  }
  p.pooler_w = Tensor("pooler.weight", d, d);
  p.pooler_b = Tensor("pooler.bias", 1, d);
  fill_normal(p.pooler_w, s, rng);
  return p;
}

EncoderOutput forward(const EncodedPair& input, const EncoderParams& params,
                      const EncoderConfig& config, ForwardCache* cache, Rng* dropout_rng) {
  const std::size_t n = input.size();
  if (n == 0) throw DomainError("forward: empty input");
  if (n > config.max_positions) {
    throw DomainError("forward: input length " + std::to_string(n) + " exceeds max_positions " +
                      std::to_string(config.max_positions));
  }
  if (input.segment_ids.size() != n || input.attention_mask.size() != n) {
    throw DomainError("forward: token, segment and mask lengths differ");
  }
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto rows = static_cast<Eigen::Index>(n);
  const bool train = dropout_rng != nullptr && config.dropout > 0.0;

  Matrix embedded(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto tok = input.token_ids[static_cast<std::size_t>(i)];
    const auto seg = input.segment_ids[static_cast<std::size_t>(i)];
    if (tok < 0 || tok >= params.token_embedding.value.rows()) {
      throw DomainError("forward: token id out of range");
    }
    if (seg < 0 || seg > 1) throw DomainError("forward: segment id must be 0 or 1");
    embedded.row(i) = params.token_embedding.value.row(tok) +
                      params.position_embedding.value.row(i) +
                      params.segment_embedding.value.row(seg);
  }

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.layers.assign(config.layers, LayerCache{});

  Matrix x = layer_norm(embedded, params.embedding_ln_gamma, params.embedding_ln_beta,
                        config.layer_norm_eps, c.embedding_xhat, c.embedding_inv_std);
  if (train) {
    c.embedding_dropout = dropout_mask(rows, d, config.dropout, *dropout_rng);
    x.array() *= c.embedding_dropout.array();
  } else {
    c.embedding_dropout.resize(0, 0);
  }

  const std::size_t heads = config.heads;
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t li = 0; li < config.layers; ++li) {
    const LayerParams& lp = params.layers[li];
    LayerCache& lc = c.layers[li];
    lc.input = x;
    lc.query = affine(x, lp.query_w, lp.query_b);
    lc.key = affine(x, lp.key_w, lp.key_b);
    lc.value = affine(x, lp.value_w, lp.value_b);
    lc.context.resize(rows, d);
    lc.attention.resize(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      Matrix scores = lc.query.middleCols(off, dh) * lc.key.middleCols(off, dh).transpose() * scale;
      Matrix& probs = lc.attention[h];
      probs.resize(rows, rows);
      for (Eigen::Index i = 0; i < rows; ++i) {
        double max_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < rows; ++j) {
          if (input.attention_mask[static_cast<std::size_t>(j)]) max_score = std::max(max_score, scores(i, j));
        }
        double total = 0.0;
        for (Eigen::Index j = 0; j < rows; ++j) {
          const double e = input.attention_mask[static_cast<std::size_t>(j)] ? std::exp(scores(i, j) - max_score) : 0.0;
          probs(i, j) = e;
          total += e;
        }
        probs.row(i) /= total;
      }
      lc.context.middleCols(off, dh) = probs * lc.value.middleCols(off, dh);
    }
    Matrix attn = affine(lc.context, lp.output_w, lp.output_b);
    if (train) {
      lc.attn_dropout = dropout_mask(rows, d, config.dropout, *dropout_rng);
      attn.array() *= lc.attn_dropout.array();
    }
    lc.attn_out = layer_norm(x + attn, lp.attn_ln_gamma, lp.attn_ln_beta, config.layer_norm_eps,
                             lc.attn_xhat, lc.attn_inv_std);

    lc.ff_pre = affine(lc.attn_out, lp.ff_in_w, lp.ff_in_b);
    lc.ff_act = lc.ff_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ff = affine(lc.ff_act, lp.ff_out_w, lp.ff_out_b);
    if (train) {
      lc.ff_dropout = dropout_mask(rows, d, config.dropout, *dropout_rng);
      ff.array() *= lc.ff_dropout.array();
    }
    x = layer_norm(lc.attn_out + ff, lp.ff_ln_gamma, lp.ff_ln_beta, config.layer_norm_eps,
                   lc.ff_xhat, lc.ff_inv_std);
  }

  EncoderOutput out;
  RowVector pre = x.row(0) * params.pooler_w.value + params.pooler_b.value.row(0);
  out.pooled = pre.array().tanh().matrix();
  out.states = std::move(x);
  return out;
}

void backward(const EncodedPair& input, EncoderParams& params, const EncoderConfig& config,
              const ForwardCache& cache, const EncoderOutput& output, const Matrix& d_states,
              const RowVector& d_pooled) {
  const auto rows = static_cast<Eigen::Index>(input.size());
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = d_states;
  {
    const RowVector dz = d_pooled.array() * (1.0 - output.pooled.array().square());
    params.pooler_w.grad.noalias() += output.states.row(0).transpose() * dz;
    params.pooler_b.grad.row(0) += dz;
    dx.row(0) += dz * params.pooler_w.value.transpose();
  }

  for (std::size_t li = config.layers; li-- > 0;) {
    LayerParams& lp = params.layers[li];
    const LayerCache& lc = cache.layers[li];

    Matrix d_sum = layer_norm_backward(dx, lc.ff_xhat, lc.ff_inv_std, lp.ff_ln_gamma, lp.ff_ln_beta);
    Matrix d_attn_out = d_sum;
    Matrix d_ff = d_sum;
    if (lc.ff_dropout.size()) d_ff.array() *= lc.ff_dropout.array();
    affine_backward(lc.ff_act, d_ff, lp.ff_out_w, lp.ff_out_b);
    Matrix d_act = d_ff * lp.ff_out_w.value.transpose();
    Matrix d_pre = d_act.array() * lc.ff_pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    affine_backward(lc.attn_out, d_pre, lp.ff_in_w, lp.ff_in_b);
    d_attn_out.noalias() += d_pre * lp.ff_in_w.value.transpose();

    d_sum = layer_norm_backward(d_attn_out, lc.attn_xhat, lc.attn_inv_std, lp.attn_ln_gamma, lp.attn_ln_beta);
    Matrix d_input = d_sum;
    Matrix d_attn = d_sum;
    if (lc.attn_dropout.size()) d_attn.array() *= lc.attn_dropout.array();
    affine_backward(lc.context, d_attn, lp.output_w, lp.output_b);
    const Matrix d_context = d_attn * lp.output_w.value.transpose();

    Matrix d_query(rows, d_context.cols()), d_key(rows, d_context.cols()), d_value(rows, d_context.cols());
    for (std::size_t h = 0; h < config.heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const Matrix& probs = lc.attention[h];
      const auto dc = d_context.middleCols(off, dh);
      const Matrix d_probs = dc * lc.value.middleCols(off, dh).transpose();
      d_value.middleCols(off, dh) = probs.transpose() * dc;
      const Vector row_dot = (d_probs.array() * probs.array()).rowwise().sum();
      const Matrix d_scores = (probs.array() * (d_probs.colwise() - row_dot).array()).matrix() * scale;
      d_query.middleCols(off, dh) = d_scores * lc.key.middleCols(off, dh);
      d_key.middleCols(off, dh) = d_scores.transpose() * lc.query.middleCols(off, dh);
    }
    affine_backward(lc.input, d_query, lp.query_w, lp.query_b);
    affine_backward(lc.input, d_key, lp.key_w, lp.key_b);
    affine_backward(lc.input, d_value, lp.value_w, lp.value_b);
    d_input.noalias() += d_query * lp.query_w.value.transpose();
    d_input.noalias() += d_key * lp.key_w.value.transpose();
    d_input.noalias() += d_value * lp.value_w.value.transpose();
    dx = std::move(d_input);
  }

  if (cache.embedding_dropout.size()) dx.array() *= cache.embedding_dropout.array();
  const Matrix d_embedded = layer_norm_backward(dx, cache.embedding_xhat, cache.embedding_inv_std,
                                                params.embedding_ln_gamma, params.embedding_ln_beta);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto tok = input.token_ids[static_cast<std::size_t>(i)];
    const auto seg = input.segment_ids[static_cast<std::size_t>(i)];
    params.token_embedding.grad.row(tok) += d_embedded.row(i);
    params.position_embedding.grad.row(i) += d_embedded.row(i);
    params.segment_embedding.grad.row(seg) += d_embedded.row(i);
  }
}

void save_encoder(std::ostream& out, const EncoderConfig& config, const EncoderParams& params) {
  out << "encoder_config layers=" << config.layers << " heads=" << config.heads
      << " d_model=" << config.d_model << " d_ff=" << config.d_ff
      << " max_positions=" << config.max_positions << " vocab_size=" << config.vocab_size
      << " dropout=" << format_double(config.dropout) << " init_std=" << format_double(config.init_std)
      << " layer_norm_eps=" << format_double(config.layer_norm_eps) << '\n';
  for (const Tensor* t : params.tensors()) write_matrix_block(out, t->name, t->value);
}

std::pair<EncoderConfig, EncoderParams> load_encoder(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "missing encoder_config header");
  const auto fields = split_whitespace(line);
  if (fields.empty() || fields[0] != "encoder_config") {
    throw ParseError(0, "expected encoder_config header, got '" + line + "'");
  }
  EncoderConfig config;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) throw ParseError(0, "bad encoder_config field " + fields[i]);
    const std::string key = fields[i].substr(0, eq);
    const std::string value = fields[i].substr(eq + 1);
    if (key == "layers") config.layers = static_cast<std::size_t>(parse_int(value));
    else if (key == "heads") config.heads = static_cast<std::size_t>(parse_int(value));
    else if (key == "d_model") config.d_model = static_cast<std::size_t>(parse_int(value));
    else if (key == "d_ff") config.d_ff = static_cast<std::size_t>(parse_int(value));
    else if (key == "max_positions") config.max_positions = static_cast<std::size_t>(parse_int(value));
    else if (key == "vocab_size") config.vocab_size = static_cast<std::size_t>(parse_int(value));
    else if (key == "dropout") config.dropout = parse_double(value);
    else if (key == "init_std") config.init_std = parse_double(value);
    else if (key == "layer_norm_eps") config.layer_norm_eps = parse_double(value);
    else throw ParseError(0, "unknown encoder_config field " + key);
  }
  config.validate();
  EncoderParams params = init_encoder_params(config, 0);
  for (Tensor* t : params.tensors()) {
    Matrix m = read_matrix_block(in, t->name);
    if (m.rows() != t->value.rows() || m.cols() != t->value.cols()) {
      throw ParseError(0, "block '" + t->name + "' has the wrong shape");
    }
    t->value = std::move(m);
  }
  return {config, std::move(params)};
}

}  // namespace mtnews

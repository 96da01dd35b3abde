#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mtnews/common.h"
#include "mtnews/encoder.h"
#include "mtnews/grad_check.h"
#include "mtnews/pretrain.h"
#include "mtnews/vocabulary.h"

namespace mtnews {
namespace {

Vocabulary toy_vocab() {
  return build_vocab({"t1 t2 t3 b1 b2 b3 the cat sat on a mat dog ran far away"}, 40);
}

EncoderConfig toy_config(std::size_t vocab_size) {
  EncoderConfig c;
  c.layers = 2;
  c.heads = 4;
  c.d_model = 32;
  c.d_ff = 64;
  c.max_positions = 32;
  c.vocab_size = vocab_size;
  return c;
}

TEST(VocabularyTest, SpecialsAndRanking) {
  const auto v = build_vocab({"a b a"}, 7);
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.token(0), "[PAD]");
  EXPECT_EQ(v.token(1), "[UNK]");
  EXPECT_EQ(v.token(2), "[CLS]");
  EXPECT_EQ(v.token(3), "[SEP]");
  EXPECT_EQ(v.token(4), "[MASK]");
  EXPECT_EQ(v.id("a"), 5);
  EXPECT_EQ(v.id("b"), 6);
  EXPECT_EQ(v.id("zebra"), Vocabulary::kUnk);
  EXPECT_EQ(build_vocab({"a b a"}, 7), v);
  EXPECT_EQ(build_vocab({"c b a c b c"}, 6).size(), 6u);
  EXPECT_EQ(build_vocab({"c b a c b c"}, 6).token(5), "c");
  EXPECT_THROW(build_vocab({"a"}, 5), DomainError);

  std::stringstream ss;
  v.save(ss);
  EXPECT_EQ(ss.str().substr(0, 8), "[PAD]\t0\n");
  EXPECT_EQ(Vocabulary::load(ss), v);
}

TEST(EncodePairTest, PairLayout) {
  const auto vocab = toy_vocab();
  const auto e = encode_pair("t1 t2", std::string("b1 b2 b3"), 4, 6, vocab);
  const std::vector<std::int32_t> expected = {Vocabulary::kCls, vocab.id("t1"), vocab.id("t2"),
                                              Vocabulary::kSep, vocab.id("b1"), vocab.id("b2"),
                                              vocab.id("b3"), Vocabulary::kSep};
  EXPECT_EQ(e.token_ids, expected);
  EXPECT_EQ(e.segment_ids, (std::vector<std::int32_t>{0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(e.attention_mask, std::vector<std::int32_t>(8, 1));

  const auto single = encode_pair("t1 t2 t3", std::nullopt, 2, 5, vocab);
  EXPECT_EQ(single.token_ids, (std::vector<std::int32_t>{Vocabulary::kCls, vocab.id("t1"), vocab.id("t2"), Vocabulary::kSep}));
  EXPECT_EQ(single.segment_ids, std::vector<std::int32_t>(4, 0));

  EXPECT_THROW(encode_pair("", std::string("b1"), 4, 4, vocab), DomainError);
  EXPECT_THROW(encode_pair("t1", std::string("b1"), 0, 4, vocab), DomainError);
}

TEST(EncodePairTest, TruncationKeepsHead) {
  const auto vocab = toy_vocab();
  std::string b;
  for (int i = 0; i < 600; ++i) b += (i ? " " : "") + std::string(i == 0 ? "dog" : "cat");
  const auto e = encode_pair("t1", b, 128, 512, vocab);
  EXPECT_EQ(e.size(), 1u + 1 + 1 + 512 + 1);
  EXPECT_EQ(e.token_ids[3], vocab.id("dog"));
  std::size_t seps = 0;
  for (auto id : e.token_ids) seps += id == Vocabulary::kSep;
  EXPECT_EQ(seps, 2u);

  auto padded = e;
  pad_to(padded, e.size() + 3);
  EXPECT_EQ(padded.token_ids.back(), Vocabulary::kPad);
  EXPECT_EQ(padded.attention_mask.back(), 0);
}

class EncoderForwardTest : public ::testing::Test {
 protected:
  Vocabulary vocab = toy_vocab();
  EncoderConfig config = toy_config(vocab.size());
  EncoderParams params = init_encoder_params(config, 5);
};

TEST_F(EncoderForwardTest, ShapesAndDeterminism) {
  const auto input = encode_pair("the cat sat", std::string("on a mat"), 8, 8, vocab);
  const auto out = forward(input, params, config);
  EXPECT_EQ(out.states.rows(), static_cast<Eigen::Index>(input.size()));
  EXPECT_EQ(out.states.cols(), 32);
  EXPECT_EQ(out.pooled.size(), 32);
  const auto again = forward(input, params, config);
  EXPECT_EQ(out.states, again.states);
  EXPECT_EQ(out.pooled, again.pooled);

  auto too_long = input;
  pad_to(too_long, config.max_positions + 1);
  EXPECT_THROW(forward(too_long, params, config), DomainError);
}

TEST_F(EncoderForwardTest, AttentionRowsAreDistributionsIgnoringPads) {
  auto input = encode_pair("dog ran far", std::string("away"), 8, 8, vocab);
  const std::size_t real = input.size();
  pad_to(input, real + 6);
  ForwardCache cache;
  forward(input, params, config, &cache);
  ASSERT_EQ(cache.layers.size(), 2u);
  for (const auto& layer : cache.layers) {
    ASSERT_EQ(layer.attention.size(), 4u);
    for (const auto& probs : layer.attention) {
      for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        EXPECT_NEAR(probs.row(r).sum(), 1.0, 1e-6);
        for (std::size_t c = real; c < input.size(); ++c) EXPECT_EQ(probs(r, static_cast<Eigen::Index>(c)), 0.0);
      }
    }
  }
}

TEST_F(EncoderForwardTest, PaddingDoesNotChangeRealPositions) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    EncodedPair input;
    input.token_ids.push_back(Vocabulary::kCls);
    const auto n = 1 + rng.uniform_int(10);
    for (std::uint64_t i = 0; i < n; ++i) {
      input.token_ids.push_back(static_cast<std::int32_t>(5 + rng.uniform_int(vocab.size() - 5)));
    }
    input.token_ids.push_back(Vocabulary::kSep);
    input.segment_ids.assign(input.token_ids.size(), 0);
    input.attention_mask.assign(input.token_ids.size(), 1);
    const auto base = forward(input, params, config);
    auto padded = input;
    pad_to(padded, input.size() + 1 + rng.uniform_int(10));
    const auto out = forward(padded, params, config);
    const auto rows = static_cast<Eigen::Index>(input.size());
    EXPECT_LT((out.states.topRows(rows) - base.states).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((out.pooled - base.pooled).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST_F(EncoderForwardTest, LayerNormStatistics) {
  params = init_encoder_params(config, 6);
  const auto input = encode_pair("the cat sat on a mat", std::string("dog ran"), 8, 8, vocab);
  ForwardCache cache;
  forward(input, params, config, &cache);
  auto check = [](const Matrix& xhat) {
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      const double mean = xhat.row(r).mean();
      const double var = (xhat.row(r).array() - mean).square().mean();
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
  };
  check(cache.embedding_xhat);
  for (const auto& layer : cache.layers) {
    check(layer.attn_xhat);
    check(layer.ff_xhat);
  }
}

TEST_F(EncoderForwardTest, CheckpointRoundTrip) {
  std::stringstream ss;
  save_encoder(ss, config, params);
  const std::string text = ss.str();
  auto [loaded_config, loaded] = load_encoder(ss);
  EXPECT_EQ(loaded_config, config);
  const auto a = params.tensors();
  const auto b = loaded.tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value, b[i]->value);
  }
  std::ostringstream again;
  save_encoder(again, loaded_config, loaded);
  EXPECT_EQ(again.str(), text);
}

TEST(GeluTest, DerivativeMatchesFiniteDifference) {
  for (double x = -4.0; x <= 4.0; x += 0.25) {
    const double h = 1e-5;
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
  EXPECT_EQ(gelu(0.0), 0.0);
}

TEST(GradCheckTest, AffineSquaredLossIsExact) {
  Rng rng(1);
  Tensor w("w", 3, 2);
  Tensor b("b", 1, 2);
  for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.normal(0, 1);
  for (Eigen::Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = rng.normal(0, 1);
  Matrix x(4, 3), y(4, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0, 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal(0, 1);
  auto loss = [&](bool with_grad) {
    Matrix pred = x * w.value;
    pred.rowwise() += b.value.row(0);
    const Matrix diff = pred - y;
    if (with_grad) {
      w.grad += 2.0 * x.transpose() * diff;
      b.grad += 2.0 * diff.colwise().sum();
    }
    return diff.squaredNorm();
  };
  std::vector<Tensor*> tensors = {&w, &b};
  const auto result = grad_check(tensors, loss, {1e-3, 8, 0});
  EXPECT_LT(result.max_relative_error, 1e-8);
  EXPECT_EQ(result.checked, 8u);

  auto corrupted = [&](bool with_grad) {
    const double l = loss(with_grad);
    if (with_grad) w.grad *= 1.01;
    return l;
  };
  EXPECT_GT(grad_check(tensors, corrupted, {1e-3, 8, 0}).max_relative_error, 1e-3);

  auto nan_loss = [](bool) { return std::nan(""); };
  EXPECT_THROW(grad_check(tensors, nan_loss, {}), DomainError);
}

// Random linear readout of every state plus softmax cross-entropy on the
// pooled vector, so both output paths carry gradient.
struct FullModelLoss {
  EncodedPair input;
  EncoderConfig config;
  EncoderParams* params;
  Matrix readout;
  Tensor* head;  // d x 3
  std::size_t target = 1;
  bool corrupt = false;

  double operator()(bool with_grad) const {
    ForwardCache cache;
    const auto out = forward(input, *params, config, with_grad ? &cache : nullptr);
    const double state_term = out.states.cwiseProduct(readout).sum();
    const RowVector logits = out.pooled * head->value;
    const double m = logits.maxCoeff();
    const RowVector e = (logits.array() - m).exp().matrix();
    const double z = e.sum();
    const double ce = std::log(z) + m - logits[static_cast<Eigen::Index>(target)];
    if (with_grad) {
      RowVector d_logits = e / z;
      d_logits[static_cast<Eigen::Index>(target)] -= 1.0;
      head->grad += out.pooled.transpose() * d_logits;
      const RowVector d_pooled = d_logits * head->value.transpose();
      backward(input, *params, config, cache, out, readout, d_pooled);
      if (corrupt) params->layers[0].ff_in_w.grad *= 1.01;
    }
    return state_term + ce;
  }
};

TEST(GradCheckTest, FullEncoderMatchesCentralDifferences) {
  const auto vocab = toy_vocab();
  auto config = toy_config(vocab.size());
  config.init_std = 0.1;
  auto params = init_encoder_params(config, 12);
  Rng rng(2);
  auto input = encode_pair("the cat sat on", std::string("a mat"), 8, 8, vocab);
  pad_to(input, input.size() + 2);
  Matrix readout(static_cast<Eigen::Index>(input.size()), 32);
  for (Eigen::Index i = 0; i < readout.size(); ++i) readout.data()[i] = rng.normal(0, 1);
  Tensor head("head", 32, 3);
  for (Eigen::Index i = 0; i < head.value.size(); ++i) head.value.data()[i] = rng.normal(0, 1);

  FullModelLoss loss{input, config, &params, readout, &head};
  // Adding a constant to every key shifts each attention score row by the
  // same amount, so the key bias has an identically zero gradient; a
  // relative error on it only measures rounding noise.
  std::vector<Tensor*> tensors, key_biases;
  for (Tensor* t : params.tensors()) {
    (t->name.ends_with("attention.key.bias") ? key_biases : tensors).push_back(t);
  }
  tensors.push_back(&head);
  // At h = 1e-3 a few entries sit near 1e-4 from O(h^2) truncation alone
  // (layer norm over small activations is strongly curved); h = 1e-4 leaves
  // only rounding error.
  const auto result = grad_check(tensors, std::cref(loss), {1e-4, 100, 3});
  EXPECT_LT(result.max_relative_error, 1e-4) << "worst tensor " << result.worst_tensor;
  EXPECT_EQ(result.checked, 100u);
  const auto dense = grad_check(tensors, std::cref(loss), {1e-4, 4000, 4});
  EXPECT_LT(dense.max_relative_error, 1e-4) << "worst tensor " << dense.worst_tensor;

  params.zero_grad();
  loss(true);
  for (Tensor* t : key_biases) EXPECT_LT(t->grad.cwiseAbs().maxCoeff(), 1e-12) << t->name;

  FullModelLoss broken = loss;
  broken.corrupt = true;
  std::vector<Tensor*> only_ff = {&params.layers[0].ff_in_w};
  EXPECT_GT(grad_check(only_ff, std::cref(broken), {1e-3, 20, 3}).max_relative_error, 1e-3);
}

std::vector<SentencePair> toy_pairs(std::size_t n) {
  std::vector<std::vector<std::string>> docs;
  const std::vector<std::string> pool = {"the cat sat on a mat", "dog ran far away", "t1 t2 t3",
                                         "b1 b2 b3 the", "a cat ran", "the dog sat"};
  for (std::size_t d = 0; d < n; ++d) {
    std::vector<std::string> doc;
    for (std::size_t s = 0; s < 3; ++s) doc.push_back(pool[(d + s) % pool.size()]);
    docs.push_back(doc);
  }
  auto pairs = make_nsp_pairs(docs, 1);
  pairs.resize(std::min(pairs.size(), n));
  return pairs;
}

TEST(PretrainTest, MaskingRates) {
  Rng rng(10);
  EncodedPair input;
  input.token_ids.push_back(Vocabulary::kCls);
  for (int i = 0; i < 20000; ++i) input.token_ids.push_back(7);
  input.token_ids.push_back(Vocabulary::kSep);
  input.segment_ids.assign(input.token_ids.size(), 0);
  input.attention_mask.assign(input.token_ids.size(), 1);
  const auto ex = mask_tokens(input, true, 0.15, 30, rng);
  const double selected = static_cast<double>(ex.positions.size()) / 20000.0;
  EXPECT_NEAR(selected, 0.15, 0.01);
  std::size_t masked = 0, unchanged = 0;
  for (std::size_t p : ex.positions) {
    EXPECT_NE(p, 0u);
    EXPECT_NE(p, input.size() - 1);
    masked += ex.input.token_ids[p] == Vocabulary::kMask;
    unchanged += ex.input.token_ids[p] == 7;
    EXPECT_GE(ex.input.token_ids[p], static_cast<std::int32_t>(Vocabulary::kMask));
  }
  const double n = static_cast<double>(ex.positions.size());
  EXPECT_NEAR(masked / n, 0.8, 0.03);
  // Random replacements can also land on the original id.
  EXPECT_NEAR(unchanged / n, 0.1 + 0.1 / 25.0, 0.03);
  for (std::int32_t t : ex.targets) EXPECT_EQ(t, 7);
}

TEST(PretrainTest, ZeroMaskProbabilityLeavesOnlyNsp) {
  const auto vocab = toy_vocab();
  const auto config = toy_config(vocab.size());
  auto params = init_encoder_params(config, 1);
  auto heads = init_pretrain_heads(config);
  PretrainConfig pc;
  pc.mask_probability = 0.0;
  const auto loss = corpus_pretrain_loss(toy_pairs(10), vocab, config, pc, params, heads, 4);
  EXPECT_EQ(loss.mlm, 0.0);
  EXPECT_EQ(loss.total(), loss.nsp);
  EXPECT_GT(loss.nsp, 0.0);
}

TEST(PretrainTest, JointLossDecreasesAndIsDeterministic) {
  const auto vocab = toy_vocab();
  const auto config = toy_config(vocab.size());
  const auto pairs = toy_pairs(50);
  ASSERT_EQ(pairs.size(), 50u);
  PretrainConfig pc;
  pc.steps = 200;
  pc.seed = 3;
  auto initial = init_encoder_params(config, pc.seed);
  auto initial_heads = init_pretrain_heads(config);
  const double before = corpus_pretrain_loss(pairs, vocab, config, pc, initial, initial_heads, 99).total();

  auto result = pretrain_mlm_nsp(pairs, vocab, config, pc);
  const double after = corpus_pretrain_loss(pairs, vocab, config, pc, result.params, result.heads, 99).total();
  EXPECT_LT(after, before);
  ASSERT_EQ(result.loss_history.size(), 200u);

  const auto again = pretrain_mlm_nsp(pairs, vocab, config, pc);
  EXPECT_EQ(again.loss_history, result.loss_history);
  EXPECT_THROW(pretrain_mlm_nsp({}, vocab, config, pc), DomainError);
}

}  // namespace
}  // namespace mtnews

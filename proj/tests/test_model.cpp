#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "vapf/errors.hpp"
#include "vapf/model.hpp"
#include "vapf/ops.hpp"
#include "vapf/reference.hpp"
#include "vapf/rng.hpp"
#include "vapf/verify.hpp"

using namespace vapf;

namespace {

Tensor random(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

AttributeRecord sample_record() { return {{71.0, 1.0, 16.0, 2.0, 30.0, 260.0, 1.1}}; }

Tensor rows(const Tensor& x, std::size_t first, std::size_t count) {
  std::vector<std::size_t> sizes{first, count};
  if (const std::size_t tail = x.dim(0) - first - count) sizes.push_back(tail);
  if (first == 0) sizes.erase(sizes.begin());
  return ops::split(x, 0, sizes)[first == 0 ? 0 : 1];
}

}  // namespace

TEST(Shapes, PatchTokens) {
  VisualEncoderConfig v;
  v.volume = {32, 32, 32};
  v.patch = 4;
  EXPECT_EQ(v.tokens(0), 512u);
  EXPECT_EQ(v.tokens(1), 64u);
  v.patch = 5;
  EXPECT_THROW(v.validate(), ConfigError);
  v.patch = 4;
  v.prompts = 3;
  EXPECT_THROW(v.validate(), ConfigError);
}

TEST(Shapes, DeskVisualOutputAndFusionLength) {
  ModelConfig m;
  ParameterStore s;
  Initializer init(0);
  VisualEncoder enc(s, "vis", m.visual, init);
  NoGradGuard g;
  const Tensor out = enc(Tensor({32, 32, 32}, 0.5));
  EXPECT_EQ(out.shape(), (Shape{64, 64}));
  EXPECT_EQ(FusionHead::sequence_length(64, 7), 72u);
}

TEST(Shapes, ZeroVolumeGivesPositionPlusBias) {
  ModelConfig m = verification_model();
  ParameterStore s;
  Initializer init(1);
  VisualEncoder enc(s, "vis", m.visual, init);
  const auto& e = enc.stages()[0].embed;
  Tensor(e.proj.bias).data()[0] = 0.25;
  const Tensor got = e(Tensor({8, 8, 8}, 0.0));
  const Tensor want = ops::add_row(e.pos, e.proj.bias);
  EXPECT_TRUE(same_bits(got, want));
}

TEST(Attributes, Embedding) {
  const AttributeSchema schema = AttributeSchema::reference();
  const auto& age = schema.attributes[0];
  EXPECT_EQ(min_max_normalize(age.min, age), 0.0);
  EXPECT_EQ(min_max_normalize(age.max, age), 1.0);
  bool clamped = false;
  EXPECT_EQ(min_max_normalize(age.max + 10.0, age, &clamped), 1.0);
  EXPECT_TRUE(clamped);

  ParameterStore s;
  Initializer init(2);
  AttributeEmbedder embed(s, "tab", schema, 32, init);
  NoGradGuard g;
  const Tensor tokens = embed(sample_record());
  EXPECT_EQ(tokens.shape(), (Shape{7, 32}));

  AttributeRecord r = sample_record();
  r.values[1] = 0.0;
  const Tensor t0 = embed(r);
  const Tensor& table = s.get("tab.embed.gender.table");
  const Tensor& id = s.get("tab.embed.identity");
  for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(t0.at(1, c), table.at(0, c) + id.at(1, c));

  r.values[1] = 2.0;
  try {
    embed(r);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("gender"), std::string::npos);
  }
}

TEST(Attributes, PromptLayerMatchesDenseOracle) {
  ParameterStore s;
  Initializer init(3);
  TransformerLayer layer(s, "tab.layer0", 32, 4, 64, init);
  Rng rng(3);
  const Tensor x = random({7, 32}, rng);
  const Tensor p = random({5, 32}, rng);
  NoGradGuard g;
  const Tensor y = tab_prompt_layer_forward(layer, p, x);
  ASSERT_EQ(y.shape(), (Shape{7, 32}));

  // 12 x 12 score matrix computed explicitly, prompt rows dropped afterwards.
  const auto dense = reference::transformer_layer(s, "tab.layer0", reference::from_tensor(ops::concat({p, x}, 0)), 4);
  ASSERT_EQ(dense.rows, 12u);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t c = 0; c < 32; ++c) EXPECT_NEAR(y.at(i, c), dense(5 + i, c), 1e-12);

  Tensor p2 = p.clone();
  p2[0] += 1.0;
  EXPECT_FALSE(same_bits(tab_prompt_layer_forward(layer, p2, x), y));

  EXPECT_TRUE(same_bits(tab_prompt_layer_forward(layer, std::nullopt, x), layer(x)));
}

TEST(Attributes, ZeroPromptsOnlyChangeNormalization) {
  ParameterStore s;
  Initializer init(4);
  ModelConfig m;
  AttributeEncoder enc(s, "tab", m.schema, m.tabular, init);
  NoGradGuard g;
  const AttributeRecord r = sample_record();
  const std::vector<Tensor> zeros(2, Tensor({5, 32}, 0.0));
  const Tensor with = attribute_encoder_forward(enc.embedder(), enc.layers(), zeros, r);
  const Tensor without = attribute_encoder_forward(enc.embedder(), enc.layers(), {}, r);
  EXPECT_EQ(with.shape(), without.shape());
  EXPECT_FALSE(same_bits(with, without));

  reference::Mat x = reference::from_tensor(enc.embedder()(r));
  for (std::size_t l = 0; l < 2; ++l) {
    reference::Mat seq(12, 32);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t c = 0; c < 32; ++c) seq(5 + i, c) = x(i, c);
    const auto out = reference::transformer_layer(s, "tab.layer" + std::to_string(l), seq, 4);
    reference::Mat next(7, 32);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t c = 0; c < 32; ++c) next(i, c) = out(5 + i, c);
    x = next;
  }
  for (std::size_t i = 0; i < x.v.size(); ++i) EXPECT_NEAR(with[i], x.v[i], 1e-12);

  const std::vector<Tensor> one(1, Tensor({5, 32}, 0.0));
  EXPECT_THROW(attribute_encoder_forward(enc.embedder(), enc.layers(), one, r), ConfigError);
}

class EpaTest : public ::testing::Test {
 protected:
  EpaTest() : init(5), block(store, "blk", 16, 32, init) {}
  ParameterStore store;
  Initializer init;
  EpaBlock block;
};

TEST_F(EpaTest, SwaShapesAndSingleton) {
  Rng rng(6);
  NoGradGuard g;
  const Tensor seq = random({13, 16}, rng);
  const Tensor out = block.swa(seq);
  EXPECT_EQ(out.shape(), (Shape{13, 16}));
  const auto parts = ops::split(out, 0, {5, 8});
  EXPECT_EQ(parts[0].dim(0), 5u);
  EXPECT_EQ(parts[1].dim(0), 8u);

  const Tensor one = random({1, 16}, rng);
  EXPECT_TRUE(same_bits(block.swa(one), block.out_spatial(block.v_spatial(one))));
}

TEST_F(EpaTest, SwaPermutationEquivariant) {
  Rng rng(7);
  NoGradGuard g;
  const Tensor prompts = random({5, 16}, rng);
  const Tensor feats = random({8, 16}, rng);
  const std::vector<std::size_t> perm{3, 0, 7, 1, 6, 2, 5, 4};
  std::vector<std::size_t> idx;
  for (auto r : perm)
    for (std::size_t c = 0; c < 16; ++c) idx.push_back(r * 16 + c);
  const Tensor permuted = ops::gather(feats, idx, {8, 16});
  const Tensor a = rows(block.swa(ops::concat({prompts, feats}, 0)), 5, 8);
  const Tensor b = rows(block.swa(ops::concat({prompts, permuted}, 0)), 5, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(b.at(i, c), a.at(perm[i], c), 1e-12);
}

TEST_F(EpaTest, CwaShapes) {
  Rng rng(8);
  NoGradGuard g;
  for (std::size_t n : {1, 4, 13}) EXPECT_EQ(block.cwa(random({n, 16}, rng)).shape(), (Shape{n, 16}));
}

TEST(Cwa, SingleChannel) {
  ParameterStore s;
  Initializer init(9);
  EpaBlock b(s, "c1", 1, 2, init);
  Rng rng(9);
  NoGradGuard g;
  const Tensor x = random({6, 1}, rng);
  EXPECT_TRUE(same_bits(b.cwa(x), b.out_channel(b.v_channel(x))));
}

TEST(Cwa, MicroCaseMatchesExplicitAttention) {
  ParameterStore s;
  Initializer init(10);
  EpaBlock b(s, "m", 2, 2, init);
  auto set = [](Tensor t, std::vector<double> v) { std::copy(v.begin(), v.end(), t.data().begin()); };
  set(b.q.weight, {1.0, 0.5, -0.5, 2.0});
  set(b.q.bias, {0.1, -0.2});
  set(b.k.weight, {0.3, -1.0, 1.5, 0.25});
  set(b.k.bias, {0.0, 0.4});
  set(b.v_channel.weight, {2.0, 0.0, 1.0, -1.0});
  set(b.v_channel.bias, {0.5, 0.5});
  set(b.out_channel.weight, {1.0, 0.0, 0.0, 1.0});
  set(b.out_channel.bias, {0.0, 0.0});
  const double x[2][2] = {{0.7, -1.2}, {0.4, 0.9}};

  double q[2][2], k[2][2], v[2][2];
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 2; ++c) {
      q[n][c] = x[n][0] * b.q.weight.at(0, c) + x[n][1] * b.q.weight.at(1, c) + b.q.bias[c];
      k[n][c] = x[n][0] * b.k.weight.at(0, c) + x[n][1] * b.k.weight.at(1, c) + b.k.bias[c];
      v[n][c] = x[n][0] * b.v_channel.weight.at(0, c) + x[n][1] * b.v_channel.weight.at(1, c) +
                b.v_channel.bias[c];
    }
  // A[i][j] = softmax_j(sum_n q[n][i] k[n][j] / sqrt(2)); out[n][i] = sum_j v[n][j] A[i][j].
  double a[2][2];
  for (int i = 0; i < 2; ++i) {
    double e[2], z = 0.0;
    for (int j = 0; j < 2; ++j) {
      e[j] = std::exp((q[0][i] * k[0][j] + q[1][i] * k[1][j]) / std::sqrt(2.0));
      z += e[j];
    }
    for (int j = 0; j < 2; ++j) a[i][j] = e[j] / z;
  }
  NoGradGuard g;
  const Tensor got = b.cwa(Tensor({2, 2}, {x[0][0], x[0][1], x[1][0], x[1][1]}));
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(got.at(n, i), v[n][0] * a[i][0] + v[n][1] * a[i][1], 1e-14);
}

TEST(GlobalPrompt, Reductions) {
  VapFormer model(configure_for(Strategy::Vap, verification_model(), {4, 3}), 11);
  Rng rng(11);
  NoGradGuard g;
  for (const auto& stage : model.visual().stages()) {
    const auto& block = stage.blocks[0];
    const std::size_t c = block.ln1.gamma.size();
    const Tensor x = random({stage.embed.pos.dim(0), c}, rng);
    const Tensor plain = epa_prompt_forward(block, stage.prompts[0], std::nullopt, x);
    const GlobalPromptTransform one{Tensor({1, 4}, 0.0), Tensor({c}, 1.0)};
    const GlobalPromptTransform zero{Tensor({1, 4}, 0.0), Tensor({c}, 0.0)};
    EXPECT_TRUE(same_bits(epa_prompt_forward(block, stage.prompts[0], one, x), plain));
    EXPECT_TRUE(same_bits(epa_prompt_forward(block, stage.prompts[0], zero, x),
                          ops::add(x, block.ffn(block.ln2(x)))));
    EXPECT_FALSE(same_bits(epa_prompt_forward(block, stage.prompts[0], stage.gpts[0], x), plain));
  }
}

TEST(VisualEncoder, UnpromptedMatchesReference) {
  const ModelConfig m = verification_model();
  ParameterStore s;
  Initializer init(12);
  VisualEncoder enc(s, "vis", m.visual, init);
  Rng rng(12);
  const Tensor vol = random({8, 8, 8}, rng);
  NoGradGuard g;
  const auto want = reference::visual_encoder(s, m.visual, {vol.data().begin(), vol.data().end()});
  const Tensor got = enc(vol);
  ASSERT_EQ(got.size(), want.v.size());
  EXPECT_EQ(std::memcmp(got.data().data(), want.v.data(), got.size() * sizeof(double)), 0);
}

TEST(VisualEncoder, PromptCountKeepsShape) {
  Rng rng(13);
  const Tensor vol = random({8, 8, 8}, rng);
  NoGradGuard g;
  Shape first;
  for (std::size_t p : {0, 2, 4, 10}) {
    ModelConfig m = verification_model();
    m.visual.prompts = p;
    ParameterStore s;
    Initializer init(13);
    const Tensor out = VisualEncoder(s, "vis", m.visual, init)(vol);
    if (first.empty()) first = out.shape();
    EXPECT_EQ(out.shape(), first);
  }
}

TEST(Fusion, ZeroDepthIgnoresInputs) {
  ParameterStore s;
  Initializer init(14);
  FusionConfig f{16, 0, 2, 32, 8};
  FusionHead head(s, "fusion", 16, 8, f, init);
  Rng rng(14);
  NoGradGuard g;
  const Tensor a = head(random({8, 16}, rng), random({7, 8}, rng));
  const Tensor b = head(random({8, 16}, rng), random({7, 8}, rng));
  EXPECT_TRUE(same_bits(a, b));
  EXPECT_EQ(a.shape(), (Shape{1, 1}));
}

TEST(Fusion, VisualTokenOrderIrrelevant) {
  ParameterStore s;
  Initializer init(15);
  FusionHead head(s, "fusion", 16, 8, FusionConfig{16, 1, 2, 32, 8}, init);
  Rng rng(15);
  const Tensor v = random({8, 16}, rng), t = random({7, 8}, rng);
  std::vector<std::size_t> idx;
  for (std::size_t r : {1, 0, 2, 3, 4, 5, 6, 7})
    for (std::size_t c = 0; c < 16; ++c) idx.push_back(r * 16 + c);
  NoGradGuard g;
  const double a = head(v, t).item();
  const double b = head(ops::gather(v, idx, {8, 16}), t).item();
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_GT(1.0 / (1.0 + std::exp(-a)), 0.0);
  EXPECT_LT(1.0 / (1.0 + std::exp(-a)), 1.0);
}

TEST(Model, DeterministicAndMatchesReference) {
  const ModelConfig m = verification_model();
  VapFormer a(m, 16), b(m, 16);
  Rng rng(16);
  const Tensor vol = random({8, 8, 8}, rng);
  NoGradGuard g;
  EXPECT_TRUE(same_bits(a.forward(vol, sample_record()), b.forward(vol, sample_record())));
  const double want = reference::model_logit(a.params(), m, {vol.data().begin(), vol.data().end()}, sample_record());
  const double got = a.forward(vol, sample_record()).item();
  EXPECT_EQ(std::memcmp(&want, &got, sizeof(double)), 0);
}

TEST(Model, StrategyMapping) {
  const ModelConfig base = verification_model();
  const ModelConfig vistab = configure_for(Strategy::VisTab, base, {4, 3});
  EXPECT_EQ(vistab.visual.prompts, 4u);
  EXPECT_EQ(vistab.tabular.prompts, 3u);
  EXPECT_FALSE(vistab.visual.global_prompt);
  VapFormer model(vistab, 0);
  for (const auto& e : model.params().entries()) EXPECT_NE(e.role, ParamRole::GlobalTransform) << e.name;
  EXPECT_TRUE(configure_for(Strategy::Vap, base, {4, 3}).visual.global_prompt);
  EXPECT_EQ(configure_for(Strategy::Tab, base, {4, 3}).visual.prompts, 0u);
  EXPECT_EQ(configure_for(Strategy::Vis, base, {4, 3}).tabular.prompts, 0u);
  EXPECT_THROW(parse_strategy("bogus"), ConfigError);
}

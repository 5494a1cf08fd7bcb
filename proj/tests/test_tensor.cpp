#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "vapf/errors.hpp"
#include "vapf/gradcheck.hpp"
#include "vapf/ops.hpp"
#include "vapf/optim.hpp"
#include "vapf/parameter_store.hpp"
#include "vapf/rng.hpp"

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

// Naive triple loop.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at(i, k) * b.at(k, j);
      c[i * b.dim(1) + j] = s;
    }
  return c;
}

}  // namespace

TEST(Matmul, SmallProduct) {
  const Tensor c = ops::matmul(Tensor::from_rows({{1, 2}, {3, 4}}), Tensor::from_rows({{5}, {6}}));
  ASSERT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c[0], 17.0);
  EXPECT_EQ(c[1], 39.0);
}

TEST(Matmul, IdentityAndZeros) {
  Rng rng(1);
  const Tensor a = random({2, 5}, rng);
  const Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  EXPECT_TRUE(same_bits(ops::matmul(eye, a), a));
  const Tensor z = ops::matmul(Tensor({2, 3}, 0.0), random({3, 4}, rng));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MatchesNaiveLoop) {
  Rng rng(2);
  const Tensor a = random({4, 7}, rng), b = random({7, 3}, rng);
  const Tensor c = ops::matmul(a, b), want = naive_matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], want[i], 1e-12);
}

TEST(Matmul, ShapeErrorNamesShapes) {
  try {
    ops::matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(4,2)"), std::string::npos) << msg;
  }
}

TEST(Softmax, Examples) {
  const Tensor u = ops::softmax(Tensor({1, 3}, 0.0), 1);
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor l = ops::softmax(Tensor({1, 3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 1);
  EXPECT_NEAR(l[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(l[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(l[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Rng rng(3);
  const Tensor x = random({5, 9}, rng);
  const Tensor a = ops::softmax(x, 1);
  const Tensor b = ops::softmax(ops::add(x, Tensor({5, 9}, 7.25)), 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 9; ++c) s += a.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const Tensor big = ops::softmax(Tensor({1, 2}, {1000.0, 1000.0}), 1);
  EXPECT_EQ(big[0], 0.5);
}

TEST(LayerNorm, Examples) {
  const Tensor g({2}, 1.0), b({2}, 0.0);
  const Tensor y = ops::layer_norm(Tensor({1, 2}, {1.0, 3.0}), g, b, 0.0);
  EXPECT_NEAR(y[0], -1.0, 1e-15);
  EXPECT_NEAR(y[1], 1.0, 1e-15);

  const Tensor c = ops::layer_norm(Tensor({1, 4}, 2.5), Tensor({4}, 1.0), Tensor({4}, 0.0));
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
  const Tensor beta({4}, {0.1, 0.2, 0.3, 0.4});
  const Tensor cb = ops::layer_norm(Tensor({1, 4}, -3.0), Tensor({4}, 2.0), beta);
  EXPECT_TRUE(same_bits(ops::reshape(cb, {4}), beta));

  Rng rng(4);
  const Tensor r = ops::layer_norm(random({6, 16}, rng), Tensor({16}, 1.0), Tensor({16}, 0.0));
  for (std::size_t i = 0; i < 6; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < 16; ++j) m += r.at(i, j);
    EXPECT_LT(std::abs(m / 16.0), 1e-9);
  }
}

TEST(Pointwise, Examples) {
  EXPECT_EQ(ops::gelu(Tensor({1}, 0.0))[0], 0.0);
  Rng rng(5);
  const Tensor x = random({12, 4}, rng);
  EXPECT_TRUE(same_bits(ops::mul_row(x, Tensor({4}, 1.0)), x));
  const Tensor t = ops::transpose(x);
  EXPECT_EQ(t.shape(), (Shape{4, 12}));
  EXPECT_EQ(t.at(3, 7), x.at(7, 3));
}

TEST(Pointwise, ConcatSplitInverse) {
  Rng rng(6);
  const Tensor a = random({5, 8}, rng), b = random({7, 8}, rng);
  const Tensor ab = ops::concat({a, b}, 0);
  const auto parts = ops::split(ab, 0, {5, 7});
  EXPECT_TRUE(same_bits(parts[0], a));
  EXPECT_TRUE(same_bits(parts[1], b));
  EXPECT_TRUE(same_bits(ops::concat(parts, 0), ab));

  const Tensor c = random({3, 10}, rng);
  const auto cols = ops::split(c, 1, {4, 6});
  EXPECT_TRUE(same_bits(ops::concat(cols, 1), c));
}

TEST(Bce, Examples) {
  const double y1[] = {1.0};
  const double y0[] = {0.0};
  EXPECT_NEAR(ops::bce_with_logits(Tensor({1, 1}, 0.0), y1).item(), std::log(2.0), 1e-15);
  EXPECT_LT(ops::bce_with_logits(Tensor({1, 1}, 30.0), y1).item(), 1e-12);
  EXPECT_NEAR(ops::bce_with_logits(Tensor({1, 1}, 1.0), y0).item(), std::log1p(std::exp(1.0)), 1e-15);
  EXPECT_NEAR(ops::bce_with_logits(Tensor({1, 1}, 1.0), y0).item(), 1.313262, 1e-6);
}

TEST(Backward, OffPathGradIsZero) {
  Tensor a({2, 2}, {1, 2, 3, 4}, true);
  Tensor unused({2, 2}, 1.0, true);
  Tensor loss = ops::sum(ops::mul(a, a));
  loss.backward();
  const auto g = a.grad();
  EXPECT_EQ(g[3], 8.0);
  for (double v : unused.grad()) EXPECT_EQ(v, 0.0);
}

TEST(GradCheck, Quadratic) {
  ParameterStore s;
  Rng rng(7);
  s.add("w", random({4, 5}, rng));
  const auto r = grad_check([](ParameterStore& st) { return ops::sum(ops::mul(st.get("w"), st.get("w"))); }, s);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_GE(r.checked, 100u);
}

TEST(GradCheck, SoftmaxBceComposite) {
  ParameterStore s;
  Rng rng(8);
  s.add("x", random({3, 6}, rng));
  s.add("w", random({6, 1}, rng));
  auto f = [](ParameterStore& st) {
    const Tensor p = ops::softmax(st.get("x"), 1);
    const double labels[] = {1.0, 0.0, 1.0};
    return ops::bce_with_logits(ops::matmul(p, st.get("w")), labels);
  };
  EXPECT_LT(grad_check(f, s).max_rel_error, 1e-5);
}

// Every differentiable op through one randomized check each.
TEST(GradCheck, EveryOp) {
  Rng rng(9);
  using Fn = std::function<Tensor(ParameterStore&)>;
  const std::vector<std::pair<const char*, Fn>> cases = {
      {"matmul", [](ParameterStore& s) { return ops::sum(ops::matmul(s.get("a"), s.get("b"))); }},
      {"bmm", [](ParameterStore& s) {
         return ops::sum(ops::matmul(ops::reshape(s.get("a"), {2, 2, 6}), ops::reshape(s.get("b"), {2, 6, 2})));
       }},
      {"transpose", [](ParameterStore& s) {
         return ops::sum(ops::mul(ops::transpose(s.get("a")), s.get("b")));
       }},
      {"sub_scale", [](ParameterStore& s) {
         return ops::mean(ops::scale(ops::sub(s.get("a"), ops::transpose(s.get("b"))), 0.3));
       }},
      {"rows", [](ParameterStore& s) {
         return ops::sum(ops::mul_row(ops::add_row(s.get("a"), s.get("v")), s.get("v")));
       }},
      {"gelu_sigmoid", [](ParameterStore& s) { return ops::sum(ops::sigmoid(ops::gelu(s.get("a")))); }},
      {"softmax0", [](ParameterStore& s) {
         return ops::sum(ops::mul(ops::softmax(s.get("a"), 0), ops::transpose(s.get("b"))));
       }},
      {"layer_norm", [](ParameterStore& s) {
         return ops::sum(ops::mul(ops::layer_norm(s.get("a"), s.get("v"), s.get("v")), ops::transpose(s.get("b"))));
       }},
      {"concat_split", [](ParameterStore& s) {
         const auto p = ops::split(ops::concat({s.get("a"), ops::transpose(s.get("b"))}, 0), 1, {2, 4});
         return ops::sum(ops::mul(p[1], p[1]));
       }},
      {"gather_flatten", [](ParameterStore& s) {
         const Tensor g = ops::gather(s.get("a"), {0, 5, 5, 11, 2, 7}, {2, 3});
         return ops::sum(ops::mul(ops::flatten(g), ops::flatten(g)));
       }},
  };
  for (const auto& [name, f] : cases) {
    ParameterStore s;
    s.add("a", random({4, 6}, rng));
    s.add("b", random({6, 4}, rng));
    s.add("v", random({6}, rng));
    GradCheckOptions o;
    o.seed = rng.next_u64();
    EXPECT_LT(grad_check(f, s, o).max_rel_error, 1e-5) << name;
  }
}

TEST(AdamW, OneStepClosedForm) {
  ParameterStore s;
  s.add("w", Tensor({1}, 1.0));
  s.get("w").set_requires_grad(true);
  s.get("w").grad_buffer()[0] = 0.5;
  AdamW opt({0.01, 0.9, 0.999, 1e-8, 0.0});
  opt.step(s);
  EXPECT_NEAR(s.get("w")[0], 0.99, 1e-9);
  EXPECT_EQ(opt.steps(), 1u);
  EXPECT_FALSE(s.get("w").has_grad());
}

TEST(AdamW, DecayOnlyAndFrozen) {
  ParameterStore s;
  s.add("w", Tensor({2}, {2.0, -4.0}));
  s.add("f", Tensor({2}, {3.0, 5.0}));
  s.set_freeze_mask({"f"});
  s.get("w").grad_buffer();
  s.get("f").grad_buffer()[0] = 100.0;
  AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.5});
  opt.step(s);
  EXPECT_DOUBLE_EQ(s.get("w")[0], 2.0 * (1.0 - 0.1 * 0.5));
  EXPECT_DOUBLE_EQ(s.get("w")[1], -4.0 * (1.0 - 0.1 * 0.5));
  EXPECT_EQ(s.get("f")[0], 3.0);
  EXPECT_EQ(s.get("f")[1], 5.0);
  EXPECT_TRUE(opt.has_state("w"));
  EXPECT_FALSE(opt.has_state("f"));
}

TEST(AdamW, MissingGradientIsContractError) {
  ParameterStore s;
  s.add("w", Tensor({1}, 1.0));
  AdamW opt;
  EXPECT_THROW(opt.step(s), ContractError);
}

TEST(Plateau, Rules) {
  ReduceLROnPlateau up(1e-5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(up.step(0.5 + 0.01 * i), 1e-5);

  ReduceLROnPlateau flat(1e-5);
  flat.step(0.7);
  flat.step(0.7);
  flat.step(0.7);
  EXPECT_EQ(flat.lr(), 1e-5);
  EXPECT_DOUBLE_EQ(flat.step(0.7), 1e-6);

  ReduceLROnPlateau floor(1e-8);
  for (int i = 0; i < 20; ++i) floor.step(0.1);
  EXPECT_EQ(floor.lr(), 1e-8);
}

TEST(ParameterStore, Contracts) {
  ParameterStore s;
  s.add("a", Tensor({2, 3}));
  EXPECT_THROW(s.add("a", Tensor({1})), ContractError);
  EXPECT_THROW(s.set_freeze_mask({"missing"}), ContractError);
  s.add("b", Tensor({4}));
  s.set_freeze_mask({"a"});
  EXPECT_EQ(s.total_count(), 10u);
  EXPECT_EQ(s.trainable_count(), 4u);
  EXPECT_EQ(s.frozen_count() + s.trainable_count(), s.total_count());
}

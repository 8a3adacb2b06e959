#include <gtest/gtest.h>

#include <cmath>

#include "occdist/ops.hpp"
#include "occdist/rng.hpp"
#include "test_support.hpp"

using occdist::BasicTape;
using occdist::BasicTensor;
using occdist::Rng;
using occdist::Tape;
using occdist::Tensor;
using occdist::TensorD;
using TapeD = occdist::TapeD;

namespace {

TEST(Matmul, IdentityAndZero) {
  Rng rng(7);
  Tensor a = testsup::random_tensor<float>({3, 3}, rng);
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[static_cast<std::size_t>(i * 3 + i)] = 1.0f;
  const Tensor ai = occdist::matmul(a, eye);
  EXPECT_EQ(ai.data(), a.data());

  const Tensor zero({3, 3});
  const Tensor az = occdist::matmul(a, zero);
  for (const float v : az.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Matmul, MatchesTripleLoopOracle) {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  const Tensor c = occdist::matmul(a, b);
  // Independent direct summation.
  std::vector<float> expected(4, 0.0f);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        expected[static_cast<std::size_t>(i * 2 + j)] +=
            a.data()[static_cast<std::size_t>(i * 2 + k)] *
            b.data()[static_cast<std::size_t>(k * 2 + j)];
  EXPECT_EQ(expected, std::vector<float>({19, 22, 43, 50}));
  EXPECT_EQ(c.data(), expected);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  const Tensor a({2, 3});
  const Tensor b({2, 2});
  try {
    occdist::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const occdist::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, OneByOneIdentityKernel) {
  Rng rng(11);
  const Tensor x = testsup::random_tensor<float>({1, 4, 5}, rng);
  const Tensor k = Tensor::from_data({1, 1, 1, 1}, {1.0f});
  const Tensor y = occdist::conv2d(x, k, 1, 0);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(y.data(), x.data());
}

TEST(Conv2d, ZeroKernels) {
  Rng rng(12);
  const Tensor x = testsup::random_tensor<float>({2, 4, 4}, rng);
  const Tensor k({3, 2, 2, 2});
  const Tensor y = occdist::conv2d(x, k, 1, 0);
  for (const float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2d, DirectSummationOracle) {
  const Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  const Tensor k = Tensor::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
  const Tensor y = occdist::conv2d(x, k, 1, 0);
  ASSERT_EQ(y.shape(), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_FLOAT_EQ(y.data()[0], 5.0f);
}

TEST(Conv2d, KernelLargerThanPaddedInput) {
  const Tensor x({1, 2, 2});
  const Tensor k({1, 1, 4, 4});
  EXPECT_THROW(occdist::conv2d(x, k, 1, 0), occdist::DimensionError);
  EXPECT_NO_THROW(occdist::conv2d(x, k, 1, 1));
}

TEST(Relu, SignCases) {
  const Tensor x = Tensor::from_data({3}, {-1, 0, 2});
  const Tensor y = occdist::relu(x);
  EXPECT_EQ(y.data(), std::vector<float>({0, 0, 2}));
}

TEST(Maxpool, ConstantImageAndFourElementMax) {
  Tensor c({1, 4, 4});
  std::fill(c.data().begin(), c.data().end(), 0.75f);
  const Tensor pooled = occdist::maxpool2d(c, 2, 2);
  EXPECT_EQ(pooled.shape(), (std::vector<std::size_t>{1, 2, 2}));
  for (const float v : pooled.data()) EXPECT_EQ(v, 0.75f);

  const Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(occdist::maxpool2d(x, 2, 2).data(), std::vector<float>({4}));
}

TEST(Maxpool, TieRoutesGradientToFirstRowMajorIndex) {
  Tape tape;
  Tensor x = Tensor::from_data({1, 2, 2}, {3, 3, 3, 3}, true);
  Tensor y = occdist::maxpool2d(x, 2, 2, &tape);
  Tensor loss = occdist::sum(y, &tape);
  tape.backward(loss);
  EXPECT_EQ(x.grad(), std::vector<float>({1, 0, 0, 0}));
}

TEST(Softmax, SymmetryAndIdentity) {
  const Tensor z = Tensor::from_data({2}, {0, 0});
  for (const double tau : {0.5, 1.0, 20.0}) {
    const Tensor p = occdist::softmax_with_temperature(z, tau);
    EXPECT_FLOAT_EQ(p.data()[0], 0.5f);
    EXPECT_FLOAT_EQ(p.data()[1], 0.5f);
  }
  // tau = 1 is the ordinary softmax.
  const Tensor logits = Tensor::from_data({3}, {0.3f, -1.2f, 2.0f});
  const Tensor p1 = occdist::softmax_with_temperature(logits, 1.0);
  double denom = 0.0;
  for (const float v : logits.data()) denom += std::exp(static_cast<double>(v) - 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p1.data()[i],
                std::exp(static_cast<double>(logits.data()[i]) - 2.0) / denom, 1e-6);
  }
}

TEST(Softmax, FrozenScalarOracle) {
  // softmax([2,0]/2) computed with a high-precision scalar oracle.
  const Tensor p = occdist::softmax_with_temperature(Tensor::from_data({2}, {2, 0}), 2.0);
  EXPECT_NEAR(p.data()[0], 0.73105857863, 1e-4);
  EXPECT_NEAR(p.data()[1], 0.26894142137, 1e-4);
}

TEST(Softmax, RejectsNonPositiveTau) {
  const Tensor z({3});
  EXPECT_THROW(occdist::softmax_with_temperature(z, 0.0), occdist::ParameterError);
  EXPECT_THROW(occdist::softmax_with_temperature(z, -2.0), occdist::ParameterError);
}

TEST(Softmax, ProbabilityVectorOnRandomInputs) {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const Tensor z = testsup::random_tensor<float>({1 + rng.bounded(16)}, rng, 5.0);
    const Tensor p = occdist::softmax_with_temperature(z, 0.25 + 30.0 * rng.uniform());
    double total = 0.0;
    for (const float v : p.data()) {
      EXPECT_GE(v, 0.0f);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Softmax, MaxComponentNonIncreasingInTau) {
  Rng rng(22);
  for (int i = 0; i < 50; ++i) {
    const Tensor z = testsup::random_tensor<float>({8}, rng, 3.0);
    double prev_max = 2.0;
    for (const double tau : {1.0, 2.0, 5.0, 20.0, 100.0}) {
      const Tensor p = occdist::softmax_with_temperature(z, tau);
      const double cur = *std::max_element(p.data().begin(), p.data().end());
      EXPECT_LE(cur, prev_max + 1e-7);
      prev_max = cur;
    }
  }
}

TEST(ForwardOps, PureAndFinite) {
  Rng rng(23);
  const Tensor x = testsup::random_tensor<float>({2, 6, 6}, rng, 3.0);
  const Tensor k = testsup::random_tensor<float>({4, 2, 3, 3}, rng, 3.0);
  const Tensor c1 = occdist::conv2d(x, k, 1, 1);
  const Tensor c2 = occdist::conv2d(x, k, 1, 1);
  EXPECT_EQ(c1.data(), c2.data());
  const Tensor m1 = occdist::maxpool2d(c1, 2, 2);
  const Tensor r1 = occdist::relu(m1);
  const Tensor s1 = occdist::softmax_with_temperature(
      occdist::reshape(r1, {r1.size()}), 20.0);
  for (const float v : c1.data()) EXPECT_TRUE(std::isfinite(v));
  for (const float v : s1.data()) EXPECT_TRUE(std::isfinite(v));
  const Tensor s2 = occdist::softmax_with_temperature(
      occdist::reshape(occdist::relu(occdist::maxpool2d(c2, 2, 2)), {r1.size()}), 20.0);
  EXPECT_EQ(s1.data(), s2.data());
}

TEST(Backward, ReluLinearAndDeadRegions) {
  {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {2, 3}, true);
    Tensor loss = occdist::sum(occdist::relu(x, &tape), &tape);
    tape.backward(loss);
    EXPECT_EQ(x.grad(), std::vector<float>({1, 1}));
  }
  {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {-2, -3}, true);
    Tensor loss = occdist::sum(occdist::relu(x, &tape), &tape);
    tape.backward(loss);
    EXPECT_EQ(x.grad(), std::vector<float>({0, 0}));
  }
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = occdist::relu(x, &tape);
  EXPECT_THROW(tape.backward(y), occdist::ContractError);
}

TEST(Backward, UnreachableTensorKeepsZeroGradient) {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor unused = Tensor::from_data({2}, {5, 6}, true);
  Tensor loss = occdist::sum(occdist::relu(x, &tape), &tape);
  tape.backward(loss);
  EXPECT_EQ(unused.grad(), std::vector<float>({0, 0}));
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks, 64-bit, h = 1e-5, relative error <= 1e-4.
// ---------------------------------------------------------------------------

// Weighted scalar objective so the gradient is informative even for outputs
// with internal constraints (softmax rows sum to 1).
double weighted_sum(const TensorD& out, const std::vector<double>& weights, TapeD* tape,
                    TensorD* loss_out) {
  TensorD w = TensorD::from_data(out.shape(), std::vector<double>(weights));
  TensorD loss = occdist::sum(occdist::mul(out, w, tape), tape);
  if (loss_out) *loss_out = loss;
  return loss.item();
}

TEST(GradientCheck, MatmulHundredRandomInstances) {
  Rng rng(31);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t m = 1 + rng.bounded(4), k = 1 + rng.bounded(4), n = 1 + rng.bounded(4);
    TensorD a = testsup::random_tensor<double>({m, k}, rng, 1.0, true);
    TensorD b = testsup::random_tensor<double>({k, n}, rng, 1.0, true);
    std::vector<double> w(m * n);
    for (auto& v : w) v = rng.normal();

    TapeD tape;
    TensorD loss;
    weighted_sum(occdist::matmul(a, b, &tape), w, &tape, &loss);
    tape.backward(loss);

    std::vector<double> flat(a.data());
    flat.insert(flat.end(), b.data().begin(), b.data().end());
    const auto fd = testsup::finite_difference_gradient(
        [&](const std::vector<double>& xs) {
          TensorD aa = TensorD::from_data({m, k},
                                          std::vector<double>(xs.begin(), xs.begin() + m * k));
          TensorD bb =
              TensorD::from_data({k, n}, std::vector<double>(xs.begin() + m * k, xs.end()));
          return weighted_sum(occdist::matmul(aa, bb), w, nullptr, nullptr);
        },
        flat);
    std::vector<double> ad(a.grad());
    ad.insert(ad.end(), b.grad().begin(), b.grad().end());
    EXPECT_LE(testsup::max_relative_error(ad, fd), 1e-4);
  }
}

TEST(GradientCheck, Conv2dRandomInstances) {
  Rng rng(32);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t cin = 1 + rng.bounded(2), cout = 1 + rng.bounded(3);
    const std::size_t h = 3 + rng.bounded(3), w = 3 + rng.bounded(3);
    const std::size_t kk = 1 + rng.bounded(2);  // 1 or 2
    const int stride = 1 + static_cast<int>(rng.bounded(2));
    const int padding = static_cast<int>(rng.bounded(2));
    TensorD x = testsup::random_tensor<double>({cin, h, w}, rng, 1.0, true);
    TensorD k = testsup::random_tensor<double>({cout, cin, kk, kk}, rng, 1.0, true);

    TapeD tape;
    TensorD out = occdist::conv2d(x, k, stride, padding, &tape);
    std::vector<double> wts(out.size());
    for (auto& v : wts) v = rng.normal();
    TensorD loss;
    weighted_sum(out, wts, &tape, &loss);
    tape.backward(loss);

    std::vector<double> flat(x.data());
    flat.insert(flat.end(), k.data().begin(), k.data().end());
    const auto fd = testsup::finite_difference_gradient(
        [&](const std::vector<double>& xs) {
          TensorD xx = TensorD::from_data(
              x.shape(), std::vector<double>(xs.begin(), xs.begin() + x.size()));
          TensorD kk2 = TensorD::from_data(
              k.shape(), std::vector<double>(xs.begin() + x.size(), xs.end()));
          return weighted_sum(occdist::conv2d(xx, kk2, stride, padding), wts, nullptr, nullptr);
        },
        flat);
    std::vector<double> ad(x.grad());
    ad.insert(ad.end(), k.grad().begin(), k.grad().end());
    EXPECT_LE(testsup::max_relative_error(ad, fd), 1e-4);
  }
}

TEST(GradientCheck, ReluMaxpoolSoftmaxRandomInstances) {
  Rng rng(33);
  for (int inst = 0; inst < 100; ++inst) {
    // relu: inputs bounded away from the kink at zero.
    TensorD x({6}, true);
    for (auto& v : x.data()) {
      const double n = rng.normal();
      v = (n >= 0 ? n + 0.05 : n - 0.05);
    }
    std::vector<double> w(6);
    for (auto& v : w) v = rng.normal();
    TapeD tape;
    TensorD loss;
    weighted_sum(occdist::relu(x, &tape), w, &tape, &loss);
    tape.backward(loss);
    const auto fd = testsup::finite_difference_gradient(
        [&](const std::vector<double>& xs) {
          return weighted_sum(occdist::relu(TensorD::from_data({6}, xs)), w, nullptr, nullptr);
        },
        x.data());
    EXPECT_LE(testsup::max_relative_error(x.grad(), fd), 1e-4);
  }

  for (int inst = 0; inst < 100; ++inst) {
    // maxpool: distinct well-separated values so the argmax is stable under h.
    std::vector<double> vals(16);
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.05 * static_cast<double>(i);
    std::vector<std::size_t> order(16);
    for (std::size_t i = 0; i < 16; ++i) order[i] = i;
    Rng shuffle_rng(100 + static_cast<std::uint64_t>(inst));
    shuffle_rng.shuffle(order);
    std::vector<double> data(16);
    for (std::size_t i = 0; i < 16; ++i) data[i] = vals[order[i]];
    TensorD x = TensorD::from_data({1, 4, 4}, data);
    x.set_requires_grad(true);
    std::vector<double> w(4);
    for (auto& v : w) v = rng.normal();
    TapeD tape;
    TensorD loss;
    weighted_sum(occdist::maxpool2d(x, 2, 2, &tape), w, &tape, &loss);
    tape.backward(loss);
    const auto fd = testsup::finite_difference_gradient(
        [&](const std::vector<double>& xs) {
          return weighted_sum(occdist::maxpool2d(TensorD::from_data({1, 4, 4}, xs), 2, 2), w,
                              nullptr, nullptr);
        },
        data);
    EXPECT_LE(testsup::max_relative_error(x.grad(), fd), 1e-4);
  }

  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.bounded(6);
    TensorD z = testsup::random_tensor<double>({n}, rng, 2.0, true);
    const double tau = 0.5 + 20.0 * rng.uniform();
    std::vector<double> w(n);
    for (auto& v : w) v = rng.normal();
    TapeD tape;
    TensorD loss;
    weighted_sum(occdist::softmax_with_temperature(z, tau, &tape), w, &tape, &loss);
    tape.backward(loss);
    const auto fd = testsup::finite_difference_gradient(
        [&](const std::vector<double>& xs) {
          return weighted_sum(occdist::softmax_with_temperature(TensorD::from_data({n}, xs), tau),
                              w, nullptr, nullptr);
        },
        z.data());
    EXPECT_LE(testsup::max_relative_error(z.grad(), fd), 1e-4);
  }
}

TEST(GradientCheck, TwoLayerNetworkAgainstFiniteDifferences) {
  Rng rng(34);
  const std::size_t in = 4, hidden = 8, out = 3;
  TensorD x = testsup::random_tensor<double>({1, in}, rng, 1.0, true);
  TensorD w1 = testsup::random_tensor<double>({in, hidden}, rng, 0.7, true);
  TensorD b1 = testsup::random_tensor<double>({hidden}, rng, 0.3, true);
  TensorD w2 = testsup::random_tensor<double>({hidden, out}, rng, 0.7, true);
  TensorD b2 = testsup::random_tensor<double>({out}, rng, 0.3, true);
  std::vector<double> wts(out);
  for (auto& v : wts) v = rng.normal();

  auto eval = [&](const TensorD& xx, const TensorD& ww1, const TensorD& bb1, const TensorD& ww2,
                  const TensorD& bb2, TapeD* tape, TensorD* loss_out) {
    TensorD h = occdist::relu(occdist::add_bias(occdist::matmul(xx, ww1, tape), bb1, tape), tape);
    TensorD o = occdist::add_bias(occdist::matmul(h, ww2, tape), bb2, tape);
    return weighted_sum(o, wts, tape, loss_out);
  };

  TapeD tape;
  TensorD loss;
  eval(x, w1, b1, w2, b2, &tape, &loss);
  tape.backward(loss);

  const std::vector<const TensorD*> parts{&x, &w1, &b1, &w2, &b2};
  std::vector<double> flat, ad;
  for (const auto* t : parts) {
    flat.insert(flat.end(), t->data().begin(), t->data().end());
    ad.insert(ad.end(), t->grad().begin(), t->grad().end());
  }
  const auto fd = testsup::finite_difference_gradient(
      [&](const std::vector<double>& xs) {
        std::size_t off = 0;
        auto take = [&](const TensorD& like) {
          TensorD t = TensorD::from_data(
              like.shape(), std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(off),
                                                xs.begin() + static_cast<std::ptrdiff_t>(
                                                                  off + like.size())));
          off += like.size();
          return t;
        };
        TensorD xx = take(x), ww1 = take(w1), bb1 = take(b1), ww2 = take(w2), bb2 = take(b2);
        return eval(xx, ww1, bb1, ww2, bb2, nullptr, nullptr);
      },
      flat);
  EXPECT_LE(testsup::max_relative_error(ad, fd), 1e-4);
}

}  // namespace

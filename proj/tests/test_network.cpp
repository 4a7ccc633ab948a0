#include <gtest/gtest.h>

#include <cmath>

#include "axnorm/errors.hpp"
#include "axnorm/gemm.hpp"
#include "axnorm/network.hpp"
#include "axnorm/noise.hpp"

using namespace axnorm;

namespace {

LayerDescriptor conv(std::size_t cin, std::size_t cout, std::size_t k, std::size_t s, std::size_t pad) {
  return {ConvSpec{cin, cout, k, k, s, s, pad, pad}, "conv"};
}

Tensor4 random_tensor(TensorShape shape, std::uint64_t seed) {
  Tensor4 t(shape);
  CounterStream s(seed);
  for (double& v : t.data()) v = static_cast<float>(s.uniform() * 2 - 1);
  return t;
}

// Nested-loop convolution; weight(c, kh, kw, o) follows the GEMM column
// order (c, kh, kw) used by the lowering.
Tensor4 direct_conv(const Tensor4& x, const ConvSpec& cv, const RealMatrix& w) {
  const auto& s = x.shape();
  const std::size_t oh = (s.height + 2 * cv.pad_h - cv.kernel_h) / cv.stride_h + 1;
  const std::size_t ow = (s.width + 2 * cv.pad_w - cv.kernel_w) / cv.stride_w + 1;
  Tensor4 y({s.batch, cv.out_channels, oh, ow});
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t o = 0; o < cv.out_channels; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t kh = 0; kh < cv.kernel_h; ++kh)
              for (std::size_t kw = 0; kw < cv.kernel_w; ++kw) {
                const long h = static_cast<long>(i * cv.stride_h + kh) - static_cast<long>(cv.pad_h);
                const long v = static_cast<long>(j * cv.stride_w + kw) - static_cast<long>(cv.pad_w);
                if (h < 0 || v < 0 || h >= static_cast<long>(s.height) || v >= static_cast<long>(s.width)) continue;
                acc += x.at(b, c, h, v) * w((c * cv.kernel_h + kh) * cv.kernel_w + kw, o);
              }
          y.at(b, o, i, j) = acc;
        }
  return y;
}

double ulp(double v) { return std::nextafter(std::fabs(v), INFINITY) - std::fabs(v); }

}  // namespace

TEST(LowerToGemm, SmallConvAndFc) {
  EXPECT_EQ(lower_to_gemm(conv(2, 5, 3, 1, 0), {1, 2, 4, 4}), (GemmDims{4, 18, 5}));
  EXPECT_EQ(lower_to_gemm({FullyConnectedSpec{512, 10}, "fc"}, {1, 512, 1, 1}), (GemmDims{1, 512, 10}));
}

TEST(LowerToGemm, Errors) {
  EXPECT_THROW(lower_to_gemm(conv(3, 4, 7, 1, 0), {1, 3, 5, 5}), DomainError);
  EXPECT_THROW(lower_to_gemm(conv(3, 4, 3, 1, 0), {1, 2, 5, 5}), DomainError);
  EXPECT_THROW(lower_to_gemm({FullyConnectedSpec{10, 2}, "fc"}, {1, 3, 2, 2}), DomainError);
  EXPECT_THROW(conv(0, 4, 3, 1, 0).validate(), DomainError);
  EXPECT_THROW(conv(1, 4, 3, 0, 0).validate(), DomainError);
}

// Representative layers of large CNNs; the batch factor is whatever makes n
// match the published GEMM size.
struct TableRow {
  const char* name;
  TensorShape input;
  LayerDescriptor layer;
  GemmDims want;
};

void PrintTo(const TableRow& r, std::ostream* os) { *os << r.name; }

class KnownLayerFixture : public ::testing::TestWithParam<TableRow> {};

TEST_P(KnownLayerFixture, LowersToExpectedGemm) {
  const auto& r = GetParam();
  EXPECT_EQ(lower_to_gemm(r.layer, r.input), r.want) << r.name;
}

INSTANTIATE_TEST_SUITE_P(
    KnownLayers, KnownLayerFixture,
    ::testing::Values(
        TableRow{"vgg16_conv3_1", {2, 64, 112, 112}, conv(64, 64, 3, 1, 1), {25088, 576, 64}},
        TableRow{"resnet18_conv1", {12, 3, 224, 224}, conv(3, 64, 7, 2, 3), {150528, 147, 64}},
        TableRow{"resnet34_conv2_1", {16, 64, 56, 56}, conv(64, 64, 3, 1, 1), {50176, 576, 64}},
        TableRow{"resnet50_conv3_1", {256, 64, 56, 56}, conv(64, 64, 3, 1, 1), {802816, 576, 64}},
        TableRow{"mobilenet_v2_block", {16, 128, 56, 56}, conv(128, 128, 3, 1, 1), {50176, 1152, 128}}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Im2col, OneByOneKernelIsReshape) {
  const auto x = random_tensor({2, 3, 4, 5}, 1);
  const auto p = im2col(x, ConvSpec{3, 1, 1, 1, 1, 1, 0, 0});
  ASSERT_EQ(p.rows(), 2u * 4 * 5);
  ASSERT_EQ(p.cols(), 3u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 0; w < 5; ++w)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(p((b * 4 + h) * 5 + w, c), x.at(b, c, h, w));
}

TEST(Im2col, AllOnesTwoByTwo) {
  Tensor4 x({1, 1, 2, 2}, {1, 1, 1, 1});
  const auto p = im2col(x, ConvSpec{1, 1, 2, 2, 1, 1, 0, 0});
  EXPECT_EQ(p, RealMatrix(1, 4, {1, 1, 1, 1}));
}

TEST(Im2col, MatchesDirectConvolution) {
  const ConvSpec cv{2, 4, 3, 3, 1, 1, 0, 0};
  const auto x = random_tensor({1, 2, 5, 5}, 3);
  const auto w = RealMatrix::random_uniform(18, 4, 4);
  const auto y = gemm_rows_to_tensor(gemm_exact(im2col(x, cv), w), 1, 3, 3);
  const auto want = direct_conv(x, cv, w);
  for (std::size_t t = 0; t < want.data().size(); ++t) {
    EXPECT_LE(std::fabs(y.data()[t] - want.data()[t]), ulp(want.data()[t]));
  }
}

TEST(Im2col, RandomShapesWithStrideAndPadding) {
  CounterStream s(21);
  const std::size_t kernels[] = {1, 3, 5};
  const std::size_t pads[] = {0, 1, 3};
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = kernels[s.below(3)], stride = 1 + s.below(2), pad = pads[s.below(3)];
    const std::size_t cin = 1 + s.below(3), cout = 1 + s.below(4), b = 1 + s.below(2);
    const std::size_t h = k + s.below(6), w = k + s.below(6);
    const ConvSpec cv{cin, cout, k, k, stride, stride, pad, pad};
    const auto x = random_tensor({b, cin, h, w}, 100 + t);
    const auto wt = RealMatrix::random_uniform(cin * k * k, cout, 200 + t);
    const auto want = direct_conv(x, cv, wt);
    const auto& os = want.shape();
    const auto got = gemm_rows_to_tensor(gemm_exact(im2col(x, cv), wt), b, os.height, os.width);
    ASSERT_EQ(got.shape(), os);
    for (std::size_t i = 0; i < want.data().size(); ++i) {
      ASSERT_LE(std::fabs(got.data()[i] - want.data()[i]), ulp(want.data()[i])) << t;
    }
  }
}

TEST(Im2col, Col2imIsAdjoint) {
  // <im2col(x), P> == <x, col2im(P)> for any x, P.
  const ConvSpec cv{2, 1, 3, 3, 2, 2, 1, 1};
  const TensorShape shape{1, 2, 6, 5};
  const auto x = random_tensor(shape, 5);
  const auto cols = im2col(x, cv);
  const auto pm = RealMatrix::random_uniform(cols.rows(), cols.cols(), 6);
  const auto back = col2im(pm, shape, cv);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t t = 0; t < cols.size(); ++t) lhs += cols.data()[t] * pm.data()[t];
  for (std::size_t t = 0; t < x.data().size(); ++t) rhs += x.data()[t] * back.data()[t];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(TensorRows, RoundTrip) {
  const auto t = random_tensor({2, 3, 2, 2}, 9);
  EXPECT_EQ(gemm_rows_to_tensor(tensor_to_gemm_rows(t), 2, 2, 2).data().size(), t.data().size());
  const auto back = gemm_rows_to_tensor(tensor_to_gemm_rows(t), 2, 2, 2);
  for (std::size_t i = 0; i < t.data().size(); ++i) EXPECT_EQ(back.data()[i], t.data()[i]);
  const auto sl = t.slice(1, 1);
  EXPECT_EQ(sl.shape().batch, 1u);
  EXPECT_EQ(sl.at(0, 2, 1, 1), t.at(1, 2, 1, 1));
}

namespace {

ToyModel small_cnn() {
  ToyModel m;
  m.descriptor.input_shape = {1, 2, 8, 8};
  m.descriptor.layers = {{ConvSpec{2, 4, 3, 3, 2, 2, 1, 1}, "c1"},
                         {ConvSpec{4, 6, 3, 3, 2, 2, 1, 1}, "c2"},
                         {FullyConnectedSpec{6 * 2 * 2, 3}, "fc"}};
  std::uint64_t seed = 1;
  for (const auto& l : m.descriptor.layers) {
    const auto [r, c] = weight_shape(l);
    m.weights.push_back(RealMatrix::random_uniform(r, c, seed++, -0.5, 0.5));
  }
  m.classes = 3;
  return m;
}

}  // namespace

TEST(NetworkDescriptor, ShapesCompose) {
  const auto m = small_cnn();
  EXPECT_NO_THROW(m.validate());
  const auto dims = m.descriptor.gemm_dims();
  ASSERT_EQ(dims.size(), 3u);
  EXPECT_EQ(dims[0], (GemmDims{16, 18, 4}));
  EXPECT_EQ(dims[1], (GemmDims{4, 36, 6}));
  EXPECT_EQ(dims[2], (GemmDims{1, 24, 3}));
  auto bad = m.descriptor;
  bad.layers[2] = {FullyConnectedSpec{23, 3}, "fc"};
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Forward, ExactMultiplierHasNoErrorAndIgnoresSeed) {
  const auto m = small_cnn();
  const auto x = random_tensor({3, 2, 8, 8}, 7);
  const auto r = forward(m, x, MultiplierModel::exact(), 1);
  for (double f : r.per_layer_frob_sq) EXPECT_EQ(f, 0.0);
  EXPECT_EQ(r.logits, r.exact_logits);
  EXPECT_EQ(r.logits, forward_exact(m, x));
  EXPECT_EQ(forward(m, x, MultiplierModel::exact(), 999).logits, r.logits);
}

TEST(Forward, SingleFcLayerConstantBias) {
  ToyModel m;
  m.descriptor.input_shape = {1, 5, 1, 1};
  m.descriptor.layers = {{FullyConnectedSpec{5, 2}, "fc"}};
  m.weights = {RealMatrix::random_uniform(5, 2, 3)};
  m.classes = 2;
  const auto x = random_tensor({4, 5, 1, 1}, 4);
  const double c = 0.125;
  const auto r = forward(m, x, MultiplierModel::synthetic_normal(c, 0.0), 0);
  for (std::size_t t = 0; t < r.logits.size(); ++t) {
    EXPECT_NEAR(r.logits.data()[t], r.exact_logits.data()[t] + 5 * c, 1e-14);
  }
}

TEST(Forward, ImagesAreIndependentOfBatching) {
  const auto m = small_cnn();
  const auto x = random_tensor({4, 2, 8, 8}, 8);
  const auto model = MultiplierModel::synthetic_normal(1e-3, 1e-2);
  const auto whole = forward(m, x, model, 5);
  const auto tail = forward(m, x.slice(2, 2), model, 5, {{}, 2});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(tail.logits(i, j), whole.logits(i + 2, j));
}

TEST(Forward, FirstLayerDistortionMatchesClosedForm) {
  const auto m = small_cnn();
  const auto x = random_tensor({1, 2, 8, 8}, 9);
  const double mu = 1e-4, sigma = 1e-3;
  const auto d = m.descriptor.gemm_dims()[0];
  const double want = d.n * d.p * (d.m * sigma * sigma + d.m * d.m * mu * mu);
  double sum = 0.0, sum_sq = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const double f = forward(m, x, MultiplierModel::synthetic_normal(mu, sigma), s).per_layer_frob_sq[0];
    sum += f;
    sum_sq += f * f;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt((sum_sq / seeds - mean * mean) / (seeds - 1));
  EXPECT_LE(std::fabs(mean - want), 3.0 * se);
}

TEST(Forward, InputShapeMismatch) {
  const auto m = small_cnn();
  EXPECT_THROW(forward(m, random_tensor({1, 3, 8, 8}, 1), MultiplierModel::exact(), 0), DomainError);
}

TEST(PredictClasses, Argmax) {
  const RealMatrix logits(2, 3, {0.1, 0.9, 0.2, 5, -1, 4.9});
  EXPECT_EQ(predict_classes(logits), (std::vector<std::size_t>{1, 0}));
}

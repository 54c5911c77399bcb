#include <doctest.h>

#include <omp.h>

#include "qmireg/error.hpp"
#include "qmireg/kernels.hpp"
#include "qmireg/reference.hpp"
#include "support/oracles.hpp"

using namespace qmireg;
using namespace qmireg::nd;
using qmireg::testing::random_tensor;

namespace {

template <typename T>
ConvLayer<T> random_conv(Rng& rng, std::size_t out, std::size_t in, std::size_t k,
                         std::size_t stride, std::size_t pad) {
    ConvLayer<T> layer;
    layer.kernel = random_tensor<T>(rng, {out, in, k, k});
    layer.bias.resize(out);
    for (auto& b : layer.bias) b = static_cast<T>(rng.uniform(-0.5, 0.5));
    layer.stride = stride;
    layer.pad = pad;
    return layer;
}

template <typename T>
float max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return static_cast<float>(m);
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

} // namespace

TEST_CASE("conv2d with a 1x1 identity kernel copies the input") {
    ConvLayer<float> layer{Tensor({1, 1, 1, 1}, 1.0f), {0.0f}, 1, 0};
    Tensor x({1, 1, 1, 1}, 5.0f);
    CHECK(conv2d_forward(x, layer)[0] == 5.0f);
}

TEST_CASE("conv2d of ones with a 3x3 ones kernel sums nine values") {
    ConvLayer<float> layer{Tensor({1, 1, 3, 3}, 1.0f), {0.0f}, 1, 0};
    const Tensor y = conv2d_forward(Tensor({1, 1, 5, 5}, 1.0f), layer);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (float v : y.values()) CHECK(v == 9.0f);
}

TEST_CASE("conv2d matches the six-loop reference on random shapes") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.below(3);
        const std::size_t stride = 1 + rng.below(2);
        const std::size_t pad = rng.below(2);
        const std::size_t h = k + rng.below(9), w = k + rng.below(9);
        const auto layer = random_conv<float>(rng, 1 + rng.below(4), 1 + rng.below(4), k, stride, pad);
        const Tensor x = random_tensor<float>(rng, {1 + rng.below(3), layer.in_channels(), h, w});
        CHECK(max_abs_diff(conv2d_forward(x, layer), reference::conv2d(x, layer)) <= 1e-6f);
    }
}

TEST_CASE("conv2d rejects channel mismatches and bad strides") {
    Rng rng(1);
    auto layer = random_conv<float>(rng, 2, 3, 3, 1, 1);
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 8, 8}), layer), InvalidInput);
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 2, 2}), random_conv<float>(rng, 2, 3, 3, 1, 0)),
                    InvalidInput);
    layer.stride = 0;
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 8, 8}), layer), InvalidInput);
    layer.stride = 1;
    layer.bias.pop_back();
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 8, 8}), layer), InvalidInput);
}

TEST_CASE("maxpool picks the block maximum") {
    Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    CHECK(maxpool2x2_forward(x).output[0] == 4.0f);

    const auto c = maxpool2x2_forward(Tensor({1, 1, 4, 4}, 7.0f)).output;
    CHECK(c.shape() == Shape{1, 1, 2, 2});
    for (float v : c.values()) CHECK(v == 7.0f);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor r = random_tensor<float>(rng, {2, 3, 2 * (1 + rng.below(4)), 2 * (1 + rng.below(4))});
        CHECK(maxpool2x2_forward(r).output == reference::maxpool2x2(r));
    }
    CHECK_THROWS_AS(maxpool2x2_forward(Tensor({1, 1, 3, 4})), InvalidInput);
}

TEST_CASE("relu clamps negatives and is idempotent") {
    Tensor x({1, 1, 1, 3}, std::vector<float>{-1.0f, 0.0f, 2.0f});
    const Tensor y = relu_forward(x);
    CHECK(y[0] == 0.0f);
    CHECK(y[1] == 0.0f);
    CHECK(y[2] == 2.0f);
    CHECK(relu_forward(y) == y);
    CHECK(y == reference::relu(x));
}

TEST_CASE("relu backward blocks dead units") {
    Tensor pre({1, 1, 1, 2}, std::vector<float>{-1.0f, 3.0f});
    const Tensor g = relu_backward(pre, Tensor({1, 1, 1, 2}, 5.0f));
    CHECK(g[0] == 0.0f);
    CHECK(g[1] == 5.0f);
}

TEST_CASE("maxpool backward routes the gradient to the maximum only") {
    Tensor x({1, 1, 2, 2}, std::vector<float>{1, 9, 3, 4});
    const auto r = maxpool2x2_forward(x);
    const Tensor g = maxpool2x2_backward(r.index, Tensor({1, 1, 1, 1}, 2.0f));
    CHECK(g[0] == 0.0f);
    CHECK(g[1] == 2.0f);
    CHECK(g[2] == 0.0f);
    CHECK(g[3] == 0.0f);
}

TEST_CASE("maxpool backward without a cached forward is a usage error") {
    CHECK_THROWS_AS(maxpool2x2_backward(PoolIndex{}, Tensor({1, 1, 1, 1})), UsageError);
}

TEST_CASE("conv2d backward agrees with central differences") {
    Rng rng(5);
    for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 1}, {1, 0}}) {
        const auto layer = random_conv<double>(rng, 3, 2, 3, stride, pad);
        const auto x = random_tensor<double>(rng, {2, 2, 6, 6});
        const auto probe = random_tensor<double>(rng, conv2d_output_shape(x.shape(), layer));
        auto objective = [&](const BasicTensor<double>& in, const ConvLayer<double>& l) {
            return qmireg::testing::dot(conv2d_forward(in, l).values(), probe.values());
        };
        const auto grads = conv2d_backward(x, layer, probe);
        const double h = 1e-3;

        auto gx = qmireg::testing::numeric_gradient(as_vector(x.values()), [&](const std::vector<double>& v) {
            return objective(BasicTensor<double>(x.shape(), v), layer);
        }, h);
        CHECK(qmireg::testing::relative_error(grads.input.values(), gx) <= 1e-4);

        auto gk = qmireg::testing::numeric_gradient(as_vector(layer.kernel.values()), [&](const std::vector<double>& v) {
            auto l = layer;
            l.kernel = BasicTensor<double>(layer.kernel.shape(), v);
            return objective(x, l);
        }, h);
        CHECK(qmireg::testing::relative_error(grads.kernel.values(), gk) <= 1e-4);

        auto gb = qmireg::testing::numeric_gradient(layer.bias, [&](const std::vector<double>& v) {
            auto l = layer;
            l.bias = v;
            return objective(x, l);
        }, h);
        CHECK(qmireg::testing::relative_error(grads.bias, gb) <= 1e-4);
    }
}

TEST_CASE("maxpool and relu backward agree with central differences") {
    Rng rng(6);
    // Distinct values spaced well beyond h so no block maximum changes under perturbation.
    BasicTensor<double> x({1, 2, 4, 4});
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * double(order[i]) - 1.55;

    const auto pooled = maxpool2x2_forward(x);
    const auto probe = random_tensor<double>(rng, pooled.output.shape());
    const auto g = maxpool2x2_backward(pooled.index, probe);
    const auto num = qmireg::testing::numeric_gradient(as_vector(x.values()), [&](const std::vector<double>& v) {
        return qmireg::testing::dot(maxpool2x2_forward(BasicTensor<double>(x.shape(), v)).output.values(),
                                    probe.values());
    }, 1e-3);
    CHECK(qmireg::testing::relative_error(g.values(), num) <= 1e-4);

    const auto probe2 = random_tensor<double>(rng, x.shape());
    const auto gr = relu_backward(x, probe2);
    const auto numr = qmireg::testing::numeric_gradient(as_vector(x.values()), [&](const std::vector<double>& v) {
        return qmireg::testing::dot(relu_forward(BasicTensor<double>(x.shape(), v)).values(), probe2.values());
    }, 1e-3);
    CHECK(qmireg::testing::relative_error(gr.values(), numr) <= 1e-4);
}

TEST_CASE("sgd momentum step") {
    SUBCASE("plain step") {
        std::vector<float> p{1.0f}, g{2.0f}, v{0.0f};
        sgd_momentum_step<float>(p, g, v, 0.1f, 0.0f);
        CHECK(p[0] == doctest::Approx(0.8f));
    }
    SUBCASE("zero gradient and zero velocity leave parameters unchanged") {
        std::vector<float> p{0.25f, -3.0f}, g{0.0f, 0.0f}, v{0.0f, 0.0f};
        sgd_momentum_step<float>(p, g, v, 0.1f, 0.9f);
        CHECK(p == std::vector<float>{0.25f, -3.0f});
    }
    SUBCASE("velocity accumulates") {
        std::vector<double> p{0.0}, g{1.0}, v{0.0};
        sgd_momentum_step<double>(p, g, v, 1.0, 0.9);
        CHECK(p[0] == doctest::Approx(-1.0));
        sgd_momentum_step<double>(p, g, v, 1.0, 0.9);
        CHECK(p[0] == doctest::Approx(-2.9));
    }
    SUBCASE("size mismatch") {
        std::vector<float> p{1.0f}, g{1.0f, 2.0f}, v{0.0f};
        CHECK_THROWS_AS(sgd_momentum_step<float>(p, g, v, 0.1f, 0.9f), InvalidInput);
    }
}

TEST_CASE("kernel results do not depend on the thread count") {
    Rng rng(9);
    const auto layer = random_conv<float>(rng, 8, 4, 3, 1, 1);
    const Tensor x = random_tensor<float>(rng, {6, 4, 12, 12});
    const Tensor probe = random_tensor<float>(rng, conv2d_output_shape(x.shape(), layer));
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Tensor y1 = conv2d_forward(x, layer);
    const auto g1 = conv2d_backward(x, layer, probe);
    omp_set_num_threads(4);
    const Tensor y4 = conv2d_forward(x, layer);
    const auto g4 = conv2d_backward(x, layer, probe);
    omp_set_num_threads(saved);
    CHECK(y1 == y4);
    CHECK(g1.kernel == g4.kernel);
    CHECK(g1.bias == g4.bias);
    CHECK(g1.input == g4.input);
}

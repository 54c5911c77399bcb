#include <doctest.h>

#include "qmireg/error.hpp"
#include "qmireg/network.hpp"
#include "support/oracles.hpp"

using namespace qmireg;
using namespace qmireg::model;
using nd::Shape;

TEST_CASE("training-size inputs collapse to a single output cell") {
    for (auto v : {Variant::RF32, Variant::RF64}) {
        const auto net = build_model(v, 0);
        const std::size_t s = window_size(v);
        const Tensor y = forward(net, Tensor({1, 3, s, s}, 0.5f));
        CHECK(y.shape() == Shape{1, 2, 1, 1});
    }
}

TEST_CASE("layer list and parameter count") {
    // 3x3 convs 3->16->16->32->32 plus a 2x2 classifier 32->2, with biases.
    constexpr std::size_t by_hand = (16 * 3 * 9 + 16) + (16 * 16 * 9 + 16) + (32 * 16 * 9 + 32) +
                                    (32 * 32 * 9 + 32) + (2 * 32 * 4 + 2);
    static_assert(by_hand == 16914);
    for (auto v : {Variant::RF32, Variant::RF64}) {
        const auto net = build_model(v, 3);
        REQUIRE(net.layers.size() == 5);
        CHECK(net.parameter_count() == by_hand);
        CHECK(expected_parameter_count(v) == by_hand);
        CHECK(net.layers.back().conv.out_channels() == 2);
        CHECK_FALSE(net.layers.back().relu);
        CHECK_FALSE(net.layers.back().pool);
        CHECK(net.layers[0].conv.stride == (v == Variant::RF64 ? 2u : 1u));
        for (const auto& l : net.layers)
            for (float b : l.conv.bias) CHECK(b == 0.0f);
    }
}

TEST_CASE("both variants share downstream shapes and a 128-d embedding") {
    const auto a = forward_trace(build_model(Variant::RF32, 1), Tensor({1, 3, 32, 32}, 0.1f));
    const auto b = forward_trace(build_model(Variant::RF64, 1), Tensor({1, 3, 64, 64}, 0.1f));
    for (std::size_t i = 1; i < a.layers.size(); ++i)
        CHECK(a.layers[i].input.shape() == b.layers[i].input.shape());
    CHECK(a.embedding.shape() == Shape{1, 32, 2, 2});
    CHECK(a.embedding.shape() == b.embedding.shape());
    CHECK(build_model(Variant::RF32, 0).embedding_dim() == 128);
    CHECK(build_model(Variant::RF64, 0).embedding_dim() == 128);
}

TEST_CASE("output geometry") {
    CHECK(output_geometry(Variant::RF32, 32, 32) == OutputGeometry{1, 1, 16, 32});
    CHECK(output_geometry(Variant::RF32, 1080, 1920) == OutputGeometry{66, 119, 16, 32});
    CHECK(output_geometry(Variant::RF64, 1080, 1920) == OutputGeometry{32, 59, 32, 64});
    CHECK(output_geometry(Variant::RF64, 64, 100) == OutputGeometry{1, 2, 32, 64});
    CHECK_THROWS_AS(output_geometry(Variant::RF32, 31, 64), InvalidInput);
    CHECK_THROWS_AS(output_geometry(Variant::RF64, 64, 63), InvalidInput);
}

TEST_CASE("variant names") {
    CHECK(parse_variant("rf32") == Variant::RF32);
    CHECK(parse_variant("rf64") == Variant::RF64);
    CHECK(variant_name(Variant::RF64) == "rf64");
    CHECK_THROWS_AS(parse_variant("rf16"), InvalidConfig);
}

TEST_CASE("build_model is deterministic per seed") {
    CHECK(build_model(Variant::RF32, 5) == build_model(Variant::RF32, 5));
    CHECK_FALSE(build_model(Variant::RF32, 5) == build_model(Variant::RF32, 6));
}

TEST_CASE("optimized forward matches the reference kernels") {
    Rng rng(2);
    for (auto v : {Variant::RF32, Variant::RF64}) {
        auto net = build_model(v, 9);
        for (auto& l : net.layers)
            for (auto& b : l.conv.bias) b = float(rng.uniform(-0.1, 0.1));
        const std::size_t s = output_stride(v);
        const Tensor x = qmireg::testing::random_tensor<float>(rng, {2, 3, 4 * s, 6 * s}, 0.0, 1.0);
        const Tensor a = forward(net, x), b = forward_reference(net, x);
        REQUIRE(a.shape() == b.shape());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-5f);
    }
}

TEST_CASE("forward rejects unaligned or undersized inputs") {
    const auto net = build_model(Variant::RF32, 0);
    CHECK_THROWS_AS(forward(net, Tensor({1, 3, 40, 32})), InvalidInput);
    CHECK_THROWS_AS(forward(net, Tensor({1, 3, 16, 16})), InvalidInput);
    CHECK_THROWS_AS(forward(net, Tensor({1, 1, 32, 32})), InvalidInput);
}

TEST_CASE("embedding gradient never reaches the classifier") {
    Rng rng(4);
    const auto net = build_model(Variant::RF32, 4);
    const auto trace = forward_trace(net, qmireg::testing::random_tensor<float>(rng, {4, 3, 32, 32}, 0.0, 1.0));
    const Tensor ge = qmireg::testing::random_tensor<float>(rng, trace.embedding.shape());
    const auto g = backward(net, trace, Tensor(trace.scores.shape()), &ge);
    for (float v : g.kernel.back().values()) CHECK(v == 0.0f);
    for (float v : g.bias.back()) CHECK(v == 0.0f);
    double mass = 0.0;
    for (float v : g.kernel[0].values()) mass += std::abs(v);
    CHECK(mass > 0.0);
}

TEST_CASE("backward without a matching trace is a usage error") {
    const auto net = build_model(Variant::RF32, 0);
    CHECK_THROWS_AS(backward(net, ForwardTrace{}, Tensor({1, 2, 1, 1})), UsageError);
}

TEST_CASE("model files round-trip bit-exactly") {
    for (auto v : {Variant::RF32, Variant::RF64}) {
        const auto net = build_model(v, 17);
        const auto bytes = serialize(net);
        const auto back = deserialize(bytes);
        CHECK(back == net);
        CHECK(serialize(back) == bytes);
    }
}

TEST_CASE("malformed model files") {
    const auto good = serialize(build_model(Variant::RF32, 0));
    SUBCASE("bad magic") {
        auto b = good;
        b[0] = 'X';
        CHECK_THROWS_AS(deserialize(b), ParseError);
    }
    SUBCASE("truncated") {
        auto b = good;
        b.resize(b.size() - 3);
        try {
            deserialize(b);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset() <= b.size());
        }
    }
    SUBCASE("trailing bytes") {
        auto b = good;
        b.push_back(0);
        CHECK_THROWS_AS(deserialize(b), ParseError);
    }
    SUBCASE("unknown version") {
        auto b = good;
        b[4] = 9;
        CHECK_THROWS_AS(deserialize(b), ParseError);
    }
}

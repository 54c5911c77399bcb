#include <doctest.h>

#include "qmireg/config.hpp"
#include "qmireg/error.hpp"

using namespace qmireg;
using namespace qmireg::config;

TEST_CASE("normalized config round-trips") {
    train::TrainConfig c;
    c.variant = model::Variant::RF64;
    c.loss = objectives::LossKind::CrossEntropy;
    c.eta = 0.25;
    c.regularizer = false;
    c.mi_scope = train::MiScope::Dataset;
    c.batch_size = 17;
    c.epochs = 3;
    c.lr_initial = 0.01;
    c.lr_final = 0.002;
    c.lr_drop_fraction = 0.5;
    c.momentum = 0.5;
    c.seed = 123456789012345ULL;
    const auto text = config_text(c);
    CHECK(parse_config(text) == c);
    CHECK(config_text(parse_config(text)) == text);
    CHECK(parse_config(config_text(train::TrainConfig{})) == train::TrainConfig{});
}

TEST_CASE("config parsing") {
    const auto c = parse_config("# desk run\n  eta = 0   \n\nvariant=rf64 # trailing\nbatch_size = 32\n");
    CHECK(c.eta == 0.0);
    CHECK(c.variant == model::Variant::RF64);
    CHECK(c.batch_size == 32);
    CHECK(c.epochs == 100);

    const auto desk = parse_config("seed = 4\n", train::TrainConfig::desk_scale());
    CHECK(desk.epochs == 10);
    CHECK(desk.seed == 4);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("colour = red\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("eta\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("eta = 2\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("batch_size = -4\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("batch_size = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("loss = squared\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("regularizer = maybe\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("epochs = 3x\n"), InvalidConfig);
    try {
        parse_config("eta = 0.1\nfoo = 1\n");
        FAIL("expected InvalidConfig");
    } catch (const InvalidConfig& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

#include <doctest.h>

#include <vector>

#include "poai/errors.hpp"
#include "poai/serialize.hpp"

using namespace poai;
using nlohmann::json;

TEST_SUITE("serialize") {

TEST_CASE("pool JSON: key order and round trip") {
    NodePool p;
    p.super_ids = {1, 2};
    p.random_ids = {4};
    p.pool_size = 3;
    p.sup_num = 2;
    p.rad_num = 1;
    p.threshold = 65.2;
    const auto j = pool_to_json(p, 7);
    CHECK(j.dump() ==
          R"({"pool_size":3,"sup_num":2,"threshold":65.2,"super_ids":[1,2],"random_ids":[4],"seed":7})");
    CHECK(pool_from_json(j) == p);
    CHECK(pool_from_json(nlohmann::ordered_json::parse(j.dump())) == p);
}

TEST_CASE("pool JSON: inconsistent documents rejected") {
    auto j = nlohmann::ordered_json::parse(
        R"({"pool_size":4,"sup_num":2,"threshold":1,"super_ids":[1,2],"random_ids":[4],"seed":0})");
    CHECK_THROWS_AS(pool_from_json(j), FormatError);
    j = nlohmann::ordered_json::parse(R"({"pool_size":3})");
    CHECK_THROWS_AS(pool_from_json(j), FormatError);
}

TEST_CASE("metrics JSON keys") {
    Metrics m;
    m.total_hash_ops = 12;
    const auto j = metrics_to_json(m, Protocol::PoW, 3);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"protocol", "seed", "gini", "producer_entropy_bits",
                                           "random_node_block_fraction", "mean_confirmation_time_s",
                                           "total_hash_ops", "failed_round_fraction"});
    CHECK(j["protocol"] == "PoW");
    CHECK(j["total_hash_ops"] == 12);
}

TEST_CASE("config sections: known keys applied, others kept") {
    TrainConfig t;
    apply_json(json::parse(R"({"epochs":5,"learning_rate":0.5})"), t);
    CHECK(t.epochs == 5);
    CHECK(t.learning_rate == 0.5);
    CHECK(t.batch_size == TrainConfig{}.batch_size);

    SimConfig s;
    apply_json(json::parse(R"({"protocol":"dpos","selection":{"whole_max":30},"rounds_per_epoch":7})"), s);
    CHECK(s.protocol == Protocol::DPoS);
    CHECK(s.selection.whole_max == 30);
    CHECK(s.rounds_per_epoch == 7);
    CHECK(s.epochs == SimConfig{}.epochs);
}

TEST_CASE("config sections: unknown keys and bad values rejected") {
    TrainConfig t;
    try {
        apply_json(json::parse(R"({"epoch":5})"), t);
        FAIL("expected FieldError");
    } catch (const FieldError& e) {
        CHECK(e.field() == "epoch");
    }
    CHECK_THROWS_AS(apply_json(json::parse(R"({"epochs":"many"})"), t), FieldError);
    CHECK_THROWS_AS(apply_json(json::parse("[1]"), t), ValidationError);

    SelectionConfig sel;
    CHECK_THROWS_AS(apply_json(json::parse(R"({"wholemax":3})"), sel), FieldError);
    SimConfig s;
    CHECK_THROWS_AS(apply_json(json::parse(R"({"protocol":"raft"})"), s), ValidationError);
    CHECK_THROWS_AS(apply_json(json::parse(R"({"selection":{"x":1}})"), s), FieldError);
}

}  // TEST_SUITE

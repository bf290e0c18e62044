#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "poai/consensus_sim.hpp"
#include "poai/errors.hpp"

using namespace poai;

namespace {

std::vector<NodeFeatures> no_failures(std::vector<NodeFeatures> nodes) {
    for (auto& n : nodes) {
        n.attacked_probability = 0.0;
        n.discarded_probability = 0.0;
    }
    return nodes;
}

SimConfig small_config(std::size_t nodes, std::size_t epochs, std::size_t rounds, Protocol p) {
    SimConfig cfg;
    cfg.num_nodes = nodes;
    cfg.epochs = epochs;
    cfg.rounds_per_epoch = rounds;
    cfg.protocol = p;
    return cfg;
}

SimResult ledger_with(std::vector<double> elapsed, std::size_t depth) {
    SimResult r;
    r.confirmation_depth = depth;
    r.network = {1};
    for (double e : elapsed) r.ledger.push_back({0, r.ledger.size(), 1, NodeClass::Super, e, 0, 0});
    r.total_rounds = r.ledger.size();
    return r;
}

}  // namespace

TEST_SUITE("consensus_sim") {

TEST_CASE("next_producer: rotation over super then random ids") {
    NodePool p;
    p.super_ids = {1, 2};
    p.random_ids = {4};
    p.pool_size = 3;
    std::vector<NodeId> seq;
    for (std::size_t r = 0; r < 5; ++r) seq.push_back(next_producer(p, r));
    CHECK(seq == std::vector<NodeId>{1, 2, 4, 1, 2});
    CHECK(next_producer(p, 3) == next_producer(p, 0));
    CHECK(next_producer(p, 3000) == next_producer(p, 0));

    NodePool single;
    single.super_ids = {7};
    for (std::size_t r = 0; r < 4; ++r) CHECK(next_producer(single, r) == 7);

    CHECK_THROWS_AS(next_producer(NodePool{}, 0), ValidationError);
}

TEST_CASE("protocol names") {
    CHECK(parse_protocol("poai") == Protocol::PoAI);
    CHECK(parse_protocol("DPOS") == Protocol::DPoS);
    CHECK(to_string(Protocol::PoW) == "PoW");
    CHECK_THROWS_AS(parse_protocol("pbft"), ValidationError);
}

TEST_CASE("PoAI: no failures means pure rotation") {
    const auto nodes = no_failures(make_network(30, 4));
    const SimConfig cfg = small_config(30, 6, 25, Protocol::PoAI);
    const SimResult r = run_simulation(cfg, nodes);
    REQUIRE(r.pools.size() == 6);
    REQUIRE(r.ledger.size() == 150);
    for (const auto& b : r.ledger) {
        CHECK(b.producer_id == next_producer(r.pools[b.epoch], b.round));
        CHECK(b.failed_attempts == 0);
        CHECK(b.hash_ops == 0);
        CHECK(b.producer_class == classify(b.producer_id, r.pools[b.epoch]));
    }
    CHECK(r.abandoned_rounds == 0);
    CHECK(compute_metrics(r).failed_round_fraction == 0.0);
}

TEST_CASE("PoAI: identical inputs give identical ledgers") {
    const auto nodes = make_network(40, 2);
    SimConfig cfg = small_config(40, 5, 30, Protocol::PoAI);
    cfg.seed = 99;
    const SimResult a = run_simulation(cfg, nodes), b = run_simulation(cfg, nodes);
    CHECK(a == b);
    CHECK(compute_metrics(a) == compute_metrics(b));
    cfg.seed = 100;
    CHECK(run_simulation(cfg, nodes).ledger != a.ledger);
}

TEST_CASE("PoAI: 10 nodes, 5 epochs of 20 rounds produce random-node blocks") {
    const auto nodes = make_network(10, 0);
    SimConfig cfg = small_config(10, 5, 20, Protocol::PoAI);
    cfg.selection.whole_max = 10;  // default 20 needs at least 11 nodes
    const Metrics m = compute_metrics(run_simulation(cfg, nodes));
    CHECK(m.random_node_block_fraction > 0.0);
    CHECK(m.total_hash_ops == 0);
}

TEST_CASE("PoAI: failures skip to the next pool member") {
    auto nodes = make_network(20, 3);
    for (auto& n : nodes) {
        n.attacked_probability = 0.3;
        n.discarded_probability = 0.2;
    }
    SimConfig cfg = small_config(20, 4, 40, Protocol::PoAI);
    cfg.selection.whole_max = 12;
    const SimResult r = run_simulation(cfg, nodes);
    const Metrics m = compute_metrics(r);
    CHECK(m.failed_round_fraction > 0.0);
    CHECK(r.ledger.size() + r.abandoned_rounds == r.total_rounds);
    for (const auto& b : r.ledger) {
        CHECK(b.failed_attempts < r.pools[b.epoch].pool_size);
        CHECK(b.producer_class != NodeClass::Unknown);
        CHECK(b.elapsed > 0.0);
    }
}

TEST_CASE("PoAI: every node down abandons every round") {
    auto nodes = make_network(12, 1);
    for (auto& n : nodes) n.attacked_probability = 1.0;
    SimConfig cfg = small_config(12, 2, 5, Protocol::PoAI);
    cfg.selection.whole_max = 10;
    const SimResult r = run_simulation(cfg, nodes);
    CHECK(r.ledger.empty());
    CHECK(r.abandoned_rounds == 10);
    CHECK_THROWS_AS(compute_metrics(r), ValidationError);
}

TEST_CASE("simulation input errors") {
    const auto nodes = make_network(10, 0);
    SimConfig cfg = small_config(11, 1, 1, Protocol::PoAI);
    CHECK_THROWS_AS(run_simulation(cfg, nodes), ValidationError);
    cfg.num_nodes = 10;
    CHECK_THROWS_AS(run_simulation(cfg, nodes), ConfigError);  // whole_max 20 needs 11 nodes
    cfg.epochs = 0;
    CHECK_THROWS_AS(run_simulation(cfg, nodes), FieldError);
    cfg = small_config(1, 1, 1, Protocol::PoS);
    CHECK_THROWS_AS(run_baseline(cfg, std::span(nodes).first(1)), ValidationError);
}

TEST_CASE("PoW: a single node with computing power produces every block") {
    auto nodes = make_network(8, 5);
    for (auto& n : nodes) n.computing_power_ratio = 0.0;
    nodes[3].computing_power_ratio = 1.0;
    const SimConfig cfg = small_config(8, 3, 20, Protocol::PoW);
    const SimResult r = run_baseline(cfg, nodes);
    REQUIRE(r.ledger.size() == 60);
    std::uint64_t ops = 0;
    for (const auto& b : r.ledger) {
        CHECK(b.producer_id == nodes[3].node_id);
        CHECK(b.hash_ops == static_cast<std::uint64_t>(std::llround(b.elapsed * 1e6)));
        ops += b.hash_ops;
    }
    CHECK(compute_metrics(r).total_hash_ops == ops);
    CHECK(ops > 0);

    nodes[3].computing_power_ratio = 0.0;
    CHECK_THROWS_AS(run_baseline(cfg, nodes), ConfigError);
}

TEST_CASE("PoW: block intervals average the configured mean") {
    const auto nodes = make_network(20, 6);
    SimConfig cfg = small_config(20, 10, 1000, Protocol::PoW);
    const SimResult r = run_baseline(cfg, nodes);
    double sum = 0.0;
    for (const auto& b : r.ledger) sum += b.elapsed;
    const double mean = sum / static_cast<double>(r.ledger.size());
    // exponential: sd of the mean = 600 / sqrt(10^4) = 6
    CHECK(std::abs(mean - 600.0) < 4 * 6.0);
}

TEST_CASE("PoS: equal payoffs give a uniform producer distribution") {
    auto nodes = make_network(10, 7);
    for (auto& n : nodes) n.payoff = 500.0;
    const SimConfig cfg = small_config(10, 100, 100, Protocol::PoS);
    const SimResult r = run_baseline(cfg, nodes);
    std::map<NodeId, double> counts;
    for (const auto& b : r.ledger) {
        counts[b.producer_id] += 1.0;
        CHECK(b.hash_ops == 0);
        CHECK(b.elapsed > 0.0);
    }
    const double n = 1e4, p = 0.1, sigma = std::sqrt(n * p * (1 - p));
    CHECK(counts.size() == 10);
    for (const auto& [id, c] : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);
}

TEST_CASE("DPoS: delegates are the top payoff nodes, produced round-robin") {
    const auto nodes = make_network(40, 8);
    const SimConfig cfg = small_config(40, 2, 50, Protocol::DPoS);
    const SimResult r = run_baseline(cfg, nodes);
    const std::size_t k = dpos_delegate_count(cfg.selection, 40);
    CHECK(k == 15);  // midpoint of 11..19
    REQUIRE(r.delegates.size() == k);

    std::vector<NodeFeatures> sorted = nodes;
    std::sort(sorted.begin(), sorted.end(), [](const NodeFeatures& a, const NodeFeatures& b) {
        return a.payoff != b.payoff ? a.payoff > b.payoff : a.node_id < b.node_id;
    });
    std::set<NodeId> oracle;
    for (std::size_t i = 0; i < k; ++i) oracle.insert(sorted[i].node_id);
    CHECK(std::set<NodeId>(r.delegates.begin(), r.delegates.end()) == oracle);

    for (std::size_t i = 0; i < r.ledger.size(); ++i) CHECK(r.ledger[i].producer_id == r.delegates[i % k]);
}

TEST_CASE("baselines are deterministic and dispatch through run") {
    const auto nodes = make_network(25, 9);
    for (Protocol p : {Protocol::PoW, Protocol::PoS, Protocol::DPoS, Protocol::PoAI}) {
        SimConfig cfg = small_config(25, 3, 20, p);
        cfg.seed = 5;
        CHECK(run(cfg, nodes) == run(cfg, nodes));
        CHECK(run(cfg, nodes).protocol == p);
    }
}

TEST_CASE("metrics: block count examples") {
    SimResult r;
    r.network = {1, 2, 3, 4};
    for (NodeId id : {1, 2, 3, 4}) r.ledger.push_back({0, 0, id, NodeClass::Super, 1.0, 0, 0});
    r.total_rounds = 4;
    Metrics m = compute_metrics(r);
    CHECK(m.gini == 0.0);
    CHECK(m.producer_entropy == doctest::Approx(2.0));

    for (auto& b : r.ledger) b.producer_id = 1;
    m = compute_metrics(r);
    CHECK(m.gini == doctest::Approx(0.75));
    CHECK(m.producer_entropy == 0.0);
}

TEST_CASE("metrics: confirmation time over the following blocks") {
    // depth 2 over elapsed [1,2,3,4]: windows after block 0 = 2+3, after block 1 = 3+4
    CHECK(compute_metrics(ledger_with({1, 2, 3, 4}, 2)).mean_confirmation_time == doctest::Approx(6.0));
    // short ledger: partial windows [2+3, 3, 0]
    CHECK(compute_metrics(ledger_with({1, 2, 3}, 6)).mean_confirmation_time == doctest::Approx(8.0 / 3.0));
    // constant elapsed e gives depth * e
    CHECK(compute_metrics(ledger_with(std::vector<double>(50, 1.5), 6)).mean_confirmation_time ==
          doctest::Approx(9.0));
}

TEST_CASE("metrics: random fraction and failed fraction") {
    SimResult r;
    r.network = {1, 2};
    r.ledger = {{0, 0, 1, NodeClass::Super, 1, 0, 0},
                {0, 1, 2, NodeClass::Random, 1, 0, 2},
                {0, 2, 1, NodeClass::Super, 1, 0, 0}};
    r.total_rounds = 4;
    r.abandoned_rounds = 1;
    const Metrics m = compute_metrics(r);
    CHECK(m.random_node_block_fraction == doctest::Approx(1.0 / 3.0));
    CHECK(m.failed_round_fraction == doctest::Approx(0.5));
    CHECK_THROWS_AS(compute_metrics(SimResult{}), ValidationError);
}

TEST_CASE("property: metrics stay in range and hash ops follow the protocol") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto nodes = make_network(30, seed);
        for (Protocol p : {Protocol::PoAI, Protocol::PoW, Protocol::PoS, Protocol::DPoS}) {
            SimConfig cfg = small_config(30, 3, 30, p);
            cfg.seed = seed;
            const Metrics m = compute_metrics(run(cfg, nodes));
            CHECK(m.gini >= 0.0);
            CHECK(m.gini <= 1.0);
            CHECK(m.producer_entropy >= 0.0);
            CHECK(m.producer_entropy <= std::log2(30.0) + 1e-12);
            CHECK(m.random_node_block_fraction >= 0.0);
            CHECK(m.random_node_block_fraction <= 1.0);
            CHECK(m.failed_round_fraction >= 0.0);
            CHECK(m.failed_round_fraction <= 1.0);
            CHECK(m.mean_confirmation_time > 0.0);
            if (p == Protocol::PoW) CHECK(m.total_hash_ops > 0);
            else CHECK(m.total_hash_ops == 0);
            if (p != Protocol::PoAI) CHECK(m.random_node_block_fraction == 0.0);
        }
    }
}

TEST_CASE("make_network: failure odds rescaled, deterministic") {
    const auto a = make_network(200, 3);
    CHECK(a == make_network(200, 3));
    for (const auto& n : a) {
        CHECK(n.discarded_probability <= kNetworkMaxDiscarded);
        CHECK(n.attacked_probability <= kNetworkMaxAttacked);
    }
}

TEST_CASE("ledger export") {
    SimResult r = ledger_with({1.5, 2}, 6);
    r.ledger[1].producer_class = NodeClass::Random;
    r.ledger[1].failed_attempts = 1;
    std::ostringstream out;
    write_ledger(r, out);
    CHECK(out.str() == std::string(kLedgerHeader) + "\n0,0,1,super,1.5,0,0\n0,1,1,random,2,0,1\n");
}

}  // TEST_SUITE

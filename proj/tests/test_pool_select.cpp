#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

#include "poai/errors.hpp"
#include "poai/pool_select.hpp"
#include "poai/rng.hpp"

using namespace poai;

namespace {

// A..E of the worked example
constexpr NodeId A = 1, B = 2, C = 3, D = 4, E = 5;

RankedList five_nodes() {
    const std::vector<ScoredNode> s = {{C, 50}, {A, 125}, {E, 3}, {B, 65.2}, {D, 7.5}};
    return rank_nodes(s);
}

std::vector<NodeId> ids_of(const RankedList& r) {
    std::vector<NodeId> out;
    for (const auto& e : r.entries()) out.push_back(e.node_id);
    return out;
}

std::vector<ScoredNode> random_scores(Rng& rng, std::size_t n) {
    std::vector<ScoredNode> s;
    for (std::size_t i = 0; i < n; ++i)
        s.push_back({static_cast<NodeId>(i * 7 + 3), static_cast<double>(rng.uniform_int(0, 20))});
    return s;
}

// Top-k by brute force: node x is in the top k iff fewer than k nodes beat it.
std::set<NodeId> top_k_oracle(const std::vector<ScoredNode>& s, std::size_t k) {
    std::set<NodeId> out;
    for (const auto& x : s) {
        std::size_t better = 0;
        for (const auto& y : s)
            if (y.atn > x.atn || (y.atn == x.atn && y.node_id < x.node_id)) ++better;
        if (better < k) out.insert(x.node_id);
    }
    return out;
}

}  // namespace

TEST_SUITE("pool_select") {

TEST_CASE("rank: descending by ATN") {
    const std::vector<ScoredNode> s = {{1, 65.2}, {2, 125}, {3, 7.5}};
    CHECK(ids_of(rank_nodes(s)) == std::vector<NodeId>{2, 1, 3});
}

TEST_CASE("rank: ties broken by ascending id, empty input") {
    const std::vector<ScoredNode> s = {{5, 10}, {3, 10}, {9, 10}};
    CHECK(ids_of(rank_nodes(s)) == std::vector<NodeId>{3, 5, 9});
    CHECK(rank_nodes(std::vector<ScoredNode>{}).empty());
}

TEST_CASE("rank: duplicate ids and non-finite scores rejected") {
    const std::vector<ScoredNode> dup = {{1, 3}, {1, 4}};
    CHECK_THROWS_AS(rank_nodes(dup), ValidationError);
    const std::vector<ScoredNode> nan = {{1, 3}, {2, std::numeric_limits<double>::quiet_NaN()}};
    CHECK_THROWS_AS(rank_nodes(nan), ValidationError);
}

TEST_CASE("property: ranking ignores input order") {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        std::vector<ScoredNode> s = random_scores(rng, 12);
        const auto first = ids_of(rank_nodes(s));
        for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.uniform_int(0, i - 1)]);
        CHECK(ids_of(rank_nodes(s)) == first);
    }
}

TEST_CASE("select: worked example with injected draws") {
    SelectionConfig cfg;
    cfg.whole_max = 5;
    const NodePool p = select_pool(five_nodes(), cfg, InjectedDraws{3, 2, {D}});
    CHECK(p.super_ids == std::vector<NodeId>{A, B});
    CHECK(p.random_ids == std::vector<NodeId>{D});
    CHECK(p.threshold == 65.2);
    CHECK(p.pool_size == 3);
    CHECK(p.sup_num == 2);
    CHECK(p.rad_num == 1);

    CHECK(classify(A, p) == NodeClass::Super);
    CHECK(classify(D, p) == NodeClass::Random);
    CHECK(classify(E, p) == NodeClass::Unknown);
    CHECK(classify(999, p) == NodeClass::Unknown);
}

TEST_CASE("select: injected draws are checked against the random ranges") {
    SelectionConfig cfg;
    cfg.whole_max = 5;
    const RankedList r = five_nodes();
    CHECK_THROWS_AS(select_pool(r, cfg, InjectedDraws{5, 2, {C, D, E}}), ConfigError);  // pool_size >= whole_max
    CHECK_THROWS_AS(select_pool(r, cfg, InjectedDraws{3, 1, {C, D}}), ConfigError);     // sup_num below ceil(0.5*3)
    CHECK_THROWS_AS(select_pool(r, cfg, InjectedDraws{3, 2, {B}}), ConfigError);        // super node as random
    CHECK_THROWS_AS(select_pool(r, cfg, InjectedDraws{3, 2, {}}), ConfigError);
    CHECK_THROWS_AS(select_pool(r, cfg, InjectedDraws{4, 2, {D, D}}), ConfigError);
}

TEST_CASE("select: equal ATN picks the smallest ids as super nodes") {
    const std::vector<ScoredNode> s = {{8, 40}, {2, 40}, {6, 40}, {4, 40}, {9, 40}};
    SelectionConfig cfg;
    cfg.whole_max = 5;
    const NodePool p = select_pool(rank_nodes(s), cfg, InjectedDraws{3, 2, {9}});
    CHECK(p.super_ids == std::vector<NodeId>{2, 4});
    CHECK(p.threshold == 40);
}

TEST_CASE("select: configuration errors") {
    SelectionConfig cfg;
    cfg.whole_max = 4;
    const std::vector<ScoredNode> two = {{1, 2}, {2, 1}};
    CHECK_THROWS_AS(select_pool(rank_nodes(two), cfg), ConfigError);
    const std::vector<ScoredNode> one = {{1, 2}};
    CHECK_THROWS_AS(select_pool(rank_nodes(one), cfg), ConfigError);
    cfg.whole_max = 3;
    CHECK_THROWS_AS(select_pool(five_nodes(), cfg), ConfigError);
    cfg.whole_max = 20;
    cfg.sup_fraction_min = 1.0;
    CHECK_THROWS_AS(select_pool(five_nodes(), cfg), FieldError);
}

TEST_CASE("bounds: pool size and super count ranges") {
    CHECK(pool_size_bounds(20, 100).lo == 11);
    CHECK(pool_size_bounds(20, 100).hi == 19);
    CHECK(pool_size_bounds(5, 5).lo == 3);
    CHECK(pool_size_bounds(5, 5).hi == 4);
    CHECK_THROWS_AS(pool_size_bounds(20, 10), ConfigError);
    CHECK(sup_num_bounds(3, 0.5).lo == 2);
    CHECK(sup_num_bounds(3, 0.5).hi == 2);
    CHECK(sup_num_bounds(19, 0.5).lo == 10);
    CHECK(sup_num_bounds(19, 0.5).hi == 18);
    CHECK(sup_num_bounds(4, 0.9).lo == 3);  // ceil(3.6) = 4 clamped below pool size
}

TEST_CASE("property: pools partition the network and super set is the top of the ranking") {
    Rng gen(21);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t n = gen.uniform_int(2, 10);
        const std::vector<ScoredNode> s = random_scores(gen, n);
        SelectionConfig cfg;
        cfg.whole_max = gen.uniform_int(4, 2 * n);
        cfg.seed = gen.next_u64();
        if (cfg.whole_max / 2 + 1 > n) {
            CHECK_THROWS_AS(select_pool(rank_nodes(s), cfg), ConfigError);
            continue;
        }
        const RankedList r = rank_nodes(s);
        const NodePool p = select_pool(r, cfg);

        CHECK(p.pool_size > cfg.whole_max / 2);
        CHECK(p.pool_size < cfg.whole_max);
        CHECK(p.pool_size <= n);
        CHECK(p.sup_num + p.rad_num == p.pool_size);
        CHECK(p.super_ids.size() == p.sup_num);
        CHECK(p.random_ids.size() == p.rad_num);
        CHECK(p.rad_num >= 1);
        CHECK(std::is_sorted(p.random_ids.begin(), p.random_ids.end()));

        const std::set<NodeId> sup(p.super_ids.begin(), p.super_ids.end());
        CHECK(sup == top_k_oracle(s, p.sup_num));
        for (NodeId id : p.random_ids) CHECK_FALSE(sup.contains(id));

        std::size_t counts[3] = {0, 0, 0};
        for (const auto& e : s) {
            const NodeClass c = classify(e.node_id, p);
            ++counts[static_cast<int>(c)];
            if (c == NodeClass::Super) CHECK(e.atn >= p.threshold);
            else CHECK(e.atn <= p.threshold);
        }
        CHECK(counts[0] == p.sup_num);
        CHECK(counts[1] == p.rad_num);
        CHECK(counts[0] + counts[1] + counts[2] == n);
    }
}

TEST_CASE("property: super set invariant under positive ATN scaling") {
    Rng gen(5);
    for (int t = 0; t < 200; ++t) {
        std::vector<ScoredNode> s = random_scores(gen, 15);
        SelectionConfig cfg;
        cfg.whole_max = 20;
        cfg.seed = gen.next_u64();
        const NodePool p = select_pool(rank_nodes(s), cfg);
        const double k = gen.uniform(0.01, 100.0);
        for (auto& e : s) e.atn *= k;
        const NodePool q = select_pool(rank_nodes(s), cfg);
        CHECK(q.super_ids == p.super_ids);
        CHECK(q.random_ids == p.random_ids);
    }
}

TEST_CASE("property: same ranking, config and seed give the same pool") {
    Rng gen(9);
    const RankedList r = rank_nodes(random_scores(gen, 30));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SelectionConfig cfg;
        cfg.seed = seed;
        CHECK(select_pool(r, cfg) == select_pool(r, cfg));
    }
}

TEST_CASE("property: every non-super node is drawn at least once over 1000 seeds") {
    std::vector<ScoredNode> s;
    for (NodeId i = 1; i <= 10; ++i) s.push_back({i, static_cast<double>(100 - i)});
    const RankedList r = rank_nodes(s);
    SelectionConfig cfg;
    cfg.whole_max = 10;
    std::set<NodeId> drawn, ever_non_super;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        cfg.seed = seed;
        const NodePool p = select_pool(r, cfg);
        drawn.insert(p.random_ids.begin(), p.random_ids.end());
        for (std::size_t k = p.sup_num; k < r.size(); ++k) ever_non_super.insert(r[k].node_id);
    }
    CHECK(drawn == ever_non_super);
}

TEST_CASE("property: pool size distribution does not depend on network size") {
    Rng gen(17);
    const RankedList small = rank_nodes(random_scores(gen, 20));
    const RankedList large = rank_nodes(random_scores(gen, 500));
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        SelectionConfig cfg;
        cfg.seed = seed;
        const NodePool a = select_pool(small, cfg), b = select_pool(large, cfg);
        CHECK(a.pool_size == b.pool_size);
        CHECK(a.sup_num == b.sup_num);
    }
}

TEST_CASE("classify: class names") {
    CHECK(to_string(NodeClass::Super) == "super");
    CHECK(to_string(NodeClass::Random) == "random");
    CHECK(to_string(NodeClass::Unknown) == "unknown");
}

}  // TEST_SUITE

#include "poai/pool_select.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "poai/errors.hpp"

namespace poai {

RankedList rank_nodes(std::span<const ScoredNode> scores) {
    std::unordered_set<NodeId> seen;
    for (const auto& s : scores) {
        if (!std::isfinite(s.atn))
            throw ValidationError("rank_nodes: node " + std::to_string(s.node_id) + " has non-finite ATN");
        if (!seen.insert(s.node_id).second)
            throw ValidationError("rank_nodes: duplicate node_id " + std::to_string(s.node_id));
    }
    RankedList out;
    out.entries_.assign(scores.begin(), scores.end());
    // Keys are unique, so the stable sort is fully determined by (-atn, id).
    std::stable_sort(out.entries_.begin(), out.entries_.end(), [](const ScoredNode& a, const ScoredNode& b) {
        if (a.atn != b.atn) return a.atn > b.atn;
        return a.node_id < b.node_id;
    });
    return out;
}

void validate(const SelectionConfig& cfg) {
    if (cfg.whole_max < 2) throw FieldError("whole_max", "must be >= 2");
    if (!(cfg.sup_fraction_min > 0.0 && cfg.sup_fraction_min < 1.0))
        throw FieldError("sup_fraction_min", "must lie in (0, 1)");
}

DrawBounds pool_size_bounds(std::size_t whole_max, std::size_t network_size) {
    if (whole_max < 4)
        throw ConfigError("whole_max = " + std::to_string(whole_max) +
                          " leaves no pool size strictly between whole_max/2 and whole_max");
    const DrawBounds b{whole_max / 2 + 1, whole_max - 1};
    if (b.lo > network_size)
        throw ConfigError("network of " + std::to_string(network_size) +
                          " nodes is smaller than the minimum pool size " + std::to_string(b.lo) +
                          " for whole_max = " + std::to_string(whole_max));
    return b;
}

DrawBounds sup_num_bounds(std::size_t pool_size, double sup_fraction_min) {
    if (pool_size < 2) throw ConfigError("pool size must be >= 2");
    const std::size_t hi = pool_size - 1;
    const auto raw = static_cast<std::size_t>(std::ceil(sup_fraction_min * static_cast<double>(pool_size)));
    return {std::clamp<std::size_t>(raw, 1, hi), hi};
}

namespace {

void check_network(const RankedList& ranked, const SelectionConfig& cfg) {
    validate(cfg);
    if (ranked.size() < 2)
        throw ConfigError("node pool selection needs at least 2 ranked nodes, got " +
                          std::to_string(ranked.size()));
}

NodePool assemble(const RankedList& ranked, std::size_t pool_size, std::size_t sup_num,
                  std::vector<NodeId> random_ids) {
    NodePool pool;
    pool.pool_size = pool_size;
    pool.sup_num = sup_num;
    pool.rad_num = pool_size - sup_num;
    for (std::size_t r = 0; r < sup_num; ++r) pool.super_ids.push_back(ranked[r].node_id);
    pool.threshold = ranked[sup_num - 1].atn;
    std::sort(random_ids.begin(), random_ids.end());
    pool.random_ids = std::move(random_ids);
    return pool;
}

}  // namespace

NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg, Rng& rng) {
    check_network(ranked, cfg);
    const DrawBounds size_range = pool_size_bounds(cfg.whole_max, ranked.size());
    const std::size_t pool_size =
        std::min<std::size_t>(rng.uniform_int(size_range.lo, size_range.hi), ranked.size());
    const DrawBounds sup_range = sup_num_bounds(pool_size, cfg.sup_fraction_min);
    const std::size_t sup_num = rng.uniform_int(sup_range.lo, sup_range.hi);
    const std::size_t rad_num = pool_size - sup_num;

    // Partial Fisher-Yates over the ranks below the super nodes.
    std::vector<NodeId> tail;
    tail.reserve(ranked.size() - sup_num);
    for (std::size_t r = sup_num; r < ranked.size(); ++r) tail.push_back(ranked[r].node_id);
    for (std::size_t i = 0; i < rad_num; ++i)
        std::swap(tail[i], tail[rng.uniform_int(i, tail.size() - 1)]);
    tail.resize(rad_num);

    return assemble(ranked, pool_size, sup_num, std::move(tail));
}

NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg) {
    Rng rng(cfg.seed);
    return select_pool(ranked, cfg, rng);
}

NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg, const InjectedDraws& draws) {
    check_network(ranked, cfg);
    const DrawBounds size_range = pool_size_bounds(cfg.whole_max, ranked.size());
    const std::size_t size_hi = std::min(size_range.hi, ranked.size());
    if (draws.pool_size < size_range.lo || draws.pool_size > size_hi)
        throw ConfigError("injected pool_size " + std::to_string(draws.pool_size) + " outside [" +
                          std::to_string(size_range.lo) + ", " + std::to_string(size_hi) + "]");
    const DrawBounds sup_range = sup_num_bounds(draws.pool_size, cfg.sup_fraction_min);
    if (draws.sup_num < sup_range.lo || draws.sup_num > sup_range.hi)
        throw ConfigError("injected sup_num " + std::to_string(draws.sup_num) + " outside [" +
                          std::to_string(sup_range.lo) + ", " + std::to_string(sup_range.hi) + "]");
    const std::size_t rad_num = draws.pool_size - draws.sup_num;
    if (draws.random_ids.size() != rad_num)
        throw ConfigError("injected " + std::to_string(draws.random_ids.size()) + " random ids, expected " +
                          std::to_string(rad_num));

    std::unordered_set<NodeId> eligible;
    for (std::size_t r = draws.sup_num; r < ranked.size(); ++r) eligible.insert(ranked[r].node_id);
    std::unordered_set<NodeId> used;
    for (NodeId id : draws.random_ids) {
        if (!eligible.contains(id))
            throw ConfigError("injected random id " + std::to_string(id) + " is not a non-super ranked node");
        if (!used.insert(id).second)
            throw ConfigError("injected random id " + std::to_string(id) + " repeated");
    }
    return assemble(ranked, draws.pool_size, draws.sup_num, draws.random_ids);
}

std::string to_string(NodeClass c) {
    switch (c) {
        case NodeClass::Super: return "super";
        case NodeClass::Random: return "random";
        case NodeClass::Unknown: return "unknown";
    }
    return "unknown";
}

NodeClass classify(NodeId id, const NodePool& pool) {
    if (std::find(pool.super_ids.begin(), pool.super_ids.end(), id) != pool.super_ids.end())
        return NodeClass::Super;
    if (std::binary_search(pool.random_ids.begin(), pool.random_ids.end(), id)) return NodeClass::Random;
    return NodeClass::Unknown;
}

}  // namespace poai

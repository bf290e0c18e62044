#pragma once

// Node-pool construction: rank nodes by ATN, draw the pool size and the
// number of super nodes, take the top of the ranking as super nodes and
// fill the rest of the pool with uniformly sampled lower-ranked nodes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poai/node_model.hpp"
#include "poai/rng.hpp"

namespace poai {

struct ScoredNode {
    NodeId node_id = 0;
    double atn = 0.0;

    friend bool operator==(const ScoredNode&, const ScoredNode&) = default;
};

// Descending by atn, ties by ascending node_id.
class RankedList {
public:
    RankedList() = default;

    const std::vector<ScoredNode>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const ScoredNode& operator[](std::size_t rank) const { return entries_[rank]; }

    friend RankedList rank_nodes(std::span<const ScoredNode> scores);

private:
    std::vector<ScoredNode> entries_;
};

// Throws ValidationError on duplicate ids or non-finite scores.
RankedList rank_nodes(std::span<const ScoredNode> scores);

struct SelectionConfig {
    std::size_t whole_max = 20;
    double sup_fraction_min = 0.5;
    std::uint64_t seed = 0;
};

void validate(const SelectionConfig& cfg);

struct NodePool {
    std::vector<NodeId> super_ids;   // rank order
    std::vector<NodeId> random_ids;  // ascending id
    std::size_t pool_size = 0;
    std::size_t sup_num = 0;
    std::size_t rad_num = 0;
    double threshold = 0.0;  // ATN of the lowest-ranked super node

    friend bool operator==(const NodePool&, const NodePool&) = default;
};

// Inclusive bounds of the integer draws made by select_pool.
struct DrawBounds {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

// Pool size is drawn from the open interval (floor(whole_max / 2), whole_max).
// Throws ConfigError when whole_max < 4 or the interval starts above network_size.
DrawBounds pool_size_bounds(std::size_t whole_max, std::size_t network_size);
DrawBounds sup_num_bounds(std::size_t pool_size, double sup_fraction_min);

// Fixed outcomes for the three random steps, used to replay worked examples.
struct InjectedDraws {
    std::size_t pool_size = 0;
    std::size_t sup_num = 0;
    std::vector<NodeId> random_ids;
};

NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg, Rng& rng);
// Uses Rng(cfg.seed).
NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg);
// Validates every injected value against the ranges the random path would use.
NodePool select_pool(const RankedList& ranked, const SelectionConfig& cfg, const InjectedDraws& draws);

enum class NodeClass { Super, Random, Unknown };

std::string to_string(NodeClass c);

NodeClass classify(NodeId id, const NodePool& pool);

}  // namespace poai

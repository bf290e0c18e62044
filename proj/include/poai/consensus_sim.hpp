#pragma once

// Round-based block production simulator. Each epoch re-selects the node
// pool and then produces rounds_per_epoch blocks by rotating through it.
// PoW, PoS and DPoS are modeled only as leader-election baselines over the
// same node features.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poai/atn_scorer.hpp"
#include "poai/node_model.hpp"
#include "poai/pool_select.hpp"

namespace poai {

enum class Protocol { PoAI, PoW, PoS, DPoS };

std::string to_string(Protocol p);
// Case-insensitive; throws ValidationError on unknown names.
Protocol parse_protocol(std::string_view name);

inline constexpr double kValidationTimeS = 1.0;
inline constexpr double kPowHashRate = 1e6;  // hash ops per second at cpr = 1

struct SimConfig {
    std::size_t num_nodes = 50;
    std::size_t epochs = 10;
    std::size_t rounds_per_epoch = 50;
    Protocol protocol = Protocol::PoAI;
    SelectionConfig selection;
    // Null scores nodes with the noise-free oracle.
    std::shared_ptr<const ScorerModel> scorer;
    double pow_mean_block_interval = 600.0;
    std::size_t confirmation_depth = 6;
    std::uint64_t seed = 0;
};

void validate(const SimConfig& cfg);

struct BlockRecord {
    std::size_t epoch = 0;
    std::size_t round = 0;
    NodeId producer_id = 0;
    NodeClass producer_class = NodeClass::Unknown;
    double elapsed = 0.0;  // seconds
    std::uint64_t hash_ops = 0;
    std::size_t failed_attempts = 0;

    friend bool operator==(const BlockRecord&, const BlockRecord&) = default;
};

struct SimResult {
    Protocol protocol = Protocol::PoAI;
    std::uint64_t seed = 0;
    std::size_t confirmation_depth = 6;
    std::vector<NodeId> network;      // every node id, input order
    std::vector<BlockRecord> ledger;  // one record per produced block
    std::vector<NodePool> pools;      // PoAI: one per epoch
    std::vector<NodeId> delegates;    // DPoS: fixed delegate set, rank order
    std::size_t total_rounds = 0;
    std::size_t abandoned_rounds = 0;  // every pool member failed

    friend bool operator==(const SimResult&, const SimResult&) = default;
};

struct Metrics {
    double gini = 0.0;
    double producer_entropy = 0.0;  // bits
    double random_node_block_fraction = 0.0;
    double mean_confirmation_time = 0.0;  // seconds
    std::uint64_t total_hash_ops = 0;
    double failed_round_fraction = 0.0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Rotation order is super_ids followed by random_ids; returns order[round % pool_size].
NodeId next_producer(const NodePool& pool, std::size_t round);

// ATN per node from the configured scorer.
std::vector<ScoredNode> score_nodes(std::span<const NodeFeatures> nodes,
                                    const std::shared_ptr<const ScorerModel>& scorer);

SimResult run_simulation(const SimConfig& cfg, std::span<const NodeFeatures> nodes);
SimResult run_baseline(const SimConfig& cfg, std::span<const NodeFeatures> nodes);
// Dispatches on cfg.protocol.
SimResult run(const SimConfig& cfg, std::span<const NodeFeatures> nodes);

// Number of DPoS delegates: midpoint of the PoAI pool-size range, capped at network size.
std::size_t dpos_delegate_count(const SelectionConfig& selection, std::size_t network_size);

Metrics compute_metrics(const SimResult& result);

// Failure odds of simulated nodes are drawn on the scale of observed
// production nodes (a few percent discarded, well under one percent attacked)
// rather than across the whole [0,1] training range.
inline constexpr double kNetworkMaxDiscarded = 0.15;
inline constexpr double kNetworkMaxAttacked = 0.01;

// Synthetic network for a simulation seed: generate_dataset features with the
// discarded/attacked probabilities rescaled into the ranges above.
std::vector<NodeFeatures> make_network(std::size_t num_nodes, std::uint64_t seed);

inline constexpr std::string_view kLedgerHeader =
    "epoch,round,producer_id,producer_class,elapsed_s,hash_ops,failed_attempts";

void write_ledger(const SimResult& result, std::ostream& out);

}  // namespace poai

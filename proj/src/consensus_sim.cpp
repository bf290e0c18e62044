#include "poai/consensus_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "poai/errors.hpp"
#include "poai/rng.hpp"
#include "poai/stats.hpp"
#include "poai/text.hpp"

namespace poai {

namespace {

// Stream tags for derive_seed; each consumer of randomness gets its own stream.
constexpr std::uint64_t kSelectionStream = 0x5e1ec7;
constexpr std::uint64_t kFailureStream = 0xfa11;
constexpr std::uint64_t kBaselineStream = 0xba5e;
constexpr std::uint64_t kNetworkStream = 0x4e7;

std::uint64_t epoch_seed(std::uint64_t master, std::uint64_t stream, std::size_t epoch) {
    return derive_seed(derive_seed(master, stream), epoch);
}

void check_network(const SimConfig& cfg, std::span<const NodeFeatures> nodes) {
    validate(cfg);
    if (nodes.size() < 2) throw ValidationError("simulation needs at least 2 nodes");
    if (nodes.size() != cfg.num_nodes)
        throw ValidationError("num_nodes = " + std::to_string(cfg.num_nodes) + " but " +
                              std::to_string(nodes.size()) + " nodes supplied");
    for (const auto& n : nodes) validate(n);
}

SimResult empty_result(const SimConfig& cfg, std::span<const NodeFeatures> nodes) {
    SimResult r;
    r.protocol = cfg.protocol;
    r.seed = cfg.seed;
    r.confirmation_depth = cfg.confirmation_depth;
    for (const auto& n : nodes) r.network.push_back(n.node_id);
    r.total_rounds = cfg.epochs * cfg.rounds_per_epoch;
    return r;
}

// Index into nodes sampled with probability proportional to weight(node).
template <typename Weight>
std::size_t weighted_pick(std::span<const NodeFeatures> nodes, Weight weight, Rng& rng) {
    double total = 0.0;
    for (const auto& n : nodes) total += weight(n);
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double w = weight(nodes[i]);
        if (w <= 0.0) continue;
        last_positive = i;
        acc += w;
        if (target < acc) return i;
    }
    return last_positive;  // rounding at the top end
}

}  // namespace

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::PoAI: return "PoAI";
        case Protocol::PoW: return "PoW";
        case Protocol::PoS: return "PoS";
        case Protocol::DPoS: return "DPoS";
    }
    return "PoAI";
}

Protocol parse_protocol(std::string_view name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "poai") return Protocol::PoAI;
    if (lower == "pow") return Protocol::PoW;
    if (lower == "pos") return Protocol::PoS;
    if (lower == "dpos") return Protocol::DPoS;
    throw ValidationError("unknown protocol '" + std::string(name) + "' (expected PoAI, PoW, PoS or DPoS)");
}

void validate(const SimConfig& cfg) {
    if (cfg.num_nodes < 1) throw FieldError("num_nodes", "must be >= 1");
    if (cfg.epochs < 1) throw FieldError("epochs", "must be >= 1");
    if (cfg.rounds_per_epoch < 1) throw FieldError("rounds_per_epoch", "must be >= 1");
    if (cfg.confirmation_depth < 1) throw FieldError("confirmation_depth", "must be >= 1");
    if (!(cfg.pow_mean_block_interval > 0.0) || !std::isfinite(cfg.pow_mean_block_interval))
        throw FieldError("pow_mean_block_interval", "must be positive");
    validate(cfg.selection);
    if (cfg.scorer) validate(*cfg.scorer);
}

NodeId next_producer(const NodePool& pool, std::size_t round) {
    const std::size_t size = pool.super_ids.size() + pool.random_ids.size();
    if (size == 0) throw ValidationError("next_producer: empty pool");
    const std::size_t slot = round % size;
    return slot < pool.super_ids.size() ? pool.super_ids[slot] : pool.random_ids[slot - pool.super_ids.size()];
}

std::vector<ScoredNode> score_nodes(std::span<const NodeFeatures> nodes,
                                    const std::shared_ptr<const ScorerModel>& scorer) {
    std::vector<ScoredNode> scores;
    scores.reserve(nodes.size());
    for (const auto& n : nodes) {
        const FeatureMatrix m = normalize_features(n);
        scores.push_back({n.node_id, scorer ? predict(*scorer, m) : oracle_atn(m)});
    }
    return scores;
}

SimResult run_simulation(const SimConfig& cfg, std::span<const NodeFeatures> nodes) {
    if (cfg.protocol != Protocol::PoAI) return run_baseline(cfg, nodes);
    check_network(cfg, nodes);

    std::unordered_map<NodeId, const NodeFeatures*> by_id;
    for (const auto& n : nodes) by_id[n.node_id] = &n;

    // Node features are static over a run, so the ranking is too; only the
    // pool draws change from epoch to epoch.
    const RankedList ranked = rank_nodes(score_nodes(nodes, cfg.scorer));

    SimResult result = empty_result(cfg, nodes);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng select_rng(epoch_seed(cfg.seed, kSelectionStream, epoch));
        Rng fail_rng(epoch_seed(cfg.seed, kFailureStream, epoch));
        const NodePool pool = select_pool(ranked, cfg.selection, select_rng);

        std::size_t skip = 0;  // failures so far this epoch shift the rotation
        for (std::size_t round = 0; round < cfg.rounds_per_epoch; ++round) {
            std::size_t failed = 0;
            bool produced = false;
            while (failed < pool.pool_size) {
                const NodeId id = next_producer(pool, round + skip);
                const NodeFeatures& node = *by_id.at(id);
                const bool down = fail_rng.bernoulli(node.attacked_probability) ||
                                  fail_rng.bernoulli(node.discarded_probability);
                if (down) {
                    ++failed;
                    ++skip;
                    continue;
                }
                result.ledger.push_back({epoch, round, id, classify(id, pool),
                                         node.latency + kValidationTimeS, 0, failed});
                produced = true;
                break;
            }
            if (!produced) ++result.abandoned_rounds;
        }
        result.pools.push_back(pool);
    }
    return result;
}

std::size_t dpos_delegate_count(const SelectionConfig& selection, std::size_t network_size) {
    const DrawBounds b = pool_size_bounds(selection.whole_max, network_size);
    return std::min(network_size, (b.lo + b.hi + 1) / 2);
}

SimResult run_baseline(const SimConfig& cfg, std::span<const NodeFeatures> nodes) {
    if (cfg.protocol == Protocol::PoAI) return run_simulation(cfg, nodes);
    check_network(cfg, nodes);

    SimResult result = empty_result(cfg, nodes);
    Rng rng(derive_seed(cfg.seed, kBaselineStream));

    if (cfg.protocol == Protocol::DPoS) {
        std::vector<ScoredNode> stake;
        for (const auto& n : nodes) stake.push_back({n.node_id, n.payoff});
        const RankedList by_stake = rank_nodes(stake);
        const std::size_t k = dpos_delegate_count(cfg.selection, nodes.size());
        for (std::size_t i = 0; i < k; ++i) result.delegates.push_back(by_stake[i].node_id);
    }

    std::unordered_map<NodeId, const NodeFeatures*> by_id;
    for (const auto& n : nodes) by_id[n.node_id] = &n;

    const auto cpr = [](const NodeFeatures& n) { return n.computing_power_ratio; };
    const auto stake = [](const NodeFeatures& n) { return n.payoff; };
    if (cfg.protocol == Protocol::PoW &&
        std::none_of(nodes.begin(), nodes.end(), [&](const NodeFeatures& n) { return cpr(n) > 0.0; }))
        throw ConfigError("PoW baseline: every node has zero computing power");
    if (cfg.protocol == Protocol::PoS &&
        std::none_of(nodes.begin(), nodes.end(), [&](const NodeFeatures& n) { return stake(n) > 0.0; }))
        throw ConfigError("PoS baseline: every node has zero payoff");

    std::size_t slot = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t round = 0; round < cfg.rounds_per_epoch; ++round, ++slot) {
            BlockRecord rec;
            rec.epoch = epoch;
            rec.round = round;
            rec.producer_class = NodeClass::Super;
            switch (cfg.protocol) {
                case Protocol::PoW: {
                    const NodeFeatures& n = nodes[weighted_pick(nodes, cpr, rng)];
                    rec.producer_id = n.node_id;
                    rec.elapsed = rng.exponential(cfg.pow_mean_block_interval);
                    rec.hash_ops = static_cast<std::uint64_t>(
                        std::llround(rec.elapsed * n.computing_power_ratio * kPowHashRate));
                    break;
                }
                case Protocol::PoS: {
                    const NodeFeatures& n = nodes[weighted_pick(nodes, stake, rng)];
                    rec.producer_id = n.node_id;
                    rec.elapsed = n.latency + kValidationTimeS;
                    break;
                }
                case Protocol::DPoS: {
                    rec.producer_id = result.delegates[slot % result.delegates.size()];
                    rec.elapsed = by_id.at(rec.producer_id)->latency + kValidationTimeS;
                    break;
                }
                case Protocol::PoAI: break;
            }
            result.ledger.push_back(rec);
        }
    }
    return result;
}

SimResult run(const SimConfig& cfg, std::span<const NodeFeatures> nodes) {
    return cfg.protocol == Protocol::PoAI ? run_simulation(cfg, nodes) : run_baseline(cfg, nodes);
}

Metrics compute_metrics(const SimResult& result) {
    if (result.ledger.empty()) throw ValidationError("compute_metrics: empty ledger");

    std::unordered_map<NodeId, std::size_t> index;
    for (std::size_t i = 0; i < result.network.size(); ++i) index.emplace(result.network[i], i);
    std::vector<double> counts(result.network.size(), 0.0);

    Metrics m;
    std::size_t random_blocks = 0, failed_rounds = 0;
    for (const auto& b : result.ledger) {
        auto it = index.find(b.producer_id);
        if (it == index.end()) {
            index.emplace(b.producer_id, counts.size());
            counts.push_back(1.0);
        } else {
            counts[it->second] += 1.0;
        }
        if (b.producer_class == NodeClass::Random) ++random_blocks;
        if (b.failed_attempts > 0) ++failed_rounds;
        m.total_hash_ops += b.hash_ops;
    }
    const double blocks = static_cast<double>(result.ledger.size());
    m.gini = gini(counts);
    m.producer_entropy = entropy_bits(counts);
    m.random_node_block_fraction = static_cast<double>(random_blocks) / blocks;

    // Time until depth further blocks sit on top. Blocks near the end of the
    // ledger lack a full window; fall back to partial windows only when no
    // block has one.
    const std::size_t depth = std::max<std::size_t>(result.confirmation_depth, 1);
    const std::size_t n = result.ledger.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + result.ledger[i].elapsed;
    if (n > depth) {
        double acc = 0.0;
        for (std::size_t i = 0; i + depth < n; ++i) acc += prefix[i + 1 + depth] - prefix[i + 1];
        m.mean_confirmation_time = acc / static_cast<double>(n - depth);
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += prefix[n] - prefix[i + 1];
        m.mean_confirmation_time = acc / static_cast<double>(n);
    }

    const std::size_t rounds = std::max(result.total_rounds, result.ledger.size());
    m.failed_round_fraction =
        static_cast<double>(failed_rounds + result.abandoned_rounds) / static_cast<double>(rounds);
    return m;
}

std::vector<NodeFeatures> make_network(std::size_t num_nodes, std::uint64_t seed) {
    const Dataset d = generate_dataset(num_nodes, derive_seed(seed, kNetworkStream), 0.0);
    std::vector<NodeFeatures> out;
    out.reserve(d.size());
    for (const auto& s : d.samples) {
        NodeFeatures n = s.features;
        n.discarded_probability *= kNetworkMaxDiscarded;
        n.attacked_probability *= kNetworkMaxAttacked;
        out.push_back(n);
    }
    return out;
}

void write_ledger(const SimResult& result, std::ostream& out) {
    out << kLedgerHeader << '\n';
    for (const auto& b : result.ledger) {
        out << b.epoch << ',' << b.round << ',' << b.producer_id << ',' << to_string(b.producer_class) << ','
            << format_real(b.elapsed) << ',' << b.hash_ops << ',' << b.failed_attempts << '\n';
    }
}

}  // namespace poai

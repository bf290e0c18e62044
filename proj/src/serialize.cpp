#include "poai/serialize.hpp"

#include <set>
#include <string>

#include "poai/errors.hpp"

namespace poai {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& section, std::initializer_list<const char*> allowed, const char* where) {
    if (!section.is_object()) throw ValidationError(std::string(where) + ": config section must be an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : section.items())
        if (!keys.contains(k)) throw FieldError(k, std::string("unknown key in '") + where + "' config");
}

template <typename T>
void read(const json& section, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FieldError(key, std::string("bad value: ") + e.what());
    }
}

}  // namespace

ordered_json pool_to_json(const NodePool& pool, std::uint64_t seed) {
    ordered_json j;
    j["pool_size"] = pool.pool_size;
    j["sup_num"] = pool.sup_num;
    j["threshold"] = pool.threshold;
    j["super_ids"] = pool.super_ids;
    j["random_ids"] = pool.random_ids;
    j["seed"] = seed;
    return j;
}

NodePool pool_from_json(const ordered_json& j) {
    NodePool p;
    try {
        p.pool_size = j.at("pool_size").get<std::size_t>();
        p.sup_num = j.at("sup_num").get<std::size_t>();
        p.threshold = j.at("threshold").get<double>();
        p.super_ids = j.at("super_ids").get<std::vector<NodeId>>();
        p.random_ids = j.at("random_ids").get<std::vector<NodeId>>();
    } catch (const ordered_json::exception& e) {
        throw FormatError(std::string("node pool document: ") + e.what());
    }
    p.rad_num = p.random_ids.size();
    if (p.super_ids.size() != p.sup_num || p.sup_num + p.rad_num != p.pool_size)
        throw FormatError("node pool document: counts do not match id lists");
    return p;
}

ordered_json metrics_to_json(const Metrics& m, Protocol protocol, std::uint64_t seed) {
    ordered_json j;
    j["protocol"] = to_string(protocol);
    j["seed"] = seed;
    j["gini"] = m.gini;
    j["producer_entropy_bits"] = m.producer_entropy;
    j["random_node_block_fraction"] = m.random_node_block_fraction;
    j["mean_confirmation_time_s"] = m.mean_confirmation_time;
    j["total_hash_ops"] = m.total_hash_ops;
    j["failed_round_fraction"] = m.failed_round_fraction;
    return j;
}

ordered_json report_to_json(const TrainReport& r) {
    ordered_json j;
    j["train_samples"] = r.train_samples;
    j["validation_samples"] = r.validation_samples;
    j["initial_train_loss"] = r.initial_train_loss;
    j["final_train_loss"] = r.epoch_train_loss.empty() ? r.initial_train_loss : r.epoch_train_loss.back();
    j["epoch_train_loss"] = r.epoch_train_loss;
    j["validation_loss"] = r.validation_loss ? ordered_json(*r.validation_loss) : ordered_json(nullptr);
    j["validation_spearman"] =
        r.validation_spearman ? ordered_json(*r.validation_spearman) : ordered_json(nullptr);
    return j;
}

void apply_json(const json& section, TrainConfig& into) {
    reject_unknown(section, {"learning_rate", "epochs", "batch_size", "l2_lambda", "seed", "train_fraction"},
                   "train");
    read(section, "learning_rate", into.learning_rate);
    read(section, "epochs", into.epochs);
    read(section, "batch_size", into.batch_size);
    read(section, "l2_lambda", into.l2_lambda);
    read(section, "seed", into.seed);
    read(section, "train_fraction", into.train_fraction);
}

void apply_json(const json& section, SelectionConfig& into) {
    reject_unknown(section, {"whole_max", "sup_fraction_min", "seed"}, "selection");
    read(section, "whole_max", into.whole_max);
    read(section, "sup_fraction_min", into.sup_fraction_min);
    read(section, "seed", into.seed);
}

void apply_json(const json& section, SimConfig& into) {
    reject_unknown(section,
                   {"num_nodes", "epochs", "rounds_per_epoch", "protocol", "selection",
                    "pow_mean_block_interval", "confirmation_depth", "seed"},
                   "simulate");
    read(section, "num_nodes", into.num_nodes);
    read(section, "epochs", into.epochs);
    read(section, "rounds_per_epoch", into.rounds_per_epoch);
    if (section.contains("protocol")) {
        std::string name;
        read(section, "protocol", name);
        into.protocol = parse_protocol(name);
    }
    if (section.contains("selection")) apply_json(section.at("selection"), into.selection);
    read(section, "pow_mean_block_interval", into.pow_mean_block_interval);
    read(section, "confirmation_depth", into.confirmation_depth);
    read(section, "seed", into.seed);
}

}  // namespace poai

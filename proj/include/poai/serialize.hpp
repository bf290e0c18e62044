#pragma once

// JSON documents exchanged by the command-line tool.

#include <cstdint>

#include <json.hpp>

#include "poai/atn_scorer.hpp"
#include "poai/consensus_sim.hpp"
#include "poai/pool_select.hpp"

namespace poai {

// {"pool_size", "sup_num", "threshold", "super_ids", "random_ids", "seed"}
nlohmann::ordered_json pool_to_json(const NodePool& pool, std::uint64_t seed);
NodePool pool_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json metrics_to_json(const Metrics& m, Protocol protocol, std::uint64_t seed);
nlohmann::ordered_json report_to_json(const TrainReport& r);

// Config sections: unknown keys are rejected so typos do not pass silently.
// Keys absent from the section keep the value already in `into`.
void apply_json(const nlohmann::json& section, TrainConfig& into);
void apply_json(const nlohmann::json& section, SelectionConfig& into);
void apply_json(const nlohmann::json& section, SimConfig& into);

}  // namespace poai

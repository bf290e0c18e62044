// poai: data generation, scorer training, node-pool selection and protocol
// comparison from the command line.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poai/atn_scorer.hpp"
#include "poai/consensus_sim.hpp"
#include "poai/errors.hpp"
#include "poai/node_model.hpp"
#include "poai/pool_select.hpp"
#include "poai/serialize.hpp"
#include "poai/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitInternal = 3;

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw poai::IoError("cannot open '" + path.string() + "' for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw poai::IoError("read failed for '" + path.string() + "'");
    return data;
}

void write_file(const fs::path& path, const std::string& data) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw poai::IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw poai::IoError("cannot open '" + path.string() + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw poai::IoError("write failed for '" + path.string() + "'");
    std::cerr << "wrote " << path.string() << '\n';
}

// Writes into the output directory, or to stdout when none was given.
void emit(const Common& c, const std::string& name, const std::string& data) {
    if (c.out_dir.empty()) {
        std::cout << data;
        std::cout.flush();
    } else {
        write_file(fs::path(c.out_dir) / name, data);
    }
}

json config_section(const Common& c, const char* name) {
    if (c.config_path.empty()) return json::object();
    json doc;
    try {
        doc = json::parse(read_file(c.config_path));
    } catch (const json::parse_error& e) {
        throw poai::ValidationError("config '" + c.config_path + "': " + e.what());
    }
    if (!doc.is_object()) throw poai::ValidationError("config '" + c.config_path + "': top level must be an object");
    return doc.contains(name) ? doc.at(name) : json::object();
}

template <typename T>
void read_key(const json& section, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception& e) {
        throw poai::FieldError(key, std::string("bad value: ") + e.what());
    }
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Seed; overrides the config file");
    cmd->add_option("--config", c.config_path, "JSON config with per-command sections");
    cmd->add_option("--out", c.out_dir, "Output directory (default: stdout where possible)");
}

std::shared_ptr<const poai::ScorerModel> load_scorer(const std::string& path) {
    if (path.empty()) return nullptr;
    return std::make_shared<const poai::ScorerModel>(poai::load_model(read_file(path)));
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
    Common common;
    std::optional<std::size_t> n;
    std::optional<double> noise;
};

void run_gen_data(const GenDataArgs& a) {
    const json section = config_section(a.common, "gen-data");
    for (const auto& [k, v] : section.items())
        if (k != "n" && k != "seed" && k != "noise") throw poai::FieldError(k, "unknown key in 'gen-data' config");
    std::size_t n = 10000;
    std::uint64_t seed = 0;
    double noise = 0.0;
    read_key(section, "n", n);
    read_key(section, "seed", seed);
    read_key(section, "noise", noise);
    if (a.n) n = *a.n;
    if (a.noise) noise = *a.noise;
    if (a.common.seed) seed = *a.common.seed;

    const poai::Dataset d = poai::generate_dataset(n, seed, noise);
    emit(a.common, "dataset_seed" + std::to_string(seed) + ".csv", poai::save_dataset(d));
}

struct TrainArgs {
    Common common;
    std::string dataset;
    std::optional<std::size_t> epochs;
};

void run_train(const TrainArgs& a) {
    poai::TrainConfig cfg;
    poai::apply_json(config_section(a.common, "train"), cfg);
    if (a.common.seed) cfg.seed = *a.common.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.common.out_dir.empty()) throw poai::ValidationError("train: --out is required");

    const poai::Dataset d = poai::load_dataset(read_file(a.dataset));
    const poai::TrainResult result = poai::train(poai::init_model(cfg.seed), d, cfg);

    const fs::path out(a.common.out_dir);
    write_file(out / "model.bin", poai::save_model(result.model));
    write_file(out / "train_report.json", dump(poai::report_to_json(result.report)));
    if (result.report.validation_spearman)
        std::cerr << "validation spearman " << *result.report.validation_spearman << '\n';
}

struct SelectArgs {
    Common common;
    std::string input;
    std::string model;
    std::optional<std::size_t> whole_max;
    std::optional<std::size_t> inject_pool_size;
    std::optional<std::size_t> inject_sup_num;
    std::vector<poai::NodeId> inject_random;
};

// Accepts either a dataset file (scores = labels, or model predictions when a
// model is given) or a two-column node_id,atn table.
std::vector<poai::ScoredNode> read_scores(const std::string& text, const std::string& model_path) {
    const std::string first_line = text.substr(0, text.find('\n'));
    std::string header = first_line;
    if (!header.empty() && header.back() == '\r') header.pop_back();

    if (header == "node_id,atn") {
        if (!model_path.empty()) throw poai::ValidationError("--model needs a dataset file, not a scores file");
        std::vector<poai::ScoredNode> out;
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto fields = poai::split_fields(line);
            if (fields.size() != 2) throw poai::ParseError(line_no, "expected 2 columns");
            const auto id = poai::parse_real(fields[0]);
            const auto atn = poai::parse_real(fields[1]);
            if (!id || *id < 0 || *id != static_cast<double>(static_cast<poai::NodeId>(*id)))
                throw poai::ParseError(line_no, "node_id: not a non-negative integer");
            if (!atn) throw poai::ParseError(line_no, "atn: non-numeric cell");
            out.push_back({static_cast<poai::NodeId>(*id), *atn});
        }
        return out;
    }

    const poai::Dataset d = poai::load_dataset(text);
    if (!model_path.empty()) {
        std::vector<poai::NodeFeatures> nodes;
        for (const auto& s : d.samples) nodes.push_back(s.features);
        return poai::score_nodes(nodes, load_scorer(model_path));
    }
    std::vector<poai::ScoredNode> out;
    for (const auto& s : d.samples) out.push_back({s.features.node_id, s.atn_label});
    return out;
}

void run_select(const SelectArgs& a) {
    poai::SelectionConfig cfg;
    poai::apply_json(config_section(a.common, "select"), cfg);
    if (a.common.seed) cfg.seed = *a.common.seed;
    if (a.whole_max) cfg.whole_max = *a.whole_max;

    const poai::RankedList ranked = poai::rank_nodes(read_scores(read_file(a.input), a.model));

    poai::NodePool pool;
    const bool injected = a.inject_pool_size || a.inject_sup_num || !a.inject_random.empty();
    if (injected) {
        if (!a.inject_pool_size || !a.inject_sup_num)
            throw poai::ValidationError("injected draws need both --inject-pool-size and --inject-sup-num");
        pool = poai::select_pool(ranked, cfg, poai::InjectedDraws{*a.inject_pool_size, *a.inject_sup_num, a.inject_random});
    } else {
        pool = poai::select_pool(ranked, cfg);
    }
    emit(a.common, "pool_seed" + std::to_string(cfg.seed) + ".json", dump(poai::pool_to_json(pool, cfg.seed)));
}

struct SimArgs {
    Common common;
    std::optional<std::string> protocol;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> num_nodes;
    std::string nodes_file;
    std::string model;
};

poai::SimConfig sim_config(const SimArgs& a, const json& section) {
    poai::SimConfig cfg;
    poai::apply_json(section, cfg);
    if (a.common.seed) cfg.seed = *a.common.seed;
    if (a.protocol) cfg.protocol = poai::parse_protocol(*a.protocol);
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.rounds) cfg.rounds_per_epoch = *a.rounds;
    if (a.num_nodes) cfg.num_nodes = *a.num_nodes;
    cfg.scorer = load_scorer(a.model);
    return cfg;
}

std::vector<poai::NodeFeatures> sim_nodes(const SimArgs& a, poai::SimConfig& cfg) {
    if (a.nodes_file.empty()) return poai::make_network(cfg.num_nodes, cfg.seed);
    const poai::Dataset d = poai::load_dataset(read_file(a.nodes_file));
    std::vector<poai::NodeFeatures> nodes;
    for (const auto& s : d.samples) nodes.push_back(s.features);
    cfg.num_nodes = nodes.size();
    return nodes;
}

void run_simulate(const SimArgs& a) {
    poai::SimConfig cfg = sim_config(a, config_section(a.common, "simulate"));
    const auto nodes = sim_nodes(a, cfg);
    const poai::SimResult result = poai::run(cfg, nodes);
    const poai::Metrics metrics = poai::compute_metrics(result);

    const std::string tag = poai::to_string(cfg.protocol) + "_seed" + std::to_string(cfg.seed);
    const std::string metrics_doc = dump(poai::metrics_to_json(metrics, cfg.protocol, cfg.seed));
    if (a.common.out_dir.empty()) {
        std::cout << metrics_doc;
        return;
    }
    std::ostringstream ledger;
    poai::write_ledger(result, ledger);
    const fs::path out(a.common.out_dir);
    write_file(out / ("ledger_" + tag + ".csv"), ledger.str());
    write_file(out / ("metrics_" + tag + ".json"), metrics_doc);
}

struct CompareArgs {
    SimArgs sim;
    std::optional<std::size_t> seeds;
    std::vector<std::string> protocols;
};

void run_compare(const CompareArgs& a) {
    const json section = config_section(a.sim.common, "compare");
    json sim_section = json::object();
    std::size_t seeds = 20;
    std::vector<std::string> protocols = {"PoAI", "PoW", "PoS", "DPoS"};
    std::uint64_t master = 0;
    for (const auto& [k, v] : section.items()) {
        if (k == "seeds") read_key(section, "seeds", seeds);
        else if (k == "protocols") read_key(section, "protocols", protocols);
        else if (k == "seed") read_key(section, "seed", master);
        else sim_section[k] = v;
    }
    if (a.seeds) seeds = *a.seeds;
    if (!a.protocols.empty()) protocols = a.protocols;
    if (a.sim.common.seed) master = *a.sim.common.seed;
    if (seeds == 0) throw poai::FieldError("seeds", "must be >= 1");

    std::ostringstream table;
    table << "protocol,seed,gini,entropy_bits,random_fraction,mean_confirmation_s,total_hash_ops,failed_fraction\n";
    for (std::size_t i = 0; i < seeds; ++i) {
        SimArgs run_args = a.sim;
        run_args.common.seed = master + i;
        poai::SimConfig cfg = sim_config(run_args, sim_section);
        const auto nodes = sim_nodes(run_args, cfg);
        for (const auto& name : protocols) {
            cfg.protocol = poai::parse_protocol(name);
            const poai::Metrics m = poai::compute_metrics(poai::run(cfg, nodes));
            table << poai::to_string(cfg.protocol) << ',' << cfg.seed << ',' << poai::format_real(m.gini) << ','
                  << poai::format_real(m.producer_entropy) << ',' << poai::format_real(m.random_node_block_fraction)
                  << ',' << poai::format_real(m.mean_confirmation_time) << ',' << m.total_hash_ops << ','
                  << poai::format_real(m.failed_round_fraction) << '\n';
        }
    }
    emit(a.sim.common, "compare_seed" + std::to_string(master) + ".csv", table.str());
}

void add_sim_options(CLI::App* cmd, SimArgs& a) {
    add_common(cmd, a.common);
    cmd->add_option("--protocol", a.protocol, "PoAI, PoW, PoS or DPoS");
    cmd->add_option("--epochs", a.epochs, "Epochs (pool re-selections)");
    cmd->add_option("--rounds", a.rounds, "Rounds per epoch");
    cmd->add_option("--nodes", a.num_nodes, "Synthetic network size");
    cmd->add_option("--nodes-file", a.nodes_file, "Dataset file whose features define the network");
    cmd->add_option("--model", a.model, "Trained scorer model (default: ground-truth oracle)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PoAI node selection: data, scorer training, pool selection and protocol comparison"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a labelled synthetic dataset");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--n", gen.n, "Number of samples");
    gen_cmd->add_option("--noise", gen.noise, "Label noise standard deviation");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the ATN scorer");
    add_common(train_cmd, tr.common);
    train_cmd->add_option("--dataset", tr.dataset, "Dataset file")->required();
    train_cmd->add_option("--epochs", tr.epochs, "Training epochs");

    SelectArgs sel;
    auto* select_cmd = app.add_subcommand("select", "Build a node pool from scores");
    add_common(select_cmd, sel.common);
    select_cmd->add_option("--input", sel.input, "Dataset or node_id,atn scores file")->required();
    select_cmd->add_option("--model", sel.model, "Score dataset features with this model");
    select_cmd->add_option("--whole-max", sel.whole_max, "Maximum pool capacity");
    select_cmd->add_option("--inject-pool-size", sel.inject_pool_size)->group("");
    select_cmd->add_option("--inject-sup-num", sel.inject_sup_num)->group("");
    select_cmd->add_option("--inject-random", sel.inject_random)->delimiter(',')->group("");

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run one protocol simulation");
    add_sim_options(sim_cmd, sim);

    CompareArgs cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Metrics table across protocols and seeds");
    add_sim_options(cmp_cmd, cmp.sim);
    cmp_cmd->add_option("--seeds", cmp.seeds, "Number of seeds, starting at --seed");
    cmp_cmd->add_option("--protocols", cmp.protocols, "Protocols to compare")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*gen_cmd) run_gen_data(gen);
        else if (*train_cmd) run_train(tr);
        else if (*select_cmd) run_select(sel);
        else if (*sim_cmd) run_simulate(sim);
        else if (*cmp_cmd) run_compare(cmp);
        return kExitOk;
    } catch (const poai::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const poai::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

// spikeassoc: scenario generation, brute-force labeling, SNN training and
// evaluation for UE-to-TX association, one deterministic pipeline.

#include "spikeassoc/errors.hpp"
#include "spikeassoc/eval.hpp"
#include "spikeassoc/models.hpp"
#include "spikeassoc/oracle.hpp"
#include "spikeassoc/scenario.hpp"
#include "spikeassoc/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace spikeassoc;
using nlohmann::json;

// shortest round-trip decimal form
std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::optional<std::uint64_t> env_seed() {
    const char* env = std::getenv("SPIKE_ASSOC_SEED");
    if (!env || !*env) return std::nullopt;
    std::uint64_t v = 0;
    const auto res = std::from_chars(env, env + std::string(env).size(), v);
    if (res.ec != std::errc() || *res.ptr != '\0')
        throw ConfigError(std::string("SPIKE_ASSOC_SEED is not an integer: ") + env);
    return v;
}

// precedence: --seed flag, then config file, then SPIKE_ASSOC_SEED, then default
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           bool config_has_seed, std::uint64_t config_seed,
                           std::uint64_t fallback) {
    if (flag_seed) return *flag_seed;
    if (config_has_seed) return config_seed;
    if (auto env = env_seed()) return *env;
    return fallback;
}

bool json_file_has_key(const std::string& path, const char* key) {
    std::ifstream in(path);
    if (!in) return false;
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        json j = json::parse(ss.str());
        return j.contains(key);
    } catch (const json::exception&) {
        return false; // the real parse will report the error
    }
}

int cmd_generate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 int jobs, const std::string& out_path) {
    ScenarioConfig cfg = load_scenario_config(config_path);
    cfg.seed = resolve_seed(seed, json_file_has_key(config_path, "seed"), cfg.seed,
                            cfg.seed);
    Dataset ds = generate_dataset(cfg, jobs);
    write_dataset_jsonl(ds, out_path);
    std::cout << "wrote " << ds.instances.size() << " instances to " << out_path
              << " (config " << ds.config_digest << ")\n";
    return 0;
}

int cmd_label(const std::string& in_path, int limit, int jobs,
              const std::string& out_path) {
    Dataset ds = read_dataset_jsonl(in_path);
    std::vector<LabeledInstance> labeled = label_dataset(ds, limit, jobs);
    write_labeled_jsonl(labeled, out_path);
    std::cout << "labeled " << labeled.size() << " instances -> " << out_path << '\n';
    return 0;
}

int cmd_train(const std::string& kind_str, const std::string& data_path,
              const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_path, const std::string& history_path) {
    const ModelKind kind = model_kind_from_string(kind_str);
    TrainConfig cfg;
    bool config_has_seed = false;
    if (!config_path.empty()) {
        cfg = load_train_config(config_path);
        config_has_seed = json_file_has_key(config_path, "seed");
    }
    cfg.seed = resolve_seed(seed, config_has_seed, cfg.seed, cfg.seed);
    const std::vector<LabeledInstance> data = read_labeled_jsonl(data_path);
    TrainResult result = train(kind, data, cfg);
    save_checkpoint(result.checkpoint, out_path);
    if (!history_path.empty()) write_history_csv(result.history, history_path);
    std::cout << "trained " << kind_str << ": best_epoch="
              << result.checkpoint.meta.best_epoch
              << " best_val_loss=" << format_double(result.checkpoint.meta.best_val_loss)
              << " epochs_run=" << result.history.epochs.size() << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, int jobs,
             const std::string& json_path, const std::string& csv_path) {
    const Checkpoint ckpt = load_checkpoint(model_path);
    const std::vector<LabeledInstance> data = read_labeled_jsonl(data_path);
    if (data.empty()) throw ConfigError("labeled data is empty");
    const int n_rx = data.front().rates.n_rx;
    const int n_tx = data.front().rates.n_tx;
    EvalReport report;
    if (ckpt.kind == ModelKind::topdown) {
        const TopDownModel model =
            build_topdown_model(ckpt, n_rx, n_tx, data.front().limit);
        report = evaluate(model, data, jobs);
    } else {
        const BottomUpModel model = build_bottomup_model(ckpt, n_tx);
        report = evaluate(model, data, jobs);
    }
    write_report(report, json_path, csv_path);
    char line[256];
    std::snprintf(line, sizeof line,
                  "mean_per_rx_accuracy=%.6g mean_instance_accuracy=%.6g "
                  "mean_rate_error=%.6g violation_rate=%.6g\n",
                  report.summary.mean_per_rx_accuracy,
                  report.summary.mean_instance_accuracy, report.summary.mean_rate_error,
                  report.summary.violation_rate);
    std::cout << line;
    return 0;
}

int cmd_oracle(const std::string& rates_text, int limit) {
    json j;
    try {
        j = json::parse(rates_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("--rates is not valid JSON: ") + e.what());
    }
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("--rates must be a [[...],[...]] matrix");
    const int n = static_cast<int>(j.size());
    const int m = static_cast<int>(j[0].size());
    RateMatrix rates(n, m);
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(j[r].size()) != m) throw ConfigError("--rates is ragged");
        for (int c = 0; c < m; ++c) rates.at(r, c) = j[r][c].get<double>();
    }
    const OracleResult res = solve_optimal(rates, limit);
    std::string out = "[";
    for (std::size_t i = 0; i < res.assign.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(res.assign[i]);
    }
    out += "] ";
    out += format_double(res.total);
    std::cout << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic UAV/RIS association scenarios, brute-force oracle labels, "
                 "and spiking-network models"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto* gen = app.add_subcommand("generate", "generate a scenario dataset (JSONL)");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "scenario config JSON")->required();
    gen->add_option("--out", gen_out, "output dataset JSONL")->required();
    gen->add_option("--seed", seed, "override the config seed");
    gen->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    auto* lab = app.add_subcommand("label", "label a dataset with brute-force optima");
    std::string lab_in, lab_out;
    int lab_limit = 0;
    lab->add_option("--in", lab_in, "input dataset JSONL")->required();
    lab->add_option("--limit", lab_limit, "per-TX capacity L")->required();
    lab->add_option("--out", lab_out, "output labeled JSONL")->required();
    lab->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    auto* trn = app.add_subcommand("train", "train a model on labeled data");
    std::string trn_model, trn_data, trn_config, trn_out, trn_history;
    trn->add_option("--model", trn_model, "topdown|bottomup")->required();
    trn->add_option("--data", trn_data, "labeled JSONL")->required();
    trn->add_option("--config", trn_config, "train config JSON (defaults when omitted)");
    trn->add_option("--out", trn_out, "output checkpoint JSON")->required();
    trn->add_option("--history", trn_history, "per-epoch metrics CSV");
    trn->add_option("--seed", seed, "override the config seed");

    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint against labels");
    std::string evl_model, evl_data, evl_json, evl_csv;
    evl->add_option("--model", evl_model, "checkpoint JSON")->required();
    evl->add_option("--data", evl_data, "labeled JSONL")->required();
    evl->add_option("--json", evl_json, "report JSON path");
    evl->add_option("--csv", evl_csv, "per-step report CSV path");
    evl->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    auto* orc = app.add_subcommand("oracle", "solve one instance exhaustively");
    std::string orc_rates;
    int orc_limit = 0;
    orc->add_option("--rates", orc_rates, "rate matrix as JSON, e.g. [[5,1],[4,2]]")
        ->required();
    orc->add_option("--limit", orc_limit, "per-TX capacity L")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_config, seed, jobs, gen_out);
        if (lab->parsed()) return cmd_label(lab_in, lab_limit, jobs, lab_out);
        if (trn->parsed())
            return cmd_train(trn_model, trn_data, trn_config, seed, trn_out, trn_history);
        if (evl->parsed()) return cmd_eval(evl_model, evl_data, jobs, evl_json, evl_csv);
        if (orc->parsed()) return cmd_oracle(orc_rates, orc_limit);
    } catch (const InfeasibleError& e) {
        std::cerr << "error: infeasible: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

#include "spikeassoc/training.hpp"

#include "spikeassoc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace spikeassoc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {
constexpr double kImproveEps = 1e-8;
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.epochs_max < 0) throw ConfigError("epochs_max must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(cfg.lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
    if (!(cfg.plateau.factor > 0.0 && cfg.plateau.factor < 1.0))
        throw ConfigError("plateau.factor must be in (0,1)");
    if (cfg.plateau.patience < 1) throw ConfigError("plateau.patience must be >= 1");
    if (!(cfg.plateau.min_lr > 0.0)) throw ConfigError("plateau.min_lr must be > 0");
    if (cfg.early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0))
        throw ConfigError("split_ratio must be in (0,1)");
    if (cfg.loss.penalty_weight < 0.0) throw ConfigError("penalty_weight must be >= 0");
}

std::string to_string(ModelKind k) {
    return k == ModelKind::topdown ? "topdown" : "bottomup";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "topdown") return ModelKind::topdown;
    if (s == "bottomup") return ModelKind::bottomup;
    throw ConfigError("unknown model kind '" + s + "' (topdown|bottomup)");
}

std::pair<std::vector<LabeledInstance>, std::vector<LabeledInstance>>
split_dataset(const std::vector<LabeledInstance>& data, double ratio, std::uint64_t seed) {
    if (data.size() < 2) throw ConfigError("need at least 2 instances to split");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(derive_key(seed, StreamTag::split));
    shuffle(idx, rng);
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(data.size())));
    if (n_train == 0 || n_train == data.size())
        throw ConfigError("split ratio leaves an empty split");
    std::vector<LabeledInstance> train, val;
    train.reserve(n_train);
    val.reserve(data.size() - n_train);
    for (std::size_t k = 0; k < idx.size(); ++k)
        (k < n_train ? train : val).push_back(data[idx[k]]);
    return {std::move(train), std::move(val)};
}

double reduce_lr_on_plateau(std::span<const EpochStats> history, const PlateauConfig& cfg,
                            double current_lr) {
    if (history.empty()) throw ConfigError("plateau check needs a non-empty history");
    double best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t last_improve = -1;
    std::ptrdiff_t last_reduce = -1;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(history.size()); ++i) {
        if (history[i].val_loss < best - kImproveEps) {
            best = history[i].val_loss;
            last_improve = i;
        }
        if (i > 0 && history[i].lr < history[i - 1].lr) last_reduce = i;
    }
    const std::ptrdiff_t barrier = std::max(last_improve, last_reduce);
    const std::ptrdiff_t stale = static_cast<std::ptrdiff_t>(history.size()) - 1 - barrier;
    if (stale >= cfg.patience) return std::max(current_lr * cfg.factor, cfg.min_lr);
    return current_lr;
}

namespace {

// one training sample: an instance for topdown, an (instance, rx row) for bottomup
struct SampleRef {
    std::size_t instance;
    int row; // -1 for topdown
};

struct Problem {
    ModelKind kind;
    int n_rx;
    int n_tx;
    int limit;
    LossConfig loss;
    Standardizer std_;
    const std::vector<LabeledInstance>* train;
    const std::vector<LabeledInstance>* val;
};

std::vector<double> sample_input(const Problem& pb, const LabeledInstance& li, int row) {
    if (pb.kind == ModelKind::topdown) return standardize(pb.std_, li.rates);
    return standardize_row(pb.std_, li.rates, row);
}

double sample_loss(const Problem& pb, const std::vector<double>& logits,
                   const LabeledInstance& li, int row, std::vector<double>* grad) {
    if (pb.kind == ModelKind::topdown)
        return topdown_loss(logits, pb.n_rx, pb.n_tx, li.optimal, pb.loss, grad);
    return bottomup_loss(logits, li.optimal[static_cast<std::size_t>(row)], grad);
}

// mean loss and per-row accuracy over the validation split, eval mode
std::pair<double, double> validate_epoch(const Problem& pb, const NetworkSpec& spec,
                                         const Weights& w) {
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    std::size_t correct = 0;
    std::size_t rows = 0;
    for (const LabeledInstance& li : *pb.val) {
        if (pb.kind == ModelKind::topdown) {
            const std::vector<double> x = standardize(pb.std_, li.rates);
            const std::vector<double> logits = forward_eval(spec, w, x);
            loss_sum += topdown_loss(logits, pb.n_rx, pb.n_tx, li.optimal, pb.loss, nullptr);
            ++loss_n;
            const Association a = decode_topdown(logits, pb.n_rx, pb.n_tx);
            for (int i = 0; i < pb.n_rx; ++i) {
                correct += a[static_cast<std::size_t>(i)] ==
                                   li.optimal[static_cast<std::size_t>(i)]
                               ? 1
                               : 0;
                ++rows;
            }
        } else {
            for (int i = 0; i < pb.n_rx; ++i) {
                const std::vector<double> x = standardize_row(pb.std_, li.rates, i);
                const std::vector<double> logits = forward_eval(spec, w, x);
                loss_sum +=
                    bottomup_loss(logits, li.optimal[static_cast<std::size_t>(i)], nullptr);
                ++loss_n;
                correct += decode_bottomup(logits) ==
                                   li.optimal[static_cast<std::size_t>(i)]
                               ? 1
                               : 0;
                ++rows;
            }
        }
    }
    return {loss_sum / static_cast<double>(loss_n),
            static_cast<double>(correct) / static_cast<double>(rows)};
}

} // namespace

TrainResult train(ModelKind kind, const std::vector<LabeledInstance>& data,
                  const TrainConfig& cfg, const NetworkSpec* spec_override) {
    validate(cfg);
    if (cfg.epochs_max == 0) throw ConfigError("no training performed: epochs_max is 0");
    if (data.empty()) throw ConfigError("no labeled data");

    const int n_rx = data.front().rates.n_rx;
    const int n_tx = data.front().rates.n_tx;
    const int data_limit = data.front().limit;
    for (const LabeledInstance& li : data) {
        if (li.rates.n_rx != n_rx || li.rates.n_tx != n_tx)
            throw ConfigError("inconsistent rate matrix shapes in labeled data");
        if (li.limit != data_limit)
            throw ConfigError("inconsistent limits in labeled data");
        if (static_cast<int>(li.optimal.size()) != n_rx)
            throw ConfigError("label length mismatch in labeled data");
    }
    if (cfg.loss.limit > 0 && cfg.loss.limit != data_limit)
        throw ConfigError("config loss.limit " + std::to_string(cfg.loss.limit) +
                          " contradicts labeled data limit " + std::to_string(data_limit));

    auto [train_set, val_set] = split_dataset(data, cfg.split_ratio, cfg.seed);

    Problem pb;
    pb.kind = kind;
    pb.n_rx = n_rx;
    pb.n_tx = n_tx;
    pb.limit = data_limit;
    pb.loss = cfg.loss;
    pb.loss.limit = data_limit;
    pb.train = &train_set;
    pb.val = &val_set;
    {
        std::vector<RateMatrix> train_rates;
        train_rates.reserve(train_set.size());
        for (const LabeledInstance& li : train_set) train_rates.push_back(li.rates);
        pb.std_ = fit_standardizer(train_rates);
    }

    NetworkSpec spec = spec_override ? *spec_override
                                     : (kind == ModelKind::topdown
                                            ? default_topdown_spec(n_rx, n_tx)
                                            : default_bottomup_spec(n_tx));
    validate(spec);
    const int expect_in = kind == ModelKind::topdown ? n_rx * n_tx : n_tx;
    if (spec.input_size() != expect_in || spec.output_size() != expect_in)
        throw ConfigError("network spec input/output sizes do not match the data");

    Weights w = init_weights(spec, derive_key(cfg.seed, StreamTag::weights));
    AdamState adam = make_adam_state(w);
    Gradients grads = zeros_like(w);
    ForwardTrace trace;

    std::vector<SampleRef> samples;
    for (std::size_t k = 0; k < train_set.size(); ++k) {
        if (kind == ModelKind::topdown) {
            samples.push_back({k, -1});
        } else {
            for (int i = 0; i < n_rx; ++i) samples.push_back({k, i});
        }
    }

    TrainResult result;
    TrainHistory& history = result.history;
    double lr = cfg.lr0;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    Weights best_weights = w;
    int stale_epochs = 0;

    std::vector<double> logits, dlogits, x;

    for (int epoch = 0; epoch < cfg.epochs_max; ++epoch) {
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        RngStream shuffle_rng(derive_key(cfg.seed, StreamTag::shuffle,
                                         {static_cast<std::uint64_t>(epoch)}));
        shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_n =
                std::min<std::size_t>(cfg.batch_size, order.size() - pos);
            set_zero(grads);
            for (std::size_t s = 0; s < batch_n; ++s, ++pos) {
                const SampleRef& ref = samples[order[pos]];
                const LabeledInstance& li = (*pb.train)[ref.instance];
                x = sample_input(pb, li, ref.row);
                RngStream drop_rng(derive_key(cfg.seed, StreamTag::dropout,
                                              {static_cast<std::uint64_t>(epoch),
                                               static_cast<std::uint64_t>(pos)}));
                forward(spec, w, x, RunMode::train, &drop_rng, trace, logits);
                loss_sum += sample_loss(pb, logits, li, ref.row, &dlogits);
                backward(spec, w, trace, x, dlogits, grads);
            }
            const double inv = 1.0 / static_cast<double>(batch_n);
            for (LayerWeights& g : grads.layers) {
                kernels::active().scale_inplace(g.w.data(), inv, g.w.size());
                kernels::active().scale_inplace(g.b.data(), inv, g.b.size());
            }
            adam_step(w, grads, adam, lr);
        }

        const auto [val_loss, val_acc] = validate_epoch(pb, spec, w);
        history.epochs.push_back({loss_sum / static_cast<double>(samples.size()),
                                  val_loss, val_acc, lr});

        if (val_loss < best_val - kImproveEps) {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights = w;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
        }
        lr = reduce_lr_on_plateau(history.epochs, cfg.plateau, lr);
        if (stale_epochs >= cfg.early_stop_patience) break;
    }

    Checkpoint& ckpt = result.checkpoint;
    ckpt.format_version = 1;
    ckpt.kind = kind;
    ckpt.spec = spec;
    ckpt.weights = std::move(best_weights);
    ckpt.standardizer = pb.std_;
    ckpt.meta.best_epoch = best_epoch;
    ckpt.meta.best_val_loss = best_val;
    ckpt.meta.config_digest = fnv1a_hex(train_config_to_json_text(cfg));
    return result;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

ordered_json spec_to_json(const NetworkSpec& spec) {
    ordered_json j;
    j["layer_sizes"] = spec.layer_sizes;
    ordered_json lifs = ordered_json::array();
    for (const LifParams& p : spec.lif) {
        ordered_json pj;
        pj["beta"] = p.beta;
        pj["threshold"] = p.threshold;
        pj["reset"] = p.reset == ResetMode::subtract ? "subtract" : "zero";
        pj["surrogate_slope"] = p.surrogate_slope;
        lifs.push_back(std::move(pj));
    }
    j["lif"] = std::move(lifs);
    j["dropout"] = spec.dropout;
    j["time_steps"] = spec.time_steps;
    j["output_beta"] = spec.output_beta;
    return j;
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& pj : j.at("lif")) {
        LifParams p;
        p.beta = pj.at("beta").get<double>();
        p.threshold = pj.at("threshold").get<double>();
        const std::string reset = pj.at("reset").get<std::string>();
        if (reset == "subtract")
            p.reset = ResetMode::subtract;
        else if (reset == "zero")
            p.reset = ResetMode::zero;
        else
            throw IoError("unknown reset mode '" + reset + "'");
        p.surrogate_slope = pj.at("surrogate_slope").get<double>();
        spec.lif.push_back(p);
    }
    spec.dropout = j.at("dropout").get<std::vector<double>>();
    spec.time_steps = j.at("time_steps").get<int>();
    spec.output_beta = j.at("output_beta").get<double>();
    validate(spec);
    return spec;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ordered_json j;
    j["format_version"] = ckpt.format_version;
    j["kind"] = to_string(ckpt.kind);
    j["spec"] = spec_to_json(ckpt.spec);
    ordered_json std_j;
    std_j["mu"] = ckpt.standardizer.mu;
    std_j["sigma"] = ckpt.standardizer.sigma;
    j["standardizer"] = std::move(std_j);
    ordered_json layers = ordered_json::array();
    for (const LayerWeights& lw : ckpt.weights.layers) {
        ordered_json lj;
        lj["w"] = lw.w;
        lj["b"] = lw.b;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    ordered_json meta;
    meta["best_epoch"] = ckpt.meta.best_epoch;
    meta["best_val_loss"] = ckpt.meta.best_val_loss;
    meta["config_digest"] = ckpt.meta.config_digest;
    j["meta"] = std::move(meta);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw IoError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        Checkpoint ckpt;
        ckpt.format_version = j.at("format_version").get<int>();
        if (ckpt.format_version != 1)
            throw IoError("unsupported checkpoint format_version " +
                          std::to_string(ckpt.format_version));
        ckpt.kind = model_kind_from_string(j.at("kind").get<std::string>());
        ckpt.spec = spec_from_json(j.at("spec"));
        ckpt.standardizer.mu = j.at("standardizer").at("mu").get<double>();
        ckpt.standardizer.sigma = j.at("standardizer").at("sigma").get<double>();
        const json& layers = j.at("layers");
        if (layers.size() != ckpt.spec.layer_sizes.size() - 1)
            throw IoError("checkpoint layer count does not match spec");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            LayerWeights lw;
            lw.cols = ckpt.spec.layer_sizes[l];
            lw.rows = ckpt.spec.layer_sizes[l + 1];
            lw.w = layers[l].at("w").get<std::vector<double>>();
            lw.b = layers[l].at("b").get<std::vector<double>>();
            if (lw.w.size() != static_cast<std::size_t>(lw.rows) * lw.cols ||
                lw.b.size() != static_cast<std::size_t>(lw.rows))
                throw IoError("checkpoint tensor sizes do not match spec");
            ckpt.weights.layers.push_back(std::move(lw));
        }
        ckpt.meta.best_epoch = j.at("meta").at("best_epoch").get<int>();
        ckpt.meta.best_val_loss = j.at("meta").at("best_val_loss").get<double>();
        ckpt.meta.config_digest = j.at("meta").at("config_digest").get<std::string>();
        return ckpt;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint '" + path + "': " + e.what());
    } catch (const ConfigError& e) {
        throw IoError("malformed checkpoint '" + path + "': " + e.what());
    }
}

TopDownModel build_topdown_model(const Checkpoint& ckpt, int n_rx, int n_tx, int limit) {
    if (ckpt.kind != ModelKind::topdown)
        throw ConfigError("checkpoint is not a topdown model");
    if (ckpt.spec.input_size() != n_rx * n_tx)
        throw ConfigError("checkpoint input size does not match n_rx*n_tx");
    return {ckpt.spec, ckpt.weights, ckpt.standardizer, n_rx, n_tx, limit};
}

BottomUpModel build_bottomup_model(const Checkpoint& ckpt, int n_tx) {
    if (ckpt.kind != ModelKind::bottomup)
        throw ConfigError("checkpoint is not a bottomup model");
    if (ckpt.spec.input_size() != n_tx)
        throw ConfigError("checkpoint input size does not match n_tx");
    return {ckpt.spec, ckpt.weights, ckpt.standardizer, n_tx};
}

TrainConfig train_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config is not valid JSON: ") + e.what());
    }
    try {
        TrainConfig cfg;
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k != "epochs_max" && k != "batch_size" && k != "lr0" && k != "plateau" &&
                k != "early_stop_patience" && k != "split_ratio" && k != "seed" &&
                k != "loss")
                throw ConfigError("unknown field '" + k + "' in train config");
        }
        if (j.contains("epochs_max")) cfg.epochs_max = j.at("epochs_max").get<int>();
        if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
        if (j.contains("lr0")) cfg.lr0 = j.at("lr0").get<double>();
        if (j.contains("plateau")) {
            const json& p = j.at("plateau");
            if (p.contains("factor")) cfg.plateau.factor = p.at("factor").get<double>();
            if (p.contains("patience")) cfg.plateau.patience = p.at("patience").get<int>();
            if (p.contains("min_lr")) cfg.plateau.min_lr = p.at("min_lr").get<double>();
        }
        if (j.contains("early_stop_patience"))
            cfg.early_stop_patience = j.at("early_stop_patience").get<int>();
        if (j.contains("split_ratio")) cfg.split_ratio = j.at("split_ratio").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("loss")) {
            const json& lo = j.at("loss");
            if (lo.contains("penalty_weight"))
                cfg.loss.penalty_weight = lo.at("penalty_weight").get<double>();
            if (lo.contains("limit")) cfg.loss.limit = lo.at("limit").get<int>();
        }
        validate(cfg);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
    ordered_json j;
    j["epochs_max"] = cfg.epochs_max;
    j["batch_size"] = cfg.batch_size;
    j["lr0"] = cfg.lr0;
    ordered_json p;
    p["factor"] = cfg.plateau.factor;
    p["patience"] = cfg.plateau.patience;
    p["min_lr"] = cfg.plateau.min_lr;
    j["plateau"] = std::move(p);
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["split_ratio"] = cfg.split_ratio;
    j["seed"] = cfg.seed;
    ordered_json lo;
    lo["penalty_weight"] = cfg.loss.penalty_weight;
    lo["limit"] = cfg.loss.limit;
    j["loss"] = std::move(lo);
    return j.dump();
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open train config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return train_config_from_json_text(ss.str());
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "epoch,train_loss,val_loss,val_accuracy,lr\n";
    char buf[160];
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const EpochStats& s = history.epochs[e];
        std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g,%.6g\n", e, s.train_loss,
                      s.val_loss, s.val_accuracy, s.lr);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace spikeassoc

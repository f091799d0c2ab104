#include "spikeassoc/scenario.hpp"

#include "spikeassoc/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace spikeassoc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void validate(const ScenarioConfig& cfg) {
    if (cfg.n_rx < 1) throw ConfigError("n_rx must be >= 1");
    if (cfg.tx_nodes.empty()) throw ConfigError("tx_nodes must not be empty");
    if (cfg.n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (!(cfg.area_width > 0.0) || !(cfg.area_height > 0.0))
        throw ConfigError("area dimensions must be positive");
    if (cfg.step_size < 0.0) throw ConfigError("step_size must be >= 0");
    const ChannelParams& ch = cfg.channel;
    if (!(ch.exponent > 0.0)) throw ConfigError("channel.exponent must be > 0");
    if (!(ch.bandwidth_hz > 0.0)) throw ConfigError("channel.bandwidth_hz must be > 0");
    if (ch.shadow_sigma_db < 0.0) throw ConfigError("channel.shadow_sigma_db must be >= 0");
    if (!(ch.ref_distance > 0.0)) throw ConfigError("channel.ref_distance must be > 0");
    for (std::size_t j = 0; j < cfg.tx_nodes.size(); ++j) {
        const TxNode& tx = cfg.tx_nodes[j];
        if (tx.position.z < 0.0)
            throw ConfigError("tx_nodes[" + std::to_string(j) + "] altitude must be >= 0");
        if (tx.kind == TxKind::ris_relay) {
            if (tx.anchor_tx < 0 || tx.anchor_tx >= static_cast<int>(cfg.tx_nodes.size()))
                throw ConfigError("tx_nodes[" + std::to_string(j) +
                                  "] ris_relay needs a valid anchor_tx");
            if (cfg.tx_nodes[tx.anchor_tx].kind != TxKind::base_station)
                throw ConfigError("tx_nodes[" + std::to_string(j) +
                                  "] anchor_tx must reference a base_station");
        }
    }
}

namespace {

// reflecting boundary: fold v into [lo, hi]
double reflect(double v, double lo, double hi) {
    const double range = hi - lo;
    const double period = 2.0 * range;
    double t = std::fmod(v - lo, period);
    if (t < 0.0) t += period;
    return lo + (t <= range ? t : period - t);
}

double path_loss_db(double d, const ChannelParams& ch) {
    return ch.pl0_db + 10.0 * ch.exponent * std::log10(d / ch.ref_distance);
}

double shannon_rate(double snr_db, const ChannelParams& ch) {
    return ch.bandwidth_hz * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

} // namespace

std::vector<Vec3> step_positions(const std::vector<Vec3>& positions,
                                 const ScenarioConfig& cfg, int step) {
    std::vector<Vec3> out;
    out.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        RngStream rng(derive_key(cfg.seed, StreamTag::move,
                                 {static_cast<std::uint64_t>(step), i}));
        const double angle = 6.283185307179586476925286766559 * rng.next_unit();
        Vec3 p = positions[i];
        p.x = reflect(p.x + cfg.step_size * std::cos(angle), 0.0, cfg.area_width);
        p.y = reflect(p.y + cfg.step_size * std::sin(angle), 0.0, cfg.area_height);
        out.push_back(p);
    }
    return out;
}

double link_rate(const std::vector<TxNode>& txs, int j, const Vec3& rx_pos,
                 const ChannelParams& ch, RngStream& rng) {
    const TxNode& tx = txs[static_cast<std::size_t>(j)];
    if (tx.kind == TxKind::base_station) {
        const double d = distance(tx.position, rx_pos);
        if (d <= 0.0) throw ConfigError("degenerate geometry: zero TX-RX distance");
        const double pl = path_loss_db(d, ch) + ch.shadow_sigma_db * rng.next_normal();
        const double snr_db = tx.tx_power_dbm + tx.gain_dbi - pl - ch.noise_dbm;
        return shannon_rate(snr_db, ch);
    }
    // ris_relay: two-hop anchor BS -> RIS -> RX, segment losses added in dB,
    // transmit power taken from the anchor (the reflector is passive)
    const TxNode& anchor = txs[static_cast<std::size_t>(tx.anchor_tx)];
    const double d1 = distance(anchor.position, tx.position);
    const double d2 = distance(tx.position, rx_pos);
    if (d1 <= 0.0 || d2 <= 0.0)
        throw ConfigError("degenerate geometry: zero segment distance");
    const double pl1 = path_loss_db(d1, ch) + ch.shadow_sigma_db * rng.next_normal();
    const double pl2 = path_loss_db(d2, ch) + ch.shadow_sigma_db * rng.next_normal();
    const double snr_db = anchor.tx_power_dbm + tx.gain_dbi - (pl1 + pl2) - ch.noise_dbm;
    return shannon_rate(snr_db, ch);
}

namespace {

RateMatrix rate_matrix_for_step(const ScenarioConfig& cfg,
                                const std::vector<Vec3>& positions, int step) {
    const int m = static_cast<int>(cfg.tx_nodes.size());
    RateMatrix rates(cfg.n_rx, m);
    for (int i = 0; i < cfg.n_rx; ++i) {
        for (int j = 0; j < m; ++j) {
            RngStream rng(derive_key(cfg.seed, StreamTag::link,
                                     {static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(i),
                                      static_cast<std::uint64_t>(j)}));
            rates.at(i, j) = link_rate(cfg.tx_nodes, j, positions[i], cfg.channel, rng);
        }
    }
    return rates;
}

} // namespace

Dataset generate_dataset(const ScenarioConfig& cfg, int jobs) {
    validate(cfg);

    // the mobility chain is sequential; rates per step are then independent
    std::vector<std::vector<Vec3>> track(cfg.n_steps);
    track[0].reserve(cfg.n_rx);
    for (int i = 0; i < cfg.n_rx; ++i) {
        RngStream rng(derive_key(cfg.seed, StreamTag::init_pos,
                                 {static_cast<std::uint64_t>(i)}));
        Vec3 p;
        p.x = rng.next_unit() * cfg.area_width;
        p.y = rng.next_unit() * cfg.area_height;
        p.z = 1.5; // UE antenna height
        track[0].push_back(p);
    }
    for (int t = 1; t < cfg.n_steps; ++t)
        track[t] = step_positions(track[t - 1], cfg, t);

    Dataset ds;
    ds.config_digest = config_digest(cfg);
    ds.instances.resize(cfg.n_steps);

    auto fill = [&](int t) {
        ds.instances[t].step = t;
        ds.instances[t].positions = track[t];
        ds.instances[t].rates = rate_matrix_for_step(cfg, track[t], t);
    };

    if (jobs <= 1) {
        for (int t = 0; t < cfg.n_steps; ++t) fill(t);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                for (int t = w; t < cfg.n_steps; t += jobs) fill(t);
            });
        for (auto& th : pool) th.join();
    }
    return ds;
}

// ---------------------------------------------------------------------------
// JSON plumbing

namespace {

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

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw ConfigError(std::string("unknown field '") + it.key() + "' in " + what);
    }
}

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("position must be a [x,y,z] array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

TxNode tx_from_json(const json& j) {
    require_keys(j, {"position", "kind", "tx_power_dbm", "gain_dbi", "anchor_tx"},
                 "tx_node");
    TxNode tx;
    tx.position = vec3_from_json(j.at("position"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "base_station")
        tx.kind = TxKind::base_station;
    else if (kind == "ris_relay")
        tx.kind = TxKind::ris_relay;
    else
        throw ConfigError("tx kind must be base_station or ris_relay, got '" + kind + "'");
    tx.tx_power_dbm = j.at("tx_power_dbm").get<double>();
    if (j.contains("gain_dbi")) tx.gain_dbi = j.at("gain_dbi").get<double>();
    if (j.contains("anchor_tx") && !j.at("anchor_tx").is_null())
        tx.anchor_tx = j.at("anchor_tx").get<int>();
    return tx;
}

} // namespace

ScenarioConfig scenario_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
    }
    try {
        require_keys(j,
                     {"area_width", "area_height", "n_rx", "tx_nodes", "n_steps",
                      "step_size", "channel", "seed"},
                     "scenario config");
        ScenarioConfig cfg;
        cfg.area_width = j.at("area_width").get<double>();
        cfg.area_height = j.at("area_height").get<double>();
        cfg.n_rx = j.at("n_rx").get<int>();
        cfg.tx_nodes.clear();
        for (const auto& tj : j.at("tx_nodes")) cfg.tx_nodes.push_back(tx_from_json(tj));
        cfg.n_steps = j.at("n_steps").get<int>();
        cfg.step_size = j.at("step_size").get<double>();
        const json& ch = j.at("channel");
        require_keys(ch,
                     {"pl0_db", "ref_distance", "exponent", "shadow_sigma_db",
                      "bandwidth_hz", "noise_dbm"},
                     "channel");
        cfg.channel.pl0_db = ch.at("pl0_db").get<double>();
        cfg.channel.ref_distance = ch.at("ref_distance").get<double>();
        cfg.channel.exponent = ch.at("exponent").get<double>();
        cfg.channel.shadow_sigma_db = ch.at("shadow_sigma_db").get<double>();
        cfg.channel.bandwidth_hz = ch.at("bandwidth_hz").get<double>();
        cfg.channel.noise_dbm = ch.at("noise_dbm").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        validate(cfg);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad scenario config: ") + e.what());
    }
}

std::string scenario_config_to_json_text(const ScenarioConfig& cfg) {
    ordered_json j;
    j["area_width"] = cfg.area_width;
    j["area_height"] = cfg.area_height;
    j["n_rx"] = cfg.n_rx;
    ordered_json txs = ordered_json::array();
    for (const TxNode& tx : cfg.tx_nodes) {
        ordered_json tj;
        tj["position"] = {tx.position.x, tx.position.y, tx.position.z};
        tj["kind"] = tx.kind == TxKind::base_station ? "base_station" : "ris_relay";
        tj["tx_power_dbm"] = tx.tx_power_dbm;
        tj["gain_dbi"] = tx.gain_dbi;
        if (tx.kind == TxKind::ris_relay)
            tj["anchor_tx"] = tx.anchor_tx;
        txs.push_back(std::move(tj));
    }
    j["tx_nodes"] = std::move(txs);
    j["n_steps"] = cfg.n_steps;
    j["step_size"] = cfg.step_size;
    ordered_json ch;
    ch["pl0_db"] = cfg.channel.pl0_db;
    ch["ref_distance"] = cfg.channel.ref_distance;
    ch["exponent"] = cfg.channel.exponent;
    ch["shadow_sigma_db"] = cfg.channel.shadow_sigma_db;
    ch["bandwidth_hz"] = cfg.channel.bandwidth_hz;
    ch["noise_dbm"] = cfg.channel.noise_dbm;
    j["channel"] = std::move(ch);
    j["seed"] = cfg.seed;
    return j.dump();
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_config_from_json_text(ss.str());
}

std::string config_digest(const ScenarioConfig& cfg) {
    return fnv1a_hex(scenario_config_to_json_text(cfg));
}

void write_dataset_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const Instance& inst : ds.instances) {
        ordered_json j;
        j["step"] = inst.step;
        ordered_json rows = ordered_json::array();
        for (int r = 0; r < inst.rates.n_rx; ++r) {
            ordered_json row = ordered_json::array();
            for (int c = 0; c < inst.rates.n_tx; ++c) row.push_back(inst.rates.at(r, c));
            rows.push_back(std::move(row));
        }
        j["rates"] = std::move(rows);
        ordered_json pos = ordered_json::array();
        for (const Vec3& p : inst.positions) pos.push_back(ordered_json::array({p.x, p.y, p.z}));
        j["positions"] = std::move(pos);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset read_dataset_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    Dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("bad JSON at " + path + ":" + std::to_string(lineno) + ": " +
                          e.what());
        }
        try {
            Instance inst;
            inst.step = j.at("step").get<int>();
            const json& rows = j.at("rates");
            const int n = static_cast<int>(rows.size());
            const int m = n > 0 ? static_cast<int>(rows[0].size()) : 0;
            inst.rates = RateMatrix(n, m);
            for (int r = 0; r < n; ++r) {
                if (static_cast<int>(rows[r].size()) != m)
                    throw IoError("ragged rate matrix at " + path + ":" +
                                  std::to_string(lineno));
                for (int c = 0; c < m; ++c) inst.rates.at(r, c) = rows[r][c].get<double>();
            }
            for (const auto& pj : j.at("positions")) inst.positions.push_back(vec3_from_json(pj));
            if (static_cast<int>(inst.positions.size()) != n)
                throw IoError("positions/rates row mismatch at " + path + ":" +
                              std::to_string(lineno));
            if (!ds.instances.empty() &&
                (ds.instances.front().rates.n_rx != n || ds.instances.front().rates.n_tx != m))
                throw IoError("inconsistent matrix shapes at " + path + ":" +
                              std::to_string(lineno));
            ds.instances.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw IoError("bad dataset record at " + path + ":" + std::to_string(lineno) +
                          ": " + e.what());
        } catch (const ConfigError& e) {
            throw IoError("bad dataset record at " + path + ":" + std::to_string(lineno) +
                          ": " + e.what());
        }
    }
    return ds;
}

} // namespace spikeassoc

#pragma once

#include "spikeassoc/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spikeassoc {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

enum class TxKind { base_station, ris_relay };

struct TxNode {
    Vec3 position;
    TxKind kind = TxKind::base_station;
    double tx_power_dbm = 30.0;
    // Scalar antenna/aperture gain applied to this column's link budget. For a
    // ris_relay this stands in for the ideal reflector's beamforming gain.
    double gain_dbi = 0.0;
    int anchor_tx = -1; // index of the reflected BS; required iff kind == ris_relay
};

struct ChannelParams {
    double pl0_db = 43.0;        // path loss at ref_distance
    double ref_distance = 1.0;   // meters
    double exponent = 2.8;       // path-loss exponent
    double shadow_sigma_db = 3.0;
    double bandwidth_hz = 10e6;
    double noise_dbm = -94.0;
};

struct ScenarioConfig {
    double area_width = 600.0;
    double area_height = 600.0;
    int n_rx = 6;
    std::vector<TxNode> tx_nodes;
    int n_steps = 500;
    double step_size = 5.0;
    ChannelParams channel;
    std::uint64_t seed = 12345;
};

// throws ConfigError with the violated condition
void validate(const ScenarioConfig& cfg);

// doubles kept non-negative and finite by construction; row r = RX, col c = TX
struct RateMatrix {
    int n_rx = 0;
    int n_tx = 0;
    std::vector<double> v; // row-major

    RateMatrix() = default;
    RateMatrix(int n, int m) : n_rx(n), n_tx(m), v(static_cast<std::size_t>(n) * m, 0.0) {}

    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * n_tx + c]; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * n_tx + c]; }
};

struct Instance {
    int step = 0;
    RateMatrix rates;
    std::vector<Vec3> positions; // one per RX
};

struct Dataset {
    std::string config_digest;
    std::vector<Instance> instances;
};

// One random-walk move of every RX: step_size in a uniformly random planar
// direction, reflected at the area boundary, altitude unchanged. Directions
// come from streams keyed on (cfg.seed, move, step, rx).
std::vector<Vec3> step_positions(const std::vector<Vec3>& positions,
                                 const ScenarioConfig& cfg, int step);

// Achievable rate of the (rx, tx column j) link. base_station: log-distance
// path loss + log-normal shadowing; ris_relay: dB-additive two-hop through the
// anchor BS, transmitting at the anchor's power. Throws ConfigError on
// degenerate geometry (zero distance).
double link_rate(const std::vector<TxNode>& txs, int j, const Vec3& rx_pos,
                 const ChannelParams& ch, RngStream& rng);

// Full dataset: a pure function of cfg. `jobs` parallelizes across steps; the
// result is identical for any job count.
Dataset generate_dataset(const ScenarioConfig& cfg, int jobs = 1);

// 16-hex-digit digest of the canonical config JSON
std::string config_digest(const ScenarioConfig& cfg);

// JSON config file <-> struct; unknown fields rejected
ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig scenario_config_from_json_text(const std::string& text);
std::string scenario_config_to_json_text(const ScenarioConfig& cfg);

// JSON Lines dataset file: {"step":..,"rates":[[..]],"positions":[[x,y,z]..]}
void write_dataset_jsonl(const Dataset& ds, const std::string& path);
Dataset read_dataset_jsonl(const std::string& path);

} // namespace spikeassoc

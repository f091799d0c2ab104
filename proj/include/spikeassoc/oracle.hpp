#pragma once

#include "spikeassoc/scenario.hpp"

#include <utility>
#include <vector>

namespace spikeassoc {

// assignment f: RX -> TX, one TX index per RX
using Association = std::vector<int>;

// sum of the selected matrix entries; throws ConfigError on shape mismatch
double total_rate(const RateMatrix& rates, const Association& a);

// true iff no TX serves more than `limit` RXs
bool is_feasible(const Association& a, int n_tx, int limit);

struct OracleResult {
    Association assign;
    double total = 0.0;
};

// Exhaustive search over all M^N assignments in lexicographic order; returns
// the feasible maximizer, ties broken by the lexicographically smallest
// assignment. Throws InfeasibleError when n_rx > n_tx * limit.
OracleResult solve_optimal(const RateMatrix& rates, int limit);

struct LabeledInstance {
    int step = 0;
    RateMatrix rates;
    std::vector<Vec3> positions;
    Association optimal;
    double optimal_total = 0.0;
    int limit = 0;
};

// brute-force labels for every instance, order preserved; `jobs` parallelizes
// across instances with identical results for any job count
std::vector<LabeledInstance> label_dataset(const Dataset& ds, int limit, int jobs = 1);

// JSON Lines: dataset fields plus "optimal", "optimal_total", "limit"
void write_labeled_jsonl(const std::vector<LabeledInstance>& data, const std::string& path);
std::vector<LabeledInstance> read_labeled_jsonl(const std::string& path);

} // namespace spikeassoc

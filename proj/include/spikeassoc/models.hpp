#pragma once

#include "spikeassoc/oracle.hpp"
#include "spikeassoc/scenario.hpp"
#include "spikeassoc/snn.hpp"

#include <span>
#include <vector>

namespace spikeassoc {

// One global affine map (x - mu) / sigma over all rate entries; preserves every
// argmax, which is what makes model predictions scale-invariant.
struct Standardizer {
    double mu = 0.0;
    double sigma = 1.0;
};

constexpr double kSigmaFloor = 1e-9;

// pooled population statistics over every entry of the training matrices
Standardizer fit_standardizer(std::span<const RateMatrix> train);

// flattened row-major standardized matrix
std::vector<double> standardize(const Standardizer& s, const RateMatrix& rates);
std::vector<double> standardize_row(const Standardizer& s, const RateMatrix& rates, int row);

struct LossConfig {
    double penalty_weight = 0.1; // lambda
    int limit = 1;               // L
};

// centralized: consumes the whole N x M matrix, predicts all rows jointly
struct TopDownModel {
    NetworkSpec spec; // input and output N*M
    Weights weights;
    Standardizer standardizer;
    int n_rx = 0;
    int n_tx = 0;
    int limit = 0;
};

// distributed: consumes one RX row, predicts that RX only
struct BottomUpModel {
    NetworkSpec spec; // input and output M
    Weights weights;
    Standardizer standardizer;
    int n_tx = 0;
};

// default architectures; sizes are artifact choices, all overridable upstream
NetworkSpec default_topdown_spec(int n_rx, int n_tx);
NetworkSpec default_bottomup_spec(int n_tx);

// Per-row softmax cross-entropy averaged over rows, plus lambda * sum_j
// relu(load_j - L)^2 where load_j is the soft per-TX load sum_i p_i[j].
// Returns the loss; writes the exact gradient wrt logits when grad != nullptr.
double topdown_loss(const std::vector<double>& logits, int n_rx, int n_tx,
                    const Association& target, const LossConfig& cfg,
                    std::vector<double>* grad);

// softmax cross-entropy for one row; gradient is p - onehot(target)
double bottomup_loss(const std::vector<double>& logits, int target,
                     std::vector<double>* grad);

// per-row argmax, ties to the lowest TX index; no feasibility repair
Association decode_topdown(const std::vector<double>& logits, int n_rx, int n_tx);
int decode_bottomup(const std::vector<double>& logits);

Association predict(const TopDownModel& model, const RateMatrix& rates);
Association predict(const BottomUpModel& model, const RateMatrix& rates);

} // namespace spikeassoc

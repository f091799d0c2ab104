#pragma once

#include "spikeassoc/models.hpp"
#include "spikeassoc/oracle.hpp"

#include <string>
#include <vector>

namespace spikeassoc {

struct StepRecord {
    int step = 0;
    double per_rx_accuracy = 0.0;
    int instance_exact = 0;
    double achieved_rate = 0.0;
    double optimal_rate = 0.0;
    double rate_error = 0.0; // optimal - achieved; positive = shortfall
    int violated = 0;
};

struct EvalSummary {
    double mean_per_rx_accuracy = 0.0;
    double mean_instance_accuracy = 0.0;
    double mean_rate_error = 0.0;
    double violation_rate = 0.0;
};

struct EvalReport {
    std::vector<StepRecord> records;
    int n_tx = 0;
    std::vector<long> confusion; // n_tx x n_tx, rows = true TX, cols = predicted
    EvalSummary summary;

    long confusion_at(int t, int p) const {
        return confusion[static_cast<std::size_t>(t) * n_tx + p];
    }
};

// counts[t][p] = |{k : true[k]=t and pred[k]=p}|; throws on length mismatch
std::vector<long> confusion_matrix(const std::vector<int>& true_labels,
                                   const std::vector<int>& pred_labels, int m);

EvalReport evaluate(const TopDownModel& model, const std::vector<LabeledInstance>& data,
                    int jobs = 1);
EvalReport evaluate(const BottomUpModel& model, const std::vector<LabeledInstance>& data,
                    int jobs = 1);

// JSON: full report. CSV: one row per instance with the exact header
// step,per_rx_accuracy,instance_exact,achieved_rate,optimal_rate,rate_error,violated
void write_report(const EvalReport& report, const std::string& json_path,
                  const std::string& csv_path);

} // namespace spikeassoc

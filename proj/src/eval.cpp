#include "spikeassoc/eval.hpp"

#include "spikeassoc/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <thread>

namespace spikeassoc {

using ordered_json = nlohmann::ordered_json;

std::vector<long> confusion_matrix(const std::vector<int>& true_labels,
                                   const std::vector<int>& pred_labels, int m) {
    if (true_labels.size() != pred_labels.size())
        throw ConfigError("confusion matrix needs equal-length label lists");
    std::vector<long> counts(static_cast<std::size_t>(m) * m, 0);
    for (std::size_t k = 0; k < true_labels.size(); ++k) {
        const int t = true_labels[k];
        const int p = pred_labels[k];
        if (t < 0 || t >= m || p < 0 || p >= m)
            throw ConfigError("label out of range in confusion matrix");
        ++counts[static_cast<std::size_t>(t) * m + p];
    }
    return counts;
}

namespace {

EvalReport evaluate_impl(const std::function<Association(const RateMatrix&)>& predict_fn,
                         const std::vector<LabeledInstance>& data, int n_tx, int limit,
                         int jobs) {
    if (data.empty()) throw ConfigError("cannot evaluate on empty labeled data");

    EvalReport report;
    report.n_tx = n_tx;
    report.records.resize(data.size());
    std::vector<Association> preds(data.size());

    auto eval_one = [&](std::size_t k) {
        const LabeledInstance& li = data[k];
        if (li.optimal.empty()) throw ConfigError("instance is missing labels");
        const Association pred = predict_fn(li.rates);
        const int n = li.rates.n_rx;
        int correct = 0;
        for (int i = 0; i < n; ++i)
            if (pred[static_cast<std::size_t>(i)] == li.optimal[static_cast<std::size_t>(i)])
                ++correct;
        StepRecord rec;
        rec.step = li.step;
        rec.per_rx_accuracy = static_cast<double>(correct) / n;
        rec.instance_exact = correct == n ? 1 : 0;
        rec.achieved_rate = total_rate(li.rates, pred);
        rec.optimal_rate = li.optimal_total;
        rec.rate_error = rec.optimal_rate - rec.achieved_rate;
        rec.violated = is_feasible(pred, n_tx, limit) ? 0 : 1;
        report.records[k] = rec;
        preds[k] = pred;
    };

    if (jobs <= 1) {
        for (std::size_t k = 0; k < data.size(); ++k) eval_one(k);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = static_cast<std::size_t>(w); k < data.size();
                         k += static_cast<std::size_t>(jobs))
                        eval_one(k);
                } catch (...) {
                    errs[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    // deterministic aggregation in instance order
    std::vector<int> all_true, all_pred;
    double acc_sum = 0.0, exact_sum = 0.0, err_sum = 0.0, viol_sum = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const LabeledInstance& li = data[k];
        for (int i = 0; i < li.rates.n_rx; ++i) {
            all_true.push_back(li.optimal[static_cast<std::size_t>(i)]);
            all_pred.push_back(preds[k][static_cast<std::size_t>(i)]);
        }
        acc_sum += report.records[k].per_rx_accuracy;
        exact_sum += report.records[k].instance_exact;
        err_sum += report.records[k].rate_error;
        viol_sum += report.records[k].violated;
    }
    report.confusion = confusion_matrix(all_true, all_pred, n_tx);
    const double n_inst = static_cast<double>(data.size());
    report.summary.mean_per_rx_accuracy = acc_sum / n_inst;
    report.summary.mean_instance_accuracy = exact_sum / n_inst;
    report.summary.mean_rate_error = err_sum / n_inst;
    report.summary.violation_rate = viol_sum / n_inst;
    return report;
}

} // namespace

EvalReport evaluate(const TopDownModel& model, const std::vector<LabeledInstance>& data,
                    int jobs) {
    const int limit = data.empty() ? 0 : data.front().limit;
    return evaluate_impl([&](const RateMatrix& r) { return predict(model, r); }, data,
                         model.n_tx, limit, jobs);
}

EvalReport evaluate(const BottomUpModel& model, const std::vector<LabeledInstance>& data,
                    int jobs) {
    const int limit = data.empty() ? 0 : data.front().limit;
    return evaluate_impl([&](const RateMatrix& r) { return predict(model, r); }, data,
                         model.n_tx, limit, jobs);
}

void write_report(const EvalReport& report, const std::string& json_path,
                  const std::string& csv_path) {
    if (!json_path.empty()) {
        ordered_json j;
        ordered_json summary;
        summary["mean_per_rx_accuracy"] = report.summary.mean_per_rx_accuracy;
        summary["mean_instance_accuracy"] = report.summary.mean_instance_accuracy;
        summary["mean_rate_error"] = report.summary.mean_rate_error;
        summary["violation_rate"] = report.summary.violation_rate;
        j["summary"] = std::move(summary);
        ordered_json conf = ordered_json::array();
        for (int t = 0; t < report.n_tx; ++t) {
            ordered_json row = ordered_json::array();
            for (int p = 0; p < report.n_tx; ++p) row.push_back(report.confusion_at(t, p));
            conf.push_back(std::move(row));
        }
        j["confusion"] = std::move(conf);
        ordered_json recs = ordered_json::array();
        for (const StepRecord& r : report.records) {
            ordered_json rj;
            rj["step"] = r.step;
            rj["per_rx_accuracy"] = r.per_rx_accuracy;
            rj["instance_exact"] = r.instance_exact;
            rj["achieved_rate"] = r.achieved_rate;
            rj["optimal_rate"] = r.optimal_rate;
            rj["rate_error"] = r.rate_error;
            rj["violated"] = r.violated;
            recs.push_back(std::move(rj));
        }
        j["records"] = std::move(recs);
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw IoError("cannot open '" + json_path + "' for writing");
        out << j.dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + json_path + "'");
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw IoError("cannot open '" + csv_path + "' for writing");
        out << "step,per_rx_accuracy,instance_exact,achieved_rate,optimal_rate,"
               "rate_error,violated\n";
        char buf[256];
        for (const StepRecord& r : report.records) {
            std::snprintf(buf, sizeof buf, "%d,%.6g,%d,%.6g,%.6g,%.6g,%d\n", r.step,
                          r.per_rx_accuracy, r.instance_exact, r.achieved_rate,
                          r.optimal_rate, r.rate_error, r.violated);
            out << buf;
        }
        if (!out) throw IoError("write failed for '" + csv_path + "'");
    }
}

} // namespace spikeassoc

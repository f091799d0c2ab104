#include "spikeassoc/oracle.hpp"

#include "spikeassoc/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <thread>

namespace spikeassoc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double total_rate(const RateMatrix& rates, const Association& a) {
    if (static_cast<int>(a.size()) != rates.n_rx)
        throw ConfigError("association length " + std::to_string(a.size()) +
                          " does not match n_rx " + std::to_string(rates.n_rx));
    double sum = 0.0;
    for (int i = 0; i < rates.n_rx; ++i) {
        const int j = a[static_cast<std::size_t>(i)];
        if (j < 0 || j >= rates.n_tx)
            throw ConfigError("association entry " + std::to_string(j) + " out of range");
        sum += rates.at(i, j);
    }
    return sum;
}

bool is_feasible(const Association& a, int n_tx, int limit) {
    std::vector<int> counts(static_cast<std::size_t>(n_tx), 0);
    for (int j : a)
        if (++counts[static_cast<std::size_t>(j)] > limit) return false;
    return true;
}

OracleResult solve_optimal(const RateMatrix& rates, int limit) {
    const int n = rates.n_rx;
    const int m = rates.n_tx;
    if (static_cast<long long>(n) > static_cast<long long>(m) * limit)
        throw InfeasibleError("infeasible instance: n_rx " + std::to_string(n) +
                              " exceeds n_tx*limit " + std::to_string(m) + "*" +
                              std::to_string(limit));

    // odometer in lexicographic order; strict > keeps the first (lex-smallest)
    // maximizer, which pins tie-breaking
    Association a(static_cast<std::size_t>(n), 0);
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    OracleResult best;
    bool have_best = false;
    for (;;) {
        std::fill(counts.begin(), counts.end(), 0);
        bool feasible = true;
        for (int i = 0; i < n && feasible; ++i)
            feasible = ++counts[static_cast<std::size_t>(a[i])] <= limit;
        if (feasible) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) total += rates.at(i, a[static_cast<std::size_t>(i)]);
            if (!have_best || total > best.total) {
                best.assign = a;
                best.total = total;
                have_best = true;
            }
        }
        // increment, last index fastest
        int pos = n - 1;
        while (pos >= 0 && a[static_cast<std::size_t>(pos)] == m - 1) {
            a[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++a[static_cast<std::size_t>(pos)];
    }
    if (!have_best)
        throw InfeasibleError("no feasible assignment exists");
    return best;
}

std::vector<LabeledInstance> label_dataset(const Dataset& ds, int limit, int jobs) {
    std::vector<LabeledInstance> out(ds.instances.size());
    auto label_one = [&](std::size_t k) {
        const Instance& inst = ds.instances[k];
        try {
            OracleResult r = solve_optimal(inst.rates, limit);
            out[k] = {inst.step, inst.rates, inst.positions, std::move(r.assign), r.total,
                      limit};
        } catch (const InfeasibleError& e) {
            throw InfeasibleError("step " + std::to_string(inst.step) + ": " + e.what());
        }
    };
    if (jobs <= 1) {
        for (std::size_t k = 0; k < out.size(); ++k) label_one(k);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = static_cast<std::size_t>(w); k < out.size();
                         k += static_cast<std::size_t>(jobs))
                        label_one(k);
                } catch (...) {
                    errs[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

void write_labeled_jsonl(const std::vector<LabeledInstance>& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const LabeledInstance& li : data) {
        ordered_json j;
        j["step"] = li.step;
        ordered_json rows = ordered_json::array();
        for (int r = 0; r < li.rates.n_rx; ++r) {
            ordered_json row = ordered_json::array();
            for (int c = 0; c < li.rates.n_tx; ++c) row.push_back(li.rates.at(r, c));
            rows.push_back(std::move(row));
        }
        j["rates"] = std::move(rows);
        ordered_json pos = ordered_json::array();
        for (const Vec3& p : li.positions) pos.push_back(ordered_json::array({p.x, p.y, p.z}));
        j["positions"] = std::move(pos);
        j["optimal"] = li.optimal;
        j["optimal_total"] = li.optimal_total;
        j["limit"] = li.limit;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<LabeledInstance> read_labeled_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open labeled dataset '" + path + "'");
    std::vector<LabeledInstance> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            LabeledInstance li;
            li.step = j.at("step").get<int>();
            const json& rows = j.at("rates");
            const int n = static_cast<int>(rows.size());
            const int m = n > 0 ? static_cast<int>(rows[0].size()) : 0;
            li.rates = RateMatrix(n, m);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < m; ++c) li.rates.at(r, c) = rows[r][c].get<double>();
            for (const auto& pj : j.at("positions"))
                li.positions.push_back({pj[0].get<double>(), pj[1].get<double>(),
                                        pj[2].get<double>()});
            li.optimal = j.at("optimal").get<std::vector<int>>();
            li.optimal_total = j.at("optimal_total").get<double>();
            li.limit = j.at("limit").get<int>();
            if (static_cast<int>(li.optimal.size()) != n)
                throw IoError("label length mismatch");
            if (!out.empty() && (out.front().rates.n_rx != n || out.front().rates.n_tx != m))
                throw IoError("inconsistent matrix shapes");
            out.push_back(std::move(li));
        } catch (const json::exception& e) {
            throw IoError("bad labeled record at " + path + ":" + std::to_string(lineno) +
                          ": " + e.what());
        }
    }
    return out;
}

} // namespace spikeassoc

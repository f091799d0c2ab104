#include "spikeassoc/models.hpp"

#include "spikeassoc/errors.hpp"

#include <cmath>

namespace spikeassoc {

Standardizer fit_standardizer(std::span<const RateMatrix> train) {
    if (train.empty()) throw ConfigError("cannot fit standardizer on empty training set");
    double sum = 0.0;
    std::size_t count = 0;
    for (const RateMatrix& rm : train) {
        for (double v : rm.v) sum += v;
        count += rm.v.size();
    }
    if (count == 0) throw ConfigError("cannot fit standardizer on empty matrices");
    const double mu = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const RateMatrix& rm : train)
        for (double v : rm.v) ss += (v - mu) * (v - mu);
    double sigma = std::sqrt(ss / static_cast<double>(count));
    if (sigma < kSigmaFloor) sigma = kSigmaFloor;
    return {mu, sigma};
}

std::vector<double> standardize(const Standardizer& s, const RateMatrix& rates) {
    std::vector<double> out(rates.v.size());
    for (std::size_t i = 0; i < rates.v.size(); ++i) out[i] = (rates.v[i] - s.mu) / s.sigma;
    return out;
}

std::vector<double> standardize_row(const Standardizer& s, const RateMatrix& rates,
                                    int row) {
    std::vector<double> out(static_cast<std::size_t>(rates.n_tx));
    for (int j = 0; j < rates.n_tx; ++j) out[static_cast<std::size_t>(j)] =
        (rates.at(row, j) - s.mu) / s.sigma;
    return out;
}

NetworkSpec default_topdown_spec(int n_rx, int n_tx) {
    const int nm = n_rx * n_tx;
    return make_network_spec({nm, 128, 128, nm});
}

NetworkSpec default_bottomup_spec(int n_tx) {
    return make_network_spec({n_tx, 64, 64, n_tx});
}

namespace {

// softmax with max-shift; returns log(sum(exp(shifted))) for the CE term
double softmax_row(const double* logits, int m, double* p) {
    double mx = logits[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, logits[j]);
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
        p[j] = std::exp(logits[j] - mx);
        denom += p[j];
    }
    for (int j = 0; j < m; ++j) p[j] /= denom;
    return std::log(denom);
}

void check_finite(const std::vector<double>& logits) {
    for (double v : logits)
        if (!std::isfinite(v)) throw ConfigError("non-finite logits");
}

} // namespace

double topdown_loss(const std::vector<double>& logits, int n_rx, int n_tx,
                    const Association& target, const LossConfig& cfg,
                    std::vector<double>* grad) {
    if (static_cast<int>(logits.size()) != n_rx * n_tx)
        throw ConfigError("logits size does not match n_rx*n_tx");
    if (static_cast<int>(target.size()) != n_rx)
        throw ConfigError("target size does not match n_rx");
    check_finite(logits);

    std::vector<double> p(logits.size());
    std::vector<double> load(static_cast<std::size_t>(n_tx), 0.0);
    double ce = 0.0;
    for (int i = 0; i < n_rx; ++i) {
        const double* row = logits.data() + static_cast<std::size_t>(i) * n_tx;
        double* prow = p.data() + static_cast<std::size_t>(i) * n_tx;
        const double lse = softmax_row(row, n_tx, prow);
        const int t = target[static_cast<std::size_t>(i)];
        if (t < 0 || t >= n_tx) throw ConfigError("target entry out of range");
        // -log p[t] = lse + max - logit[t]; recompute via p for clarity
        double mx = row[0];
        for (int j = 1; j < n_tx; ++j) mx = std::max(mx, row[j]);
        ce += lse + mx - row[t];
        for (int j = 0; j < n_tx; ++j) load[static_cast<std::size_t>(j)] += prow[j];
    }
    ce /= n_rx;

    const double limit = static_cast<double>(cfg.limit);
    double penalty = 0.0;
    std::vector<double> over(static_cast<std::size_t>(n_tx), 0.0);
    for (int j = 0; j < n_tx; ++j) {
        const double ex = load[static_cast<std::size_t>(j)] - limit;
        if (ex > 0.0) {
            penalty += ex * ex;
            over[static_cast<std::size_t>(j)] = 2.0 * ex; // d(penalty)/d(load_j)
        }
    }
    const double loss = ce + cfg.penalty_weight * penalty;

    if (grad) {
        grad->assign(logits.size(), 0.0);
        for (int i = 0; i < n_rx; ++i) {
            const double* prow = p.data() + static_cast<std::size_t>(i) * n_tx;
            double* grow = grad->data() + static_cast<std::size_t>(i) * n_tx;
            const int t = target[static_cast<std::size_t>(i)];
            double dot = 0.0; // sum_k over_k * p_ik, for the softmax Jacobian
            for (int j = 0; j < n_tx; ++j) dot += over[static_cast<std::size_t>(j)] * prow[j];
            for (int j = 0; j < n_tx; ++j) {
                const double ce_g = (prow[j] - (j == t ? 1.0 : 0.0)) / n_rx;
                const double pen_g = prow[j] * (over[static_cast<std::size_t>(j)] - dot);
                grow[j] = ce_g + cfg.penalty_weight * pen_g;
            }
        }
    }
    return loss;
}

double bottomup_loss(const std::vector<double>& logits, int target,
                     std::vector<double>* grad) {
    const int m = static_cast<int>(logits.size());
    if (target < 0 || target >= m) throw ConfigError("target out of range");
    check_finite(logits);
    std::vector<double> p(logits.size());
    const double lse = softmax_row(logits.data(), m, p.data());
    double mx = logits[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, logits[j]);
    const double loss = lse + mx - logits[static_cast<std::size_t>(target)];
    if (grad) {
        grad->resize(logits.size());
        for (int j = 0; j < m; ++j)
            (*grad)[static_cast<std::size_t>(j)] = p[static_cast<std::size_t>(j)] -
                                                   (j == target ? 1.0 : 0.0);
    }
    return loss;
}

Association decode_topdown(const std::vector<double>& logits, int n_rx, int n_tx) {
    if (static_cast<int>(logits.size()) != n_rx * n_tx)
        throw ConfigError("logits size does not match n_rx*n_tx");
    Association a(static_cast<std::size_t>(n_rx));
    for (int i = 0; i < n_rx; ++i) {
        const double* row = logits.data() + static_cast<std::size_t>(i) * n_tx;
        int best = 0;
        for (int j = 1; j < n_tx; ++j)
            if (row[j] > row[best]) best = j;
        a[static_cast<std::size_t>(i)] = best;
    }
    return a;
}

int decode_bottomup(const std::vector<double>& logits) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(logits.size()); ++j)
        if (logits[static_cast<std::size_t>(j)] > logits[static_cast<std::size_t>(best)])
            best = j;
    return best;
}

Association predict(const TopDownModel& model, const RateMatrix& rates) {
    if (rates.n_rx != model.n_rx || rates.n_tx != model.n_tx)
        throw ConfigError("rate matrix shape does not match model");
    const std::vector<double> x = standardize(model.standardizer, rates);
    const std::vector<double> logits = forward_eval(model.spec, model.weights, x);
    return decode_topdown(logits, model.n_rx, model.n_tx);
}

Association predict(const BottomUpModel& model, const RateMatrix& rates) {
    if (rates.n_tx != model.n_tx)
        throw ConfigError("rate matrix width does not match model");
    Association a(static_cast<std::size_t>(rates.n_rx));
    for (int i = 0; i < rates.n_rx; ++i) {
        const std::vector<double> x = standardize_row(model.standardizer, rates, i);
        const std::vector<double> logits = forward_eval(model.spec, model.weights, x);
        a[static_cast<std::size_t>(i)] = decode_bottomup(logits);
    }
    return a;
}

} // namespace spikeassoc

#include "spikeassoc/snn.hpp"

#include "spikeassoc/errors.hpp"

#include <cmath>
#include <cstring>

namespace spikeassoc {

namespace K = kernels;

void validate(const NetworkSpec& spec) {
    if (spec.layer_sizes.size() < 3)
        throw ConfigError("network needs at least one hidden layer");
    for (int s : spec.layer_sizes)
        if (s < 1) throw ConfigError("layer sizes must be >= 1");
    const std::size_t h = static_cast<std::size_t>(spec.n_hidden());
    if (spec.lif.size() != h)
        throw ConfigError("lif params count must match hidden layer count");
    if (spec.dropout.size() != h)
        throw ConfigError("dropout rate count must match hidden layer count");
    for (const LifParams& p : spec.lif) {
        if (p.beta < 0.0 || p.beta >= 1.0) throw ConfigError("lif beta must be in [0,1)");
        if (!(p.threshold > 0.0)) throw ConfigError("lif threshold must be > 0");
        if (!(p.surrogate_slope > 0.0)) throw ConfigError("surrogate slope must be > 0");
    }
    for (double d : spec.dropout)
        if (d < 0.0 || d >= 1.0) throw ConfigError("dropout rates must be in [0,1)");
    if (spec.time_steps < 1) throw ConfigError("time_steps must be >= 1");
    if (spec.output_beta < 0.0 || spec.output_beta >= 1.0)
        throw ConfigError("output_beta must be in [0,1)");
}

NetworkSpec make_network_spec(const std::vector<int>& layer_sizes, const LifParams& lif,
                              double dropout_rate, int time_steps, double output_beta) {
    NetworkSpec spec;
    spec.layer_sizes = layer_sizes;
    const std::size_t h = layer_sizes.size() >= 2 ? layer_sizes.size() - 2 : 0;
    spec.lif.assign(h, lif);
    spec.dropout.assign(h, dropout_rate);
    spec.time_steps = time_steps;
    spec.output_beta = output_beta;
    validate(spec);
    return spec;
}

Gradients zeros_like(const Weights& w) {
    Gradients g;
    g.layers.reserve(w.layers.size());
    for (const LayerWeights& lw : w.layers) {
        LayerWeights z;
        z.rows = lw.rows;
        z.cols = lw.cols;
        z.w.assign(lw.w.size(), 0.0);
        z.b.assign(lw.b.size(), 0.0);
        g.layers.push_back(std::move(z));
    }
    return g;
}

void set_zero(Gradients& g) {
    for (LayerWeights& lw : g.layers) {
        std::fill(lw.w.begin(), lw.w.end(), 0.0);
        std::fill(lw.b.begin(), lw.b.end(), 0.0);
    }
}

Weights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    validate(spec);
    Weights w;
    const int n_layers = static_cast<int>(spec.layer_sizes.size()) - 1;
    w.layers.reserve(static_cast<std::size_t>(n_layers));
    for (int l = 0; l < n_layers; ++l) {
        LayerWeights lw;
        lw.cols = spec.layer_sizes[static_cast<std::size_t>(l)];
        lw.rows = spec.layer_sizes[static_cast<std::size_t>(l) + 1];
        lw.w.resize(static_cast<std::size_t>(lw.rows) * lw.cols);
        lw.b.assign(static_cast<std::size_t>(lw.rows), 0.0);
        RngStream rng(derive_key(seed, StreamTag::weights,
                                 {static_cast<std::uint64_t>(l)}));
        const double bound = std::sqrt(1.0 / lw.cols);
        for (double& v : lw.w) v = rng.next_uniform(-bound, bound);
        w.layers.push_back(std::move(lw));
    }
    return w;
}

void ForwardTrace::configure(const NetworkSpec& spec) {
    const int h = spec.n_hidden();
    std::vector<int> hs(spec.layer_sizes.begin() + 1, spec.layer_sizes.end() - 1);
    const bool same_shape = T == spec.time_steps && hidden_sizes == hs;
    T = spec.time_steps;
    hidden_sizes = std::move(hs);
    if (!same_shape) {
        layer_off.assign(static_cast<std::size_t>(h), 0);
        step_stride = 0;
        for (int l = 0; l < h; ++l) {
            layer_off[static_cast<std::size_t>(l)] = step_stride;
            step_stride += hidden_sizes[static_cast<std::size_t>(l)];
        }
        const std::size_t total = static_cast<std::size_t>(T) * step_stride;
        currents.resize(total);
        pres.resize(total);
        spikes.resize(total);
        masks.resize(static_cast<std::size_t>(h));
        u_state.resize(static_cast<std::size_t>(h));
        a_masked.resize(static_cast<std::size_t>(h));
        for (int l = 0; l < h; ++l) {
            const std::size_t n = static_cast<std::size_t>(hidden_sizes[l]);
            masks[static_cast<std::size_t>(l)].resize(n);
            u_state[static_cast<std::size_t>(l)].resize(n);
            a_masked[static_cast<std::size_t>(l)].resize(n);
        }
    }
    const std::size_t out = static_cast<std::size_t>(spec.output_size());
    u_out.resize(out);
    out_tmp.resize(out);
    logits.resize(out);
}

std::pair<double, double> lif_step(double u, double i_in, const LifParams& p) {
    const double pre = p.beta * u + i_in;
    const double spike = pre >= p.threshold ? 1.0 : 0.0;
    const double u_next =
        p.reset == ResetMode::subtract ? pre - p.threshold * spike : pre * (1.0 - spike);
    return {u_next, spike};
}

double surrogate_grad(double x, double k) {
    const double t = 1.0 + k * std::fabs(x);
    return 1.0 / (t * t);
}

namespace {

K::ResetKind to_kernel(ResetMode m) {
    return m == ResetMode::subtract ? K::ResetKind::subtract : K::ResetKind::zero;
}

void check_weight_shapes(const NetworkSpec& spec, const Weights& w) {
    if (w.layers.size() != spec.layer_sizes.size() - 1)
        throw ConfigError("weights layer count does not match spec");
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const LayerWeights& lw = w.layers[l];
        if (lw.cols != spec.layer_sizes[l] || lw.rows != spec.layer_sizes[l + 1] ||
            lw.w.size() != static_cast<std::size_t>(lw.rows) * lw.cols ||
            lw.b.size() != static_cast<std::size_t>(lw.rows))
            throw ConfigError("weight tensor shapes do not match spec");
    }
}

} // namespace

void forward(const NetworkSpec& spec, const Weights& w, const std::vector<double>& x,
             RunMode mode, RngStream* rng, ForwardTrace& trace,
             std::vector<double>& logits) {
    validate(spec);
    check_weight_shapes(spec, w);
    if (static_cast<int>(x.size()) != spec.input_size())
        throw ConfigError("input length " + std::to_string(x.size()) +
                          " does not match network input " +
                          std::to_string(spec.input_size()));
    const auto& k = K::active();
    const int h = spec.n_hidden();
    const int out_n = spec.output_size();
    trace.configure(spec);

    for (int l = 0; l < h; ++l) {
        std::vector<double>& mask = trace.masks[static_cast<std::size_t>(l)];
        const double p = spec.dropout[static_cast<std::size_t>(l)];
        if (mode == RunMode::train && p > 0.0) {
            if (!rng) throw ConfigError("train-mode forward needs an rng for dropout");
            const double keep_scale = 1.0 / (1.0 - p);
            for (double& mv : mask) mv = rng->next_unit() < p ? 0.0 : keep_scale;
        } else {
            std::fill(mask.begin(), mask.end(), 1.0);
        }
        std::fill(trace.u_state[static_cast<std::size_t>(l)].begin(),
                  trace.u_state[static_cast<std::size_t>(l)].end(), 0.0);
    }
    std::fill(trace.u_out.begin(), trace.u_out.end(), 0.0);

    for (int t = 0; t < spec.time_steps; ++t) {
        const double* a_prev = x.data();
        int a_n = spec.input_size();
        for (int l = 0; l < h; ++l) {
            const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];
            const LifParams& p = spec.lif[static_cast<std::size_t>(l)];
            const int n = trace.hidden_sizes[static_cast<std::size_t>(l)];
            double* cur = trace.current(t, l);
            k.matvec_bias(lw.w.data(), a_prev, lw.b.data(), cur,
                          static_cast<std::size_t>(n), static_cast<std::size_t>(a_n));
            k.lif_forward(trace.u_state[static_cast<std::size_t>(l)].data(), cur,
                          trace.pre(t, l), trace.spike(t, l), p.beta, p.threshold,
                          to_kernel(p.reset), static_cast<std::size_t>(n));
            k.mul(trace.a_masked[static_cast<std::size_t>(l)].data(), trace.spike(t, l),
                  trace.masks[static_cast<std::size_t>(l)].data(),
                  static_cast<std::size_t>(n));
            a_prev = trace.a_masked[static_cast<std::size_t>(l)].data();
            a_n = n;
        }
        const LayerWeights& lout = w.layers.back();
        k.matvec_bias(lout.w.data(), a_prev, lout.b.data(), trace.out_tmp.data(),
                      static_cast<std::size_t>(out_n), static_cast<std::size_t>(a_n));
        k.leaky_acc(trace.u_out.data(), trace.out_tmp.data(), spec.output_beta,
                    static_cast<std::size_t>(out_n));
    }
    trace.logits = trace.u_out;
    logits = trace.u_out;
}

std::vector<double> forward_eval(const NetworkSpec& spec, const Weights& w,
                                 const std::vector<double>& x) {
    thread_local ForwardTrace scratch;
    std::vector<double> logits;
    forward(spec, w, x, RunMode::eval, nullptr, scratch, logits);
    return logits;
}

void backward(const NetworkSpec& spec, const Weights& w, const ForwardTrace& trace,
              const std::vector<double>& x, const std::vector<double>& dloss_dlogits,
              Gradients& acc) {
    validate(spec);
    check_weight_shapes(spec, w);
    check_weight_shapes(spec, acc);
    const int h = spec.n_hidden();
    const int out_n = spec.output_size();
    if (trace.T != spec.time_steps ||
        trace.hidden_sizes !=
            std::vector<int>(spec.layer_sizes.begin() + 1, spec.layer_sizes.end() - 1))
        throw ConfigError("trace does not match network spec");
    if (static_cast<int>(dloss_dlogits.size()) != out_n)
        throw ConfigError("dloss_dlogits length does not match network output");
    if (static_cast<int>(x.size()) != spec.input_size())
        throw ConfigError("input length does not match network input");

    const auto& k = K::active();
    int max_width = spec.input_size();
    for (int n : trace.hidden_sizes) max_width = std::max(max_width, n);

    std::vector<double> g_out = dloss_dlogits;
    std::vector<std::vector<double>> h_next(static_cast<std::size_t>(h));
    std::vector<std::vector<double>> h_cur(static_cast<std::size_t>(h));
    for (int l = 0; l < h; ++l) {
        h_next[static_cast<std::size_t>(l)]
            .assign(static_cast<std::size_t>(trace.hidden_sizes[l]), 0.0);
        h_cur[static_cast<std::size_t>(l)]
            .resize(static_cast<std::size_t>(trace.hidden_sizes[l]));
    }
    std::vector<double> carry(static_cast<std::size_t>(max_width));
    std::vector<double> ds(static_cast<std::size_t>(max_width));
    std::vector<double> a_buf(static_cast<std::size_t>(max_width));

    for (int t = spec.time_steps - 1; t >= 0; --t) {
        // output layer (leaky integrator, never spikes)
        const int last = h - 1;
        const int n_last = trace.hidden_sizes[static_cast<std::size_t>(last)];
        k.mul(a_buf.data(), trace.spike(t, last),
              trace.masks[static_cast<std::size_t>(last)].data(),
              static_cast<std::size_t>(n_last));
        LayerWeights& gout_l = acc.layers.back();
        k.ger_acc(gout_l.w.data(), g_out.data(), a_buf.data(),
                  static_cast<std::size_t>(out_n), static_cast<std::size_t>(n_last));
        k.add_inplace(gout_l.b.data(), g_out.data(), static_cast<std::size_t>(out_n));
        k.matvec_t(w.layers.back().w.data(), g_out.data(), carry.data(),
                   static_cast<std::size_t>(out_n), static_cast<std::size_t>(n_last));

        for (int l = h - 1; l >= 0; --l) {
            const LifParams& p = spec.lif[static_cast<std::size_t>(l)];
            const int n = trace.hidden_sizes[static_cast<std::size_t>(l)];
            k.mul(ds.data(), carry.data(), trace.masks[static_cast<std::size_t>(l)].data(),
                  static_cast<std::size_t>(n));
            k.lif_backward(h_cur[static_cast<std::size_t>(l)].data(), ds.data(),
                           trace.pre(t, l), h_next[static_cast<std::size_t>(l)].data(),
                           p.beta, p.threshold, p.surrogate_slope, to_kernel(p.reset),
                           static_cast<std::size_t>(n));
            const double* a_in;
            int in_n;
            if (l == 0) {
                a_in = x.data();
                in_n = spec.input_size();
            } else {
                const int n_prev = trace.hidden_sizes[static_cast<std::size_t>(l) - 1];
                k.mul(a_buf.data(), trace.spike(t, l - 1),
                      trace.masks[static_cast<std::size_t>(l) - 1].data(),
                      static_cast<std::size_t>(n_prev));
                a_in = a_buf.data();
                in_n = n_prev;
            }
            LayerWeights& gl = acc.layers[static_cast<std::size_t>(l)];
            k.ger_acc(gl.w.data(), h_cur[static_cast<std::size_t>(l)].data(), a_in,
                      static_cast<std::size_t>(n), static_cast<std::size_t>(in_n));
            k.add_inplace(gl.b.data(), h_cur[static_cast<std::size_t>(l)].data(),
                          static_cast<std::size_t>(n));
            if (l > 0)
                k.matvec_t(w.layers[static_cast<std::size_t>(l)].w.data(),
                           h_cur[static_cast<std::size_t>(l)].data(), carry.data(),
                           static_cast<std::size_t>(n), static_cast<std::size_t>(in_n));
            std::swap(h_next[static_cast<std::size_t>(l)], h_cur[static_cast<std::size_t>(l)]);
        }
        k.scale_inplace(g_out.data(), spec.output_beta, static_cast<std::size_t>(out_n));
    }
}

AdamState make_adam_state(const Weights& w) {
    AdamState st;
    st.layers.reserve(w.layers.size());
    for (const LayerWeights& lw : w.layers) {
        AdamState::Slot s;
        s.m_w.assign(lw.w.size(), 0.0);
        s.v_w.assign(lw.w.size(), 0.0);
        s.m_b.assign(lw.b.size(), 0.0);
        s.v_b.assign(lw.b.size(), 0.0);
        st.layers.push_back(std::move(s));
    }
    return st;
}

void adam_step(Weights& w, const Gradients& g, AdamState& st, double lr) {
    if (w.layers.size() != g.layers.size() || w.layers.size() != st.layers.size())
        throw ConfigError("adam state/gradient shapes do not match weights");
    const auto& k = K::active();
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.b2, static_cast<double>(st.step));
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        LayerWeights& lw = w.layers[l];
        const LayerWeights& lg = g.layers[l];
        AdamState::Slot& s = st.layers[l];
        if (lg.w.size() != lw.w.size() || lg.b.size() != lw.b.size())
            throw ConfigError("gradient tensor shapes do not match weights");
        k.adam_update(lw.w.data(), lg.w.data(), s.m_w.data(), s.v_w.data(), st.b1, st.b2,
                      lr, st.eps, bc1, bc2, lw.w.size());
        k.adam_update(lw.b.data(), lg.b.data(), s.m_b.data(), s.v_b.data(), st.b1, st.b2,
                      lr, st.eps, bc1, bc2, lw.b.size());
    }
}

} // namespace spikeassoc

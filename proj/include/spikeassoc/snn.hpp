#pragma once

#include "spikeassoc/kernels.hpp"
#include "spikeassoc/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace spikeassoc {

enum class ResetMode { subtract, zero };

struct LifParams {
    double beta = 0.9;            // membrane decay per step, [0,1)
    double threshold = 1.0;       // firing threshold, > 0
    ResetMode reset = ResetMode::subtract;
    double surrogate_slope = 25.0; // k in the reciprocal-quadratic surrogate
};

// Layered description: layer_sizes = [in, h1, ..., hk, out]. Hidden layers are
// LIF; the output layer is a non-spiking leaky integrator read out at t = T.
struct NetworkSpec {
    std::vector<int> layer_sizes;
    std::vector<LifParams> lif;    // one per hidden layer
    std::vector<double> dropout;   // one per hidden layer, [0,1)
    int time_steps = 25;
    double output_beta = 0.9;

    int n_hidden() const { return static_cast<int>(layer_sizes.size()) - 2; }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
};

void validate(const NetworkSpec& spec);

// convenience: spec with shared LIF/dropout defaults across hidden layers
NetworkSpec make_network_spec(const std::vector<int>& layer_sizes,
                              const LifParams& lif = {}, double dropout_rate = 0.2,
                              int time_steps = 25, double output_beta = 0.9);

struct LayerWeights {
    int rows = 0; // fan-out
    int cols = 0; // fan-in
    std::vector<double> w; // row-major rows x cols
    std::vector<double> b; // rows
};

struct Weights {
    std::vector<LayerWeights> layers;
};

using Gradients = Weights;

Gradients zeros_like(const Weights& w);
void set_zero(Gradients& g);

// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases
Weights init_weights(const NetworkSpec& spec, std::uint64_t seed);

enum class RunMode { train, eval };

// Everything backward needs from one forward pass, flat per-step storage.
// Also owns the scratch state so a reused trace makes forward allocation-free.
struct ForwardTrace {
    int T = 0;
    std::vector<int> hidden_sizes;
    std::vector<int> layer_off;
    int step_stride = 0;
    std::vector<double> currents, pres, spikes; // [t][layer][unit]
    std::vector<std::vector<double>> masks;     // scaled dropout masks, per hidden layer
    std::vector<double> logits;                 // output potentials at t = T

    double* current(int t, int l) { return loc(currents, t, l); }
    double* pre(int t, int l) { return loc(pres, t, l); }
    double* spike(int t, int l) { return loc(spikes, t, l); }
    const double* current(int t, int l) const { return loc(currents, t, l); }
    const double* pre(int t, int l) const { return loc(pres, t, l); }
    const double* spike(int t, int l) const { return loc(spikes, t, l); }

    void configure(const NetworkSpec& spec);

    // scratch reused across calls
    std::vector<std::vector<double>> u_state;   // per hidden layer membrane
    std::vector<std::vector<double>> a_masked;  // per hidden layer masked spikes
    std::vector<double> u_out, out_tmp;

private:
    template <typename V>
    auto* loc(V& v, int t, int l) const {
        return v.data() + static_cast<std::size_t>(t) * step_stride + layer_off[l];
    }
};

// single LIF neuron update: pre = beta*u + i_in, spike on pre >= threshold,
// reset per mode; returns (u_next, spike)
std::pair<double, double> lif_step(double u, double i_in, const LifParams& p);

// d(spike)/d(pre) stand-in: 1 / (1 + k*|x|)^2 at x = pre - threshold
double surrogate_grad(double x, double k);

// One temporal pass: x injected as constant current every step. Dropout masks
// are sampled once per call (train mode only; rng required) and applied to
// spike outputs, survivors scaled by 1/(1-rate). logits = final output
// potentials.
void forward(const NetworkSpec& spec, const Weights& w, const std::vector<double>& x,
             RunMode mode, RngStream* rng, ForwardTrace& trace,
             std::vector<double>& logits);

// eval-mode convenience with internal scratch
std::vector<double> forward_eval(const NetworkSpec& spec, const Weights& w,
                                 const std::vector<double>& x);

// BPTT over the recorded trace; spike derivative via surrogate_grad, reset
// contribution detached. Accumulates into `acc` (caller zeroes).
void backward(const NetworkSpec& spec, const Weights& w, const ForwardTrace& trace,
              const std::vector<double>& x, const std::vector<double>& dloss_dlogits,
              Gradients& acc);

struct AdamState {
    struct Slot {
        std::vector<double> m_w, v_w, m_b, v_b;
    };
    std::vector<Slot> layers;
    long long step = 0;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const Weights& w);

// bias-corrected Adam update of all weights/biases in place
void adam_step(Weights& w, const Gradients& g, AdamState& st, double lr);

} // namespace spikeassoc

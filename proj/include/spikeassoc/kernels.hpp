#pragma once

#include <cstddef>
#include <string>

namespace spikeassoc::kernels {

// Dense double-precision primitives behind the SNN engine. Two implementations
// exist: a scalar reference and an AVX2 variant. Both follow the exact same
// operation order (reductions use a fixed 4-lane tree, no FMA contraction), so
// their results are required to be bit-identical; the test suite enforces this.
//
// Reduction contract for dot-style kernels:
//   lane[j] = sum over i == j (mod 4), ascending i, of a[i]*b[i]
//   result  = (lane[0] + lane[2]) + (lane[1] + lane[3])

enum class ResetKind : int { subtract = 0, zero = 1 };

struct Backend {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y[r] = dot(w[r,:], x) + b[r]; w is row-major rows x cols
    void (*matvec_bias)(const double* w, const double* x, const double* b,
                        double* y, std::size_t rows, std::size_t cols);

    // out[c] = sum_r h[r] * w[r,c]; out is overwritten
    void (*matvec_t)(const double* w, const double* h, double* out,
                     std::size_t rows, std::size_t cols);

    // dw[r,c] += h[r] * a[c]
    void (*ger_acc)(double* dw, const double* h, const double* a,
                    std::size_t rows, std::size_t cols);

    // dst[i] = a[i] * b[i]
    void (*mul)(double* dst, const double* a, const double* b, std::size_t n);

    // dst[i] += x[i]
    void (*add_inplace)(double* dst, const double* x, std::size_t n);

    // x[i] *= alpha
    void (*scale_inplace)(double* x, double alpha, std::size_t n);

    // u[i] = beta * u[i] + x[i]   (non-spiking leaky integrator)
    void (*leaky_acc)(double* u, const double* x, double beta, std::size_t n);

    // pre[i]   = beta * u[i] + cur[i]
    // spike[i] = pre[i] >= theta ? 1 : 0
    // u[i]     = subtract: pre - theta * spike;  zero: pre * (1 - spike)
    void (*lif_forward)(double* u, const double* cur, double* pre, double* spike,
                        double beta, double theta, ResetKind reset, std::size_t n);

    // h[i] = ds[i] * sg(pre[i] - theta) + (beta * h_next[i]) * factor
    //   sg(x)  = 1 / (1 + k*|x|)^2
    //   factor = subtract: 1;  zero: (pre[i] >= theta ? 0 : 1)   [reset detached]
    void (*lif_backward)(double* h, const double* ds, const double* pre,
                         const double* h_next, double beta, double theta, double k,
                         ResetKind reset, std::size_t n);

    // bias-corrected Adam:
    //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*(g*g)
    //   w -= (lr * (m/bc1)) / (sqrt(v/bc2) + eps)
    void (*adam_update)(double* w, const double* g, double* m, double* v,
                        double b1, double b2, double lr, double eps,
                        double bc1, double bc2, std::size_t n);
};

const Backend& scalar_backend();

// nullptr when the build or the running CPU lacks AVX2
const Backend* avx2_backend();

// Active backend: SPIKE_ASSOC_KERNELS=scalar|avx2 overrides, else best available.
const Backend& active();

// Force a backend by name ("scalar", "avx2", "auto"); throws ConfigError on
// unknown or unavailable names. Intended for tests.
void set_active(const std::string& name);

} // namespace spikeassoc::kernels

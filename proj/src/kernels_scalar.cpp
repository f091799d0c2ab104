// Scalar reference kernels. Every loop is written against the documented
// operation-order contract so that the SIMD variants can match it bit for bit.
// Compiled with -ffp-contract=off: no silent FMA fusion.

#include "spikeassoc/kernels.hpp"

#include <cmath>
#include <cstring>

namespace spikeassoc::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
        lane[i & 3] += a[i] * b[i];
    return (lane[0] + lane[2]) + (lane[1] + lane[3]);
}

void matvec_bias_scalar(const double* w, const double* x, const double* b,
                        double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot_scalar(w + r * cols, x, cols) + b[r];
}

void matvec_t_scalar(const double* w, const double* h, double* out,
                     std::size_t rows, std::size_t cols) {
    std::memset(out, 0, cols * sizeof(double));
    for (std::size_t r = 0; r < rows; ++r) {
        const double hr = h[r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c)
            out[c] = out[c] + hr * wr[c];
    }
}

void ger_acc_scalar(double* dw, const double* h, const double* a,
                    std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double hr = h[r];
        double* dwr = dw + r * cols;
        for (std::size_t c = 0; c < cols; ++c)
            dwr[c] = dwr[c] + hr * a[c];
    }
}

void mul_scalar(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = a[i] * b[i];
}

void add_inplace_scalar(double* dst, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = dst[i] + x[i];
}

void scale_inplace_scalar(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        x[i] = x[i] * alpha;
}

void leaky_acc_scalar(double* u, const double* x, double beta, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        u[i] = beta * u[i] + x[i];
}

void lif_forward_scalar(double* u, const double* cur, double* pre, double* spike,
                        double beta, double theta, ResetKind reset, std::size_t n) {
    if (reset == ResetKind::subtract) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = beta * u[i] + cur[i];
            const double s = p >= theta ? 1.0 : 0.0;
            pre[i] = p;
            spike[i] = s;
            u[i] = p - theta * s;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = beta * u[i] + cur[i];
            const double s = p >= theta ? 1.0 : 0.0;
            pre[i] = p;
            spike[i] = s;
            u[i] = p * (1.0 - s);
        }
    }
}

void lif_backward_scalar(double* h, const double* ds, const double* pre,
                         const double* h_next, double beta, double theta, double k,
                         ResetKind reset, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::fabs(pre[i] - theta);
        const double t = 1.0 + k * d;
        const double sg = 1.0 / (t * t);
        const double factor =
            reset == ResetKind::subtract ? 1.0 : (pre[i] >= theta ? 0.0 : 1.0);
        h[i] = ds[i] * sg + (beta * h_next[i]) * factor;
    }
}

void adam_update_scalar(double* w, const double* g, double* m, double* v,
                        double b1, double b2, double lr, double eps,
                        double bc1, double bc2, std::size_t n) {
    const double omb1 = 1.0 - b1;
    const double omb2 = 1.0 - b2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + omb1 * g[i];
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] = w[i] - (lr * mhat) / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Backend& scalar_backend() {
    static const Backend k = {
        "scalar",
        dot_scalar,
        matvec_bias_scalar,
        matvec_t_scalar,
        ger_acc_scalar,
        mul_scalar,
        add_inplace_scalar,
        scale_inplace_scalar,
        leaky_acc_scalar,
        lif_forward_scalar,
        lif_backward_scalar,
        adam_update_scalar,
    };
    return k;
}

} // namespace spikeassoc::kernels

// AVX2 kernels. Mirrors the scalar reference exactly: same 4-lane reduction
// tree, same per-element operation order, mul/add kept separate (no FMA), so
// results are bit-identical to the scalar backend. Compiled with -mavx2
// -ffp-contract=off; selected at runtime only when the CPU reports AVX2.

#include "spikeassoc/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace spikeassoc::kernels {
namespace {

inline double combine_lanes(__m256d acc, const double* a, const double* b,
                            std::size_t n4, std::size_t n) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t i = n4; i < n; ++i)
        lane[i & 3] += a[i] * b[i];
    return (lane[0] + lane[2]) + (lane[1] + lane[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    return combine_lanes(acc, a, b, n4, n);
}

void matvec_bias_avx2(const double* w, const double* x, const double* b,
                      double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot_avx2(w + r * cols, x, cols) + b[r];
}

void matvec_t_avx2(const double* w, const double* h, double* out,
                   std::size_t rows, std::size_t cols) {
    std::memset(out, 0, cols * sizeof(double));
    const std::size_t c4 = cols & ~std::size_t(3);
    for (std::size_t r = 0; r < rows; ++r) {
        const double hr = h[r];
        const __m256d vh = _mm256_set1_pd(hr);
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < c4; c += 4) {
            const __m256d vo = _mm256_loadu_pd(out + c);
            const __m256d vw = _mm256_loadu_pd(wr + c);
            _mm256_storeu_pd(out + c, _mm256_add_pd(vo, _mm256_mul_pd(vh, vw)));
        }
        for (std::size_t c = c4; c < cols; ++c)
            out[c] = out[c] + hr * wr[c];
    }
}

void ger_acc_avx2(double* dw, const double* h, const double* a,
                  std::size_t rows, std::size_t cols) {
    const std::size_t c4 = cols & ~std::size_t(3);
    for (std::size_t r = 0; r < rows; ++r) {
        const double hr = h[r];
        const __m256d vh = _mm256_set1_pd(hr);
        double* dwr = dw + r * cols;
        for (std::size_t c = 0; c < c4; c += 4) {
            const __m256d vd = _mm256_loadu_pd(dwr + c);
            const __m256d va = _mm256_loadu_pd(a + c);
            _mm256_storeu_pd(dwr + c, _mm256_add_pd(vd, _mm256_mul_pd(vh, va)));
        }
        for (std::size_t c = c4; c < cols; ++c)
            dwr[c] = dwr[c] + hr * a[c];
    }
}

void mul_avx2(double* dst, const double* a, const double* b, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (std::size_t i = n4; i < n; ++i)
        dst[i] = a[i] * b[i];
}

void add_inplace_avx2(double* dst, const double* x, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                                _mm256_loadu_pd(x + i)));
    for (std::size_t i = n4; i < n; ++i)
        dst[i] = dst[i] + x[i];
}

void scale_inplace_avx2(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (std::size_t i = n4; i < n; ++i)
        x[i] = x[i] * alpha;
}

void leaky_acc_avx2(double* u, const double* x, double beta, std::size_t n) {
    const __m256d vb = _mm256_set1_pd(beta);
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d vu = _mm256_mul_pd(vb, _mm256_loadu_pd(u + i));
        _mm256_storeu_pd(u + i, _mm256_add_pd(vu, _mm256_loadu_pd(x + i)));
    }
    for (std::size_t i = n4; i < n; ++i)
        u[i] = beta * u[i] + x[i];
}

void lif_forward_avx2(double* u, const double* cur, double* pre, double* spike,
                      double beta, double theta, ResetKind reset, std::size_t n) {
    const __m256d vb = _mm256_set1_pd(beta);
    const __m256d vt = _mm256_set1_pd(theta);
    const __m256d one = _mm256_set1_pd(1.0);
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d p = _mm256_add_pd(_mm256_mul_pd(vb, _mm256_loadu_pd(u + i)),
                                        _mm256_loadu_pd(cur + i));
        const __m256d mask = _mm256_cmp_pd(p, vt, _CMP_GE_OQ);
        const __m256d s = _mm256_and_pd(mask, one);
        _mm256_storeu_pd(pre + i, p);
        _mm256_storeu_pd(spike + i, s);
        __m256d un;
        if (reset == ResetKind::subtract)
            un = _mm256_sub_pd(p, _mm256_mul_pd(vt, s));
        else
            un = _mm256_mul_pd(p, _mm256_sub_pd(one, s));
        _mm256_storeu_pd(u + i, un);
    }
    for (std::size_t i = n4; i < n; ++i) {
        const double p = beta * u[i] + cur[i];
        const double s = p >= theta ? 1.0 : 0.0;
        pre[i] = p;
        spike[i] = s;
        u[i] = reset == ResetKind::subtract ? p - theta * s : p * (1.0 - s);
    }
}

void lif_backward_avx2(double* h, const double* ds, const double* pre,
                       const double* h_next, double beta, double theta, double k,
                       ResetKind reset, std::size_t n) {
    const __m256d vt = _mm256_set1_pd(theta);
    const __m256d vk = _mm256_set1_pd(k);
    const __m256d vbeta = _mm256_set1_pd(beta);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d p = _mm256_loadu_pd(pre + i);
        const __m256d d = _mm256_and_pd(_mm256_sub_pd(p, vt), absmask);
        const __m256d t = _mm256_add_pd(one, _mm256_mul_pd(vk, d));
        const __m256d sg = _mm256_div_pd(one, _mm256_mul_pd(t, t));
        __m256d factor;
        if (reset == ResetKind::subtract) {
            factor = one;
        } else {
            const __m256d fired = _mm256_cmp_pd(p, vt, _CMP_GE_OQ);
            factor = _mm256_andnot_pd(fired, one);
        }
        const __m256d carried =
            _mm256_mul_pd(_mm256_mul_pd(vbeta, _mm256_loadu_pd(h_next + i)), factor);
        const __m256d local = _mm256_mul_pd(_mm256_loadu_pd(ds + i), sg);
        _mm256_storeu_pd(h + i, _mm256_add_pd(local, carried));
    }
    for (std::size_t i = n4; i < n; ++i) {
        const double d = std::fabs(pre[i] - theta);
        const double t = 1.0 + k * d;
        const double sg = 1.0 / (t * t);
        const double factor =
            reset == ResetKind::subtract ? 1.0 : (pre[i] >= theta ? 0.0 : 1.0);
        h[i] = ds[i] * sg + (beta * h_next[i]) * factor;
    }
}

void adam_update_avx2(double* w, const double* g, double* m, double* v,
                      double b1, double b2, double lr, double eps,
                      double bc1, double bc2, std::size_t n) {
    const double omb1 = 1.0 - b1;
    const double omb2 = 1.0 - b2;
    const __m256d vb1 = _mm256_set1_pd(b1);
    const __m256d vb2 = _mm256_set1_pd(b2);
    const __m256d vomb1 = _mm256_set1_pd(omb1);
    const __m256d vomb2 = _mm256_set1_pd(omb2);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vomb1, vg));
        vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv),
                           _mm256_mul_pd(vomb2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(vm, vbc1);
        const __m256d vhat = _mm256_div_pd(vv, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (std::size_t i = n4; i < n; ++i) {
        m[i] = b1 * m[i] + omb1 * g[i];
        v[i] = b2 * v[i] + omb2 * (g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] = w[i] - (lr * mhat) / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Backend* avx2_backend_impl() {
    static const Backend k = {
        "avx2",
        dot_avx2,
        matvec_bias_avx2,
        matvec_t_avx2,
        ger_acc_avx2,
        mul_avx2,
        add_inplace_avx2,
        scale_inplace_avx2,
        leaky_acc_avx2,
        lif_forward_avx2,
        lif_backward_avx2,
        adam_update_avx2,
    };
    return &k;
}

} // namespace spikeassoc::kernels

#else // !__AVX2__

namespace spikeassoc::kernels {
const Backend* avx2_backend_impl() { return nullptr; }
} // namespace spikeassoc::kernels

#endif

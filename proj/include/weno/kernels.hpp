#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// Computational kernels behind the tape primitives. Everything here is
// shape-checked by the caller and operates on raw row-major buffers.
//
// weno::kern is the production path: data-parallel loops carry OpenMP
// pragmas gated by an if(work > cutoff) clause so small problems stay on one
// thread. weno::kern::serial is the plain-loop reference used by tests and
// the kernel benchmark.
//
// Determinism contract: every kernel produces the same bits for the same
// input regardless of thread count. Elementwise and matmul kernels write
// each output element from exactly one iteration with a fixed inner
// accumulation order; reductions accumulate over fixed-width chunks whose
// boundaries do not depend on the schedule.

namespace weno::kern {

inline constexpr long kElemwiseCutoff = 1L << 15;  // elements
inline constexpr long kMatmulCutoff = 1L << 16;    // multiply-adds
inline constexpr long kSumChunk = 1L << 13;        // fixed reduction chunk width

// ---------------------------------------------------------------------------
// matmul family: nn = a[n,k]*b[k,m], nt = a[n,k]*b[m,k]^T, tn = a[k,n]^T*b[k,m]
// ---------------------------------------------------------------------------

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, long n, long k, long m) {
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        T* ci = c + i * m;
        for (long j = 0; j < m; ++j) ci[j] = T(0);
        const T* ai = a + i * k;
        for (long p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* bp = b + p * m;
            for (long j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, long n, long k, long m) {
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * m;
        for (long j = 0; j < m; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
            for (long p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, long n, long k, long m) {
    // a is stored [k,n]; c[i,j] = sum_p a[p,i] * b[p,j]
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        T* ci = c + i * m;
        for (long j = 0; j < m; ++j) ci[j] = T(0);
        for (long p = 0; p < k; ++p) {
            const T api = a[p * n + i];
            const T* bp = b + p * m;
            for (long j = 0; j < m; ++j) ci[j] += api * bp[j];
        }
    }
}

// Accumulating variants (c += ...) for the backward pass.

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* c, long n, long k, long m) {
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        T* ci = c + i * m;
        const T* ai = a + i * k;
        for (long p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* bp = b + p * m;
            for (long j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, long n, long k, long m) {
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * m;
        for (long j = 0; j < m; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
            for (long p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, long n, long k, long m) {
#pragma omp parallel for schedule(static) if (n * k * m > kMatmulCutoff)
    for (long i = 0; i < n; ++i) {
        T* ci = c + i * m;
        for (long p = 0; p < k; ++p) {
            const T api = a[p * n + i];
            const T* bp = b + p * m;
            for (long j = 0; j < m; ++j) ci[j] += api * bp[j];
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
void add(const T* a, const T* b, T* out, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

// out[i,j] = a[i,j] + row[j]; the bias-broadcast used by linear layers.
template <typename T>
void add_rowvec(const T* a, const T* row, T* out, long rows, long cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kElemwiseCutoff)
    for (long i = 0; i < rows; ++i) {
        const T* ai = a + i * cols;
        T* oi = out + i * cols;
        for (long j = 0; j < cols; ++j) oi[j] = ai[j] + row[j];
    }
}

template <typename T>
void mul(const T* a, const T* b, T* out, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

// out = alpha*x + beta
template <typename T>
void affine(const T* x, T alpha, T beta, T* out, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) out[i] = alpha * x[i] + beta;
}

// y += alpha*x; gradient accumulation workhorse.
template <typename T>
void axpy(T alpha, const T* x, T* y, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void tanh_fwd(const T* x, T* y, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

// dx += dy * (1 - y^2)
template <typename T>
void tanh_bwd(const T* dy, const T* y, T* dx, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void sigmoid_fwd(const T* x, T* y, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

// dx += dy * y * (1 - y)
template <typename T>
void sigmoid_bwd(const T* dy, const T* y, T* dx, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void relu_fwd(const T* x, T* y, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// dx += dy * [x > 0]
template <typename T>
void relu_bwd(const T* dy, const T* x, T* dx, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void log_fwd(const T* x, T* y, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) y[i] = std::log(x[i]);
}

// dx += dy / x
template <typename T>
void log_bwd(const T* dy, const T* x, T* dx, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) dx[i] += dy[i] / x[i];
}

// ---------------------------------------------------------------------------
// softmax over the last axis, max-subtracted
// ---------------------------------------------------------------------------

template <typename T>
void softmax_rows(const T* x, T* y, long rows, long cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kElemwiseCutoff)
    for (long i = 0; i < rows; ++i) {
        const T* xi = x + i * cols;
        T* yi = y + i * cols;
        T mx = xi[0];
        for (long j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
        T denom = T(0);
        for (long j = 0; j < cols; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            denom += yi[j];
        }
        const T inv = T(1) / denom;
        for (long j = 0; j < cols; ++j) yi[j] *= inv;
    }
}

// dx += (dy - dot(dy, y)) .* y, per row
template <typename T>
void softmax_rows_bwd(const T* dy, const T* y, T* dx, long rows, long cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kElemwiseCutoff)
    for (long i = 0; i < rows; ++i) {
        const T* dyi = dy + i * cols;
        const T* yi = y + i * cols;
        T* dxi = dx + i * cols;
        T dot = T(0);
        for (long j = 0; j < cols; ++j) dot += dyi[j] * yi[j];
        for (long j = 0; j < cols; ++j) dxi[j] += (dyi[j] - dot) * yi[j];
    }
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

// Chunked sum: partials over fixed kSumChunk-wide chunks combined in chunk
// order, so the result is independent of the thread count.
template <typename T>
T sum(const T* x, long n) {
    if (n <= kSumChunk) {
        T acc = T(0);
        for (long i = 0; i < n; ++i) acc += x[i];
        return acc;
    }
    const long nchunks = (n + kSumChunk - 1) / kSumChunk;
    std::vector<T> partial(static_cast<std::size_t>(nchunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nchunks; ++c) {
        const long lo = c * kSumChunk;
        const long hi = std::min(n, lo + kSumChunk);
        T acc = T(0);
        for (long i = lo; i < hi; ++i) acc += x[i];
        partial[static_cast<std::size_t>(c)] = acc;
    }
    T acc = T(0);
    for (long c = 0; c < nchunks; ++c) acc += partial[static_cast<std::size_t>(c)];
    return acc;
}

// Row-wise max over the last axis, with the argmax for gradient routing.
template <typename T>
void max_rows(const T* x, long rows, long cols, T* out_val, long* out_idx) {
#pragma omp parallel for schedule(static) if (rows * cols > kElemwiseCutoff)
    for (long i = 0; i < rows; ++i) {
        const T* xi = x + i * cols;
        long best = 0;
        for (long j = 1; j < cols; ++j)
            if (xi[j] > xi[best]) best = j;
        out_val[i] = xi[best];
        out_idx[i] = best;
    }
}

template <typename T>
void transpose(const T* x, T* y, long rows, long cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kElemwiseCutoff)
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) y[j * rows + i] = x[i * cols + j];
}

// ---------------------------------------------------------------------------
// binary cross-entropy, elementwise with constant targets
// ---------------------------------------------------------------------------

inline constexpr double kBceClamp = 1e-7;

template <typename T>
void bce_fwd(const T* target, const T* p, T* out, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) {
        const T pc = std::clamp(p[i], T(kBceClamp), T(1) - T(kBceClamp));
        out[i] = -(target[i] * std::log(pc) + (T(1) - target[i]) * std::log(T(1) - pc));
    }
}

// dp += dy * (pc - t) / (pc * (1 - pc))
template <typename T>
void bce_bwd(const T* dy, const T* target, const T* p, T* dp, long n) {
#pragma omp parallel for schedule(static) if (n > kElemwiseCutoff)
    for (long i = 0; i < n; ++i) {
        const T pc = std::clamp(p[i], T(kBceClamp), T(1) - T(kBceClamp));
        dp[i] += dy[i] * (pc - target[i]) / (pc * (T(1) - pc));
    }
}

}  // namespace weno::kern

// ---------------------------------------------------------------------------
// Serial reference: same contracts, no pragmas, naive loops. Kept as the
// comparison oracle for the kernel tests and the benchmark baseline.
// ---------------------------------------------------------------------------

namespace weno::kern::serial {

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, long n, long k, long m) {
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < m; ++j) c[i * m + j] = T(0);
        for (long p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            for (long j = 0; j < m; ++j) c[i * m + j] += aip * b[p * m + j];
        }
    }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, long n, long k, long m) {
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j) {
            T acc = T(0);
            for (long p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * m + j] = acc;
        }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, long n, long k, long m) {
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < m; ++j) c[i * m + j] = T(0);
        for (long p = 0; p < k; ++p) {
            const T api = a[p * n + i];
            for (long j = 0; j < m; ++j) c[i * m + j] += api * b[p * m + j];
        }
    }
}

template <typename T>
void add(const T* a, const T* b, T* out, long n) {
    for (long i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, long n) {
    for (long i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void tanh_fwd(const T* x, T* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void sigmoid_fwd(const T* x, T* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void relu_fwd(const T* x, T* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void softmax_rows(const T* x, T* y, long rows, long cols) {
    for (long i = 0; i < rows; ++i) {
        const T* xi = x + i * cols;
        T* yi = y + i * cols;
        T mx = xi[0];
        for (long j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
        T denom = T(0);
        for (long j = 0; j < cols; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            denom += yi[j];
        }
        for (long j = 0; j < cols; ++j) yi[j] /= denom;
    }
}

template <typename T>
T sum(const T* x, long n) {
    T acc = T(0);
    for (long i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void max_rows(const T* x, long rows, long cols, T* out_val, long* out_idx) {
    for (long i = 0; i < rows; ++i) {
        const T* xi = x + i * cols;
        long best = 0;
        for (long j = 1; j < cols; ++j)
            if (xi[j] > xi[best]) best = j;
        out_val[i] = xi[best];
        out_idx[i] = best;
    }
}

template <typename T>
void transpose(const T* x, T* y, long rows, long cols) {
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) y[j * rows + i] = x[i * cols + j];
}

}  // namespace weno::kern::serial

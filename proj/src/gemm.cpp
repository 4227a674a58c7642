// Packed double-precision GEMM.
//
// Each output element is accumulated as c = fma(a_p, b_p, c) for p = 0..k-1 in
// order. Blocking over k resumes from the partial sum stored in C, so the
// result is bitwise identical to the plain sequential loop regardless of block
// sizes or which kernel handled an edge tile.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mcdfn/tensor.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define MCDFN_SIMD_GEMM 1
#endif

namespace mcdfn {
namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 1024;
constexpr std::size_t kSmallWork = 4096;

void gemm_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) s = std::fma(a[i * k + p], b[p * n + j], s);
            c[i * n + j] = s;
        }
    }
}

// ap: kc x kMr panel (k-major), bp: kc x kNr panel (k-major), cbuf: kMr x kNr
// tile with row stride ldc holding the running sums.
void micro_kernel(std::size_t kc, const double* ap, const double* bp, double* cbuf,
                  std::size_t ldc, bool zero_init) {
#ifdef MCDFN_SIMD_GEMM
    __m256d c00, c01, c10, c11, c20, c21, c30, c31, c40, c41, c50, c51;
    if (zero_init) {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = c40 = c41 = c50 = c51 =
            _mm256_setzero_pd();
    } else {
        c00 = _mm256_loadu_pd(cbuf + 0 * ldc);
        c01 = _mm256_loadu_pd(cbuf + 0 * ldc + 4);
        c10 = _mm256_loadu_pd(cbuf + 1 * ldc);
        c11 = _mm256_loadu_pd(cbuf + 1 * ldc + 4);
        c20 = _mm256_loadu_pd(cbuf + 2 * ldc);
        c21 = _mm256_loadu_pd(cbuf + 2 * ldc + 4);
        c30 = _mm256_loadu_pd(cbuf + 3 * ldc);
        c31 = _mm256_loadu_pd(cbuf + 3 * ldc + 4);
        c40 = _mm256_loadu_pd(cbuf + 4 * ldc);
        c41 = _mm256_loadu_pd(cbuf + 4 * ldc + 4);
        c50 = _mm256_loadu_pd(cbuf + 5 * ldc);
        c51 = _mm256_loadu_pd(cbuf + 5 * ldc + 4);
    }
    for (std::size_t p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp + p * kNr);
        const __m256d b1 = _mm256_loadu_pd(bp + p * kNr + 4);
        const double* a = ap + p * kMr;
        __m256d av = _mm256_broadcast_sd(a + 0);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a + 1);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a + 2);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a + 3);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
        av = _mm256_broadcast_sd(a + 4);
        c40 = _mm256_fmadd_pd(av, b0, c40);
        c41 = _mm256_fmadd_pd(av, b1, c41);
        av = _mm256_broadcast_sd(a + 5);
        c50 = _mm256_fmadd_pd(av, b0, c50);
        c51 = _mm256_fmadd_pd(av, b1, c51);
    }
    _mm256_storeu_pd(cbuf + 0 * ldc, c00);
    _mm256_storeu_pd(cbuf + 0 * ldc + 4, c01);
    _mm256_storeu_pd(cbuf + 1 * ldc, c10);
    _mm256_storeu_pd(cbuf + 1 * ldc + 4, c11);
    _mm256_storeu_pd(cbuf + 2 * ldc, c20);
    _mm256_storeu_pd(cbuf + 2 * ldc + 4, c21);
    _mm256_storeu_pd(cbuf + 3 * ldc, c30);
    _mm256_storeu_pd(cbuf + 3 * ldc + 4, c31);
    _mm256_storeu_pd(cbuf + 4 * ldc, c40);
    _mm256_storeu_pd(cbuf + 4 * ldc + 4, c41);
    _mm256_storeu_pd(cbuf + 5 * ldc, c50);
    _mm256_storeu_pd(cbuf + 5 * ldc + 4, c51);
#else
    double acc[kMr][kNr];
    for (std::size_t r = 0; r < kMr; ++r) {
        for (std::size_t q = 0; q < kNr; ++q) acc[r][q] = zero_init ? 0.0 : cbuf[r * ldc + q];
    }
    for (std::size_t p = 0; p < kc; ++p) {
        for (std::size_t r = 0; r < kMr; ++r) {
            const double av = ap[p * kMr + r];
            for (std::size_t q = 0; q < kNr; ++q) acc[r][q] = std::fma(av, bp[p * kNr + q], acc[r][q]);
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        for (std::size_t q = 0; q < kNr; ++q) cbuf[r * ldc + q] = acc[r][q];
    }
#endif
}

struct PackBuffers {
    std::vector<double> a;
    std::vector<double> b;
};

PackBuffers& pack_buffers() {
    thread_local PackBuffers buffers;
    return buffers;
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) std::fill(c, c + m * n, 0.0);
        return;
    }
    if (m * n * k <= kSmallWork || m < kMr || n < kNr) {
        gemm_reference(a, b, c, m, k, n, accumulate);
        return;
    }

    PackBuffers& buf = pack_buffers();
    buf.b.resize(kKc * (kNc + kNr));
    buf.a.resize((kMc + kMr) * kKc);
    double tile[kMr * kNr];

    for (std::size_t jc = 0; jc < n; jc += kNc) {
        const std::size_t nc = std::min(kNc, n - jc);
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            const bool zero_init = pc == 0 && !accumulate;

            for (std::size_t jr = 0; jr < nc; jr += kNr) {
                const std::size_t nr = std::min(kNr, nc - jr);
                double* dst = buf.b.data() + jr * kc;
                for (std::size_t p = 0; p < kc; ++p) {
                    const double* src = b + (pc + p) * n + jc + jr;
                    for (std::size_t q = 0; q < kNr; ++q) dst[p * kNr + q] = q < nr ? src[q] : 0.0;
                }
            }

            for (std::size_t ic = 0; ic < m; ic += kMc) {
                const std::size_t mc = std::min(kMc, m - ic);
                for (std::size_t ir = 0; ir < mc; ir += kMr) {
                    const std::size_t mr = std::min(kMr, mc - ir);
                    double* dst = buf.a.data() + ir * kc;
                    for (std::size_t p = 0; p < kc; ++p) {
                        for (std::size_t r = 0; r < kMr; ++r) {
                            dst[p * kMr + r] = r < mr ? a[(ic + ir + r) * k + pc + p] : 0.0;
                        }
                    }
                }

                for (std::size_t jr = 0; jr < nc; jr += kNr) {
                    const std::size_t nr = std::min(kNr, nc - jr);
                    for (std::size_t ir = 0; ir < mc; ir += kMr) {
                        const std::size_t mr = std::min(kMr, mc - ir);
                        double* cp = c + (ic + ir) * n + jc + jr;
                        const double* ap = buf.a.data() + ir * kc;
                        const double* bp = buf.b.data() + jr * kc;
                        if (mr == kMr && nr == kNr) {
                            micro_kernel(kc, ap, bp, cp, n, zero_init);
                            continue;
                        }
                        for (std::size_t r = 0; r < kMr; ++r) {
                            for (std::size_t q = 0; q < kNr; ++q) {
                                tile[r * kNr + q] =
                                    (!zero_init && r < mr && q < nr) ? cp[r * n + q] : 0.0;
                            }
                        }
                        micro_kernel(kc, ap, bp, tile, kNr, false);
                        for (std::size_t r = 0; r < mr; ++r) {
                            for (std::size_t q = 0; q < nr; ++q) cp[r * n + q] = tile[r * kNr + q];
                        }
                    }
                }
            }
        }
    }
}

PackedMatrix::PackedMatrix(const double* b, std::size_t k, std::size_t n) : k_(k), n_(n) {
    npad_ = (n + kNr - 1) / kNr * kNr;
    data_.assign(k * npad_, 0.0);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
        const std::size_t kc = std::min(kKc, k - pc);
        double* block = data_.data() + pc * npad_;
        for (std::size_t jr = 0; jr < n; jr += kNr) {
            const std::size_t nr = std::min(kNr, n - jr);
            double* dst = block + jr * kc;
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = b + (pc + p) * n + jr;
                for (std::size_t q = 0; q < nr; ++q) dst[p * kNr + q] = src[q];
            }
        }
    }
}

PackedMatrix PackedMatrix::transposed(const double* b, std::size_t n, std::size_t k) {
    std::vector<double> t(k * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < k; ++c) t[c * n + r] = b[r * k + c];
    }
    return PackedMatrix(t.data(), k, n);
}

void gemm(const double* a, const PackedMatrix& b, double* c, std::size_t m, bool accumulate) {
    const std::size_t k = b.rows();
    const std::size_t n = b.cols();
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) std::fill(c, c + m * n, 0.0);
        return;
    }
    PackBuffers& buf = pack_buffers();
    buf.a.resize((kMc + kMr) * kKc);
    double tile[kMr * kNr];
    for (std::size_t pc = 0; pc < k; pc += kKc) {
        const std::size_t kc = std::min(kKc, k - pc);
        const bool zero_init = pc == 0 && !accumulate;
        const double* block = b.data() + pc * b.padded_cols();
        for (std::size_t ic = 0; ic < m; ic += kMc) {
            const std::size_t mc = std::min(kMc, m - ic);
            for (std::size_t ir = 0; ir < mc; ir += kMr) {
                const std::size_t mr = std::min(kMr, mc - ir);
                double* dst = buf.a.data() + ir * kc;
                for (std::size_t p = 0; p < kc; ++p) {
                    for (std::size_t r = 0; r < kMr; ++r) {
                        dst[p * kMr + r] = r < mr ? a[(ic + ir + r) * k + pc + p] : 0.0;
                    }
                }
            }
            for (std::size_t jr = 0; jr < n; jr += kNr) {
                const std::size_t nr = std::min(kNr, n - jr);
                const double* bp = block + jr * kc;
                for (std::size_t ir = 0; ir < mc; ir += kMr) {
                    const std::size_t mr = std::min(kMr, mc - ir);
                    double* cp = c + (ic + ir) * n + jr;
                    const double* ap = buf.a.data() + ir * kc;
                    if (mr == kMr && nr == kNr) {
                        micro_kernel(kc, ap, bp, cp, n, zero_init);
                        continue;
                    }
                    for (std::size_t r = 0; r < kMr; ++r) {
                        for (std::size_t q = 0; q < kNr; ++q) {
                            tile[r * kNr + q] = (!zero_init && r < mr && q < nr) ? cp[r * n + q] : 0.0;
                        }
                    }
                    micro_kernel(kc, ap, bp, tile, kNr, false);
                    for (std::size_t r = 0; r < mr; ++r) {
                        for (std::size_t q = 0; q < nr; ++q) cp[r * n + q] = tile[r * kNr + q];
                    }
                }
            }
        }
    }
}

}  // namespace mcdfn

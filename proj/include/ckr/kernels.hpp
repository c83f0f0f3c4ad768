#ifndef CKR_KERNELS_HPP
#define CKR_KERNELS_HPP

#include <cstddef>
#include <string>

// Double-precision compute kernels behind the dense-array math.
//
// Every kernel has a scalar reference implementation (kern::scalar) and,
// when the binary was built with AVX2 support, a vectorized variant
// (kern::avx2). The dispatch table resolves once at startup from CPUID;
// the environment variable CKR_KERNELS=scalar|avx2 overrides the choice.
// Transcendental elementwise maps (tanh, exp, ...) stay scalar in both
// lanes so both lanes call the same libm code paths.

namespace ckr::kern {

struct Kernels {
    // C[m x n] = A[m x k] * B[k x n], row-major. acc=true accumulates into C.
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);
    // C[m x n] = A[m x k] * B[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);
    // C[m x n] = A[k x m]^T * B[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    double (*dot)(std::size_t n, const double* x, const double* y);
    double (*sum)(std::size_t n, const double* x);
    void (*vmul)(std::size_t n, const double* x, const double* y, double* z);
    void (*vadd)(std::size_t n, const double* x, const double* y, double* z);
    void (*vscale)(std::size_t n, double alpha, const double* x, double* z);
    // z = x * y + w (elementwise fused form used by coupling layers)
    void (*vmuladd)(std::size_t n, const double* x, const double* y,
                    const double* w, double* z);
};

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void vmul(std::size_t n, const double* x, const double* y, double* z);
void vadd(std::size_t n, const double* x, const double* y, double* z);
void vscale(std::size_t n, double alpha, const double* x, double* z);
void vmuladd(std::size_t n, const double* x, const double* y, const double* w, double* z);
}  // namespace scalar

#ifdef CKR_BUILD_AVX2
namespace avx2 {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c, bool acc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void vmul(std::size_t n, const double* x, const double* y, double* z);
void vadd(std::size_t n, const double* x, const double* y, double* z);
void vscale(std::size_t n, double alpha, const double* x, double* z);
void vmuladd(std::size_t n, const double* x, const double* y, const double* w, double* z);
}  // namespace avx2
#endif

// The active dispatch table. Initialized on first use.
const Kernels& active();

// Name of the active lane ("scalar" or "avx2").
const std::string& active_name();

// True when the avx2 lane is both compiled in and supported by this CPU.
bool avx2_available();

}  // namespace ckr::kern

#endif

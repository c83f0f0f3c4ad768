#include "ckr/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ckr::kern {

namespace {

Kernels make_scalar() {
    return Kernels{scalar::gemm_nn, scalar::gemm_nt, scalar::gemm_tn,
                   scalar::axpy,    scalar::dot,     scalar::sum,
                   scalar::vmul,    scalar::vadd,    scalar::vscale,
                   scalar::vmuladd};
}

#ifdef CKR_BUILD_AVX2
Kernels make_avx2() {
    return Kernels{avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn,
                   avx2::axpy,    avx2::dot,     avx2::sum,
                   avx2::vmul,    avx2::vadd,    avx2::vscale,
                   avx2::vmuladd};
}
#endif

bool cpu_has_avx2() {
#ifdef CKR_BUILD_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Selection {
    Kernels table;
    std::string name;
    Selection() {
        const char* env = std::getenv("CKR_KERNELS");
        bool want_avx2 = cpu_has_avx2();
        if (env != nullptr) {
            if (std::strcmp(env, "scalar") == 0) want_avx2 = false;
            else if (std::strcmp(env, "avx2") == 0 && !cpu_has_avx2()) want_avx2 = false;
        }
#ifdef CKR_BUILD_AVX2
        if (want_avx2) {
            table = make_avx2();
            name = "avx2";
            return;
        }
#endif
        (void)want_avx2;
        table = make_scalar();
        name = "scalar";
    }
};

const Selection& selection() {
    static Selection sel;
    return sel;
}

}  // namespace

const Kernels& active() { return selection().table; }

const std::string& active_name() { return selection().name; }

bool avx2_available() { return cpu_has_avx2(); }

}  // namespace ckr::kern

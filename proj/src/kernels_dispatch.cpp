#include "ldadam/kernels.hpp"

namespace ldadam::kernels {

#if defined(LDADAM_BUILD_AVX2)
const Kernels* avx2_table_impl();
#endif

const Kernels* avx2_table() {
#if defined(LDADAM_BUILD_AVX2)
    if (__builtin_cpu_supports("avx2")) return avx2_table_impl();
#endif
    return nullptr;
}

const Kernels& active() {
    static const Kernels* chosen = [] {
        if (const Kernels* v = avx2_table()) return v;
        return &scalar_table();
    }();
    return *chosen;
}

std::string_view active_name() { return active().name; }

} // namespace ldadam::kernels

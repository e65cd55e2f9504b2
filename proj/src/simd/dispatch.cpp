#include "blobgan/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace blobgan::simd {

#ifdef BLOBGAN_HAVE_AVX2
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(BLOBGAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    const KernelTable* best = avx2_kernels();
    if (const char* forced = std::getenv("BLOBGAN_SIMD")) {
        const std::string_view name(forced);
        if (name == "reference") return &reference_kernels();
        if (name == "avx2" && best != nullptr) return best;
    }
    return best != nullptr ? best : &reference_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{pick_default()};
    return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#ifdef BLOBGAN_HAVE_AVX2
    static const bool supported = cpu_has_avx2_fma();
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

bool select_kernels(std::string_view name) {
    const KernelTable* table = nullptr;
    if (name == "reference") table = &reference_kernels();
    if (name == "avx2") table = avx2_kernels();
    if (table == nullptr) return false;
    active_slot().store(table, std::memory_order_release);
    return true;
}

}  // namespace blobgan::simd

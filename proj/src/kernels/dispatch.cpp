#include "desate/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace desate::kernels {

const KernelTable* avx2_compiled_table();

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

const KernelTable* avx2_table() {
#if defined(__x86_64__) || defined(__i386__)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? avx2_compiled_table() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* resolve() {
    if (const char* env = std::getenv("DE_SATE_KERNELS"); env && std::string(env) == "scalar")
        return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    if (const KernelTable* t = neon_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{resolve()};
    return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_relaxed); }

}  // namespace desate::kernels

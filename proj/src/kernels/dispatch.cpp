#include "polarseg/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace polarseg::kernels {

namespace {

std::atomic<int> g_force_scalar{-1};  // -1 unresolved, 0 no, 1 yes

bool resolve_force_scalar() {
    if (const char* env = std::getenv("POLARSEG_FORCE_SCALAR")) {
        return env[0] == '1';
    }
    return false;
}

}  // namespace

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void set_force_scalar(bool force) { g_force_scalar.store(force ? 1 : 0); }

bool force_scalar() {
    int v = g_force_scalar.load();
    if (v < 0) {
        v = resolve_force_scalar() ? 1 : 0;
        g_force_scalar.store(v);
    }
    return v == 1;
}

template <>
const KernelTable<float>& active_table<float>() {
    if (!force_scalar() && cpu_has_avx2()) return avx2_table_f32();
    return scalar_table<float>();
}

template <>
const KernelTable<double>& active_table<double>() {
    return scalar_table<double>();
}

std::string active_backend_name() { return active_table<float>().backend; }

}  // namespace polarseg::kernels

#include "spikeassoc/kernels.hpp"

#include "spikeassoc/errors.hpp"

#include <cstdlib>

namespace spikeassoc::kernels {

const Backend* avx2_backend_impl(); // defined in kernels_avx2.cpp

const Backend* avx2_backend() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    if (!__builtin_cpu_supports("avx2")) return nullptr;
#endif
    return avx2_backend_impl();
}

namespace {

const Backend* resolve(const std::string& name) {
    if (name == "scalar") return &scalar_backend();
    if (name == "avx2") {
        const Backend* b = avx2_backend();
        if (!b) throw ConfigError("kernel backend 'avx2' not available on this CPU/build");
        return b;
    }
    if (name == "auto") {
        const Backend* b = avx2_backend();
        return b ? b : &scalar_backend();
    }
    throw ConfigError("unknown kernel backend '" + name + "' (scalar|avx2|auto)");
}

const Backend* initial_backend() {
    if (const char* env = std::getenv("SPIKE_ASSOC_KERNELS"))
        return resolve(env);
    return resolve("auto");
}

const Backend*& active_slot() {
    static const Backend* slot = initial_backend();
    return slot;
}

} // namespace

const Backend& active() { return *active_slot(); }

void set_active(const std::string& name) { active_slot() = resolve(name); }

} // namespace spikeassoc::kernels

#include "itokit/kernels.hpp"

#include "itokit/errors.hpp"

#include <cstdlib>
#include <string>

namespace itokit::kernels {
namespace {

const Table* resolve(const std::string& which) {
    if (which == "scalar")
        return &scalar();
#if defined(__x86_64__) || defined(_M_X64)
    if (which == "avx2") {
        if (!avx2_available())
            throw ConfigError("ITOKIT_KERNELS=avx2 requested but the CPU "
                              "does not support AVX2");
        return &avx2();
    }
#endif
#if defined(__aarch64__)
    if (which == "neon")
        return &neon();
#endif
    if (which == "auto" || which.empty()) {
#if defined(__x86_64__) || defined(_M_X64)
        if (avx2_available())
            return &avx2();
#endif
#if defined(__aarch64__)
        return &neon();
#endif
        return &scalar();
    }
    throw ConfigError("unknown kernel table '" + which +
                      "' (expected auto, scalar, avx2 or neon)");
}

const Table*& slot() {
    static const Table* t = nullptr;
    return t;
}

} // namespace

const Table& active() {
    const Table*& t = slot();
    if (!t) {
        const char* env = std::getenv("ITOKIT_KERNELS");
        t = resolve(env ? std::string(env) : std::string("auto"));
    }
    return *t;
}

const std::string& force(const std::string& which) {
    slot() = resolve(which);
    static std::string name;
    name = slot()->name;
    return name;
}

} // namespace itokit::kernels

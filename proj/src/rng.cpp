#include "m2o/rng.hpp"

#include <openssl/rand.h>

#include <stdexcept>

namespace m2o {

uint64_t RandomSource::below(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below: zero bound");
    // Rejection sampling keeps the draw uniform and implementation-independent.
    uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    for (;;) {
        uint64_t v = next_u64();
        if (v < limit) return v % bound;
    }
}

void DeterministicRng::fill(uint8_t* out, size_t len) {
    size_t i = 0;
    while (i < len) {
        uint64_t word = engine_();
        for (int s = 56; s >= 0 && i < len; s -= 8) {
            out[i++] = static_cast<uint8_t>((word >> s) & 0xff);
        }
    }
}

void SystemRng::fill(uint8_t* out, size_t len) {
    if (len == 0) return;
    if (RAND_bytes(out, static_cast<int>(len)) != 1) {
        throw std::runtime_error("SystemRng: RAND_bytes failed");
    }
}

}  // namespace m2o

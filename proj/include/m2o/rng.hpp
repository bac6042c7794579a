#pragma once

#include <cstdint>
#include <random>

#include "m2o/bytes.hpp"

namespace m2o {

// Randomness source injected into everything that draws random values.
// Protocol and simulator code never touches a global RNG, so a run is a
// pure function of (config, script, seed).
class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual void fill(uint8_t* out, size_t len) = 0;

    Bytes bytes(size_t len) {
        Bytes out(len);
        if (len > 0) fill(out.data(), len);
        return out;
    }
    uint64_t next_u64() {
        uint8_t buf[8];
        fill(buf, sizeof(buf));
        uint64_t v = 0;
        for (uint8_t b : buf) v = (v << 8) | b;
        return v;
    }
    // Uniform in [0, bound) via rejection sampling; bound > 0.
    uint64_t below(uint64_t bound);
};

// Seedable deterministic generator; identical byte stream for identical
// seeds on every platform. Not cryptographically strong — for simulation
// determinism and tests.
class DeterministicRng final : public RandomSource {
public:
    explicit DeterministicRng(uint64_t seed) : engine_(seed) {}
    void fill(uint8_t* out, size_t len) override;

private:
    std::mt19937_64 engine_;
};

// OS-entropy source (OpenSSL RAND_bytes). Used for default, unseeded runs.
class SystemRng final : public RandomSource {
public:
    void fill(uint8_t* out, size_t len) override;
};

}  // namespace m2o

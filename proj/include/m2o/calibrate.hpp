#pragma once

#include <iosfwd>

#include "m2o/costmodel.hpp"

namespace m2o::costmodel {

struct CalibrationOptions {
    uint64_t iterations = 7000;  // samples per primitive, >= 100
    int rsa_bits = 3072;
    bool allow_insecure_test_keys = false;
};

// Microbenchmarks the seven unit costs into a TimingModel with per-primitive
// SEM estimates. Fast operations are sampled in batches so each reading stays
// above the clock resolution; a short spin first lets frequency scaling
// settle. Throws DomainError below the iteration floor and runtime_error on
// unusable timer readings.
TimingModel calibrate(const CalibrationOptions& options, std::ostream* progress = nullptr);

}  // namespace m2o::costmodel

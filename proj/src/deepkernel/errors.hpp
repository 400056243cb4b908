#pragma once

#include <stdexcept>
#include <string>

namespace dk {

// Error taxonomy mirrors the C API status codes (and the CLI exit codes):
//   invalid_argument_error -> DK_ERR_INVALID_ARGUMENT (1)
//   numerical_error        -> DK_ERR_NUMERICAL        (2)
//   validation_error       -> DK_ERR_VALIDATION       (3)

// Malformed call: null handle, dimension mismatch, bad flag combination.
class invalid_argument_error : public std::invalid_argument {
public:
    explicit invalid_argument_error(const std::string& what)
        : std::invalid_argument(what) {}
};

// Numerics gave up: Cholesky failed at max jitter, divergent integral,
// non-smooth limit, all restarts non-finite.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what)
        : std::runtime_error(what) {}
};

// Domain rule violated: nonpositive hyperparameter, alpha <= beta,
// non-PSD inner evaluation, malformed kernel JSON, oracle disagreement.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace dk

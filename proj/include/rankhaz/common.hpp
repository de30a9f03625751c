#pragma once

#include <stdexcept>
#include <string>

namespace rankhaz {

inline constexpr const char* kVersion = "0.1.0";

// Input/config problems: bad CSV cells, invalid parameters, missing columns.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure of a sampler or optimizer (divergent chain, monotone
// likelihood, singular precision).
class NonConvergenceError : public std::runtime_error {
public:
    explicit NonConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Cholesky factorization failed; callers treat this as a divergent iteration.
class CholeskyError : public NonConvergenceError {
public:
    explicit CholeskyError(const std::string& msg) : NonConvergenceError(msg) {}
};

}  // namespace rankhaz

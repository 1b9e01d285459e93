#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spingp {

// A Cholesky pivot failed: the matrix handed to the factorization is not
// positive definite. During hyperparameter search this usually means the
// current parameters are infeasible, not that the solver is broken.
class NotPositiveDefinite : public std::runtime_error {
public:
    NotPositiveDefinite(std::string what, std::ptrdiff_t block)
        : std::runtime_error(std::move(what)), block_(block) {}
    std::ptrdiff_t block_index() const noexcept { return block_; }

private:
    std::ptrdiff_t block_;
};

// A process-noise block Q_i stayed numerically singular even after jitter.
class SingularProcessNoise : public NotPositiveDefinite {
public:
    SingularProcessNoise(std::string what, std::ptrdiff_t block)
        : NotPositiveDefinite(std::move(what), block) {}
};

class DuplicateTimestamp : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InfeasibleStart : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoValidRows : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KernelParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace spingp

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ndop {

using Index = std::ptrdiff_t;
using Vector = Eigen::VectorXd;

/// Raised when inputs violate a documented precondition (bad geometry,
/// mismatched grids, non-divergence-free velocity, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative solve fails to reach its tolerance.
class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ndop

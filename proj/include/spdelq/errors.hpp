#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spdelq {

/// Precondition or configuration violation. Maps to CLI exit code 1.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base for numerical failures. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An inner fixed point ran out of iterations.
class IterationLimitError : public NumericalError {
public:
    IterationLimitError(const std::string& what, double worst_residual)
        : NumericalError(what), worst_residual_(worst_residual) {}
    double worst_residual() const noexcept { return worst_residual_; }

private:
    double worst_residual_;
};

/// An outer iteration (quasi-linearization, horizon extension) did not reach tolerance.
class NonConvergenceError : public NumericalError {
public:
    NonConvergenceError(const std::string& what, std::vector<double> history)
        : NumericalError(what), history_(std::move(history)) {}
    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// Values exceeded the overflow guard or an integrator step underflowed.
class SingularityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A simulated path blew up.
class InstabilityError : public NumericalError {
public:
    InstabilityError(const std::string& what, long long path_index)
        : NumericalError(what), path_index_(path_index) {}
    long long path_index() const noexcept { return path_index_; }

private:
    long long path_index_;
};

/// A matrix that must be positive definite is not (e.g. Lambda below delta/2).
class NumericalPsdError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A proven structural property (monotonicity, positivity) failed beyond tolerance.
class InternalConsistencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace spdelq

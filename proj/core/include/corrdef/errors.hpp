#pragma once

#include <stdexcept>
#include <string>

namespace corrdef {

/// Thrown when an exact (enumerating) operation is asked to handle more
/// vertices than its configured cap.
class CapacityExceeded : public std::length_error {
public:
    CapacityExceeded(int n_vertices, int cap);
    int n_vertices() const noexcept { return n_vertices_; }
    int cap() const noexcept { return cap_; }

private:
    int n_vertices_;
    int cap_;
};

/// Moment targets that no finite parameter vector can reproduce.
class InfeasibleTargets : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative procedure stopped before reaching its tolerance.
class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Malformed or inconsistent input document.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IntegrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace corrdef

#pragma once

#include <stdexcept>
#include <string>

namespace qam {

/// Non-finite density-matrix entries after an integration step.
class NumericalBlowup : public std::runtime_error {
  public:
    NumericalBlowup(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
    double time() const { return t_; }

  private:
    double t_;
};

/// Population of the two highest Fock levels exceeded the hard limit.
class TruncationError : public std::runtime_error {
  public:
    TruncationError(const std::string& what, double t, double top_pop)
        : std::runtime_error(what), t_(t), top_pop_(top_pop) {}
    double time() const { return t_; }
    double top_population() const { return top_pop_; }

  private:
    double t_;
    double top_pop_;
};

/// A scaling-fit window that cannot be fitted (too few points, non-positive MSD).
class WindowInvalid : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Wigner maximum sits on the boundary of the phase-space grid.
class BoundaryPeak : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Oracle and density-matrix runs were not generated from the same seeds.
class PairingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Drift matrix is singular (zero dissipation): no stationary Gaussian exists.
class NoSteadyState : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& what, std::string key = {}, int line = 0)
        : std::runtime_error(what), key_(std::move(key)), line_(line) {}
    const std::string& key() const { return key_; }
    int line() const { return line_; }

  private:
    std::string key_;
    int line_;
};

} // namespace qam

#pragma once

#include <complex>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace dtnkrein {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A shift was rejected as a resolvent-set point: the smallest singular value
/// of (op - shift) did not exceed the acceptance threshold.
class NearSingularShift : public Error {
public:
    NearSingularShift(std::string op, std::complex<double> shift, double sigma_min, double threshold)
        : Error(describe(op, shift, sigma_min, threshold)),
          op_(std::move(op)),
          shift_(shift),
          sigma_min_(sigma_min),
          threshold_(threshold) {}

    /// Name of the operator whose shifted inverse was requested ("A_D", "A_N", ...).
    [[nodiscard]] const std::string& op() const noexcept { return op_; }
    [[nodiscard]] std::complex<double> shift() const noexcept { return shift_; }
    [[nodiscard]] double sigma_min() const noexcept { return sigma_min_; }
    [[nodiscard]] double threshold() const noexcept { return threshold_; }

private:
    static std::string describe(const std::string& op, std::complex<double> s, double smin, double tau) {
        std::ostringstream os;
        os.precision(6);
        os << "near-singular shift for " << op << " at (" << s.real() << "," << s.imag()
           << "): sigma_min=" << smin << " <= threshold=" << tau;
        return os.str();
    }

    std::string op_;
    std::complex<double> shift_;
    double sigma_min_;
    double threshold_;
};

class NotHermitian : public Error {
public:
    using Error::Error;
};

class SingularBoundaryBlock : public Error {
public:
    using Error::Error;
};

/// Q(lambda) failed the invertibility test; lambda is close to the spectrum
/// of the comparison operator (A_N or the transmission operator).
class SingularQ : public Error {
public:
    SingularQ(std::complex<double> lambda, double sigma_min, double threshold)
        : Error(describe(lambda, sigma_min, threshold)), lambda_(lambda) {}

    [[nodiscard]] std::complex<double> lambda() const noexcept { return lambda_; }

private:
    static std::string describe(std::complex<double> l, double smin, double tau) {
        std::ostringstream os;
        os.precision(6);
        os << "Q(lambda) not invertible at (" << l.real() << "," << l.imag() << "): sigma_min=" << smin
           << " <= threshold=" << tau;
        return os.str();
    }

    std::complex<double> lambda_;
};

class FluxMismatch : public Error {
public:
    using Error::Error;
};

class NotElliptic : public Error {
public:
    NotElliptic(std::size_t cell, double min_eig)
        : Error("coefficient tensor not uniformly elliptic at cell " + std::to_string(cell) +
                " (smallest eigenvalue " + std::to_string(min_eig) + ")"),
          cell_(cell) {}

    [[nodiscard]] std::size_t cell() const noexcept { return cell_; }

private:
    std::size_t cell_;
};

class LayoutError : public Error {
public:
    using Error::Error;
};

class NoExteriorPartition : public Error {
public:
    NoExteriorPartition() : Error("model has no exterior partition") {}
};

class InvalidMatrix : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace dtnkrein

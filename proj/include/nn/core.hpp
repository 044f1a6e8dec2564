#pragma once

#include <cmath>
#include <compare>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nn {

// Error hierarchy shared by all modules.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// log-value left the representable range (overflow of the underlying double).
class RangeError : public Error {
public:
    using Error::Error;
};

// Division by 1, the additive identity of the field.  Distinct from overflow:
// 1 plays the role of zero here, so this is the "division by zero" of the system.
class DivisionByOneError : public Error {
public:
    using Error::Error;
};

// Argument outside a function's domain (e.g. ln of a value <= 1).
class DomainError : public Error {
public:
    using Error::Error;
};

// An iterative scheme (quadrature, difference quotients) failed to reach
// the requested tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Degenerate / resonant boundary-value problem: the collocation system is
// singular and no unique solution exists.
class WellPosednessError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : Error(msg), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// A strictly positive real, stored as its natural logarithm.
///
/// This is the element type of the field (R+, (+), (*)) generated by
/// alpha = exp: x (+) y = x*y and x (*) y = x^ln(y).  Working on logs makes
/// (+) an exact addition and (*) an exact multiplication, and keeps values
/// like e^(e^2) representable without overflow.
class NNReal {
public:
    NNReal() : log_(0.0) {}  // the value 1, additive identity

    static NNReal from_value(double v) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError("NNReal requires a strictly positive finite value");
        return NNReal(std::log(v));
    }

    static NNReal from_log(double lg) {
        if (!std::isfinite(lg))
            throw RangeError("NNReal log-value out of range");
        return NNReal(lg);
    }

    /// Additive identity (the value 1).
    static NNReal zero() { return NNReal(0.0); }
    /// Multiplicative identity (the value e).
    static NNReal one() { return NNReal(1.0); }

    double value() const { return std::exp(log_); }
    double log() const { return log_; }

    bool approx_equals(NNReal other, double log_tol) const {
        return std::abs(log_ - other.log_) <= log_tol;
    }

    friend bool operator==(NNReal a, NNReal b) { return a.log_ == b.log_; }
    friend std::strong_ordering operator<=>(NNReal a, NNReal b) {
        if (a.log_ < b.log_) return std::strong_ordering::less;
        if (a.log_ > b.log_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

private:
    explicit NNReal(double lg) : log_(lg) {}
    double log_;
};

namespace detail {
inline double checked(double lg, const char* what) {
    if (!std::isfinite(lg)) throw RangeError(what);
    return lg;
}
}  // namespace detail

/// x (+) y = x*y.
inline NNReal oplus(NNReal a, NNReal b) {
    return NNReal::from_log(detail::checked(a.log() + b.log(), "oplus overflow"));
}

/// x (-) y = x/y.
inline NNReal ominus(NNReal a, NNReal b) {
    return NNReal::from_log(detail::checked(a.log() - b.log(), "ominus overflow"));
}

/// x (*) y = x^ln(y).
inline NNReal odot(NNReal a, NNReal b) {
    return NNReal::from_log(detail::checked(a.log() * b.log(), "odot overflow"));
}

/// x (/) y = x^(1/ln(y)), y != 1.
inline NNReal oslash(NNReal a, NNReal b) {
    if (b.log() == 0.0)
        throw DivisionByOneError("oslash: divisor is 1, the additive identity");
    return NNReal::from_log(detail::checked(a.log() / b.log(), "oslash overflow"));
}

/// [[x]]: x itself for x >= 1, else 1 (-) x.  Always >= 1.
inline NNReal nn_abs(NNReal x) {
    return NNReal::from_log(std::abs(x.log()));
}

/// d(x,y) = [[x (-) y]].  Equals 1 iff x == y.
inline NNReal nn_dist(NNReal x, NNReal y) {
    return NNReal::from_log(std::abs(x.log() - y.log()));
}

/// Iterated (*)-power: x^{0} = e, x^{n} = x (*) ... (*) x.
/// Negative exponents via the (*)-inverse, which requires x != 1.
inline NNReal nn_pow(NNReal x, int n) {
    if (n < 0 && x.log() == 0.0)
        throw DivisionByOneError("nn_pow: negative power of 1 is undefined");
    return NNReal::from_log(detail::checked(std::pow(x.log(), n), "nn_pow overflow"));
}

/// (*)-inverse: a^{-1} = e (/) a, so a (*) a^{-1} = e.  Requires a != 1.
inline NNReal nn_inv(NNReal a) {
    if (a.log() == 0.0)
        throw DivisionByOneError("nn_inv: 1 has no (*)-inverse");
    return NNReal::from_log(1.0 / a.log());
}

/// Scalar scaling e^c (*) x = x^c; realizes coefficients like e^(1/k!).
inline NNReal nn_scale(double c, NNReal x) {
    return NNReal::from_log(detail::checked(c * x.log(), "nn_scale overflow"));
}

/// (+)-sum of a sequence; the empty sum is 1.
inline NNReal nn_sum(std::span<const NNReal> terms) {
    double acc = 0.0;
    for (NNReal t : terms) acc += t.log();
    return NNReal::from_log(detail::checked(acc, "nn_sum overflow"));
}

inline NNReal nn_sum(std::initializer_list<NNReal> terms) {
    return nn_sum(std::span<const NNReal>(terms.begin(), terms.size()));
}

/// Decimal rendering, shortest round-trip ("6", "1.5", "0.1353352832366127").
std::string to_string(NNReal x);

/// Canonical log-form rendering: "1" for the identity, "e" for e, else "e^<log>".
/// Round-trips exactly through parse_real.
std::string to_log_string(NNReal x);

/// Accepts a positive decimal ("1.5"), "e", or a log-form literal ("e^2.5", "e^-1").
NNReal parse_real(std::string_view text);

}  // namespace nn

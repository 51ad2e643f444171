#pragma once
// Special functions used throughout: log-gamma, polygamma of orders 0-3 and
// the chi-square survival function. Thin, domain-checked wrappers over
// std::lgamma and Boost.Math.

#include <cmath>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "betabart/error.hpp"

namespace betabart {

/// Order of a polygamma function: 0 digamma, 1 trigamma, 2 and 3 higher.
class PolyOrder {
public:
    constexpr explicit PolyOrder(int m) : m_(m) {
        if (m < 0 || m > 3) throw DomainError("polygamma order " + std::to_string(m) + " unsupported (0..3)");
    }
    constexpr int value() const noexcept { return m_; }

private:
    int m_;
};

inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: argument must be positive and finite");
    return std::lgamma(x);
}

inline double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("digamma: argument must be positive and finite");
    return boost::math::digamma(x);
}

inline double trigamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("trigamma: argument must be positive and finite");
    return boost::math::trigamma(x);
}

inline double polygamma(PolyOrder order, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("polygamma: argument must be positive and finite");
    switch (order.value()) {
    case 0: return boost::math::digamma(x);
    case 1: return boost::math::trigamma(x);
    default: return boost::math::polygamma(order.value(), x);
    }
}

inline double polygamma(int m, double x) { return polygamma(PolyOrder(m), x); }

/// P(chi2_df > x), the upper regularized incomplete gamma Q(df/2, x/2).
inline double chisq_sf(double x, int df) {
    if (df < 1) throw DomainError("chisq_sf: degrees of freedom must be >= 1");
    if (std::isnan(x) || x < 0.0) throw DomainError("chisq_sf: statistic must be nonnegative");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

} // namespace betabart

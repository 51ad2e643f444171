#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "betabart/error.hpp"

namespace betabart {

/// Link function g: (0,1) -> R with derivatives up to fourth order.
///
/// Only the logit link is implemented. The cumulant machinery needs g''' and
/// the observed fourth derivative of the log-likelihood additionally needs
/// g'''' (through the third mu-derivative of dmu/deta).
class Link {
public:
    enum class Kind { Logit };

    static Link logit() { return Link(Kind::Logit); }

    static Link from_name(std::string_view name) {
        if (name == "logit") return logit();
        throw ConfigError("unknown link '" + std::string(name) + "' (supported: logit)");
    }

    Kind kind() const noexcept { return kind_; }
    std::string name() const { return "logit"; }

    double g(double mu) const {
        check(mu);
        return std::log(mu / (1.0 - mu));
    }

    double inverse(double eta) const {
        if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
        const double e = std::exp(eta);
        return e / (1.0 + e);
    }

    double d1(double mu) const {
        check(mu);
        return 1.0 / (mu * (1.0 - mu));
    }

    double d2(double mu) const {
        check(mu);
        const double v = mu * (1.0 - mu);
        return (2.0 * mu - 1.0) / (v * v);
    }

    double d3(double mu) const {
        check(mu);
        const double mu2 = mu * mu;
        const double om = 1.0 - mu;
        return 2.0 * (1.0 - 4.0 * mu + 6.0 * mu2 - 3.0 * mu2 * mu) / (mu2 * mu * om * om * om * om);
    }

    double d4(double mu) const {
        check(mu);
        const double om = 1.0 - mu;
        return -6.0 / (mu * mu * mu * mu) + 6.0 / (om * om * om * om);
    }

    /// dmu/deta as a function of mu, and its first three mu-derivatives.
    struct MeanDerivs {
        double h;   // dmu/deta = 1/g'
        double h1;  // d/dmu (dmu/deta)
        double h2;  // d2/dmu2 (dmu/deta)
        double h3;  // d3/dmu3 (dmu/deta)
    };

    MeanDerivs mean_derivs(double mu) const {
        const double g1 = d1(mu), g2 = d2(mu), g3 = d3(mu), g4 = d4(mu);
        const double h = 1.0 / g1;
        const double h1 = -g2 * h * h;
        const double h2 = (2.0 * g2 * g2 - g3 * g1) * h * h * h;
        // differentiate h2 = (2 g2^2 - g3 g1) g1^-3
        const double h3 = (4.0 * g2 * g3 - g4 * g1 - g3 * g2) * h * h * h
                        - 3.0 * (2.0 * g2 * g2 - g3 * g1) * g2 * h * h * h * h;
        return {h, h1, h2, h3};
    }

private:
    explicit Link(Kind k) : kind_(k) {}

    static void check(double mu) {
        if (!(mu > 0.0 && mu < 1.0)) throw DomainError("link evaluated outside (0,1)");
    }

    Kind kind_;
};

} // namespace betabart

#pragma once
// Maximum likelihood, unrestricted or with some coefficients fixed (the fixed
// columns act as an offset in eta). Newton steps with Fisher scoring as the
// fallback direction and step halving for ascent.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "betabart/error.hpp"
#include "betabart/link.hpp"
#include "betabart/model.hpp"

namespace betabart {

/// H0: beta_j = value_j for j in indices (0-based positions within beta).
class Restriction {
public:
    Restriction() = default;
    Restriction(std::vector<int> indices, std::vector<double> values) {
        if (indices.size() != values.size()) throw ConfigError("restriction indices and values differ in length");
        std::vector<std::pair<int, double>> pairs;
        for (std::size_t i = 0; i < indices.size(); ++i) pairs.emplace_back(indices[i], values[i]);
        std::sort(pairs.begin(), pairs.end());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].first < 0) throw ConfigError("restriction index must be nonnegative");
            if (i > 0 && pairs[i].first == pairs[i - 1].first) throw ConfigError("restriction indices must be unique");
            indices_.push_back(pairs[i].first);
            values_.push_back(pairs[i].second);
        }
    }

    /// All listed coefficients fixed at zero.
    static Restriction zeros(std::vector<int> indices) {
        std::vector<double> v(indices.size(), 0.0);
        return Restriction(std::move(indices), std::move(v));
    }

    const std::vector<int>& indices() const noexcept { return indices_; }
    const std::vector<double>& values() const noexcept { return values_; }
    int q() const noexcept { return static_cast<int>(indices_.size()); }

    /// Throws unless 1 <= q < p and every index addresses a coefficient.
    void validate(Eigen::Index p) const {
        if (indices_.empty()) throw ConfigError("restriction must fix at least one coefficient");
        if (static_cast<Eigen::Index>(indices_.size()) >= p)
            throw ConfigError("restriction must leave at least one free coefficient (q < p)");
        if (indices_.back() >= p) throw ConfigError("restriction index out of range");
    }

    /// Free parameter positions in theta = (beta, phi); phi is always free.
    std::vector<int> free_positions(Eigen::Index p) const {
        std::vector<int> out;
        for (int j = 0; j <= static_cast<int>(p); ++j) {
            if (!std::binary_search(indices_.begin(), indices_.end(), j) || j == static_cast<int>(p)) out.push_back(j);
        }
        return out;
    }

private:
    std::vector<int> indices_;
    std::vector<double> values_;
};

struct FitOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    int step_halving_max = 30;
    /// Relative log-likelihood change over the last step; also the slack on the ascent test.
    double loglik_rel_tolerance = 1e-12;
    /// Backstop for badly scaled designs: the Newton decrement U'K^-1U at rounding level
    /// means no representable step improves the fit even when max|U| stays above tolerance.
    double decrement_tolerance = 1e-24;
};

struct FitResult {
    Params theta;
    double loglik = 0.0;
    /// Information and its inverse over the free parameters (all k when unrestricted).
    MatrixXd info;
    MatrixXd info_inv;
    /// Positions in theta of the rows/columns of info; maps the free space back into R^k.
    std::vector<int> free;
    /// One entry per theta component; fixed components report 0.
    VectorXd std_errors;
    std::vector<bool> fixed;
    int iterations = 0;
    bool converged = false;
    bool clamp_activated = false;
    std::vector<double> trace;

    bool restricted() const { return static_cast<Eigen::Index>(free.size()) < theta.k(); }
};

namespace detail {

inline void check_rank(const MatrixXd& x) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    const auto rank = qr.rank();
    if (rank < x.cols())
        throw RankDeficientError("design matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                                     std::to_string(x.cols()) + " columns)",
                                 rank, x.cols());
}

inline Params starting_values_impl(const Dataset& data, const Link& link, const Restriction* restriction) {
    const auto n = data.n(), p = data.p();
    const MatrixXd& x = data.x();
    check_rank(x);
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = link.g(data.y()[i]);

    VectorXd beta = VectorXd::Zero(p);
    std::vector<int> free_cols;
    VectorXd offset = VectorXd::Zero(n);
    for (int j = 0; j < p; ++j) {
        if (restriction && std::binary_search(restriction->indices().begin(), restriction->indices().end(), j)) {
            const auto pos = std::lower_bound(restriction->indices().begin(), restriction->indices().end(), j) -
                             restriction->indices().begin();
            beta[j] = restriction->values()[static_cast<std::size_t>(pos)];
            offset += x.col(j) * beta[j];
        } else {
            free_cols.push_back(j);
        }
    }
    MatrixXd xf(n, static_cast<Eigen::Index>(free_cols.size()));
    for (std::size_t c = 0; c < free_cols.size(); ++c) xf.col(static_cast<Eigen::Index>(c)) = x.col(free_cols[c]);
    const VectorXd coef = xf.colPivHouseholderQr().solve(z - offset);
    for (std::size_t c = 0; c < free_cols.size(); ++c) beta[free_cols[c]] = coef[static_cast<Eigen::Index>(c)];

    const VectorXd resid = z - offset - xf * coef;
    const double dof = static_cast<double>(n - xf.cols());
    const double s2 = resid.squaredNorm() / dof;
    double acc = 0.0;
    // an (almost) exact fit leaves only rounding in the residuals
    bool finite = s2 > 1e-20 * std::max(1.0, z.squaredNorm() / static_cast<double>(n));
    const VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < n && finite; ++i) {
        double mu = std::clamp(link.inverse(eta[i]), kMuClamp, 1.0 - kMuClamp);
        const double g1 = link.d1(mu);
        const double var = s2 / (g1 * g1);
        acc += mu * (1.0 - mu) / var - 1.0;
    }
    double phi = finite ? acc / static_cast<double>(n) : 1.0;
    if (!std::isfinite(phi) || phi < 1.0) phi = 1.0;
    return Params(beta, phi);
}

/// Maximizes l(beta, phi) over phi at fixed beta by Newton steps in log phi. The
/// moment estimate of phi can be orders of magnitude off when fitted means sit
/// near 0 or 1, and the joint iteration then crawls.
inline Params profile_precision(Params theta, const Dataset& data, const Link& link) {
    const VectorXd mu = mean_vector(theta, data, link);
    double lp = std::log(theta.phi);
    for (int it = 0; it < 100; ++it) {
        const double phi = std::exp(lp);
        double g = 0.0, h = 0.0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double m = mu[i], y = data.y()[i];
            g += digamma(phi) - m * digamma(m * phi) - (1.0 - m) * digamma((1.0 - m) * phi) + m * std::log(y) +
                 (1.0 - m) * std::log1p(-y);
            h += trigamma(phi) - m * m * trigamma(m * phi) - (1.0 - m) * (1.0 - m) * trigamma((1.0 - m) * phi);
        }
        // first and second derivatives in log phi; the second is negative near the maximum
        const double d1 = phi * g, d2 = phi * g + phi * phi * h;
        double step = d2 < 0.0 ? -d1 / d2 : (d1 > 0.0 ? 1.0 : -1.0);
        step = std::clamp(step, -2.0, 2.0);
        if (!std::isfinite(step)) return theta;
        lp += step;
        if (std::abs(step) < 1e-10) break;
    }
    const double phi = std::exp(lp);
    if (std::isfinite(phi) && phi > 0.0) theta.phi = phi;
    return theta;
}

inline FitResult maximize(const Dataset& data, const Link& link, const Restriction* restriction,
                                const FitOptions& opts, Params theta) {
    const auto p = data.p();
    const std::vector<int> free = restriction ? restriction->free_positions(p) : Restriction().free_positions(p);
    const auto nf = static_cast<Eigen::Index>(free.size());

    auto sub_score = [&](const VectorXd& u) {
        VectorXd out(nf);
        for (Eigen::Index a = 0; a < nf; ++a) out[a] = u[free[static_cast<std::size_t>(a)]];
        return out;
    };
    auto sub_info = [&](const MatrixXd& k) {
        MatrixXd out(nf, nf);
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b) out(a, b) = k(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        return out;
    };

    FitResult res;
    Evaluation ev = evaluate(theta, data, link);
    res.clamp_activated = ev.clamped;
    res.trace.push_back(ev.loglik);
    if (!std::isfinite(ev.loglik)) throw NumericalError("log-likelihood not finite at starting values");

    bool converged = false;
    double last_change = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_iterations && !converged; ++it) {
        const VectorXd u = sub_score(ev.score);
        // Newton direction when the observed information is safely positive definite, scoring direction otherwise
        Eigen::LLT<MatrixXd> llt(sub_info(ev.observed));
        if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
            const MatrixXd kf = sub_info(ev.info);
            llt.compute(kf);
            const double scale = kf.diagonal().cwiseAbs().maxCoeff();
            for (double lambda = 1e-12; (llt.info() != Eigen::Success || llt.rcond() < 1e-15) && lambda <= 1.0; lambda *= 10)
                llt.compute(kf + lambda * scale * MatrixXd::Identity(nf, nf));
            if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
                throw SingularInformationError("Fisher information is singular or not positive definite",
                                               llt.info() == Eigen::Success ? llt.rcond() : 0.0);
            }
        }
        const VectorXd step = llt.solve(u);
        const double decrement = u.dot(step);
        const double gmax = u.cwiseAbs().maxCoeff();
        const double slack = opts.loglik_rel_tolerance * std::max(1.0, std::abs(ev.loglik));
        if ((gmax <= opts.gradient_tolerance && last_change <= slack) || decrement <= opts.decrement_tolerance) {
            converged = true;
            break;
        }

        bool accepted = false;
        double t = 1.0;
        Evaluation cand;
        for (int h = 0; h <= opts.step_halving_max; ++h, t *= 0.5) {
            VectorXd v = theta.to_vector();
            for (Eigen::Index a = 0; a < nf; ++a) v[free[static_cast<std::size_t>(a)]] += t * step[a];
            if (!(v[p] > 0.0) || !v.allFinite()) continue;
            const Params trial = Params::from_vector(v);
            try {
                cand = evaluate(trial, data, link);
            } catch (const DomainError&) {
                continue;
            }
            if (std::isfinite(cand.loglik) && cand.loglik >= ev.loglik - slack) {
                theta = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw ConvergenceError("step halving exhausted without ascent (max |score| = " + std::to_string(gmax) + ")",
                                   res.trace);
        }
        last_change = std::abs(cand.loglik - ev.loglik);
        ev = std::move(cand);
        res.clamp_activated = res.clamp_activated || ev.clamped;
        res.trace.push_back(ev.loglik);
    }
    if (!converged) {
        throw ConvergenceError("likelihood maximization did not converge in " + std::to_string(opts.max_iterations) + " iterations",
                               res.trace);
    }

    res.theta = theta;
    res.loglik = ev.loglik;
    res.info = sub_info(ev.info);
    Eigen::LLT<MatrixXd> llt(res.info);
    if (llt.info() != Eigen::Success)
        throw SingularInformationError("Fisher information not positive definite at the estimate", 0.0);
    res.info_inv = llt.solve(MatrixXd::Identity(nf, nf));
    res.free = free;
    res.fixed.assign(static_cast<std::size_t>(p + 1), true);
    res.std_errors = VectorXd::Zero(p + 1);
    for (Eigen::Index a = 0; a < nf; ++a) {
        const auto pos = static_cast<std::size_t>(free[static_cast<std::size_t>(a)]);
        res.fixed[pos] = false;
        res.std_errors[static_cast<Eigen::Index>(pos)] = std::sqrt(res.info_inv(a, a));
    }
    res.iterations = it;
    res.converged = true;
    return res;
}

} // namespace detail

/// Least squares of g(y) on X for beta; moment estimate for phi floored at 1.
inline Params starting_values(const Dataset& data, const Link& link) {
    return detail::starting_values_impl(data, link, nullptr);
}

inline Params starting_values(const Dataset& data, const Link& link, const Restriction& restriction) {
    restriction.validate(data.p());
    return detail::starting_values_impl(data, link, &restriction);
}

inline FitResult fit_mle(const Dataset& data, const Link& link, const FitOptions& opts = {},
                         std::optional<Params> start = std::nullopt) {
    if (start) {
        detail::check_rank(data.x());
        check_dims(*start, data);
    }
    Params theta = start ? *start : detail::profile_precision(starting_values(data, link), data, link);
    return detail::maximize(data, link, nullptr, opts, std::move(theta));
}

inline FitResult fit_restricted(const Dataset& data, const Link& link, const Restriction& restriction,
                                const FitOptions& opts = {}, std::optional<Params> start = std::nullopt) {
    restriction.validate(data.p());
    Params theta;
    if (start) {
        detail::check_rank(data.x());
        check_dims(*start, data);
        theta = *start;
        for (int a = 0; a < restriction.q(); ++a)
            theta.beta[restriction.indices()[static_cast<std::size_t>(a)]] = restriction.values()[static_cast<std::size_t>(a)];
    } else {
        theta = detail::profile_precision(starting_values(data, link, restriction), data, link);
    }
    return detail::maximize(data, link, &restriction, opts, std::move(theta));
}

} // namespace betabart

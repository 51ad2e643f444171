#pragma once
// Fixed-dispersion beta regression: density, log-likelihood, score and
// expected (Fisher) information. Parameters are ordered (beta_1..beta_p, phi).

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "betabart/error.hpp"
#include "betabart/link.hpp"
#include "betabart/specfun.hpp"

namespace betabart {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Means produced by the inverse link are clamped to this distance from {0,1}.
inline constexpr double kMuClamp = 1e-12;

/// Responses in (0,1) and an n x p design matrix. Immutable after construction.
class Dataset {
public:
    Dataset(VectorXd y, MatrixXd x, std::vector<std::string> names = {})
        : y_(std::move(y)), x_(std::move(x)), names_(std::move(names)) {
        if (x_.cols() < 1) throw DataError("design matrix has no columns");
        if (y_.size() != x_.rows()) throw DataError("response length does not match design rows");
        if (y_.size() <= x_.cols()) throw DataError("need more observations than covariates (n > p)");
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            if (!(y_[i] > 0.0 && y_[i] < 1.0))
                throw DataError("response at row " + std::to_string(i + 1) + " is not strictly inside (0,1)");
        }
        if (!x_.allFinite()) throw DataError("design matrix contains non-finite values");
        if (names_.empty()) {
            for (Eigen::Index j = 0; j < x_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
        }
        if (static_cast<Eigen::Index>(names_.size()) != x_.cols()) throw DataError("one name per design column required");
    }

    const VectorXd& y() const noexcept { return y_; }
    const MatrixXd& x() const noexcept { return x_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Eigen::Index n() const noexcept { return y_.size(); }
    Eigen::Index p() const noexcept { return x_.cols(); }

    /// Same design, new responses (used by the parametric bootstrap and simulations).
    Dataset with_response(VectorXd y) const { return Dataset(std::move(y), x_, names_); }

private:
    VectorXd y_;
    MatrixXd x_;
    std::vector<std::string> names_;
};

/// theta = (beta, phi), k = p + 1.
struct Params {
    VectorXd beta;
    double phi = 1.0;

    Params() = default;
    Params(VectorXd b, double precision) : beta(std::move(b)), phi(precision) {
        if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("precision phi must be positive");
    }

    Eigen::Index k() const noexcept { return beta.size() + 1; }

    VectorXd to_vector() const {
        VectorXd v(k());
        v.head(beta.size()) = beta;
        v[beta.size()] = phi;
        return v;
    }

    static Params from_vector(const VectorXd& v) { return Params(v.head(v.size() - 1), v[v.size() - 1]); }
};

/// Per-observation state at a parameter value.
struct ObsState {
    VectorXd eta;
    VectorXd mu;
    VectorXd dmu_deta;
    VectorXd ystar;   // log(y / (1 - y))
    VectorXd mustar;  // psi(mu phi) - psi((1 - mu) phi)
    bool clamped = false;
};

inline void check_dims(const Params& theta, const Dataset& data) {
    if (theta.beta.size() != data.p()) throw DomainError("parameter dimension does not match design columns");
    if (!(theta.phi > 0.0)) throw DomainError("precision phi must be positive");
}

inline VectorXd mean_vector(const Params& theta, const Dataset& data, const Link& link, bool* clamped = nullptr) {
    check_dims(theta, data);
    VectorXd eta = data.x() * theta.beta;
    VectorXd mu(eta.size());
    bool hit = false;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (!std::isfinite(eta[i])) throw DomainError("non-finite linear predictor");
        double m = link.inverse(eta[i]);
        if (m < kMuClamp) { m = kMuClamp; hit = true; }
        if (m > 1.0 - kMuClamp) { m = 1.0 - kMuClamp; hit = true; }
        mu[i] = m;
    }
    if (clamped) *clamped = hit;
    return mu;
}

inline ObsState obs_state(const Params& theta, const Dataset& data, const Link& link) {
    ObsState s;
    s.eta = data.x() * theta.beta;
    s.mu = mean_vector(theta, data, link, &s.clamped);
    const auto n = data.n();
    s.dmu_deta.resize(n);
    s.ystar.resize(n);
    s.mustar.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = s.mu[i], y = data.y()[i];
        s.dmu_deta[i] = 1.0 / link.d1(mu);
        s.ystar[i] = std::log(y / (1.0 - y));
        s.mustar[i] = digamma(mu * theta.phi) - digamma((1.0 - mu) * theta.phi);
    }
    return s;
}

/// Log of the beta density with mean mu and precision phi.
inline double log_density(double y, double mu, double phi) {
    if (!(y > 0.0 && y < 1.0)) throw DomainError("log_density: y outside (0,1)");
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("log_density: mu outside (0,1)");
    if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("log_density: phi must be positive");
    const double a = mu * phi, b = (1.0 - mu) * phi;
    return log_gamma(phi) - log_gamma(a) - log_gamma(b) + (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y);
}

inline double log_likelihood(const Params& theta, const Dataset& data, const Link& link) {
    const VectorXd mu = mean_vector(theta, data, link);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) sum += log_density(data.y()[i], mu[i], theta.phi);
    return sum;
}

inline VectorXd score(const Params& theta, const Dataset& data, const Link& link) {
    const ObsState s = obs_state(theta, data, link);
    const auto n = data.n(), p = data.p();
    const double phi = theta.phi;
    VectorXd resid(n);
    double u_phi = 0.0;
    const double psi_phi = digamma(phi);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = s.ystar[i] - s.mustar[i];
        resid[i] = s.dmu_deta[i] * e;
        u_phi += s.mu[i] * e + std::log1p(-data.y()[i]) - digamma((1.0 - s.mu[i]) * phi) + psi_phi;
    }
    VectorXd u(p + 1);
    u.head(p) = phi * (data.x().transpose() * resid);
    u[p] = u_phi;
    return u;
}

/// Weights entering K: w_i, c_i, d_i.
struct InformationWeights {
    VectorXd w, c, d, t;  // t = dmu/deta
};

inline InformationWeights information_weights(const Params& theta, const Dataset& data, const Link& link) {
    const VectorXd mu = mean_vector(theta, data, link);
    const auto n = data.n();
    const double phi = theta.phi;
    const double tri_phi = trigamma(phi);
    InformationWeights iw{VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = mu[i];
        const double ta = trigamma(m * phi), tb = trigamma((1.0 - m) * phi);
        const double g1 = link.d1(m);
        iw.t[i] = 1.0 / g1;
        iw.w[i] = phi * (ta + tb) / (g1 * g1);
        iw.c[i] = phi * (ta * m - tb * (1.0 - m));
        iw.d[i] = ta * m * m + tb * (1.0 - m) * (1.0 - m) - tri_phi;
    }
    return iw;
}

/// K = [[phi X'WX, X'Tc], [c'TX, tr(D)]].
inline MatrixXd fisher_information(const Params& theta, const Dataset& data, const Link& link) {
    const InformationWeights iw = information_weights(theta, data, link);
    const auto p = data.p();
    const MatrixXd& x = data.x();
    MatrixXd k(p + 1, p + 1);
    k.topLeftCorner(p, p) = theta.phi * (x.transpose() * iw.w.asDiagonal() * x);
    const VectorXd kbp = x.transpose() * iw.t.cwiseProduct(iw.c);
    k.topRightCorner(p, 1) = kbp;
    k.bottomLeftCorner(1, p) = kbp.transpose();
    k(p, p) = iw.d.sum();
    return k;
}

namespace detail {

/// Log-likelihood, score and information in a single pass; the fitting loop's workhorse.
struct Evaluation {
    double loglik = 0.0;
    VectorXd score;
    MatrixXd info;
    /// Negative Hessian of the log-likelihood.
    MatrixXd observed;
    bool clamped = false;
};

inline Evaluation evaluate(const Params& theta, const Dataset& data, const Link& link, bool with_derivs = true) {
    Evaluation ev;
    const VectorXd mu = mean_vector(theta, data, link, &ev.clamped);
    const auto n = data.n(), p = data.p();
    const double phi = theta.phi;
    const double lg_phi = log_gamma(phi);
    double ll = 0.0;
    if (!with_derivs) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = mu[i] * phi, b = (1.0 - mu[i]) * phi, y = data.y()[i];
            ll += lg_phi - log_gamma(a) - log_gamma(b) + (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y);
        }
        ev.loglik = ll;
        return ev;
    }
    const double psi_phi = digamma(phi), tri_phi = trigamma(phi);
    VectorXd resid(n), w(n), tc(n), jw(n), jc(n);
    double u_phi = 0.0, kpp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = mu[i], a = m * phi, b = (1.0 - m) * phi, y = data.y()[i];
        const double ly = std::log(y), l1y = std::log1p(-y);
        ll += lg_phi - log_gamma(a) - log_gamma(b) + (a - 1.0) * ly + (b - 1.0) * l1y;
        const double pa = digamma(a), pb = digamma(b);
        const double ta = trigamma(a), tb = trigamma(b);
        const double h = 1.0 / link.d1(m);
        const double e = (ly - l1y) - (pa - pb);
        resid[i] = h * e;
        u_phi += m * e + l1y - pb + psi_phi;
        w[i] = phi * (ta + tb) * h * h;
        tc[i] = h * phi * (ta * m - tb * (1.0 - m));
        kpp += ta * m * m + tb * (1.0 - m) * (1.0 - m) - tri_phi;
        // d2mu/deta2 = -g'' h^3
        const double mu2 = -link.d2(m) * h * h * h;
        jw[i] = phi * phi * (ta + tb) * h * h - phi * e * mu2;
        jc[i] = -h * (e - phi * (ta * m - tb * (1.0 - m)));
    }
    const MatrixXd& x = data.x();
    ev.loglik = ll;
    ev.score.resize(p + 1);
    ev.score.head(p) = phi * (x.transpose() * resid);
    ev.score[p] = u_phi;
    ev.info.resize(p + 1, p + 1);
    ev.info.topLeftCorner(p, p) = phi * (x.transpose() * w.asDiagonal() * x);
    const VectorXd kbp = x.transpose() * tc;
    ev.info.topRightCorner(p, 1) = kbp;
    ev.info.bottomLeftCorner(1, p) = kbp.transpose();
    ev.info(p, p) = kpp;
    ev.observed.resize(p + 1, p + 1);
    ev.observed.topLeftCorner(p, p) = x.transpose() * jw.asDiagonal() * x;
    const VectorXd jbp = x.transpose() * jc;
    ev.observed.topRightCorner(p, 1) = jbp;
    ev.observed.bottomLeftCorner(1, p) = jbp.transpose();
    // the phi-phi entry does not involve y
    ev.observed(p, p) = kpp;
    return ev;
}

} // namespace detail

/// Observed information, the negative Hessian of the log-likelihood.
inline MatrixXd observed_information(const Params& theta, const Dataset& data, const Link& link) {
    check_dims(theta, data);
    return detail::evaluate(theta, data, link).observed;
}

} // namespace betabart

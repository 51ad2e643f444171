#pragma once
// Log-likelihood cumulants up to fourth order for fixed-dispersion beta
// regression, their first and second parameter derivatives, and the Bartlett
// correction built from them.
//
// Everything is first computed per observation as a function of (mu_i, phi)
// ("ObsQuantities"), then turned into kernels that multiply products of
// design entries: a cumulant with a beta-slots r, s, ... and b phi-slots is
//     sum_i kernel_i[b] * x_ir * x_is * ...
// The kernels were derived from
//     l_i = G(mu_i, phi) + mu_i phi y*_i + phi log(1 - y_i),
// in which only the first mu-derivative and the mixed (mu, phi) derivative
// carry a random term. Kernels whose form is easy to get wrong carry a
// "note:" naming the form that finite differences confirm.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "betabart/error.hpp"
#include "betabart/fit.hpp"
#include "betabart/link.hpp"
#include "betabart/model.hpp"
#include "betabart/specfun.hpp"
#include "betabart/tensor.hpp"

namespace betabart {

/// Scalar building blocks of the cumulants at one (mu, phi).
struct ObsQuantities {
    double omega = 0, m = 0, a = 0, b = 0, c = 0, d = 0, s = 0, u = 0, r = 0, z = 0;

    double domega_dmu = 0, domega_dphi = 0, d2omega_dphi2 = 0, d2omega_dmu_dphi = 0;
    double dm_dmu = 0, dm_dphi = 0;
    double da_dmu = 0, db_dmu = 0;
    double dc_dmu = 0, dc_dphi = 0, d2c_dmu2 = 0;
    double ds_dmu = 0, ds_dphi = 0;
    double du_dmu = 0, du_dphi = 0;
    double dr_dmu = 0, dr_dphi = 0;
    double dz_dmu = 0, dz_dphi = 0;

    double dmustar_dphi = 0, d2mustar_dphi2 = 0, d3mustar_dphi3 = 0;

    // dmu/deta and its mu-derivatives; dh2_dmu = d(h^2)/dmu, dh3_dmu = d(h^3)/dmu
    double h = 0, h1 = 0, h2 = 0, h3 = 0, dh2_dmu = 0, dh3_dmu = 0;
};

inline ObsQuantities obs_quantities(double mu, double phi, const Link& link) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("obs_quantities: mu outside (0,1)");
    if (!(phi > 0.0)) throw DomainError("obs_quantities: phi must be positive");
    const double nu = 1.0 - mu;
    const double pa = mu * phi, pb = nu * phi;
    const double t1a = polygamma(1, pa), t1b = polygamma(1, pb);
    const double t2a = polygamma(2, pa), t2b = polygamma(2, pb);
    const double t3a = polygamma(3, pa), t3b = polygamma(3, pb);
    const double t1f = polygamma(1, phi), t2f = polygamma(2, phi), t3f = polygamma(3, phi);

    ObsQuantities q;
    const auto md = link.mean_derivs(mu);
    q.h = md.h;
    q.h1 = md.h1;
    q.h2 = md.h2;
    q.h3 = md.h3;
    q.dh2_dmu = 2.0 * q.h * q.h1;
    q.dh3_dmu = 3.0 * q.h * q.h * q.h1;

    q.omega = t1a + t1b;
    q.m = t2a - t2b;
    q.dmustar_dphi = mu * t1a - nu * t1b;
    q.d2mustar_dphi2 = mu * mu * t2a - nu * nu * t2b;
    q.d3mustar_dphi3 = mu * mu * mu * t3a - nu * nu * nu * t3b;
    q.domega_dmu = phi * q.m;
    q.domega_dphi = mu * t2a + nu * t2b;
    q.d2omega_dphi2 = mu * mu * t3a + nu * nu * t3b;
    q.dm_dmu = phi * (t3a + t3b);
    q.dm_dphi = mu * t3a - nu * t3b;
    q.d2omega_dmu_dphi = q.m + phi * q.dm_dphi;

    q.a = 3.0 * q.h1 * q.h * q.h;
    q.b = q.h * (q.h2 * q.h + q.h1 * q.h1);
    q.da_dmu = 3.0 * q.h * (q.h2 * q.h + 2.0 * q.h1 * q.h1);
    q.db_dmu = q.h1 * q.h1 * q.h1 + q.h * (q.h3 * q.h + 4.0 * q.h2 * q.h1);

    q.c = phi * (mu * q.omega - t1b);
    q.dc_dmu = phi * (q.omega + phi * q.domega_dphi);
    q.dc_dphi = q.dmustar_dphi + phi * q.d2mustar_dphi2;
    q.d2c_dmu2 = phi * phi * (2.0 * q.m + phi * q.dm_dphi);

    q.d = nu * nu * t1b + mu * mu * t1a - t1f;
    q.s = nu * nu * nu * t2b + mu * mu * mu * t2a - t2f;
    q.ds_dmu = 3.0 * q.d2mustar_dphi2 + phi * q.d3mustar_dphi3;
    // note: psi'''(mu phi)
    q.ds_dphi = mu * mu * mu * mu * t3a + nu * nu * nu * nu * t3b - t3f;

    q.u = -phi * (2.0 * q.omega + phi * q.domega_dphi);
    q.du_dmu = -phi * phi * (3.0 * q.m + phi * q.dm_dphi);
    // note: phi^2, not phi, on the second phi-derivative of omega
    q.du_dphi = -2.0 * q.omega - phi * (4.0 * q.domega_dphi + phi * q.d2omega_dphi2);

    const double rho = 2.0 * q.dmustar_dphi + phi * q.d2mustar_dphi2;
    q.r = rho * q.h;
    q.dr_dmu = rho * q.h1 + (2.0 * q.omega + 4.0 * phi * q.domega_dphi + phi * phi * q.d2omega_dphi2) * q.h;
    q.dr_dphi = q.ds_dmu * q.h;

    q.z = q.dmustar_dphi + phi * q.d2mustar_dphi2;
    q.dz_dmu = q.omega + phi * (3.0 * q.domega_dphi + phi * q.d2omega_dphi2);
    q.dz_dphi = 2.0 * q.d2mustar_dphi2 + phi * q.d3mustar_dphi3;
    return q;
}

/// Per-observation cumulant kernels. Array index = number of phi slots.
struct ObsCumulants {
    double k2[3]{}, k3[4]{}, k4[5]{};
    /// first derivatives: [phi slots among subscripts][derivative is phi]
    double dk2[3][2]{}, dk3[4][2]{};
    /// second derivatives of k2: [phi slots among subscripts][phi slots among the two derivatives]
    double ddk2[3][3]{};
};

inline ObsCumulants obs_cumulants(const ObsQuantities& q, double phi) {
    const double h = q.h, h1 = q.h1, h2 = q.h2;
    const double hh = h * h, h3c = hh * h;
    const double om = q.omega, m = q.m, a = q.a, b = q.b, c = q.c;
    const double phi2 = phi * phi;
    ObsCumulants k;

    k.k2[0] = -phi2 * om * hh;
    k.k2[1] = -c * h;
    k.k2[2] = -q.d;

    k.k3[0] = -phi2 * (phi * m * h3c + om * a);
    // note: kappa_rs phi carries an overall factor dmu/deta
    k.k3[1] = h * (q.u * h - c * h1);
    k.k3[2] = -q.r;
    k.k3[3] = -q.s;

    k.k4[0] = -phi2 * (phi * (m * q.dh3_dmu + q.dm_dmu * h3c + m * a) + om * (q.da_dmu + b)) * h;
    k.k4[1] = -phi * (phi * (3.0 * m + phi * q.dm_dphi) * h3c + a * (2.0 * om + phi * q.domega_dphi) + b * c / phi);
    k.k4[2] = -q.dr_dmu * h;
    k.k4[3] = -q.ds_dmu * h;
    k.k4[4] = -q.ds_dphi;

    k.dk2[0][0] = -phi2 * (phi * m * h3c + 2.0 / 3.0 * om * a);
    k.dk2[0][1] = q.u * hh;  // note: x_ir x_is
    k.dk2[1][0] = -(q.dc_dmu * h + c * h1) * h;
    k.dk2[1][1] = -q.z * h;
    k.dk2[2][0] = -q.r;
    k.dk2[2][1] = -q.s;

    k.dk3[0][0] = -phi2 * (phi * (m * (q.dh3_dmu + a) + h3c * q.dm_dmu) + om * q.da_dmu) * h;
    k.dk3[0][1] = -phi * (h3c * (3.0 * phi * m + phi2 * q.dm_dphi) + a * (2.0 * om + phi * q.domega_dphi));
    // note: u_i, not mu_i, and an overall factor dmu/deta
    k.dk3[1][0] = h * (q.du_dmu * hh + q.u * q.dh2_dmu - q.dc_dmu * h1 * h - phi * q.dmustar_dphi * (h2 * h + h1 * h1));
    k.dk3[1][1] = (h * q.du_dphi - h1 * q.z) * h;
    k.dk3[2][0] = -q.dr_dmu * h;
    k.dk3[2][1] = -q.dr_dphi;
    k.dk3[3][0] = -q.ds_dmu * h;
    k.dk3[3][1] = -q.ds_dphi;

    k.ddk2[0][0] = -phi2 * (phi * (m * (q.dh3_dmu + 2.0 / 3.0 * a) + h3c * q.dm_dmu) + 2.0 / 3.0 * om * q.da_dmu) * h;
    // note: this block is kappa_rs^(t phi)
    k.ddk2[0][1] = (q.du_dmu * h + 2.0 * q.u * h1) * hh;
    // note: du/dphi, not dmu/dphi
    k.ddk2[0][2] = q.du_dphi * hh;
    k.ddk2[1][0] = -phi * (q.domega_dmu * hh + om * q.dh2_dmu + phi * (q.d2omega_dmu_dphi * hh + q.domega_dphi * q.dh2_dmu) +
                           (om + phi * q.domega_dphi) * h1 * h + q.dmustar_dphi * (h2 * h + h1 * h1)) * h;
    k.ddk2[1][1] = -(q.dz_dmu * h + q.z * h1) * h;
    k.ddk2[1][2] = -q.dz_dphi * h;  // note: single design factor x_ir
    k.ddk2[2][0] = -q.dr_dmu * h;
    k.ddk2[2][1] = -q.ds_dmu * h;
    k.ddk2[2][2] = -q.ds_dphi;
    return k;
}

/// Observed log-likelihood derivative kernels for one response. Index = phi slots.
struct ObsDerivatives {
    double u2[3]{}, u3[4]{}, u4[5]{};
};

inline ObsDerivatives obs_derivatives(const ObsQuantities& q, double phi, double y, double mu) {
    const double ystar = std::log(y / (1.0 - y));
    const double mustar = digamma(mu * phi) - digamma((1.0 - mu) * phi);
    const double e = ystar - mustar;
    const double h = q.h, h1 = q.h1, hh = h * h, h3c = hh * h;
    const double phi2 = phi * phi;
    ObsDerivatives d;
    d.u2[0] = -phi2 * q.omega * hh + phi * e * h1 * h;
    d.u2[1] = (e - q.c) * h;  // note: c_i
    d.u2[2] = -q.d;
    d.u3[0] = -phi * (phi2 * q.m * h3c + phi * q.omega * q.a - e * q.b);
    d.u3[1] = (q.u * h + e * h1 - q.c * h1) * h;  // note: u_i, not mu_i
    d.u3[2] = -q.r;                                 // note: r_i
    d.u3[3] = -q.s;
    d.u4[0] = -phi * (phi2 * (q.m * q.dh3_dmu + q.dm_dmu * h3c) + phi * ((q.da_dmu + q.b) * q.omega + q.domega_dmu * q.a) -
                      e * q.db_dmu) * h;
    // note: phi (3 m + phi dm/dphi), matching kappa_rst phi
    d.u4[1] = -phi * (phi * (3.0 * q.m + phi * q.dm_dphi) * h3c + q.a * (2.0 * q.omega + phi * q.domega_dphi) +
                      q.b * q.dmustar_dphi) + q.b * e;
    d.u4[2] = -q.dr_dmu * h;
    d.u4[3] = -q.ds_dmu * h;
    d.u4[4] = -q.ds_dphi;
    return d;
}

/// Cumulants over an index subset S of theta positions (phi is position p).
struct CumulantTensors {
    std::vector<int> subset;
    bool contains_phi = false;
    MatrixXd info;       // K_S = -kappa_rs
    MatrixXd info_inv;   // K_S^-1
    Tensor3 kappa3;      // kappa_rst
    Tensor4 kappa4;      // kappa_rstu
    Tensor3 dkappa2;     // (r,s,t) -> kappa_rs^(t)
    Tensor4 dkappa3;     // (r,s,t,u) -> kappa_rst^(u)
    Tensor4 ddkappa2;    // (r,s,t,u) -> kappa_rs^(tu)

    Eigen::Index size() const { return static_cast<Eigen::Index>(subset.size()); }

    /// P^(t)_{rs} = kappa_rst
    MatrixXd P(Eigen::Index t) const {
        MatrixXd out(size(), size());
        for (Eigen::Index r = 0; r < size(); ++r)
            for (Eigen::Index s = 0; s < size(); ++s) out(r, s) = kappa3(r, s, t);
        return out;
    }

    /// Q^(u)_{rs} = kappa_su^(r)
    MatrixXd Q(Eigen::Index u) const {
        MatrixXd out(size(), size());
        for (Eigen::Index r = 0; r < size(); ++r)
            for (Eigen::Index s = 0; s < size(); ++s) out(r, s) = dkappa2(s, u, r);
        return out;
    }

    /// A^(tu)_{rs} = kappa_rstu / 4 - kappa_rst^(u) + kappa_rt^(su)
    MatrixXd A(Eigen::Index t, Eigen::Index u) const {
        MatrixXd out(size(), size());
        for (Eigen::Index r = 0; r < size(); ++r)
            for (Eigen::Index s = 0; s < size(); ++s)
                out(r, s) = kappa4(r, s, t, u) / 4.0 - dkappa3(r, s, t, u) + ddkappa2(r, t, s, u);
        return out;
    }
};

namespace detail {

inline std::vector<ObsCumulants> per_obs_cumulants(const Params& theta, const Dataset& data, const Link& link) {
    const VectorXd mu = mean_vector(theta, data, link);
    std::vector<ObsCumulants> out;
    out.reserve(static_cast<std::size_t>(data.n()));
    for (Eigen::Index i = 0; i < data.n(); ++i) out.push_back(obs_cumulants(obs_quantities(mu[i], theta.phi, link), theta.phi));
    return out;
}

inline void validate_subset(const std::vector<int>& subset, Eigen::Index k) {
    if (subset.empty()) throw ConfigError("cumulant subset must be nonempty");
    for (std::size_t a = 0; a < subset.size(); ++a) {
        if (subset[a] < 0 || subset[a] >= k) throw ConfigError("cumulant subset index out of range");
        for (std::size_t b = 0; b < a; ++b)
            if (subset[a] == subset[b]) throw ConfigError("cumulant subset has duplicate indices");
    }
}

} // namespace detail

inline CumulantTensors cumulant_tensors(const Params& theta, const Dataset& data, const Link& link,
                                        const std::vector<int>& subset) {
    check_dims(theta, data);
    const Eigen::Index p = data.p();
    detail::validate_subset(subset, p + 1);
    const auto kern = detail::per_obs_cumulants(theta, data, link);
    const std::size_t m = subset.size();

    CumulantTensors t;
    t.subset = subset;
    MatrixXd kappa2 = MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    t.kappa3 = Tensor3(m);
    t.kappa4 = Tensor4(m);
    t.dkappa2 = Tensor3(m);
    t.dkappa3 = Tensor4(m);
    t.ddkappa2 = Tensor4(m);

    std::vector<int> isphi(m);
    for (std::size_t a = 0; a < m; ++a) {
        isphi[a] = subset[a] == p ? 1 : 0;
        t.contains_phi = t.contains_phi || isphi[a];
    }
    std::vector<double> xe(m);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const ObsCumulants& k = kern[static_cast<std::size_t>(i)];
        for (std::size_t a = 0; a < m; ++a) xe[a] = isphi[a] ? 1.0 : data.x()(i, subset[a]);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t s = 0; s < m; ++s) {
                const double xrs = xe[r] * xe[s];
                const int frs = isphi[r] + isphi[s];
                kappa2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) += k.k2[frs] * xrs;
                for (std::size_t tt = 0; tt < m; ++tt) {
                    const double xrst = xrs * xe[tt];
                    const int frst = frs + isphi[tt];
                    t.kappa3(r, s, tt) += k.k3[frst] * xrst;
                    t.dkappa2(r, s, tt) += k.dk2[frs][isphi[tt]] * xrst;
                    for (std::size_t u = 0; u < m; ++u) {
                        const double x4 = xrst * xe[u];
                        t.kappa4(r, s, tt, u) += k.k4[frst + isphi[u]] * x4;
                        t.dkappa3(r, s, tt, u) += k.dk3[frst][isphi[u]] * x4;
                        t.ddkappa2(r, s, tt, u) += k.ddk2[frs][isphi[tt] + isphi[u]] * x4;
                    }
                }
            }
        }
    }
    t.info = -kappa2;
    Eigen::LLT<MatrixXd> llt(t.info);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15)
        throw SingularInformationError("information submatrix is singular", llt.info() == Eigen::Success ? llt.rcond() : 0.0);
    t.info_inv = llt.solve(MatrixXd::Identity(t.info.rows(), t.info.cols()));
    return t;
}

/// Full index set {0..p}.
inline CumulantTensors cumulant_tensors(const Params& theta, const Dataset& data, const Link& link) {
    std::vector<int> all(static_cast<std::size_t>(data.p() + 1));
    for (std::size_t a = 0; a < all.size(); ++a) all[a] = static_cast<int>(a);
    return cumulant_tensors(theta, data, link, all);
}

/// epsilon = tr[K^-1 (L - M - N)] from the P, Q and A matrices.
inline double epsilon_matrix(const CumulantTensors& t) {
    const Eigen::Index m = t.size();
    const MatrixXd& ki = t.info_inv;
    std::vector<MatrixXd> kp(static_cast<std::size_t>(m)), kq(static_cast<std::size_t>(m)), kqt(static_cast<std::size_t>(m));
    VectorXd trp(m), trq(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const MatrixXd pa = t.P(a), qa = t.Q(a);
        kp[static_cast<std::size_t>(a)] = ki * pa;
        kq[static_cast<std::size_t>(a)] = ki * qa;
        kqt[static_cast<std::size_t>(a)] = ki * qa.transpose();
        trp[a] = (pa * ki).trace();
        trq[a] = (qa * ki).trace();
    }
    MatrixXd l(m, m), m1(m, m), m2(m, m), m3(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index s = 0; s < m; ++s) {
            l(r, s) = (ki * t.A(r, s)).trace();
            const auto ur = static_cast<std::size_t>(r), us = static_cast<std::size_t>(s);
            m1(r, s) = (kp[ur] * kp[us]).trace();
            m2(r, s) = (kp[ur] * kqt[us]).trace();
            m3(r, s) = (kq[ur] * kq[us]).trace();
        }
    }
    const MatrixXd n1 = trp * trp.transpose();
    const MatrixXd n2 = trp * trq.transpose();
    const MatrixXd n3 = trq * trq.transpose();
    const MatrixXd mm = -m1 / 6.0 + m2 - m3;
    const MatrixXd nn = -n1 / 4.0 + n2 - n3;
    return (ki * (l - mm - nn)).trace();
}

/// Largest subset accepted by the O(|S|^6) direct Lawley sum.
inline constexpr Eigen::Index kLawleyMaxSize = 8;

/// epsilon as the explicit Lawley sum over all index sextuples, with kappa^{rs} = -(K^-1)_{rs}.
inline double epsilon_lawley_direct(const CumulantTensors& t) {
    const Eigen::Index m = t.size();
    if (m > kLawleyMaxSize) throw ConfigError("direct Lawley sum limited to subsets of size <= 8");
    const MatrixXd kup = -t.info_inv;
    double four = 0.0;
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index s = 0; s < m; ++s)
            for (Eigen::Index tt = 0; tt < m; ++tt)
                for (Eigen::Index u = 0; u < m; ++u)
                    four += kup(r, s) * kup(tt, u) *
                            (t.kappa4(r, s, tt, u) / 4.0 - t.dkappa3(r, s, tt, u) + t.ddkappa2(r, tt, s, u));
    double six = 0.0;
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index s = 0; s < m; ++s)
            for (Eigen::Index tt = 0; tt < m; ++tt)
                for (Eigen::Index u = 0; u < m; ++u) {
                    const double w2 = kup(r, s) * kup(tt, u);
                    if (w2 == 0.0) continue;
                    for (Eigen::Index v = 0; v < m; ++v)
                        for (Eigen::Index w = 0; w < m; ++w) {
                            const double lam = t.kappa3(r, tt, v) * (t.kappa3(s, u, w) / 6.0 - t.dkappa2(s, w, u)) +
                                               t.kappa3(r, tt, u) * (t.kappa3(s, v, w) / 4.0 - t.dkappa2(s, w, v)) +
                                               t.dkappa2(r, tt, v) * t.dkappa2(s, w, u) +
                                               t.dkappa2(r, tt, u) * t.dkappa2(s, w, v);
                            six += w2 * kup(v, w) * lam;
                        }
                }
    return four - six;
}

/// Which estimates the two epsilons are evaluated at.
enum class BartlettPoint {
    /// eps_k at the unrestricted MLE, eps_{k-q} at the restricted MLE.
    OwnModel,
    /// Both at the restricted MLE.
    Restricted,
};

struct BartlettFactor {
    double eps_full = 0.0;
    double eps_nuis = 0.0;
    int q = 1;
    double c = 1.0;

    double diff_over_q() const { return (eps_full - eps_nuis) / q; }
};

inline BartlettFactor bartlett_factor(const Dataset& data, const Link& link, const Restriction& restriction,
                                      const Params& theta_full, const Params& theta_nuis) {
    restriction.validate(data.p());
    BartlettFactor f;
    f.q = restriction.q();
    f.eps_full = epsilon_matrix(cumulant_tensors(theta_full, data, link));
    f.eps_nuis = epsilon_matrix(cumulant_tensors(theta_nuis, data, link, restriction.free_positions(data.p())));
    f.c = 1.0 + f.diff_over_q();
    return f;
}

/// Both epsilons at the restricted MLE theta_tilde.
inline BartlettFactor bartlett_factor(const Dataset& data, const Link& link, const Restriction& restriction,
                                      const Params& theta_tilde) {
    return bartlett_factor(data, link, restriction, theta_tilde, theta_tilde);
}

/// Observed derivatives of the log-likelihood over all k parameters.
struct ObservedDerivatives {
    MatrixXd u2;
    Tensor3 u3;
    Tensor4 u4;
};

inline ObservedDerivatives observed_derivatives(const Params& theta, const Dataset& data, const Link& link) {
    check_dims(theta, data);
    const Eigen::Index p = data.p();
    const std::size_t m = static_cast<std::size_t>(p + 1);
    const VectorXd mu = mean_vector(theta, data, link);
    ObservedDerivatives o{MatrixXd::Zero(p + 1, p + 1), Tensor3(m), Tensor4(m)};
    std::vector<double> xe(m);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const ObsQuantities q = obs_quantities(mu[i], theta.phi, link);
        const ObsDerivatives d = obs_derivatives(q, theta.phi, data.y()[i], mu[i]);
        for (std::size_t a = 0; a < m; ++a) xe[a] = a == m - 1 ? 1.0 : data.x()(i, static_cast<Eigen::Index>(a));
        auto f = [m](std::size_t a) { return a == m - 1 ? 1 : 0; };
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t s = 0; s < m; ++s) {
                const double xrs = xe[r] * xe[s];
                o.u2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) += d.u2[f(r) + f(s)] * xrs;
                for (std::size_t t = 0; t < m; ++t) {
                    const double xrst = xrs * xe[t];
                    o.u3(r, s, t) += d.u3[f(r) + f(s) + f(t)] * xrst;
                    for (std::size_t u = 0; u < m; ++u) o.u4(r, s, t, u) += d.u4[f(r) + f(s) + f(t) + f(u)] * xrst * xe[u];
                }
            }
    }
    return o;
}

} // namespace betabart

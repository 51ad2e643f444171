#pragma once
// Monte Carlo size, power and null-moment studies on a frozen design.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "betabart/error.hpp"
#include "betabart/lrtest.hpp"
#include "betabart/parallel.hpp"
#include "betabart/rng.hpp"

namespace betabart {

struct SimConfig {
    int n = 20;
    /// Number of regression coefficients including the intercept.
    int p = 5;
    double phi_true = 30.0;
    VectorXd beta_true;
    Restriction restriction;
    /// Value given to the tested coefficients in the generator (0 for size studies).
    double delta = 0.0;
    int reps = 2000;
    int boot_B = 500;
    std::vector<double> alpha_levels{0.10, 0.05, 0.01};
    std::uint64_t base_seed = 1;
    std::uint64_t covariate_seed = 2024;
    MethodSet methods = MethodSet::all();
    /// 0 selects resolve_threads().
    int threads = 0;
    double max_failure_fraction = 0.01;
    BartlettPoint point = BartlettPoint::OwnModel;

    /// The five-coefficient design: H0 fixes beta_2..beta_{q+1} at zero, the
    /// remaining coefficients take the values (1, 1, 5, -4) in order.
    static SimConfig standard_design(int n, double phi, int q) {
        if (q < 1 || q > 3) throw ConfigError("standard design supports q in {1,2,3}");
        SimConfig c;
        c.n = n;
        c.p = 5;
        c.phi_true = phi;
        c.beta_true.resize(5);
        c.beta_true << 1.0, 1.0, 1.0, 5.0, -4.0;
        std::vector<int> idx;
        for (int j = 1; j <= q; ++j) {
            c.beta_true[j] = 0.0;
            idx.push_back(j);
        }
        c.restriction = Restriction::zeros(idx);
        return c;
    }

    void validate() const {
        if (n < 2) throw ConfigError("n must be at least 2");
        if (p < 2) throw ConfigError("p must be at least 2");
        if (n <= p) throw ConfigError("n must exceed p");
        if (!(phi_true > 0.0) || !std::isfinite(phi_true)) throw ConfigError("phi must be positive");
        if (beta_true.size() != p) throw ConfigError("beta has " + std::to_string(beta_true.size()) + " entries, expected p");
        if (reps < 1) throw ConfigError("reps must be at least 1");
        if (methods.has(Method::Boot) && boot_B < 1) throw ConfigError("boot_B must be at least 1");
        for (double a : alpha_levels)
            if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie in (0,1)");
        if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0))
            throw ConfigError("max_failure_fraction must lie in [0,1)");
        restriction.validate(p);
    }
};

/// Intercept column followed by p - 1 columns of Uniform(-0.5, 0.5) draws.
inline MatrixXd make_covariates(int n, int p, std::uint64_t seed) {
    Engine eng = make_stream(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) x(i, 0) = 1.0;
    for (int j = 1; j < p; ++j)
        for (int i = 0; i < n; ++i) x(i, j) = unif(eng);
    return x;
}

struct Moments {
    double mean = 0, variance = 0, skewness = 0, kurtosis = 0;
    double q90 = 0, q95 = 0, q99 = 0;
};

/// Linear-interpolation quantile (order statistics at (n - 1) prob).
inline double quantile_type7(std::vector<double> v, double prob) {
    if (v.empty()) throw DomainError("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Mean, unbiased variance, standardized skewness and (non-excess) kurtosis, upper quantiles.
inline Moments sample_moments(const std::vector<double>& v) {
    if (v.size() < 2) throw DomainError("moments need at least two values");
    const double n = static_cast<double>(v.size());
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= n;
    double s2 = 0, s3 = 0, s4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    m.variance = s2 / (n - 1.0);
    const double m2 = s2 / n;
    m.skewness = m2 > 0 ? (s3 / n) / std::pow(m2, 1.5) : 0.0;
    m.kurtosis = m2 > 0 ? (s4 / n) / (m2 * m2) : 0.0;
    m.q90 = quantile_type7(v, 0.90);
    m.q95 = quantile_type7(v, 0.95);
    m.q99 = quantile_type7(v, 0.99);
    return m;
}

/// Asymptotic Kolmogorov-Smirnov p-value for H0: sample ~ Uniform(0,1).
inline double ks_uniform_pvalue(std::vector<double> v) {
    if (v.empty()) throw DomainError("KS test of empty sample");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = std::clamp(v[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    const double sn = std::sqrt(n);
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct RateRow {
    std::string statistic;
    double alpha = 0;
    double rate = 0;
    int rejections = 0;
    int valid = 0;
};

struct SimResult {
    /// Statistic labels in report order.
    std::vector<std::string> statistics;
    std::vector<RateRow> rejection_rates;
    /// Per successful replication, in replication order; NaN marks an undefined value (LR_b1 with c <= 0).
    std::map<std::string, std::vector<double>> statistic_archive;
    std::map<std::string, std::vector<double>> p_value_archive;
    std::map<std::string, Moments> moments;
    /// Indices of the replications that succeeded.
    std::vector<int> replication;
    int reps = 0;
    int failures = 0;

    double rate(const std::string& stat, double alpha) const {
        for (const auto& r : rejection_rates)
            if (r.statistic == stat && std::abs(r.alpha - alpha) < 1e-12) return r.rate;
        throw ConfigError("no rate recorded for " + stat);
    }
};

namespace detail {

inline std::vector<Method> active_methods(const MethodSet& ms) {
    std::vector<Method> out{Method::LR};
    for (Method m : {Method::B1, Method::B2, Method::B3, Method::Boot})
        if (ms.has(m)) out.push_back(m);
    return out;
}

inline SimResult run_study(const SimConfig& cfg, const VectorXd& beta_gen) {
    cfg.validate();
    const MatrixXd x = make_covariates(cfg.n, cfg.p, cfg.covariate_seed);
    const Link link = Link::logit();
    const Params truth(beta_gen, cfg.phi_true);
    const Dataset design(VectorXd::Constant(cfg.n, 0.5), x);
    const VectorXd mu = mean_vector(truth, design, link);
    const std::vector<Method> active = active_methods(cfg.methods);
    const auto reps = static_cast<std::size_t>(cfg.reps);

    struct Rep {
        bool ok = false;
        std::vector<double> stat, pval;
    };
    std::vector<Rep> out(reps);

    parallel_for(reps, resolve_threads(cfg.threads), [&](std::size_t j) {
        const std::uint64_t rep_seed = child_seed(cfg.base_seed, j);
        Engine eng = make_stream(rep_seed);
        VectorXd y = gen_beta_sample(mu, cfg.phi_true, eng);
        TestOptions topts;
        topts.point = cfg.point;
        topts.boot.B = cfg.boot_B;
        topts.boot.seed = rep_seed;
        topts.boot.threads = 1;
        try {
            const TestReport r = run_test(design.with_response(std::move(y)), link, cfg.restriction, cfg.methods, topts);
            Rep& slot = out[j];
            for (Method m : active) {
                const std::string lab = method_label(m);
                const auto it = r.statistics.find(lab);
                if (it == r.statistics.end()) {
                    slot.stat.push_back(std::numeric_limits<double>::quiet_NaN());
                    slot.pval.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    slot.stat.push_back(it->second);
                    slot.pval.push_back(r.p_values.at(lab));
                }
            }
            slot.ok = true;
        } catch (const Error&) {
            out[j].ok = false;
        }
    });

    SimResult res;
    res.reps = cfg.reps;
    for (Method m : active) res.statistics.push_back(method_label(m));
    for (std::size_t j = 0; j < reps; ++j) {
        if (!out[j].ok) {
            ++res.failures;
            continue;
        }
        res.replication.push_back(static_cast<int>(j));
        for (std::size_t a = 0; a < active.size(); ++a) {
            res.statistic_archive[res.statistics[a]].push_back(out[j].stat[a]);
            res.p_value_archive[res.statistics[a]].push_back(out[j].pval[a]);
        }
    }
    if (res.failures > cfg.max_failure_fraction * cfg.reps && res.failures > 0)
        throw NumericalError(std::to_string(res.failures) + " of " + std::to_string(cfg.reps) +
                             " replications failed (budget exceeded)");
    for (const auto& lab : res.statistics) {
        const auto& pv = res.p_value_archive[lab];
        for (double alpha : cfg.alpha_levels) {
            RateRow row{lab, alpha, 0.0, 0, 0};
            for (double p : pv) {
                if (std::isnan(p)) continue;
                ++row.valid;
                if (p < alpha) ++row.rejections;
            }
            row.rate = row.valid > 0 ? static_cast<double>(row.rejections) / row.valid : 0.0;
            res.rejection_rates.push_back(row);
        }
        std::vector<double> finite;
        for (double s : res.statistic_archive[lab])
            if (!std::isnan(s)) finite.push_back(s);
        if (finite.size() >= 2) res.moments[lab] = sample_moments(finite);
    }
    return res;
}

} // namespace detail

/// Null rejection rates: data generated with the tested coefficients at their H0 values.
inline SimResult size_study(const SimConfig& cfg) {
    if (cfg.delta != 0.0) throw ConfigError("size study requires delta = 0");
    cfg.validate();
    for (int a = 0; a < cfg.restriction.q(); ++a) {
        const int j = cfg.restriction.indices()[static_cast<std::size_t>(a)];
        if (cfg.beta_true[j] != cfg.restriction.values()[static_cast<std::size_t>(a)])
            throw ConfigError("size study: beta at tested position " + std::to_string(j + 1) + " differs from its H0 value");
    }
    return detail::run_study(cfg, cfg.beta_true);
}

/// Nonnull rejection rates: tested coefficients set to delta in the generator, H0 unchanged.
inline SimResult power_study(const SimConfig& cfg) {
    cfg.validate();
    VectorXd beta = cfg.beta_true;
    for (int j : cfg.restriction.indices()) beta[j] = cfg.delta;
    return detail::run_study(cfg, beta);
}

/// Size study whose result is read for its moments and quantiles.
inline SimResult null_moments(const SimConfig& cfg) { return size_study(cfg); }

inline void write_rates_csv(std::ostream& os, const SimResult& r) {
    os << "statistic,alpha,rate,rejections,valid\n";
    os.precision(17);
    for (const auto& row : r.rejection_rates)
        os << row.statistic << ',' << row.alpha << ',' << row.rate << ',' << row.rejections << ',' << row.valid << '\n';
}

inline void write_archive_csv(std::ostream& os, const SimResult& r) {
    os << "replication";
    for (const auto& s : r.statistics) os << ',' << s;
    for (const auto& s : r.statistics) os << ",p_" << s;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < r.replication.size(); ++i) {
        os << r.replication[i];
        for (const auto& s : r.statistics) os << ',' << r.statistic_archive.at(s)[i];
        for (const auto& s : r.statistics) os << ',' << r.p_value_archive.at(s)[i];
        os << '\n';
    }
}

inline void write_moments_csv(std::ostream& os, const SimResult& r) {
    os << "statistic,mean,variance,skewness,kurtosis,q90,q95,q99\n";
    os.precision(17);
    for (const auto& s : r.statistics) {
        const auto it = r.moments.find(s);
        if (it == r.moments.end()) continue;
        const Moments& m = it->second;
        os << s << ',' << m.mean << ',' << m.variance << ',' << m.skewness << ',' << m.kurtosis << ',' << m.q90 << ','
           << m.q95 << ',' << m.q99 << '\n';
    }
}

} // namespace betabart

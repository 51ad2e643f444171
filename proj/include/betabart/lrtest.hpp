#pragma once
// Likelihood ratio test of H0: beta_j = value_j (j in a Restriction), its three
// analytic Bartlett-corrected versions and the parametric bootstrap Bartlett
// correction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "betabart/cumulants.hpp"
#include "betabart/error.hpp"
#include "betabart/fit.hpp"
#include "betabart/model.hpp"
#include "betabart/parallel.hpp"
#include "betabart/rng.hpp"
#include "betabart/specfun.hpp"

namespace betabart {

enum class Method { LR, B1, B2, B3, Boot };

/// Subset of the test statistics to compute; LR itself is always computed.
class MethodSet {
public:
    MethodSet() = default;
    MethodSet(std::initializer_list<Method> ms) {
        for (Method m : ms) add(m);
    }

    static MethodSet all() { return {Method::LR, Method::B1, Method::B2, Method::B3, Method::Boot}; }
    static MethodSet analytic() { return {Method::LR, Method::B1, Method::B2, Method::B3}; }

    /// Comma-separated names from {lr, b1, b2, b3, boot}.
    static MethodSet parse(const std::string& list) {
        MethodSet out;
        std::stringstream ss(list);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto b = tok.find_first_not_of(" \t"), e = tok.find_last_not_of(" \t");
            tok = b == std::string::npos ? "" : tok.substr(b, e - b + 1);
            if (tok == "lr") out.add(Method::LR);
            else if (tok == "b1") out.add(Method::B1);
            else if (tok == "b2") out.add(Method::B2);
            else if (tok == "b3") out.add(Method::B3);
            else if (tok == "boot") out.add(Method::Boot);
            else throw ConfigError("unknown method '" + tok + "' (expected lr, b1, b2, b3, boot)");
        }
        if (out.bits_ == 0) throw ConfigError("method list is empty");
        return out;
    }

    void add(Method m) { bits_ |= 1u << static_cast<unsigned>(m); }
    bool has(Method m) const { return (bits_ >> static_cast<unsigned>(m)) & 1u; }
    bool any_analytic() const { return has(Method::B1) || has(Method::B2) || has(Method::B3); }

private:
    unsigned bits_ = 0;
};

inline std::string method_label(Method m) {
    switch (m) {
    case Method::LR: return "LR";
    case Method::B1: return "LR_b1";
    case Method::B2: return "LR_b2";
    case Method::B3: return "LR_b3";
    case Method::Boot: return "LR_boot";
    }
    return "";
}

struct BartlettStatistics {
    double lr_b1 = 0.0, lr_b2 = 0.0, lr_b3 = 0.0;
    /// Set when c = 1 + x <= 0; lr_b1 is then NaN.
    bool b1_invalid = false;
};

/// LR/c, LR exp(-x) and LR (1 - x) with x = (eps_k - eps_{k-q}) / q and c = 1 + x.
inline BartlettStatistics bartlett_corrected(double lr, double eps_diff_over_q, int q) {
    if (q < 1) throw DomainError("bartlett_corrected: q must be at least 1");
    BartlettStatistics s;
    const double c = 1.0 + eps_diff_over_q;
    if (c > 0.0) {
        s.lr_b1 = lr / c;
    } else {
        s.b1_invalid = true;
        s.lr_b1 = std::numeric_limits<double>::quiet_NaN();
    }
    s.lr_b2 = lr * std::exp(-eps_diff_over_q);
    s.lr_b3 = lr * (1.0 - eps_diff_over_q);
    return s;
}

/// 2 (l_hat - l_tilde); round-off negatives within 1e-10 (relative to |l_hat|) become 0.
inline double lr_statistic(const FitResult& full, const FitResult& restricted) {
    if (!full.converged || !restricted.converged) throw NumericalError("lr_statistic: fit did not converge");
    if (full.theta.k() != restricted.theta.k() || full.restricted() || !restricted.restricted())
        throw ConfigError("lr_statistic: restricted fit is not nested in the full fit");
    const double lr = 2.0 * (full.loglik - restricted.loglik);
    if (lr >= 0.0) return lr;
    if (lr >= -1e-10 * std::max(1.0, std::abs(full.loglik))) return 0.0;
    throw NumericalError("lr_statistic: restricted log-likelihood exceeds unrestricted (LR = " + std::to_string(lr) + ")");
}

struct BootstrapOptions {
    int B = 500;
    std::uint64_t seed = 0;
    double max_failure_fraction = 0.02;
    /// 0 selects resolve_threads().
    int threads = 0;
    /// Test hook: every resample is the original response vector.
    bool resample_original = false;
};

struct BootstrapResult {
    double lr_boot = 0.0;
    double boot_mean = 0.0;
    int failures = 0;
    /// LR* of successful resamples in resample order.
    std::vector<double> lr_star;
};

/// Bootstrap Bartlett correction given already computed fits of the observed data.
inline BootstrapResult bootstrap_bartlett(const Dataset& data, const Link& link, const Restriction& restriction,
                                          const FitResult& full, const FitResult& restricted,
                                          const BootstrapOptions& opts, const FitOptions& fit_opts = {}) {
    if (opts.B < 1) throw ConfigError("bootstrap B must be at least 1");
    if (!(opts.max_failure_fraction >= 0.0 && opts.max_failure_fraction < 1.0))
        throw ConfigError("bootstrap max_failure_fraction must lie in [0,1)");
    const double lr = lr_statistic(full, restricted);
    const Params& tilde = restricted.theta;
    const VectorXd mu = mean_vector(tilde, data, link);
    const auto nb = static_cast<std::size_t>(opts.B);
    std::vector<double> stat(nb, 0.0);
    std::vector<char> ok(nb, 0);

    parallel_for(nb, resolve_threads(opts.threads), [&](std::size_t b) {
        VectorXd ystar;
        if (opts.resample_original) {
            ystar = data.y();
        } else {
            Engine eng = make_stream(child_seed(opts.seed, b));
            ystar = gen_beta_sample(mu, tilde.phi, eng);
        }
        try {
            const Dataset boot = data.with_response(std::move(ystar));
            const FitResult f1 = fit_mle(boot, link, fit_opts, tilde);
            const FitResult f0 = fit_restricted(boot, link, restriction, fit_opts, tilde);
            stat[b] = lr_statistic(f1, f0);
            ok[b] = 1;
        } catch (const Error&) {
            ok[b] = 0;
        }
    });

    BootstrapResult res;
    double sum = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        if (ok[b]) {
            sum += stat[b];
            res.lr_star.push_back(stat[b]);
        } else {
            ++res.failures;
        }
    }
    if (res.failures > opts.max_failure_fraction * opts.B && res.failures > 0)
        throw NumericalError("bootstrap: " + std::to_string(res.failures) + " of " + std::to_string(opts.B) +
                             " resample fits failed (budget exceeded)");
    if (res.lr_star.empty()) throw NumericalError("bootstrap: no successful resamples");
    res.boot_mean = sum / static_cast<double>(res.lr_star.size());
    if (!(res.boot_mean > 0.0)) throw NumericalError("bootstrap: mean resampled LR is zero");
    res.lr_boot = lr * restriction.q() / res.boot_mean;
    return res;
}

/// Fits both hypotheses, then resamples.
inline BootstrapResult bootstrap_bartlett(const Dataset& data, const Link& link, const Restriction& restriction,
                                          const BootstrapOptions& opts, const FitOptions& fit_opts = {}) {
    const FitResult full = fit_mle(data, link, fit_opts);
    const FitResult restricted = fit_restricted(data, link, restriction, fit_opts);
    return bootstrap_bartlett(data, link, restriction, full, restricted, opts, fit_opts);
}

struct TestReport {
    double lr = 0.0;
    int q = 0;
    int df = 0;
    std::optional<BartlettFactor> bartlett;
    std::optional<double> eps_diff_over_q;
    std::optional<double> lr_b1, lr_b2, lr_b3;
    bool b1_invalid = false;
    std::optional<double> lr_boot;
    std::optional<double> boot_mean;
    int boot_failures = 0;
    /// Keyed by LR, LR_b1, LR_b2, LR_b3, LR_boot.
    std::map<std::string, double> p_values;
    /// Statistic values under the same keys as p_values.
    std::map<std::string, double> statistics;
    FitResult full;
    FitResult restricted;
};

struct TestOptions {
    FitOptions fit;
    BootstrapOptions boot;
    BartlettPoint point = BartlettPoint::OwnModel;
};

inline TestReport run_test(const Dataset& data, const Link& link, const Restriction& restriction, const MethodSet& methods,
                           const TestOptions& opts = {}) {
    restriction.validate(data.p());
    TestReport rep;
    rep.full = fit_mle(data, link, opts.fit);
    rep.restricted = fit_restricted(data, link, restriction, opts.fit);
    rep.lr = lr_statistic(rep.full, rep.restricted);
    rep.q = rep.df = restriction.q();

    auto record = [&](Method m, double stat) {
        rep.statistics[method_label(m)] = stat;
        rep.p_values[method_label(m)] = chisq_sf(std::max(stat, 0.0), rep.q);
    };
    record(Method::LR, rep.lr);

    if (methods.any_analytic()) {
        const Params& at_full = opts.point == BartlettPoint::OwnModel ? rep.full.theta : rep.restricted.theta;
        rep.bartlett = bartlett_factor(data, link, restriction, at_full, rep.restricted.theta);
        rep.eps_diff_over_q = rep.bartlett->diff_over_q();
        const BartlettStatistics s = bartlett_corrected(rep.lr, *rep.eps_diff_over_q, rep.q);
        if (methods.has(Method::B1)) {
            rep.lr_b1 = s.lr_b1;
            rep.b1_invalid = s.b1_invalid;
            if (!s.b1_invalid) record(Method::B1, s.lr_b1);
        }
        if (methods.has(Method::B2)) {
            rep.lr_b2 = s.lr_b2;
            record(Method::B2, s.lr_b2);
        }
        if (methods.has(Method::B3)) {
            rep.lr_b3 = s.lr_b3;
            record(Method::B3, s.lr_b3);
        }
    }
    if (methods.has(Method::Boot)) {
        const BootstrapResult br = bootstrap_bartlett(data, link, restriction, rep.full, rep.restricted, opts.boot, opts.fit);
        rep.lr_boot = br.lr_boot;
        rep.boot_mean = br.boot_mean;
        rep.boot_failures = br.failures;
        record(Method::Boot, br.lr_boot);
    }
    return rep;
}

} // namespace betabart

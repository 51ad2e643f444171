#pragma once
// Splittable seeding: every replication and every bootstrap resample draws
// from its own engine whose seed is a pure function of (parent seed, index),
// so results never depend on scheduling or thread count.

#include <algorithm>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace betabart {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the index-th child stream of parent.
inline std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) {
    return splitmix64(splitmix64(parent) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed) { return Engine(seed); }

/// Beta(mu phi, (1 - mu) phi) variate as G1 / (G1 + G2), kept 1e-12 away from {0,1}.
inline double beta_variate(double mu, double phi, Engine& eng) {
    std::gamma_distribution<double> ga(mu * phi, 1.0), gb((1.0 - mu) * phi, 1.0);
    const double g1 = ga(eng), g2 = gb(eng);
    double y = g1 + g2 > 0.0 ? g1 / (g1 + g2) : mu;
    return std::clamp(y, 1e-12, 1.0 - 1e-12);
}

/// Independent beta responses with means mu and common precision phi.
inline Eigen::VectorXd gen_beta_sample(const Eigen::VectorXd& mu, double phi, Engine& eng) {
    Eigen::VectorXd y(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) y[i] = beta_variate(mu[i], phi, eng);
    return y;
}

} // namespace betabart

#pragma once

// Random valid ETRep populations. Perturbations are applied in skeletal
// coordinates, so every draw is valid without rejection sampling.

#include <etrep/detail/parallel.hpp>
#include <etrep/errors.hpp>
#include <etrep/model.hpp>
#include <etrep/shape_space.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace etrep {

inline constexpr double kMaxSimulatedVarsigma = 1.0 - 1e-6;

struct SimulationConfig {
    ETRep reference;
    std::size_t m = 1;
    double sigma_v = 0.0;      // std of the noise on (s u1, s u2)
    double sigma_psi = 0.0;    // std of the roll noise, radians
    double sigma_scale = 0.0;  // std of the log global scale
    std::uint64_t seed = 0;
};

namespace detail {

inline ETRep simulate_member(const ConvexPoint& ref, const SimulationConfig& cfg, std::size_t j) {
    std::mt19937_64 rng(derive_seed(cfg.seed, j));
    std::normal_distribution<double> unit(0.0, 1.0);
    ConvexPoint c = ref;
    for (std::size_t i = 1; i < c.sections(); ++i) {
        auto seg = c.section(i);
        Vec2 w(seg[0] + cfg.sigma_v * unit(rng), seg[1] + cfg.sigma_v * unit(rng));
        const double len = w.norm();
        if (len > kMaxSimulatedVarsigma) w *= kMaxSimulatedVarsigma / len;
        seg[0] = w.x();
        seg[1] = w.y();
        seg[2] = std::clamp(seg[2] + cfg.sigma_psi * unit(rng), -kPi, kPi);
    }
    const double log_scale = cfg.sigma_scale * unit(rng);
    ETRep s = cfg.sigma_v == 0.0 && cfg.sigma_psi == 0.0 ? cfg.reference : map_from_convex(c);
    s.metadata = cfg.reference.metadata;
    return log_scale == 0.0 ? s : scale(s, std::exp(log_scale));
}

}  // namespace detail

/// m perturbed copies of the reference. Member j depends only on (cfg, j),
/// so the output is identical under any thread schedule.
inline SampleSet simulate_population(const SimulationConfig& cfg) {
    if (cfg.m < 1) throw DomainError("simulation needs m >= 1");
    if (!(cfg.sigma_v >= 0.0) || !(cfg.sigma_psi >= 0.0) || !(cfg.sigma_scale >= 0.0))
        throw DomainError("simulation standard deviations must be nonnegative");
    const ConvexPoint ref = map_to_convex(cfg.reference);  // throws for an invalid reference
    std::vector<ETRep> members(cfg.m);
    detail::parallel_for(cfg.m, [&](std::size_t j) { members[j] = detail::simulate_member(ref, cfg, j); });
    return SampleSet(std::move(members));
}

struct RandomETRepOptions {
    double max_varsigma = 0.95;
    double x_min = 0.5, x_max = 2.0;
    double a_min = 0.5, a_max = 3.0;
    double b_min_fraction = 0.2;  // b drawn from [b_min_fraction * a, a]
};

/// A random valid ETRep with n + 1 sections, drawn uniformly in skeletal
/// coordinates within the option ranges.
inline ETRep random_etrep(int n, std::uint64_t seed, const RandomETRepOptions& opt = {}) {
    if (n < 0) throw DomainError("n must be nonnegative");
    std::mt19937_64 rng(detail::derive_seed(seed, 0xE7E9));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ConvexPoint c;
    c.coords = Eigen::VectorXd::Zero((n + 1) * kFeaturesPerSection);
    for (int i = 0; i <= n; ++i) {
        auto seg = c.section(static_cast<std::size_t>(i));
        const double a = opt.a_min + (opt.a_max - opt.a_min) * unit(rng);
        const double b = a * (opt.b_min_fraction + (1.0 - opt.b_min_fraction) * unit(rng));
        seg[4] = a;
        seg[5] = b;
        if (i == 0) continue;
        const double varsigma = opt.max_varsigma * std::sqrt(unit(rng));
        const double azimuth = 2.0 * kPi * unit(rng) - kPi;
        seg[0] = varsigma * std::cos(azimuth);
        seg[1] = varsigma * std::sin(azimuth);
        seg[2] = (2.0 * unit(rng) - 1.0) * kPi * (1.0 - 1e-9);
        seg[3] = opt.x_min + (opt.x_max - opt.x_min) * unit(rng);
    }
    return map_from_convex(c);
}

}  // namespace etrep

#pragma once

// Two-group permutation testing in skeletal coordinates: a global
// direction-projection-permutation (DiProPerm) test, per-feature pooled-t
// permutation tests, and Benjamini-Hochberg adjustment.

#include <etrep/detail/parallel.hpp>
#include <etrep/errors.hpp>
#include <etrep/shape_space.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace etrep {

inline constexpr std::size_t kDefaultPermutations = 10000;

/// Rows are observations in skeletal coordinates, columns named s{i}_{field}.
struct FeatureMatrix {
    Eigen::MatrixXd data;
    std::vector<std::string> columns;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

inline FeatureMatrix feature_matrix(const SampleSet& sample) {
    FeatureMatrix fm;
    const int n = sample.empty() ? -1 : sample.n();
    fm.columns = n >= 0 ? feature_names(n) : std::vector<std::string>{};
    fm.data.resize(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(fm.columns.size()));
    for (std::size_t j = 0; j < sample.size(); ++j)
        fm.data.row(static_cast<Eigen::Index>(j)) = map_to_convex(sample[j]).coords.transpose();
    return fm;
}

struct GlobalTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t permutations = 0;
};

struct PartialTestResult {
    std::string feature;
    double t = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool degenerate = false;  // zero pooled variance in the observed labelling
};

struct TestReport {
    GlobalTestResult global;
    std::vector<PartialTestResult> partial;
    std::uint64_t seed = 0;
    std::string global_method = "DiProPerm (mean-difference direction, difference of projected means)";
    std::string partial_method = "pooled two-sample t, permutation null";
    std::string adjustment = "Benjamini-Hochberg step-up";
};

/// (1 + #{h : |t_h| >= |t_obs|}) / (N + 1).
inline double permutation_pvalue(double t_obs, std::span<const double> t_perm) {
    if (t_perm.empty()) throw DomainError("permutation_pvalue: no permuted statistics");
    const double obs = std::abs(t_obs);
    std::size_t exceed = 0;
    for (double t : t_perm)
        if (std::abs(t) >= obs) ++exceed;
    return static_cast<double>(1 + exceed) / static_cast<double>(t_perm.size() + 1);
}

inline double permutation_pvalue(double t_obs, const std::vector<double>& t_perm) {
    return permutation_pvalue(t_obs, std::span<const double>(t_perm));
}

/// Projects every observation onto d = mean(A) - mean(B) and returns the
/// difference of the projected group means.
inline double diproperm_statistic(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const Eigen::VectorXd d = A.colwise().mean().transpose() - B.colwise().mean().transpose();
    const Eigen::VectorXd za = A * d;
    const Eigen::VectorXd zb = B * d;
    return za.mean() - zb.mean();
}

namespace detail {

inline void check_groups(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() < 2 || B.rows() < 2) throw DomainError("each group needs at least 2 observations");
    if (A.cols() != B.cols()) throw ValidationError("groups differ in feature count");
    if (!A.allFinite() || !B.allFinite()) throw ValidationError("non-finite feature values");
}

inline Eigen::MatrixXd pooled(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd P(A.rows() + B.rows(), A.cols());
    P << A, B;
    return P;
}

/// Label assignment for permutation h: the first m1 entries form group A.
inline std::vector<int> permutation_labels(std::size_t m, std::uint64_t seed, std::size_t h) {
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, h));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

inline double projected_mean_difference(const Eigen::MatrixXd& P, std::span<const int> order, std::size_t m1) {
    const Eigen::Index p = P.cols();
    Eigen::VectorXd mean_a = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd mean_b = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k < m1)
            mean_a += P.row(order[k]).transpose();
        else
            mean_b += P.row(order[k]).transpose();
    }
    mean_a /= static_cast<double>(m1);
    mean_b /= static_cast<double>(order.size() - m1);
    const Eigen::VectorXd d = mean_a - mean_b;
    return mean_a.dot(d) - mean_b.dot(d);
}

struct ColumnT {
    double t;
    bool degenerate;
};

inline ColumnT pooled_t(const Eigen::MatrixXd& P, Eigen::Index col, std::span<const int> order, std::size_t m1,
                        double zero_scale) {
    const std::size_t m = order.size();
    const std::size_t m2 = m - m1;
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < m; ++k) (k < m1 ? sa : sb) += P(order[k], col);
    const double ma = sa / static_cast<double>(m1);
    const double mb = sb / static_cast<double>(m2);
    double ssa = 0.0, ssb = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double x = P(order[k], col);
        if (k < m1)
            ssa += (x - ma) * (x - ma);
        else
            ssb += (x - mb) * (x - mb);
    }
    const double sp = std::sqrt((ssa + ssb) / static_cast<double>(m - 2));
    const double diff = ma - mb;
    if (sp <= zero_scale) {
        if (std::abs(diff) <= zero_scale) return {0.0, true};
        return {std::copysign(std::numeric_limits<double>::infinity(), diff), true};
    }
    return {diff / (sp * std::sqrt(1.0 / static_cast<double>(m1) + 1.0 / static_cast<double>(m2))), false};
}

}  // namespace detail

/// Global DiProPerm test. Each permutation re-partitions the pooled rows into
/// groups of the original sizes and recomputes the direction. Deterministic
/// in (A, B, permutations, seed) regardless of thread count.
inline GlobalTestResult diproperm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t permutations,
                                  std::uint64_t seed) {
    detail::check_groups(A, B);
    if (permutations < 99) throw DomainError("diproperm needs at least 99 permutations");
    const Eigen::MatrixXd P = detail::pooled(A, B);
    const std::size_t m = static_cast<std::size_t>(P.rows());
    const std::size_t m1 = static_cast<std::size_t>(A.rows());

    GlobalTestResult res;
    res.permutations = permutations;
    res.statistic = diproperm_statistic(A, B);
    std::vector<double> perm_stats(permutations);
    detail::parallel_for(permutations, [&](std::size_t h) {
        const std::vector<int> order = detail::permutation_labels(m, seed, h);
        perm_stats[h] = detail::projected_mean_difference(P, order, m1);
    });
    res.p_value = permutation_pvalue(res.statistic, perm_stats);
    return res;
}

/// Per-feature pooled two-sample t statistics with permutation p-values. All
/// features share one stream of label permutations (the same stream that
/// diproperm uses for a given seed).
inline std::vector<PartialTestResult> partial_tests(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                    std::size_t permutations, std::uint64_t seed) {
    detail::check_groups(A, B);
    if (permutations < 1) throw DomainError("partial_tests needs at least one permutation");
    const Eigen::MatrixXd P = detail::pooled(A, B);
    const std::size_t m = static_cast<std::size_t>(P.rows());
    const std::size_t m1 = static_cast<std::size_t>(A.rows());
    const Eigen::Index p = P.cols();

    std::vector<double> zero_scale(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k)
        zero_scale[static_cast<std::size_t>(k)] = 1e-12 * std::max(1.0, P.col(k).cwiseAbs().maxCoeff());

    std::vector<int> identity(m);
    std::iota(identity.begin(), identity.end(), 0);
    std::vector<PartialTestResult> out(static_cast<std::size_t>(p));
    std::vector<double> observed(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto ct = detail::pooled_t(P, k, identity, m1, zero_scale[static_cast<std::size_t>(k)]);
        out[static_cast<std::size_t>(k)].t = ct.t;
        out[static_cast<std::size_t>(k)].degenerate = ct.degenerate;
        observed[static_cast<std::size_t>(k)] = std::abs(ct.t);
    }

    // exceed[h * p + k] = 1 when permutation h reaches the observed |t| of feature k.
    std::vector<unsigned char> exceed(permutations * static_cast<std::size_t>(p));
    detail::parallel_for(permutations, [&](std::size_t h) {
        const std::vector<int> order = detail::permutation_labels(m, seed, h);
        for (Eigen::Index k = 0; k < p; ++k) {
            const auto ct = detail::pooled_t(P, k, order, m1, zero_scale[static_cast<std::size_t>(k)]);
            exceed[h * static_cast<std::size_t>(p) + static_cast<std::size_t>(k)] =
                std::abs(ct.t) >= observed[static_cast<std::size_t>(k)] ? 1 : 0;
        }
    });
    for (Eigen::Index k = 0; k < p; ++k) {
        std::size_t count = 0;
        for (std::size_t h = 0; h < permutations; ++h)
            count += exceed[h * static_cast<std::size_t>(p) + static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(k)].p_raw =
            static_cast<double>(1 + count) / static_cast<double>(permutations + 1);
        out[static_cast<std::size_t>(k)].p_adjusted = out[static_cast<std::size_t>(k)].p_raw;
    }
    return out;
}

/// Benjamini-Hochberg step-up adjustment, returned in input order:
/// sorted ascending, p_(k) K / k, cumulative minimum from the largest rank,
/// clipped at 1.
inline std::vector<double> bh_adjust(std::span<const double> p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("bh_adjust: p-values must lie in [0, 1]");
    const std::size_t K = p.size();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return p[l] < p[r]; });
    std::vector<double> adjusted(K);
    double running = 1.0;
    for (std::size_t pos = K; pos-- > 0;) {
        const std::size_t rank = pos + 1;
        const double candidate = p[order[pos]] * (static_cast<double>(K) / static_cast<double>(rank));
        running = std::min(running, candidate);
        adjusted[order[pos]] = running;
    }
    return adjusted;
}

inline std::vector<double> bh_adjust(const std::vector<double>& p) { return bh_adjust(std::span<const double>(p)); }

/// Global DiProPerm test plus per-feature tests with BH-adjusted p-values.
inline TestReport two_group_test(const FeatureMatrix& A, const FeatureMatrix& B, std::size_t permutations,
                                 std::uint64_t seed) {
    TestReport report;
    report.seed = seed;
    report.global = diproperm(A.data, B.data, permutations, seed);
    report.partial = partial_tests(A.data, B.data, permutations, seed);
    std::vector<double> raw;
    raw.reserve(report.partial.size());
    for (const auto& r : report.partial) raw.push_back(r.p_raw);
    const std::vector<double> adj = bh_adjust(raw);
    for (std::size_t k = 0; k < report.partial.size(); ++k) {
        report.partial[k].p_adjusted = adj[k];
        if (k < A.columns.size()) report.partial[k].feature = A.columns[k];
    }
    return report;
}

}  // namespace etrep

#include <etrep/simulation.hpp>
#include <etrep/stats.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

namespace etrep {
namespace {

Eigen::MatrixXd gaussian_cloud(int rows, int cols, double shift, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = g(rng) + shift;
    return m;
}

Eigen::MatrixXd column(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double e : v) m(i++, 0) = e;
    return m;
}

class ThreadsEnv {
public:
    explicit ThreadsEnv(const char* value) {
        if (const char* old = std::getenv("ETREP_THREADS")) saved_ = old;
        setenv("ETREP_THREADS", value, 1);
    }
    ~ThreadsEnv() {
        if (saved_.empty())
            unsetenv("ETREP_THREADS");
        else
            setenv("ETREP_THREADS", saved_.c_str(), 1);
    }

private:
    std::string saved_;
};

TEST(PermutationPValue, Formula) {
    std::vector<double> low(999, 0.5);
    EXPECT_DOUBLE_EQ(permutation_pvalue(2.0, low), 0.001);
    std::vector<double> equal(999, -2.0);
    EXPECT_DOUBLE_EQ(permutation_pvalue(2.0, equal), 1.0);
    std::vector<double> half{3, -3, 4, 5, -6, 0.1, 0.2, -0.3, 0.4, 0.5};
    EXPECT_DOUBLE_EQ(permutation_pvalue(2.5, half), 6.0 / 11.0);
    EXPECT_THROW(permutation_pvalue(1.0, std::vector<double>{}), DomainError);
}

TEST(DiPropermStatistic, EqualsSquaredMeanDifference) {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd A = gaussian_cloud(7, 5, 0.3, rng), B = gaussian_cloud(9, 5, 0.0, rng);
    const Eigen::VectorXd d = A.colwise().mean() - B.colwise().mean();
    EXPECT_NEAR(diproperm_statistic(A, B), d.squaredNorm(), 1e-12);
}

TEST(Diproperm, ErrorsOnSmallInput) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd A = gaussian_cloud(5, 3, 0.0, rng);
    EXPECT_THROW(diproperm(A.topRows(1), A, 999, 1), DomainError);
    EXPECT_THROW(diproperm(A, A, 50, 1), DomainError);
    EXPECT_THROW(diproperm(A, gaussian_cloud(5, 4, 0.0, rng), 999, 1), ValidationError);
}

TEST(Diproperm, SeparatedCloudsReachMinimumPValue) {
    std::mt19937_64 rng(4);
    for (int run = 0; run < 5; ++run) {
        // 5 sigma separation of the mean vectors.
        const double shift = 5.0 / std::sqrt(10.0);
        const Eigen::MatrixXd A = gaussian_cloud(20, 10, shift, rng), B = gaussian_cloud(20, 10, 0.0, rng);
        EXPECT_DOUBLE_EQ(diproperm(A, B, 999, 100 + run).p_value, 0.001);
    }
}

TEST(Diproperm, NullIsCalibrated) {
    std::mt19937_64 rng(5);
    int above = 0;
    for (int run = 0; run < 40; ++run) {
        const Eigen::MatrixXd P = gaussian_cloud(24, 10, 0.0, rng);
        if (diproperm(P.topRows(12), P.bottomRows(12), 199, 900 + run).p_value > 0.05) ++above;
    }
    EXPECT_GE(above, 33);
}

TEST(Diproperm, IndependentOfThreadCount) {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd A = gaussian_cloud(10, 8, 0.2, rng), B = gaussian_cloud(11, 8, 0.0, rng);
    double p1, p4;
    {
        ThreadsEnv env("1");
        p1 = diproperm(A, B, 999, 7).p_value;
    }
    {
        ThreadsEnv env("4");
        p4 = diproperm(A, B, 999, 7).p_value;
    }
    EXPECT_EQ(p1, p4);
    EXPECT_NE(diproperm(A, B, 999, 7).p_value, 0.0);
}

TEST(PartialTests, HandComputedT) {
    const auto r = partial_tests(column({1, 2, 3}), column({4, 5, 6}), 99, 1);
    EXPECT_NEAR(r[0].t, -3.6742346141747673, 1e-12);
    EXPECT_FALSE(r[0].degenerate);
}

TEST(PartialTests, MatchesTextbookT) {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd A = gaussian_cloud(9, 6, 0.4, rng), B = gaussian_cloud(13, 6, 0.0, rng);
    const auto r = partial_tests(A, B, 99, 3);
    for (int k = 0; k < 6; ++k) {
        std::vector<double> x(A.col(k).data(), A.col(k).data() + A.rows());
        std::vector<double> y(B.col(k).data(), B.col(k).data() + B.rows());
        EXPECT_NEAR(r[k].t, oracle::pooled_t(x, y), 1e-12);
    }
}

TEST(PartialTests, ConstantFeatureIsDegenerate) {
    Eigen::MatrixXd A(4, 2), B(5, 2);
    A << 1, 2.0, 2, 2.0, 3, 2.0, 4, 2.0;
    B << 5, 2.0, 6, 2.0, 7, 2.0, 8, 2.0, 9, 2.0;
    const auto r = partial_tests(A, B, 199, 4);
    EXPECT_TRUE(r[1].degenerate);
    EXPECT_EQ(r[1].t, 0.0);
    EXPECT_DOUBLE_EQ(r[1].p_raw, 1.0);
    EXPECT_FALSE(r[0].degenerate);
}

TEST(PartialTests, NullFeatureIsRoughlyUniform) {
    std::mt19937_64 rng(10);
    int below = 0;
    const int runs = 200;
    for (int run = 0; run < runs; ++run) {
        const Eigen::MatrixXd P = gaussian_cloud(20, 1, 0.0, rng);
        if (partial_tests(P.topRows(10), P.bottomRows(10), 199, 50 + run)[0].p_raw <= 0.5) ++below;
    }
    EXPECT_GT(below, 70);
    EXPECT_LT(below, 130);
}

TEST(BhAdjust, Examples) {
    const auto a = bh_adjust(std::vector<double>{0.01, 0.02, 0.03});
    for (double v : a) EXPECT_NEAR(v, 0.03, 1e-15);
    const auto b = bh_adjust(std::vector<double>{0.01, 0.04, 0.03});
    EXPECT_NEAR(b[0], 0.03, 1e-15);
    EXPECT_NEAR(b[1], 0.04, 1e-15);
    EXPECT_NEAR(b[2], 0.04, 1e-15);
    EXPECT_EQ(bh_adjust(std::vector<double>{0.37}), std::vector<double>{0.37});
    EXPECT_TRUE(bh_adjust(std::vector<double>{}).empty());
    EXPECT_THROW(bh_adjust(std::vector<double>{0.1, 1.2}), DomainError);
    EXPECT_THROW(bh_adjust(std::vector<double>{-0.1}), DomainError);
}

TEST(BhAdjust, MatchesDefinitionIncludingTies) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 318);
    for (int k = 0; k < 300; ++k) {
        std::vector<double> p(static_cast<std::size_t>(len(rng)));
        for (auto& v : p) v = k % 3 == 0 ? std::round(u(rng) * 20) / 20 : u(rng) * (k % 2 ? 0.1 : 1.0);
        const auto got = bh_adjust(p);
        const auto ref = oracle::bh_reference(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_EQ(got[i], ref[i]);
            EXPECT_GE(got[i], p[i]);
        }
    }
}

TEST(FeatureMatrix, ColumnsForFiftyThreeSections) {
    std::vector<ETRep> members{random_etrep(52, 1), random_etrep(52, 2)};
    const FeatureMatrix fm = feature_matrix(SampleSet(members));
    EXPECT_EQ(fm.cols(), 318);
    EXPECT_EQ(fm.rows(), 2);
    EXPECT_EQ(fm.columns.front(), "s0_cu1");
    EXPECT_EQ(fm.columns.back(), "s52_b");
}

TEST(TwoGroupTest, ReportIsDeterministic) {
    std::vector<ETRep> a, b;
    for (int j = 0; j < 6; ++j) {
        a.push_back(random_etrep(3, 10 + j));
        b.push_back(random_etrep(3, 40 + j));
    }
    const FeatureMatrix A = feature_matrix(SampleSet(a)), B = feature_matrix(SampleSet(b));
    const TestReport r1 = two_group_test(A, B, 199, 9);
    const TestReport r2 = two_group_test(A, B, 199, 9);
    EXPECT_EQ(r1.global.p_value, r2.global.p_value);
    ASSERT_EQ(r1.partial.size(), 24u);
    for (std::size_t k = 0; k < r1.partial.size(); ++k) {
        EXPECT_EQ(r1.partial[k].p_raw, r2.partial[k].p_raw);
        EXPECT_EQ(r1.partial[k].p_adjusted, r2.partial[k].p_adjusted);
        EXPECT_GE(r1.partial[k].p_adjusted, r1.partial[k].p_raw);
    }
    EXPECT_EQ(r1.partial[3].feature, "s0_x");
    EXPECT_TRUE(r1.partial[3].degenerate);
}

}  // namespace
}  // namespace etrep

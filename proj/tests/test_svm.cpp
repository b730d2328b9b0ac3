#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles/dual_qp.hpp"
#include "specdiff/svm.hpp"

using namespace specdiff;

namespace {

struct Problem {
    LabeledSet data;
    std::vector<double> kmat;
    double gamma = 0.0;
};

Problem random_problem(SplitMix64& g, KernelType kernel) {
    Problem p;
    const std::size_t n = 4 + g.below(9), dim = 1 + g.below(4);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        const int y = i < 2 ? (i == 0 ? 1 : -1) : (g.uniform() < 0.5 ? 1 : -1);
        for (double& v : x) v = g.normal() + 0.6 * y;
        p.data.features.append_row(x);
        p.data.labels.push_back(y);
    }
    p.gamma = kernel == KernelType::rbf ? g.uniform(0.2, 2.0) : 0.0;
    p.kmat = kernel_matrix(p.data.features, kernel, p.gamma);
    return p;
}

LabeledSet points(std::initializer_list<std::vector<double>> xs, std::initializer_list<int> ys) {
    LabeledSet s;
    for (const auto& x : xs) s.features.append_row(x);
    s.labels = ys;
    return s;
}

// Brute-force threshold picker over the documented candidate set.
double brute_threshold(const std::vector<double>& live, const std::vector<double>& spoof) {
    std::vector<double> all = live;
    all.insert(all.end(), spoof.begin(), spoof.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    std::vector<double> cands{all.front()};
    for (std::size_t k = 0; k + 1 < all.size(); ++k) cands.push_back((all[k] + all[k + 1]) / 2.0);
    double best_t = 0.0, best_e = 2.0;
    for (double t : cands) {
        double frr = 0, far = 0;
        for (double s : live) frr += s < t;
        for (double s : spoof) far += s >= t;
        const double e = (frr / live.size() + far / spoof.size()) / 2.0;
        if (e < best_e) best_e = e, best_t = t;
    }
    return best_t;
}

}  // namespace

TEST(Svm, DualMatchesReferenceSolver) {
    SplitMix64 g(101);
    for (int trial = 0; trial < 20; ++trial) {
        for (KernelType kernel : {KernelType::linear, KernelType::rbf}) {
            const Problem p = random_problem(g, kernel);
            const double C = std::pow(10.0, g.uniform(-1.0, 1.0));
            const DualSolution sol = solve_dual(p.kmat, p.data.labels, C, 1e-6, 1000000, trial);
            ASSERT_TRUE(sol.converged);
            const auto ref = oracle::solve_dual_fista(p.kmat, p.data.labels, C);
            EXPECT_NEAR(sol.objective, ref.objective, 1e-3) << "trial " << trial;
            EXPECT_NEAR(sol.objective, oracle::dual_objective(p.kmat, p.data.labels, sol.alpha), 1e-9);
            EXPECT_LE(kkt_violation(p.kmat, p.data.labels, sol.alpha, sol.bias, C), 1e-3);
            double eq = 0.0;
            for (std::size_t i = 0; i < sol.alpha.size(); ++i) {
                EXPECT_GE(sol.alpha[i], 0.0);
                EXPECT_LE(sol.alpha[i], C);
                eq += sol.alpha[i] * p.data.labels[i];
            }
            EXPECT_NEAR(eq, 0.0, 1e-9);
        }
    }
}

TEST(Svm, TwoPointMargin) {
    const LabeledSet s = points({{-1.0}, {1.0}}, {-1, 1});
    SvmConfig cfg;
    cfg.kernel = KernelType::linear;
    cfg.C = 1000.0;
    const SvmModel m = train_svm(s, cfg);
    const double neg[] = {-1.0}, pos[] = {1.0}, mid[] = {0.0};
    EXPECT_NEAR(decision_value(m, pos), 1.0, 1e-3);
    EXPECT_NEAR(decision_value(m, neg), -1.0, 1e-3);
    EXPECT_NEAR(m.bias, 0.0, 1e-3);
    EXPECT_NEAR(decision_value(m, mid), 0.0, 1e-3);
    EXPECT_EQ(m.sv_count(), 2u);
}

TEST(Svm, XorWithRbf) {
    const LabeledSet s = points({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {1, 1, -1, -1});
    SvmConfig cfg;
    cfg.kernel = KernelType::rbf;
    cfg.C = 10.0;
    cfg.gamma = 1.0;
    const SvmModel m = train_svm(s, cfg);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = decision_value(m, s.features.row(i));
        EXPECT_GT(f * s.labels[i], 0.0) << i;
    }
}

TEST(Svm, LabelFlipNegatesDecision) {
    SplitMix64 g(7);
    for (int trial = 0; trial < 10; ++trial) {
        Problem p = random_problem(g, KernelType::rbf);
        SvmConfig cfg;
        cfg.C = 2.0;
        cfg.gamma = p.gamma;
        const SvmModel a = train_svm(p.data, cfg);
        for (int& y : p.data.labels) y = -y;
        const SvmModel b = train_svm(p.data, cfg);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const auto x = p.data.features.row(i);
            EXPECT_NEAR(decision_value(a, x), -decision_value(b, x), 1e-9);
        }
    }
}

TEST(Svm, SingleClassRejected) {
    const LabeledSet s = points({{0.0}, {1.0}, {2.0}}, {1, 1, 1});
    EXPECT_THROW(train_svm(s, SvmConfig{}), TrainingError);
}

TEST(Svm, NonFiniteFeaturesRejected) {
    const LabeledSet s = points({{0.0}, {NAN}}, {1, -1});
    EXPECT_THROW(train_svm(s, SvmConfig{}), TrainingError);
}

TEST(Svm, DimensionMismatchAtPrediction) {
    const SvmModel m = train_svm(points({{0.0, 0.0}, {1.0, 1.0}}, {-1, 1}), SvmConfig{});
    const double x[] = {1.0};
    EXPECT_THROW(decision_value(m, x), ModelMismatchError);
}

TEST(Svm, ScaleGammaIsInverseDimTimesVariance) {
    Matrix x(2, 2);
    x(0, 0) = 0;
    x(0, 1) = 2;
    x(1, 0) = 4;
    x(1, 1) = 6;  // mean 3, population variance 5
    EXPECT_NEAR(scale_gamma(x), 1.0 / 10.0, 1e-15);
}

TEST(Svm, DeterministicForSeed) {
    SplitMix64 g(3);
    const Problem p = random_problem(g, KernelType::rbf);
    SvmConfig cfg;
    cfg.gamma = p.gamma;
    cfg.seed = 5;
    const SvmModel a = train_svm(p.data, cfg), b = train_svm(p.data, cfg);
    EXPECT_EQ(a.dual_coefs, b.dual_coefs);
    EXPECT_EQ(a.bias, b.bias);
}

TEST(Threshold, SeparatedScoresGiveZero) {
    const std::vector<double> live{2, 3}, spoof{-3, -2};
    EXPECT_DOUBLE_EQ(select_threshold(live, spoof), 0.0);
}

TEST(Threshold, MatchesBruteForce) {
    SplitMix64 g(19);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> live(1 + g.below(15)), spoof(1 + g.below(15));
        // Coarse values so ties across classes happen.
        for (double& v : live) v = static_cast<double>(g.below(10)) - 3.0;
        for (double& v : spoof) v = static_cast<double>(g.below(10)) - 6.0;
        ASSERT_EQ(select_threshold(live, spoof), brute_threshold(live, spoof)) << trial;
    }
}

TEST(Threshold, EmptyClassRejected) {
    const std::vector<double> live{1.0}, none;
    EXPECT_THROW(select_threshold(live, none), MetricError);
}

TEST(Classify, LiveIffScoreAtLeastThreshold) {
    SvmConfig cfg;
    cfg.kernel = KernelType::linear;
    cfg.C = 100.0;
    SvmModel m = train_svm(points({{-1.0}, {1.0}}, {-1, 1}), cfg);
    m.descriptor_kind = DescriptorKind::sd_fic;
    const double at = decision_value(m, std::vector<double>{0.25});
    m.threshold = at;
    EXPECT_EQ(classify(m, Descriptor{DescriptorKind::sd_fic, {0.25}}).label, Label::live);
    m.threshold = std::nextafter(at, 1e9);
    EXPECT_EQ(classify(m, Descriptor{DescriptorKind::sd_fic, {0.25}}).label, Label::spoof);
}

TEST(Classify, KindMismatchRejected) {
    SvmModel m = train_svm(points({{-1.0}, {1.0}}, {-1, 1}), SvmConfig{});
    m.descriptor_kind = DescriptorKind::sd_fic;
    EXPECT_THROW(classify(m, Descriptor{DescriptorKind::relative_ref, {0.0}}), ModelMismatchError);
}

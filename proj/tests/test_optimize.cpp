#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mixwhittle/optimize.hpp"

namespace mw = mixwhittle;

namespace {

double rosenbrock(const Eigen::VectorXd& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
        s += 100.0 * std::pow(x(i + 1) - x(i) * x(i), 2) + std::pow(1.0 - x(i), 2);
    return s;
}

}  // namespace

TEST(Minimize, QuadraticBowl) {
    Eigen::VectorXd centre(4);
    centre << 1.0, -2.0, 0.5, 3.0;
    auto f = [&](const Eigen::VectorXd& x) { return (x - centre).squaredNorm(); };
    mw::OptimConfig cfg;
    cfg.tolerance = 1e-14;
    const auto res = mw::minimize(f, Eigen::VectorXd::Zero(4), cfg);
    EXPECT_TRUE(res.report.converged);
    EXPECT_LT((res.x - centre).norm(), 1e-5);
    EXPECT_LT(res.value, 1e-10);
}

TEST(Minimize, Rosenbrock) {
    Eigen::VectorXd x0(3);
    x0 << -1.2, 1.0, 0.5;
    mw::OptimConfig cfg;
    cfg.tolerance = 1e-14;
    cfg.max_iterations = 20000;
    const auto res = mw::minimize(rosenbrock, x0, cfg);
    EXPECT_LT((res.x - Eigen::VectorXd::Ones(3)).norm(), 1e-3);
}

TEST(Minimize, RejectsInfiniteRegion) {
    // Half-plane constraint expressed as +inf; the optimum sits on its edge.
    auto f = [](const Eigen::VectorXd& x) {
        if (x(0) < 1.0) return std::numeric_limits<double>::infinity();
        return x(0) * x(0) + x(1) * x(1);
    };
    Eigen::VectorXd x0(2);
    x0 << 3.0, 2.0;
    const auto res = mw::minimize(f, x0);
    EXPECT_NEAR(res.x(0), 1.0, 1e-3);
    EXPECT_NEAR(res.x(1), 0.0, 1e-3);
    EXPECT_GT(res.report.rejected, 0u);
}

TEST(Minimize, DeterministicForSeed) {
    Eigen::VectorXd x0(2);
    x0 << -1.0, 2.0;
    mw::OptimConfig cfg;
    cfg.seed = 42;
    const auto a = mw::minimize(rosenbrock, x0, cfg);
    const auto b = mw::minimize(rosenbrock, x0, cfg);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.report.evaluations, b.report.evaluations);
}

TEST(Minimize, RestartsAreRecorded) {
    mw::OptimConfig cfg;
    cfg.restarts = 4;
    const auto res = mw::minimize([](const Eigen::VectorXd& x) { return x.squaredNorm(); }, Eigen::VectorXd::Ones(2),
                                  cfg);
    EXPECT_EQ(res.report.restarts_used, 4u);
    ASSERT_EQ(res.report.restart_values.size(), 4u);
    EXPECT_EQ(res.value, res.report.restart_values[res.report.best_restart]);
}

TEST(Minimize, TiesGoToEarlierRestart) {
    // Constant objective: every restart ties, so run 0 keeps the start point.
    Eigen::VectorXd x0(2);
    x0 << 0.3, -0.7;
    const auto res = mw::minimize([](const Eigen::VectorXd&) { return 5.0; }, x0);
    EXPECT_EQ(res.report.best_restart, 0u);
    EXPECT_EQ(res.x, x0);
}

TEST(Minimize, IterationCapStopsUnconverged) {
    mw::OptimConfig cfg;
    cfg.max_iterations = 5;
    cfg.restarts = 1;
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    const auto res = mw::minimize(rosenbrock, x0, cfg);
    EXPECT_FALSE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 5u);
}

TEST(Minimize, Errors) {
    auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    EXPECT_THROW(mw::minimize(f, Eigen::VectorXd()), mw::DomainError);
    auto never = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::quiet_NaN(); };
    EXPECT_THROW(mw::minimize(never, Eigen::VectorXd::Zero(2)), mw::NumericalError);
}

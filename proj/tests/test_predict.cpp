#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mixwhittle/gaussian_process.hpp"
#include "mixwhittle/predict.hpp"

namespace mw = mixwhittle;

namespace {

mw::CovarianceSpec matern(double c0, double c1, double lm, double nu) {
    mw::CovarianceSpec s;
    s.c0 = c0;
    s.c1 = c1;
    s.lambda_m = lm;
    s.nu = nu;
    return s;
}

mw::DesignSpec simple_design() {
    mw::DesignSpec d;
    d.components = {mw::DesignComponent::intercept(), mw::DesignComponent::linear_trend(),
                    mw::DesignComponent::seasonal(12.0)};
    return d;
}

mw::ModelFit make_fit(const mw::CovarianceSpec& alpha) {
    mw::ModelFit f;
    f.alpha = alpha;
    f.beta.resize(4);
    f.beta << 2.0, 1.5, 0.8, -0.4;
    return f;
}

Eigen::VectorXd fixed_term(const mw::ModelFit& fit, std::size_t rows, std::size_t n) {
    const mw::Design d(simple_design(), std::nullopt, n, rows);
    return d.matrix(fit.gamma) * fit.beta;
}

// Series = fixed term + Gaussian errors with the fit's covariance.
mw::ObservedSeries simulate(const mw::ModelFit& fit, std::size_t n, std::uint64_t seed) {
    const auto eps = mw::simulate_gaussian_process(fit.alpha, n, seed);
    const auto m = fixed_term(fit, n, n);
    auto s = mw::ObservedSeries::complete(std::vector<double>(n));
    for (std::size_t t = 0; t < n; ++t) s.values[t] = m(static_cast<Eigen::Index>(t)) + eps[t];
    return s;
}

std::vector<std::size_t> all_times(std::size_t n) {
    std::vector<std::size_t> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = i + 1;
    return t;
}

}  // namespace

TEST(SimpleKrige, InterpolatesObservationsWithoutNugget) {
    const auto fit = make_fit(matern(0.0, 1.0, 5.0, 1.5));
    auto series = simulate(fit, 50, 1);
    for (std::size_t t : {3, 10, 11, 30}) series.mask[t] = 0;
    const std::vector<std::size_t> targets = {1, 2, 9, 25, 50};
    const auto p = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
    for (std::size_t j = 0; j < targets.size(); ++j) {
        EXPECT_NEAR(p.mean[j], series.values[targets[j] - 1], 1e-8);
        EXPECT_NEAR(p.variance[j], 0.0, 1e-8);
    }
    EXPECT_EQ(p.times, targets);
}

TEST(SimpleKrige, IndependenceLimit) {
    const auto fit = make_fit(matern(0.3, 1.2, 0.5, 0.5));
    const auto series = simulate(fit, 40, 2);
    const std::vector<std::size_t> targets = {200};
    const auto p = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
    const auto m = fixed_term(fit, 200, 40);
    EXPECT_NEAR(p.mean[0], m(199), 1e-9);
    EXPECT_NEAR(p.variance[0], 1.5, 1e-9);
}

TEST(SimpleKrige, DenseOracle) {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution miss(0.3);
    for (int rep = 0; rep < 5; ++rep) {
        const auto fit = make_fit(matern(0.1, 1.0 + rep, 3.0 + rep, 0.5 + 0.4 * rep));
        const std::size_t n = 24;
        auto series = simulate(fit, n, 10 + rep);
        for (std::size_t t = 0; t < n; ++t) series.mask[t] = miss(rng) ? 0 : 1;
        series.mask[0] = 1;
        const std::vector<std::size_t> targets = {1, 5, 13, 24, 27};
        const auto p = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);

        const auto idx = series.observed_indices();
        const auto k = static_cast<Eigen::Index>(idx.size());
        const auto m = fixed_term(fit, 27, n);
        Eigen::MatrixXd c(k, k);
        Eigen::VectorXd r(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto ti = idx[static_cast<std::size_t>(i)];
            r(i) = series.values[ti] - m(static_cast<Eigen::Index>(ti));
            for (Eigen::Index j = 0; j < k; ++j) {
                const auto tj = idx[static_cast<std::size_t>(j)];
                c(i, j) = mw::acv(fit.alpha, ti > tj ? ti - tj : tj - ti);
            }
        }
        const Eigen::MatrixXd inv = c.inverse();
        for (std::size_t j = 0; j < targets.size(); ++j) {
            const std::size_t t0 = targets[j] - 1;
            Eigen::VectorXd cross(k);
            for (Eigen::Index i = 0; i < k; ++i) {
                const auto ti = idx[static_cast<std::size_t>(i)];
                cross(i) = mw::acv(fit.alpha, ti > t0 ? ti - t0 : t0 - ti);
            }
            EXPECT_NEAR(p.mean[j], m(static_cast<Eigen::Index>(t0)) + cross.dot(inv * r), 1e-9);
            EXPECT_NEAR(p.variance[j], std::max(0.0, mw::acv(fit.alpha, 0) - cross.dot(inv * cross)), 1e-9);
        }
    }
}

TEST(SimpleKrige, VarianceNonincreasingWithMoreObservations) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::bernoulli_distribution miss(0.5);
    for (int rep = 0; rep < 100; ++rep) {
        const auto fit = make_fit(matern(0.2 * u(rng), 0.5 + 2 * u(rng), 1 + 20 * u(rng), 0.3 + 2.5 * u(rng)));
        const std::size_t n = 40;
        auto series = simulate(fit, n, 100 + rep);
        for (std::size_t t = 0; t < n; ++t) series.mask[t] = miss(rng) ? 0 : 1;
        series.mask[n / 2] = 1;
        std::size_t added = 0;
        while (series.mask[added]) ++added;
        const auto targets = all_times(n);
        const auto before = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
        series.mask[added] = 1;
        const auto after = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_LE(after.variance[j], before.variance[j] + 1e-10);
            EXPECT_LE(before.variance[j], fit.alpha.total_variance() + 1e-9);
            EXPECT_GE(after.variance[j], 0.0);
        }
    }
}

TEST(SimpleKrige, PlaceholderInvariance) {
    const auto fit = make_fit(matern(0.1, 1.0, 6.0, 1.0));
    auto series = simulate(fit, 60, 5);
    for (std::size_t t = 20; t < 26; ++t) series.mask[t] = 0;
    const std::vector<std::size_t> targets = {21, 22, 23, 24, 25, 26};
    const auto a = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
    for (std::size_t t = 20; t < 26; ++t) series.values[t] = 1e6;
    const auto b = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.variance, b.variance);
}

TEST(SimpleKrige, BeatsLinearInterpolation) {
    const auto fit = make_fit(matern(0.05, 2.0, 25.0, 1.5));
    const std::size_t n = 256;
    int wins = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto series = simulate(fit, n, 1000 + rep);
        std::mt19937_64 rng(rep);
        const auto gaps = mw::place_gaps(series.mask, {6, 2}, rng);
        auto reduced = series;
        std::vector<std::size_t> targets;
        for (auto t : gaps) {
            reduced.mask[t] = 0;
            targets.push_back(t + 1);
        }
        const auto p = mw::simple_krige(reduced, fit, simple_design(), std::nullopt, targets);
        double se_k = 0.0, se_l = 0.0;
        for (std::size_t j = 0; j < gaps.size(); ++j) {
            const std::size_t t = gaps[j];
            std::size_t lo = t, hi = t;
            while (!reduced.mask[lo]) --lo;
            while (!reduced.mask[hi]) ++hi;
            const double w = double(t - lo) / double(hi - lo);
            const double lin = (1 - w) * series.values[lo] + w * series.values[hi];
            se_k += std::pow(p.mean[j] - series.values[t], 2);
            se_l += std::pow(lin - series.values[t], 2);
        }
        wins += se_k <= se_l ? 1 : 0;
    }
    EXPECT_GE(wins, 80);
}

TEST(SimpleKrige, ForecastNeedsExogenousCoverage) {
    mw::DesignSpec spec;
    spec.components = {mw::DesignComponent::intercept(), mw::DesignComponent::irf(12)};
    mw::ExogenousSeries exog;
    exog.values.assign(41, 1.0);
    exog.lead = 11;
    mw::ModelFit fit;
    fit.alpha = matern(0.1, 1.0, 3.0, 0.5);
    fit.beta = Eigen::VectorXd::Ones(2);
    fit.gamma = mw::IrfParams{2.0, 0.5};
    auto series = mw::ObservedSeries::complete(std::vector<double>(30, 1.0));
    const std::vector<std::size_t> ok = {30}, beyond = {31};
    EXPECT_NO_THROW(mw::simple_krige(series, fit, spec, exog, ok));
    EXPECT_THROW(mw::simple_krige(series, fit, spec, exog, beyond), mw::LengthError);
    const std::vector<std::size_t> zero = {0};
    EXPECT_THROW(mw::simple_krige(series, fit, spec, exog, zero), mw::DomainError);
}

TEST(KrigeAep, NearGaussianMatchesSimpleKrige) {
    auto fit = make_fit(matern(0.05, 0.95, 8.0, 1.0));
    auto series = simulate(fit, 80, 6);
    for (std::size_t t = 30; t < 34; ++t) series.mask[t] = 0;
    const std::vector<std::size_t> targets = {31, 32, 33, 34, 85};
    const auto g = mw::simple_krige(series, fit, simple_design(), std::nullopt, targets);
    mw::AepParams theta;
    theta.p1 = 2.02;
    theta.p2 = 1.98;
    fit.theta = theta;
    const auto a = mw::krige_aep(series, fit, simple_design(), std::nullopt, targets);
    for (std::size_t j = 0; j < targets.size(); ++j) EXPECT_NEAR(a.mean[j], g.mean[j], 1e-2);
    // Exactly Gaussian member reproduces simple Kriging.
    fit.theta = mw::AepParams{};
    const auto e = mw::predict(series, fit, simple_design(), std::nullopt, targets);
    for (std::size_t j = 0; j < targets.size(); ++j) EXPECT_NEAR(e.mean[j], g.mean[j], 1e-9);
}

TEST(KrigeAep, MedianResidualsBackMapToMedian) {
    auto fit = make_fit(matern(0.1, 0.9, 5.0, 0.5));
    mw::AepParams theta;
    theta.sigma = 1.4;
    theta.varsigma = 0.4;
    theta.p1 = 1.0;
    theta.p2 = 1.9;
    fit.theta = theta;
    const mw::AepDistribution dist(theta);
    const double median = dist.quantile(0.5);
    const std::size_t n = 30;
    const auto m = fixed_term(fit, n, n);
    auto series = mw::ObservedSeries::complete(std::vector<double>(n));
    for (std::size_t t = 0; t < n; ++t) series.values[t] = m(static_cast<Eigen::Index>(t)) + median;
    series.mask[10] = 0;
    const std::vector<std::size_t> targets = {11};
    const auto p = mw::krige_aep(series, fit, simple_design(), std::nullopt, targets, {0.1, 0.9});
    EXPECT_NEAR(p.mean[0], m(10) + median, 1e-10);
    ASSERT_EQ(p.quantiles.size(), 2u);
    EXPECT_LT(p.quantiles[0][0], p.mean[0]);
    EXPECT_GT(p.quantiles[1][0], p.mean[0]);
    const auto again = mw::krige_aep(series, fit, simple_design(), std::nullopt, targets, {0.1, 0.9});
    EXPECT_EQ(p.mean, again.mean);
    EXPECT_EQ(p.quantiles, again.quantiles);
}

TEST(GapPlacement, GapsHaveObservedNeighbours) {
    std::mt19937_64 rng(7);
    std::vector<std::uint8_t> mask(200, 1);
    for (std::size_t t = 0; t < 200; t += 7) mask[t] = 0;
    for (const auto& plan : mw::default_gap_plans()) {
        const auto gaps = mw::place_gaps(mask, plan, rng);
        ASSERT_EQ(gaps.size(), plan.count * plan.length);
        std::vector<std::uint8_t> removed(200, 0);
        for (auto t : gaps) {
            EXPECT_TRUE(mask[t]);
            removed[t] = 1;
        }
        for (auto t : gaps) {
            EXPECT_GT(t, 0u);
            EXPECT_LT(t, 199u);
        }
        // Every maximal removed run has the plan length and observed ends.
        for (std::size_t t = 0; t < 200;) {
            if (!removed[t]) {
                ++t;
                continue;
            }
            std::size_t e = t;
            while (e < 200 && removed[e]) ++e;
            EXPECT_EQ(e - t, plan.length);
            EXPECT_TRUE(mask[t - 1]);
            EXPECT_TRUE(mask[e]);
            t = e;
        }
    }
}

TEST(GapPlacement, InfeasibleIsDescriptive) {
    std::mt19937_64 rng(8);
    std::vector<std::uint8_t> mask(20, 1);
    try {
        mw::place_gaps(mask, {12, 2}, rng, 50);
        FAIL() << "expected an error";
    } catch (const mw::DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("12 gaps of length 2"), std::string::npos);
    }
}

TEST(GapExperiment, IdenticalFitsGiveZeroReduction) {
    const auto fit = make_fit(matern(0.1, 1.0, 10.0, 1.5));
    const auto series = simulate(fit, 150, 9);
    const auto res = mw::gap_experiment(series, simple_design(), std::nullopt, fit, fit, mw::default_gap_plans(), 5, 1);
    ASSERT_EQ(res.plans.size(), 3u);
    for (const auto& p : res.plans) {
        EXPECT_EQ(p.reduction_percent, 0.0);
        EXPECT_EQ(p.rmse_a, p.rmse_b);
        EXPECT_EQ(p.rmse_a.size(), 5u);
    }
    EXPECT_EQ(res.median_reduction, 0.0);
}

TEST(GapExperiment, PerfectPredictorHasZeroRmse) {
    const auto fit = make_fit(matern(1e-6, 0.0, 1.0, 0.5));
    const std::size_t n = 100;
    const auto m = fixed_term(fit, n, n);
    auto series = mw::ObservedSeries::complete(std::vector<double>(m.data(), m.data() + n));
    const auto res = mw::gap_experiment(series, simple_design(), std::nullopt, fit, fit, mw::default_gap_plans(), 3, 2);
    for (const auto& p : res.plans) {
        EXPECT_NEAR(p.overall_rmse_a, 0.0, 1e-12);
        for (double r : p.rmse_a) EXPECT_NEAR(r, 0.0, 1e-12);
    }
}

TEST(GapExperiment, ThreadCountDoesNotChangeResults) {
    const auto fit = make_fit(matern(0.1, 1.0, 10.0, 1.5));
    auto other = fit;
    other.alpha.family = mw::CovarianceFamily::Exponential;
    const auto series = simulate(fit, 150, 10);
    const auto one = mw::gap_experiment(series, simple_design(), std::nullopt, fit, other, mw::default_gap_plans(), 8, 3, 1);
    const auto four = mw::gap_experiment(series, simple_design(), std::nullopt, fit, other, mw::default_gap_plans(), 8, 3, 4);
    for (std::size_t p = 0; p < 3; ++p) {
        EXPECT_EQ(one.plans[p].rmse_a, four.plans[p].rmse_a);
        EXPECT_EQ(one.plans[p].rmse_b, four.plans[p].rmse_b);
    }
    EXPECT_EQ(one.median_reduction, four.median_reduction);
}

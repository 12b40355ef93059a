#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "mixwhittle/estimate.hpp"
#include "mixwhittle/gaussian_process.hpp"

namespace mw = mixwhittle;
using cd = std::complex<double>;

namespace {

mw::CovarianceSpec matern(double c0, double c1, double lm, double nu) {
    mw::CovarianceSpec s;
    s.c0 = c0;
    s.c1 = c1;
    s.lambda_m = lm;
    s.nu = nu;
    return s;
}

struct Fixture {
    mw::ObservedSeries series;
    Eigen::MatrixXd m;
    Eigen::VectorXd beta;
};

Fixture random_fixture(std::size_t n, std::size_t cols, double observed_p, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    std::bernoulli_distribution keep(observed_p);
    Fixture f;
    f.series.values.resize(n);
    f.series.mask.resize(n);
    f.m.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    f.beta.resize(static_cast<Eigen::Index>(cols));
    for (auto& b : f.beta) b = z(rng);
    for (std::size_t t = 0; t < n; ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        f.m(tt, 0) = 1.0;
        for (Eigen::Index j = 1; j < f.m.cols(); ++j) f.m(tt, j) = z(rng);
        f.series.mask[t] = keep(rng) ? 1 : 0;
        f.series.values[t] = 2.0 * z(rng);
    }
    f.series.mask[0] = f.series.mask[1] = 1;
    return f;
}

// Debiased Whittle objective summed term by term: direct DFT for the
// periodogram, masked double sum for its expectation.
double whittle_oracle(const Fixture& f, const mw::CovarianceSpec& alpha, const Eigen::VectorXd& beta) {
    const std::size_t n = f.series.size();
    std::vector<double> c(n);
    for (std::size_t tau = 0; tau < n; ++tau) c[tau] = mw::acv(alpha, tau);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = 2.0 * std::numbers::pi * double(k) / double(n);
        cd dft = 0;
        for (std::size_t t = 0; t < n; ++t)
            if (f.series.mask[t])
                dft += (f.series.values[t] - f.m.row(static_cast<Eigen::Index>(t)).dot(beta)) *
                       std::exp(cd(0, -w * double(t + 1)));
        cd e = 0;
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t s = 0; s < n; ++s) {
                const auto lag = static_cast<long>(t) - static_cast<long>(s);
                e += double(f.series.mask[t] * f.series.mask[s]) * c[static_cast<std::size_t>(std::abs(lag))] *
                     std::exp(cd(0, -w * double(lag)));
            }
        const double fk = e.real() / double(n);
        total += std::log(fk) + std::norm(dft) / double(n) / fk;
    }
    return total;
}

// Dense Gaussian negative log-likelihood with explicit inverse and determinant.
double gaussian_oracle(const Fixture& f, const mw::CovarianceSpec& alpha, const Eigen::VectorXd& beta) {
    const auto idx = f.series.observed_indices();
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd c(k, k);
    Eigen::VectorXd r(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        r(i) = f.series.values[idx[static_cast<std::size_t>(i)]] -
               f.m.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])).dot(beta);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto a = idx[static_cast<std::size_t>(i)], b = idx[static_cast<std::size_t>(j)];
            c(i, j) = mw::acv(alpha, a > b ? a - b : b - a);
        }
    }
    return 0.5 * std::log(c.determinant()) + 0.5 * r.dot(c.inverse() * r) + 0.5 * double(k) * std::log(2 * std::numbers::pi);
}

mw::CovarianceSpec random_alpha(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    return matern(0.05 + 0.5 * u(rng), 0.3 + 2 * u(rng), 1 + 15 * u(rng), 0.3 + 2.5 * u(rng));
}

}  // namespace

TEST(WhittleNll, PureNuggetZeroResiduals) {
    const std::size_t n = 24;
    const auto s = mw::ObservedSeries::complete(std::vector<double>(n, 4.0));
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd b(1);
    b << 4.0;
    const auto v = mw::whittle_nll(s, m, matern(1.7, 0.0, 1, 1), b);
    EXPECT_TRUE(v.in_domain);
    EXPECT_NEAR(v.value, double(n) * std::log(1.7), 1e-12);
}

TEST(WhittleNll, MatchesTermByTermOracle) {
    std::mt19937_64 rng(101);
    const auto f = random_fixture(32, 3, 0.75, rng);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        const auto alpha = random_alpha(rng);
        Eigen::VectorXd b = f.beta;
        for (auto& v : b) v += 0.3 * z(rng);
        const double got = mw::whittle_nll(f.series, f.m, alpha, b).value;
        EXPECT_NEAR(got, whittle_oracle(f, alpha, b), 1e-9 * std::max(1.0, std::abs(got)));
    }
}

TEST(WhittleNll, PlaceholderValuesAreIgnored) {
    std::mt19937_64 rng(7);
    auto f = random_fixture(64, 2, 0.9, rng);
    const auto alpha = matern(0.1, 1, 5, 1.5);
    const double before = mw::whittle_nll(f.series, f.m, alpha, f.beta).value;
    const double ml_before = mw::gaussian_nll(f.series, f.m, alpha, f.beta);
    for (std::size_t t = 0; t < f.series.size(); ++t)
        if (!f.series.mask[t]) f.series.values[t] = 1e9;
    EXPECT_EQ(mw::whittle_nll(f.series, f.m, alpha, f.beta).value, before);
    EXPECT_EQ(mw::gaussian_nll(f.series, f.m, alpha, f.beta), ml_before);
}

TEST(WhittleNll, OutOfDomainIsInfiniteNotThrown) {
    std::mt19937_64 rng(8);
    const auto f = random_fixture(16, 1, 1.0, rng);
    const auto v = mw::whittle_nll(f.series, f.m, matern(0.1, 1, -3, 1), f.beta);
    EXPECT_FALSE(v.in_domain);
    EXPECT_TRUE(std::isinf(v.value));
}

TEST(WhittleProblem, ProfiledBetaMinimizesJointObjective) {
    std::mt19937_64 rng(9);
    const auto f = random_fixture(48, 3, 0.8, rng);
    const mw::WhittleProblem p(f.series, f.m, -1, std::nullopt, 0);
    const auto alpha = matern(0.2, 1.3, 4, 0.9);
    const auto prof = p.profiled(alpha, std::nullopt);
    const double at = p.nll(alpha, prof.beta, std::nullopt).value;
    EXPECT_NEAR(prof.objective.value, at, 1e-9);
    for (Eigen::Index j = 0; j < 3; ++j)
        for (double d : {-1e-3, 1e-3}) {
            Eigen::VectorXd b = prof.beta;
            b(j) += d;
            EXPECT_GT(p.nll(alpha, b, std::nullopt).value, at);
        }
}

TEST(GaussianNll, SingleObservationNugget) {
    mw::ObservedSeries s;
    s.values = {9.0, 0.7, -3.0};
    s.mask = {0, 1, 0};
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(1);
    // ObservedSeries::validate needs two observed values; gaussian_nll does not.
    const double v = mw::gaussian_nll(s, m, matern(2.5, 0, 1, 1), b);
    EXPECT_NEAR(v, 0.5 * std::log(2.5) + 0.49 / 5.0 + 0.5 * std::log(2 * std::numbers::pi), 1e-14);
}

TEST(GaussianNll, MatchesDenseOracle) {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const auto f = random_fixture(16, 2, rep < 5 ? 1.0 : 0.7, rng);
        const auto alpha = random_alpha(rng);
        const double got = mw::gaussian_nll(f.series, f.m, alpha, f.beta);
        EXPECT_NEAR(got, gaussian_oracle(f, alpha, f.beta), 1e-9);
    }
}

TEST(GaussianNll, IndependenceIsSumOfScalarTerms) {
    std::mt19937_64 rng(13);
    const auto f = random_fixture(30, 2, 0.6, rng);
    const auto alpha = matern(0.8, 0.0, 3, 1);
    double expect = 0.0;
    for (std::size_t t = 0; t < 30; ++t)
        if (f.series.mask[t]) {
            const double r = f.series.values[t] - f.m.row(static_cast<Eigen::Index>(t)).dot(f.beta);
            expect += 0.5 * std::log(2 * std::numbers::pi * 0.8) + r * r / 1.6;
        }
    EXPECT_NEAR(mw::gaussian_nll(f.series, f.m, alpha, f.beta), expect, 1e-10);
}

TEST(GaussianNll, NonPositiveDefiniteCarriesParameters) {
    std::mt19937_64 rng(14);
    const auto f = random_fixture(10, 1, 1.0, rng);
    try {
        (void)mw::gaussian_nll(f.series, f.m, matern(0, 0, 1, 1), f.beta);
        FAIL();
    } catch (const mw::NumericalError& e) {
        ASSERT_EQ(e.parameters().size(), 5u);
        EXPECT_EQ(e.parameters()[2], 1.0);
    }
}

TEST(ProfileBeta, IdentityCovarianceIsOls) {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> z;
    Eigen::MatrixXd m(20, 3);
    Eigen::VectorXd x(20);
    for (auto& v : m.reshaped()) v = z(rng);
    for (auto& v : x) v = z(rng);
    const Eigen::VectorXd ols = (m.transpose() * m).ldlt().solve(m.transpose() * x);
    EXPECT_LT((mw::profile_beta(m, Eigen::MatrixXd::Identity(20, 20), x) - ols).norm(), 1e-12);
}

TEST(ProfileBeta, InterceptUnderNuggetIsMean) {
    Eigen::VectorXd x(5);
    x << 1, 4, 2, 8, 5;
    const auto b = mw::profile_beta(Eigen::MatrixXd::Ones(5, 1), 3.0 * Eigen::MatrixXd::Identity(5, 5), x);
    EXPECT_NEAR(b(0), 4.0, 1e-14);
}

TEST(ProfileBeta, MatchesExplicitInverseFormula) {
    std::mt19937_64 rng(16);
    std::normal_distribution<double> z;
    const auto alpha = matern(0.1, 1.5, 3, 1.2);
    Eigen::MatrixXd c(12, 12), m(12, 3);
    Eigen::VectorXd x(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
        for (Eigen::Index j = 0; j < 12; ++j) c(i, j) = mw::acv(alpha, static_cast<std::size_t>(std::abs(i - j)));
        m(i, 0) = 1;
        m(i, 1) = z(rng);
        m(i, 2) = z(rng);
        x(i) = z(rng);
    }
    const Eigen::MatrixXd ci = c.inverse();
    const Eigen::VectorXd ref = (m.transpose() * ci * m).inverse() * (m.transpose() * ci * x);
    EXPECT_LT((mw::profile_beta(m, c, x) - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ProfileBeta, RankDeficiencyNamesColumns) {
    Eigen::MatrixXd m(6, 3);
    for (Eigen::Index i = 0; i < 6; ++i) {
        m(i, 0) = 1;
        m(i, 1) = double(i);
        m(i, 2) = 2.0 + 3.0 * double(i);
    }
    try {
        (void)mw::profile_beta(m, Eigen::MatrixXd::Identity(6, 6), Eigen::VectorXd::Ones(6));
        FAIL();
    } catch (const mw::SingularError& e) {
        EXPECT_EQ(e.dependent_columns().size(), 1u);
    }
}

TEST(ParameterLayout, RoundTrip) {
    mw::CovarianceModel cm;
    cm.family = mw::CovarianceFamily::MaternPeriodic;
    const mw::ParameterLayout layout(cm, true, 3, true);
    EXPECT_EQ(layout.size(), 5u + 2u + 3u);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd raw(static_cast<Eigen::Index>(layout.size()));
        for (auto& v : raw) v = u(rng);
        const auto p = layout.from_raw(raw, {});
        EXPECT_LT((layout.to_raw(p) - raw).cwiseAbs().maxCoeff(), 1e-12);
    }
    mw::ParameterPoint p;
    p.alpha = matern(0.05, 2, 25, 1.5);
    p.gamma = mw::IrfParams{8, 0.2};
    p.beta = Eigen::VectorXd::Zero(3);
    EXPECT_NEAR(layout.to_raw(p)(2), std::log(25.0), 1e-15);
    p.alpha.c0 = 0.0;
    const auto raw = layout.to_raw(p);
    EXPECT_TRUE(std::isinf(raw(0)));
    EXPECT_FALSE(layout.admissible(raw, layout.from_raw(raw, {})));
}

TEST(ParameterLayout, AepPinsUnitVariance) {
    mw::CovarianceModel cm;
    const mw::ParameterLayout layout(cm, true, 5, true, true);
    EXPECT_EQ(layout.size(), 14u);
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(14);
    raw(0) = 0.3;
    const auto p = layout.from_raw(raw, {});
    EXPECT_NEAR(p.alpha.c0 + p.alpha.c1, 1.0, 1e-15);
}

namespace {
struct ZeroNoise {
    mw::ObservedSeries series;
    mw::ExogenousSeries exog;
    mw::DesignSpec design;
    Eigen::VectorXd beta;
};

ZeroNoise zero_noise_fixture() {
    const std::size_t n = 200, window = 24;
    std::mt19937_64 rng(19);
    std::exponential_distribution<double> ex(0.5);
    ZeroNoise z;
    z.design = {{mw::DesignComponent::intercept(), mw::DesignComponent::linear_trend(), mw::DesignComponent::seasonal(12),
                 mw::DesignComponent::irf(window)}};
    z.exog.values.resize(n + window - 1);
    for (auto& v : z.exog.values) v = ex(rng);
    z.exog.lead = window - 1;
    z.beta.resize(5);
    z.beta << 3.0, -1.0, 0.5, 2.0, 1.5;
    const auto m = mw::build_design(z.design, z.exog, mw::IrfParams{3.0, 0.4}, n);
    const Eigen::VectorXd x = m.values * z.beta;
    z.series = mw::ObservedSeries::complete(std::vector<double>(x.begin(), x.end()));
    for (std::size_t t = 0; t < n; t += 4) z.series.mask[t] = 0;
    return z;
}
}  // namespace

TEST(Fit, ZeroNoiseRecoversCoefficientsUnderAllMethods) {
    const auto z = zero_noise_fixture();
    for (auto method : {mw::EstimationMethod::GaussianWhittle, mw::EstimationMethod::GaussianExact,
                        mw::EstimationMethod::TwoStage}) {
        mw::ModelSpec spec;
        spec.design = z.design;
        spec.method = method;
        spec.covariance.c0 = 1e-6;
        spec.covariance.c1 = 0.0;
        spec.covariance.lambda_m = 1.0;
        spec.covariance.nu = 0.5;
        const auto f = mw::fit(z.series, z.exog, spec);
        ASSERT_TRUE(f.gamma.has_value());
        EXPECT_LT((f.beta - z.beta).cwiseAbs().maxCoeff(), 1e-6) << mw::to_string(method) << "\n" << f.beta.transpose();
        EXPECT_EQ(f.beta_labels.size(), 5u);
    }
}

TEST(Fit, StageOneWithOrthonormalDesign) {
    const std::size_t n = 40;
    std::mt19937_64 rng(20);
    std::normal_distribution<double> zd;
    Eigen::MatrixXd raw(n, 2);
    raw.col(0).setOnes();
    for (std::size_t t = 0; t < n; ++t) raw(static_cast<Eigen::Index>(t), 1) = double(t + 1) / double(n);
    std::vector<double> x(n);
    for (auto& v : x) v = zd(rng);
    const mw::DesignSpec spec{{mw::DesignComponent::intercept(), mw::DesignComponent::linear_trend()}};
    const mw::Design design(spec, std::nullopt, n);
    const auto s1 = mw::stage_one(mw::ObservedSeries::complete(x), design, {}, {});
    // Least squares is invariant to reparametrization: compare through the orthonormal basis.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd fitted_q = q * (q.transpose() * xv);
    EXPECT_LT((design.base() * s1.beta - fitted_q).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, RefusesDegenerateMask) {
    mw::ObservedSeries s = mw::ObservedSeries::complete(std::vector<double>(50, 1.0));
    for (std::size_t t = 3; t < 50; ++t) s.mask[t] = 0;
    mw::ModelSpec spec;
    spec.design = {{mw::DesignComponent::intercept(), mw::DesignComponent::linear_trend()}};
    EXPECT_THROW(mw::fit(s, std::nullopt, spec), mw::SpecError);
}

TEST(Fit, ProfiledMatchesJointExactLikelihood) {
    const std::size_t n = 64;
    mw::CovarianceSpec truth;
    truth.family = mw::CovarianceFamily::Exponential;
    truth.c0 = 0.2;
    truth.c1 = 1.0;
    truth.lambda_m = 5.0;
    auto eps = mw::simulate_gaussian_process(truth, n, 23);
    for (std::size_t t = 0; t < n; ++t) eps[t] += 2.0 + 1.5 * double(t + 1) / double(n);
    const auto series = mw::ObservedSeries::complete(eps);
    mw::ModelSpec spec;
    spec.design = {{mw::DesignComponent::intercept(), mw::DesignComponent::linear_trend()}};
    spec.covariance.family = mw::CovarianceFamily::Exponential;
    spec.method = mw::EstimationMethod::GaussianExact;
    mw::OptimConfig cfg;
    cfg.tolerance = 1e-11;
    cfg.restarts = 4;
    const auto profiled = mw::fit(series, std::nullopt, spec, cfg);

    const mw::Design design(spec.design, std::nullopt, n);
    const mw::ExactProblem problem(series, design);
    const mw::ParameterLayout joint(spec.covariance, false, 2, true);
    mw::ParameterPoint start;
    start.alpha = truth;
    start.alpha.c0 = 0.5;
    start.alpha.c1 = 0.5;
    start.alpha.lambda_m = 2.0;
    start.beta = Eigen::VectorXd::Zero(2);
    auto f = [&](const Eigen::VectorXd& u) {
        const auto p = joint.from_raw(u, start);
        if (!joint.admissible(u, p)) return std::numeric_limits<double>::infinity();
        return problem.nll(p.alpha, p.beta, std::nullopt);
    };
    cfg.restarts = 8;
    const auto res = mw::minimize(f, joint.to_raw(start), cfg);
    EXPECT_NEAR(res.value, profiled.objective, 1e-6);
}

// Average Whittle objective over replicates is smallest at the truth.
TEST(WhittleNll, PopulationIdentifiability) {
    const std::size_t n = 512, reps = 200;
    const auto alpha = matern(0.05, 2, 25, 1.5);
    const mw::GaussianProcessSampler sampler(alpha, n);
    std::mt19937_64 rng(31);
    std::bernoulli_distribution keep(0.75);
    Eigen::MatrixXd m(n, 2);
    for (std::size_t t = 0; t < n; ++t) {
        m(static_cast<Eigen::Index>(t), 0) = 1.0;
        m(static_cast<Eigen::Index>(t), 1) = std::sin(2 * std::numbers::pi * double(t + 1) / 12.0);
    }
    Eigen::VectorXd beta(2);
    beta << 3.0, 2.0;
    const std::vector<double> truth{0.05, 2, 25, 1.5, 3.0, 2.0};
    std::vector<double> at_truth(1, 0.0), perturbed(2 * truth.size(), 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
        auto e = sampler.draw(rng);
        mw::ObservedSeries s;
        s.values.resize(n);
        s.mask.resize(n);
        for (std::size_t t = 0; t < n; ++t) {
            s.values[t] = e[t] + m.row(static_cast<Eigen::Index>(t)).dot(beta);
            s.mask[t] = keep(rng);
        }
        const mw::WhittleProblem p(s, m, -1, std::nullopt, 0);
        auto eval = [&](const std::vector<double>& v) {
            Eigen::VectorXd b(2);
            b << v[4], v[5];
            return p.nll(matern(v[0], v[1], v[2], v[3]), b, std::nullopt).value;
        };
        at_truth[0] += eval(truth);
        for (std::size_t i = 0; i < truth.size(); ++i)
            for (int sgn = 0; sgn < 2; ++sgn) {
                auto v = truth;
                v[i] *= sgn ? 1.2 : 0.8;
                perturbed[2 * i + static_cast<std::size_t>(sgn)] += eval(v);
            }
    }
    for (double v : perturbed) EXPECT_LE(at_truth[0], v);
}

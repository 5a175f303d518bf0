#include <vortexfil/meanfield.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace vortexfil;

namespace {

const MeanFieldInputs kReference{1e7, 1.0, 2000.0, 20.0, 10.0};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double dr2_dbeta(MeanFieldInputs in, double beta)
{
    const double h = 1e-6 * beta;
    in.beta = beta + h;
    const double up = r_squared_3d(in);
    in.beta = beta - h;
    return (up - r_squared_3d(in)) / (2 * h);
}

} // namespace

TEST(PointVortexLengthScale, Arithmetic)
{
    EXPECT_NEAR(r_squared_2d(20, 1, 2000), 0.0025, 1e-18);
    EXPECT_NEAR(r_squared_2d(4, 2, 2), 1.0, 1e-15);
    EXPECT_NEAR(r_squared_2d(20, 1e-300, 2000), 0.0, 1e-300);
}

TEST(FilamentLengthScale, ApproachesPointVortexResultForStiffFilaments)
{
    const double r3 = r_squared_3d(kReference);
    const double r2 = r_squared_2d(20, 1, 2000);
    EXPECT_LT(rel(r3, r2), 1e-5);
    // Leading correction: r3/r2 - 1 ~ 8 mu / (alpha beta^3 N^2) = 4e-6.
    EXPECT_NEAR(r3 / r2 - 1.0, 4e-6, 1e-9);

    double prev = std::numeric_limits<double>::infinity();
    MeanFieldInputs in = kReference;
    for (double alpha = 1e4; alpha <= 1e10 * 1.0001; alpha *= 10) {
        in.alpha = alpha;
        const double ratio = r_squared_3d(in) / r2;
        EXPECT_GE(ratio, 1.0);
        EXPECT_LT(ratio, prev);
        prev = ratio;
    }
    EXPECT_LT(prev - 1.0, 1e-8);
}

TEST(FilamentLengthScale, NeverBelowPointVortexResult)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> e(-3, 3);
    for (int i = 0; i < 1000; ++i) {
        const MeanFieldInputs in{std::pow(10, 2 + e(rng)), std::pow(10, e(rng)),
                                 std::pow(10, e(rng)), std::round(1 + 20 * (e(rng) + 3) / 6), 1};
        EXPECT_GE(r_squared_3d(in), r_squared_2d(in.n_filaments, in.beta, in.mu) * (1 - 1e-14));
    }
}

TEST(FilamentLengthScale, AgreesWithNumericMinimiser)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 100; ++i) {
        const MeanFieldInputs in{std::pow(10, 2 + 6 * u(rng)), std::pow(10, -3 + 5 * u(rng)),
                                 std::pow(10, 4 * u(rng)), std::vector<double>{1, 5, 20}[i % 3],
                                 std::pow(10, -1 + 2 * u(rng))};
        EXPECT_LT(rel(free_energy_minimizer_numeric(in), r_squared_3d(in)), 1e-8)
            << "alpha=" << in.alpha << " beta=" << in.beta << " mu=" << in.mu;
    }
}

TEST(FilamentLengthScale, RejectsNonPositiveInputs)
{
    EXPECT_THROW(r_squared_3d({0, 1, 1, 1, 1}), DomainError);
    EXPECT_THROW(r_squared_3d({1, 1, -1, 1, 1}), DomainError);
}

TEST(TurningPoint, ValueAndScaling)
{
    EXPECT_NEAR(beta_turning_point(kReference), std::cbrt(2e-6), 1e-15);
    EXPECT_NEAR(beta_turning_point(kReference), 1.26e-2, 1e-4);
    MeanFieldInputs eight = kReference;
    eight.mu *= 8;
    EXPECT_NEAR(beta_turning_point(eight), 2 * beta_turning_point(kReference), 1e-15);
}

TEST(TurningPoint, SlopeChangesSignOnce)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        const MeanFieldInputs in{std::pow(10, 3 + 5 * u(rng)), 1, std::pow(10, 4 * u(rng)),
                                 1.0 + std::floor(30 * u(rng)), 1};
        const double b0 = beta_turning_point(in);
        EXPECT_LT(dr2_dbeta(in, b0 * 0.99), 0.0);
        EXPECT_GT(dr2_dbeta(in, b0 * 1.01), 0.0);
        int flips = 0;
        double prev = dr2_dbeta(in, b0 * 1e-3);
        for (double f = 1e-3; f < 1e3; f *= 1.05) {
            const double d = dr2_dbeta(in, b0 * f);
            flips += (d > 0) != (prev > 0);
            prev = d;
        }
        EXPECT_EQ(flips, 1);
    }
}

TEST(FreeEnergy, ReferenceParameterValue)
{
    const double expected = 50.0 - 50.0 * std::log(0.0025) + 2e-4;
    EXPECT_NEAR(free_energy(0.0025, kReference), expected, 1e-10);
    EXPECT_NEAR(free_energy(0.0025, kReference), 349.573, 1e-3);
    EXPECT_THROW(free_energy(0.0, kReference), DomainError);
    EXPECT_THROW(free_energy(-1.0, kReference), DomainError);
}

TEST(FreeEnergy, StationaryAndConvexAtClosedFormRoot)
{
    for (double beta : {1e-3, 1e-2, 0.3, 1.0, 30.0}) {
        MeanFieldInputs in = kReference;
        in.beta = beta;
        const double r2 = r_squared_3d(in);
        const double f = free_energy(r2, in);
        EXPECT_LT(std::abs(free_energy_slope(r2, in)), 1e-6 * std::abs(f) / r2);
        const double eps = 1e-3 * r2;
        EXPECT_GT(free_energy(r2 + eps, in), f);
        EXPECT_GT(free_energy(r2 - eps, in), f);
    }
}

TEST(FreeEnergy, ShiftMatchesDirectDifference)
{
    const double r0 = 0.003;
    for (double s : {-0.5, -1e-3, 0.2, 1.0}) {
        const double direct = free_energy(r0 * std::exp(s), kReference) - free_energy(r0, kReference);
        EXPECT_NEAR(free_energy_shift(r0, s, kReference), direct, 1e-9 * (1 + std::abs(direct)));
    }
}

TEST(Saddle, Eta0)
{
    const auto s = saddle_eta0(2.0, 0.5);
    EXPECT_NEAR(s.eta0, std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(s.eta0, 1.414214, 1e-6);
    EXPECT_EQ(s.k_stiffness, 2.0);
    EXPECT_THROW(saddle_eta0(0.0, 1.0), DomainError);
}

TEST(Saddle, FAtOneVanishes)
{
    for (double k : {0.1, 3.0, 1e6})
        for (double r2 : {1e-4, 1.0})
            EXPECT_EQ(spherical_f_continuum(1.0, k, r2), 0.0);
}

TEST(Saddle, DerivativeVanishesAtEta0)
{
    for (double x : {0.05, 1.0, 7.0}) {
        const double k = 3.0;
        const double r2 = x / k;
        const double eta0 = saddle_eta0(k, r2).eta0;
        const double h = 1e-3 * (eta0 - 1.0);
        auto f = [&](double e) { return spherical_f_continuum(e, k, r2); };
        const double d =
            (8 * (f(eta0 + h) - f(eta0 - h)) - (f(eta0 + 2 * h) - f(eta0 - 2 * h))) / (12 * h);
        EXPECT_LT(std::abs(d), 1e-10);
        EXPECT_NEAR(saddle_eta0(k, r2).f_value, spherical_f_continuum(eta0, k, r2), 1e-15);
    }
}

TEST(SphericalFinite, TwoSegments)
{
    EXPECT_NEAR(spherical_f_finite(2.0, 1.0, 1.0, 2), 1.0 - 0.5 * std::log(3.0), 1e-15);
    EXPECT_NEAR(spherical_f_finite(2.0, 1.0, 1.0, 2), 0.450694, 1e-6);
    EXPECT_THROW(spherical_f_finite(1.0, 1.0, 1.0, 4), DomainError);
    EXPECT_THROW(spherical_f_finite(0.5, 1.0, 1.0, 4), DomainError);
    EXPECT_THROW(spherical_f_finite(2.0, 1.0, 1.0, 1), DomainError);
}

TEST(SphericalFinite, ConvergesToQuadratureLimitAsOneOverM)
{
    const double eta = 1.5, k = 2.0, r2 = 0.7;
    const double limit = spherical_f_limit(eta, k, r2);
    EXPECT_LT(std::abs(spherical_f_finite(eta, k, r2, std::size_t{1} << 20) - limit), 1e-5);

    double prev_err = std::abs(spherical_f_finite(eta, k, r2, std::size_t{1} << 10) - limit);
    for (unsigned p = 11; p <= 15; ++p) {
        const double err = std::abs(spherical_f_finite(eta, k, r2, std::size_t{1} << p) - limit);
        EXPECT_NEAR(prev_err / err, 2.0, 1e-6);
        prev_err = err;
    }
}

TEST(SphericalFinite, QuadratureIdentityCarriesLogTwo)
{
    // Direct trapezoid quadrature of (2 pi)^-1 int log(eta - cos w) dw,
    // independent of the closed form.
    const double eta = 1.5;
    const int n = 4096;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += std::log(eta - std::cos(2 * std::numbers::pi * i / n));
    s /= n;
    EXPECT_NEAR(s, std::log((eta + std::sqrt(eta * eta - 1)) / 2), 1e-13);
    EXPECT_NEAR(spherical_f_limit(eta, 1, 1) - spherical_f_continuum(eta, 1, 1), std::log(2.0),
                1e-15);
}

TEST(SphericalFinite, LogSumIncreasesWithEta)
{
    const double kr2 = 1.3 * 0.4;
    double prev = -std::numeric_limits<double>::infinity();
    for (double eta = 1.001; eta < 5; eta += 0.01) {
        const double log_sum = kr2 * (eta - 1.0) - spherical_f_finite(eta, 1.3, 0.4, 64);
        EXPECT_GT(log_sum, prev);
        prev = log_sum;
    }
}

TEST(LimitChecks, UnitCombination)
{
    const MeanFieldInputs in{2.0, 0.5, 1.0, 1.0, 1.0}; // alpha beta R^2 / L = 1 at R^2 = 1
    const auto rep = limit_checks(in, 1.0);
    EXPECT_DOUBLE_EQ(rep.energy_limit, 0.5);
    EXPECT_DOUBLE_EQ(rep.entropy_limit, 1.0);
    EXPECT_TRUE(rep.converged);
    EXPECT_LT(rep.energy_rel_error, 1e-3);
    EXPECT_LT(rep.entropy_rel_error, 1e-3);
    EXPECT_EQ(rep.samples.size(), 11u);
    EXPECT_TRUE(rep.monotone);
    // E - S -> -L / (2 alpha beta R^2).
    const auto& last = rep.samples.back();
    EXPECT_NEAR(last.energy - last.entropy, -0.5, 1e-5);
}

TEST(LimitChecks, Homogeneity)
{
    const MeanFieldInputs in{2.0, 0.5, 1.0, 1.0, 1.0};
    const auto a = limit_checks(in, 1.0);
    const auto b = limit_checks(in, 2.0);
    EXPECT_DOUBLE_EQ(b.energy_limit, a.energy_limit / 2);
    EXPECT_DOUBLE_EQ(b.entropy_limit, a.entropy_limit / 2);
}

TEST(LimitChecks, FullScaleStillConverges)
{
    const double r2 = r_squared_3d(kReference);
    const auto rep = limit_checks(kReference, r2);
    EXPECT_TRUE(rep.converged);
}

TEST(Minimiser, GoldenSectionOnQuadratic)
{
    const double x = golden_section_minimize([](double t) { return (t - 1.234) * (t - 1.234) + 3; },
                                             -10, 10, 1e-10);
    EXPECT_NEAR(x, 1.234, 1e-7);
}

TEST(Minimiser, FirstOrderResidualAtUnitInputs)
{
    const MeanFieldInputs in{1, 1, 1, 1, 1};
    const double r2 = free_energy_minimizer_numeric(in);
    // dF/dR^2 scaled by R^2 / (L mu R^2) to be dimensionless.
    EXPECT_LT(std::abs(free_energy_slope(r2, in)) * r2, 1e-10);
    EXPECT_LT(rel(r2, r_squared_3d(in)), 1e-10);
}

TEST(Minimiser, ReferenceParameters)
{
    EXPECT_LT(rel(free_energy_minimizer_numeric(kReference), r_squared_3d(kReference)), 1e-8);
}

TEST(Minimiser, BracketFailureIsReported)
{
    const MeanFieldInputs in{1e7, 1.0, 1e-20, 1.0, 1.0}; // minimum near 2.5e19
    EXPECT_THROW(free_energy_minimizer_numeric(in), DomainError);
}

TEST(GaussianOracle, FourSegmentHandSum)
{
    // alpha beta / delta = 1 and mu delta = 1 with delta = 1.
    const auto g = gaussian_single_filament_oracle(1, 1, 1, 4, 4);
    EXPECT_NEAR(g.r_squared, 7.0 / 12.0, 1e-15);
    // a^2 = (1/4) sum 2(1-cos)/c = (1/4)(0 + 2/2 + 4/3 + 2/2)
    EXPECT_NEAR(g.a_squared, (1.0 + 4.0 / 3.0 + 1.0) / 4.0, 1e-15);
}

TEST(GaussianOracle, StiffLimitIsStraight)
{
    double prev = 1e300;
    for (double alpha = 1; alpha < 1e12; alpha *= 100) {
        const auto g = gaussian_single_filament_oracle(alpha, 1, 1, 4, 16);
        EXPECT_LT(g.a_squared, prev);
        prev = g.a_squared;
    }
    EXPECT_LT(prev, 1e-9);
}

TEST(GaussianOracle, EquipartitionIdentity)
{
    // Every complex mode carries c_i <|psi_i|^2> = 1, which in observables
    // reads (K/2) a^2 + mu delta R^2 = 1.
    for (std::size_t m : {2u, 5u, 64u, 1024u}) {
        const double alpha = 3.0, beta = 0.7, mu = 2.0, l = 5.0;
        const double delta = l / static_cast<double>(m);
        const auto g = gaussian_single_filament_oracle(alpha, beta, mu, l, m);
        EXPECT_NEAR(0.5 * alpha * beta / delta * g.a_squared + mu * delta * g.r_squared, 1.0, 1e-12);
        const auto c = gaussian_mode_coefficients(alpha, beta, mu, l, m);
        double sum = 0.0;
        for (double ci : c)
            sum += ci * (1.0 / ci);
        EXPECT_NEAR(sum, static_cast<double>(m), 1e-9);
    }
}

TEST(GaussianOracle, TwoSegmentQuadrature)
{
    // Gauss-Legendre integration of the M = 2 Gibbs weight. The weight
    // factorises into identical x and y parts, so each moment is a 2-d
    // integral over (x1, x2) and the y part contributes the same amount.
    const double alpha = 2.0, beta = 0.5, mu = 3.0, l = 1.0;
    const double delta = l / 2.0;
    const double k = alpha * beta / delta;
    const double box = 6.0;
    using Rule = boost::math::quadrature::gauss<double, 150>;

    auto weight = [&](double x1, double x2) {
        const double dx = x2 - x1;
        // Two cyclic segments, each |psi2 - psi1|^2 / (2 delta), times alpha beta.
        return std::exp(-k * dx * dx - mu * delta * (x1 * x1 + x2 * x2));
    };
    auto integrate2 = [&](auto f) {
        return Rule::integrate(
            [&](double x1) { return Rule::integrate([&](double x2) { return f(x1, x2); }, -box, box); },
            -box, box);
    };
    const double z = integrate2(weight);
    const double r2 =
        2.0 * integrate2([&](double x1, double x2) { return 0.5 * (x1 * x1 + x2 * x2) * weight(x1, x2); }) / z;
    const double a2 =
        2.0 * integrate2([&](double x1, double x2) { return (x2 - x1) * (x2 - x1) * weight(x1, x2); }) / z;
    const auto g = gaussian_single_filament_oracle(alpha, beta, mu, l, 2);
    EXPECT_NEAR(g.r_squared, r2, 1e-10);
    EXPECT_NEAR(g.a_squared, a2, 1e-10);
}

TEST(GaussianOracle, FullSizeStraightness)
{
    // Interaction-free amplitude for the full-size sweep: the smallest beta
    // leaves segments at roughly 82 degrees to the plane, and a slope of 35
    // is reached near the onset of expansion.
    const double delta = 10.0 / 1024.0;
    const auto low = gaussian_single_filament_oracle(1e7, 1e-3, 2000, 10, 1024);
    const double angle = std::atan2(delta, std::sqrt(low.a_squared)) * 180 / std::numbers::pi;
    EXPECT_NEAR(angle, 82.0, 1.0);

    const auto onset = gaussian_single_filament_oracle(1e7, 0.025, 2000, 10, 1024);
    EXPECT_NEAR(delta / std::sqrt(onset.a_squared), 35.0, 3.5);
}

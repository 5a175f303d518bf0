/**
 * @file meanfield.hpp
 *
 * @brief Closed-form length-scale theory for trapped filaments and the
 * numeric routes used to check it.
 *
 * The center-of-mass mean field plus a spherical constraint on the
 * tau-averaged |psi|^2 reduce the N-filament partition function to
 * a single-filament Gaussian integral. Steepest descent in the constraint's
 * conjugate variable eta, followed by the continuum limit M -> infinity,
 * gives the non-dimensional free energy
 *
 *   F(R^2) = L mu R^2 - (N beta L / 4) log R^2 + L / (2 alpha beta R^2)
 *
 * whose minimiser is r_squared_3d(). The R^2-independent term M log K is
 * dropped from F.
 */

#pragma once

#include "core_model.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vortexfil {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct MeanFieldInputs {
    double alpha = 1.0;
    double beta = 1.0;
    double mu = 1.0;
    double n_filaments = 1.0;
    double big_l = 1.0;

    void validate() const
    {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(mu > 0.0) || !(n_filaments > 0.0)
            || !(big_l > 0.0))
            throw DomainError("mean-field inputs must be strictly positive");
    }
};

inline MeanFieldInputs meanfield_inputs(const SystemParams& p)
{
    return {p.alpha(), p.beta(), p.mu(), static_cast<double>(p.n_filaments()), p.big_l()};
}

/// Point-vortex length scale N beta / (4 mu) (unit circulations).
inline double r_squared_2d(double n_filaments, double beta, double mu)
{
    return n_filaments * beta / (4.0 * mu);
}

/// Positive root of dF/dR^2 = 0.
inline double r_squared_3d(const MeanFieldInputs& in)
{
    in.validate();
    const double a = in.alpha;
    const double b = in.beta;
    const double n = in.n_filaments;
    // b^4 a^2 n^2 is written as a square to stay finite for large alpha.
    const double lead = b * b * a * n;
    return (lead + std::sqrt(lead * lead + 32.0 * a * b * in.mu)) / (8.0 * a * b * in.mu);
}

/// beta at which dR^2/dbeta changes sign: cube root of 4 mu / (alpha N^2).
inline double beta_turning_point(const MeanFieldInputs& in)
{
    in.validate();
    return std::cbrt(4.0 * in.mu / (in.alpha * in.n_filaments * in.n_filaments));
}

/// Non-dimensional free energy at the saddle, as a function of R^2.
inline double free_energy(double r_squared, const MeanFieldInputs& in)
{
    in.validate();
    if (!(r_squared > 0.0))
        throw DomainError("free_energy: R^2 must be positive");
    const double l = in.big_l;
    return l * in.mu * r_squared - 0.25 * in.n_filaments * in.beta * l * std::log(r_squared)
           + l / (2.0 * in.alpha * in.beta * r_squared);
}

/// dF/dR^2.
inline double free_energy_slope(double r_squared, const MeanFieldInputs& in)
{
    const double l = in.big_l;
    return l * in.mu - 0.25 * in.n_filaments * in.beta * l / r_squared
           - l / (2.0 * in.alpha * in.beta * r_squared * r_squared);
}

/// F(R0^2 e^s) - F(R0^2), evaluated without cancellation for small s.
inline double free_energy_shift(double r0_squared, double log_ratio, const MeanFieldInputs& in)
{
    const double l = in.big_l;
    const double trap = l * in.mu * r0_squared;
    const double interaction = 0.25 * in.n_filaments * in.beta * l;
    const double filament = l / (2.0 * in.alpha * in.beta * r0_squared);
    return trap * std::expm1(log_ratio) - interaction * log_ratio
           + filament * std::expm1(-log_ratio);
}

struct SaddleSolution {
    double eta0 = 1.0;
    double k_stiffness = 0.0;
    double f_value = 0.0;
};

/// f[eta] = K R^2 (eta - 1) - log(eta + sqrt(eta^2 - 1)), eta >= 1.
inline double spherical_f_continuum(double eta, double k_stiffness, double r_squared)
{
    if (!(eta >= 1.0))
        throw DomainError("spherical f: eta must be >= 1");
    return k_stiffness * r_squared * (eta - 1.0) - std::acosh(eta);
}

/// Saddle eta0 = sqrt(1/(K R^2)^2 + 1) of f[eta].
inline SaddleSolution saddle_eta0(double k_stiffness, double r_squared)
{
    if (!(k_stiffness > 0.0) || !(r_squared > 0.0))
        throw DomainError("saddle_eta0: K and R^2 must be positive");
    const double x = k_stiffness * r_squared;
    const double eta0 = std::hypot(1.0 / x, 1.0);
    return {eta0, k_stiffness, spherical_f_continuum(eta0, k_stiffness, r_squared)};
}

/// Finite-M spherical-model exponent, i = 2..M (the zero mode is left out):
///   f[eta] = K R^2 (eta - 1) - M^-1 sum_{i=2}^{M} log(eta - cos(2 pi (i-1)/M))
inline double spherical_f_finite(double eta, double k_stiffness, double r_squared, std::size_t m)
{
    if (!(eta > 1.0))
        throw DomainError("spherical_f_finite: eta must exceed 1");
    if (m < 2)
        throw DomainError("spherical_f_finite: M must be at least 2");
    CompensatedSum logs;
    const double md = static_cast<double>(m);
    for (std::size_t i = 1; i < m; ++i)
        logs += std::log(eta - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / md));
    return k_stiffness * r_squared * (eta - 1.0) - logs.value() / md;
}

/// M -> infinity value of spherical_f_finite. The angular average of
/// log(eta - cos w) is log((eta + sqrt(eta^2 - 1)) / 2).
inline double spherical_f_limit(double eta, double k_stiffness, double r_squared)
{
    if (!(eta >= 1.0))
        throw DomainError("spherical_f_limit: eta must be >= 1");
    return k_stiffness * r_squared * (eta - 1.0) - (std::acosh(eta) - std::numbers::ln2);
}

struct LimitSample {
    std::size_t m = 0;
    double energy = 0.0;  ///< M K R^2 (eta0 - 1)
    double entropy = 0.0; ///< M log(eta0 + sqrt(eta0^2 - 1))
};

struct LimitReport {
    std::vector<LimitSample> samples;
    double energy_limit = 0.0;  ///< L / (2 alpha beta R^2)
    double entropy_limit = 0.0; ///< L / (alpha beta R^2)
    double energy_rel_error = 0.0;
    double entropy_rel_error = 0.0;
    bool converged = false;
    bool monotone = true; ///< both sequences monotone in M from M = 2^12 on
};

/// Finite-M filament energy and entropy at the saddle, for K = alpha beta M / L.
inline LimitSample filament_terms_at(const MeanFieldInputs& in, double r_squared, std::size_t m)
{
    const double md = static_cast<double>(m);
    const double x = in.alpha * in.beta * md / in.big_l * r_squared;
    // eta0 - 1 = (1/x^2) / (sqrt(1/x^2 + 1) + 1), free of cancellation.
    const double inv_x2 = 1.0 / (x * x);
    const double eta_minus_one = inv_x2 / (std::sqrt(inv_x2 + 1.0) + 1.0);
    // eta0 + sqrt(eta0^2 - 1) = 1 + (eta0 - 1) + 1/x.
    return {m, md * x * eta_minus_one, md * std::log1p(eta_minus_one + 1.0 / x)};
}

inline LimitReport limit_checks(const MeanFieldInputs& in, double r_squared,
                                unsigned min_log2_m = 10, unsigned max_log2_m = 20,
                                double rel_tol = 1e-3)
{
    in.validate();
    if (!(r_squared > 0.0))
        throw DomainError("limit_checks: R^2 must be positive");
    LimitReport report;
    report.energy_limit = in.big_l / (2.0 * in.alpha * in.beta * r_squared);
    report.entropy_limit = in.big_l / (in.alpha * in.beta * r_squared);
    for (unsigned p = min_log2_m; p <= max_log2_m; ++p)
        report.samples.push_back(filament_terms_at(in, r_squared, std::size_t{1} << p));

    const auto& last = report.samples.back();
    report.energy_rel_error = std::abs(last.energy - report.energy_limit) / report.energy_limit;
    report.entropy_rel_error =
        std::abs(last.entropy - report.entropy_limit) / report.entropy_limit;
    report.converged = report.energy_rel_error <= rel_tol && report.entropy_rel_error <= rel_tol;

    auto monotone = [&](auto field) {
        int sign = 0;
        for (std::size_t i = 1; i < report.samples.size(); ++i) {
            if (report.samples[i].m < (std::size_t{1} << 12))
                continue;
            const double d = field(report.samples[i]) - field(report.samples[i - 1]);
            const int s = (d > 0) - (d < 0);
            if (s != 0 && sign != 0 && s != sign)
                return false;
            if (s != 0)
                sign = s;
        }
        return true;
    };
    report.monotone = monotone([](const LimitSample& s) { return s.energy; })
                      && monotone([](const LimitSample& s) { return s.entropy; });
    return report;
}

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
/// Stops when the bracket is narrower than abs_tol.
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double abs_tol,
                               std::size_t max_iter = 500)
{
    if (!(lo < hi))
        throw std::invalid_argument("golden_section_minimize: empty bracket");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = f(c);
    double fd = f(d);
    for (std::size_t it = 0; it < max_iter && (hi - lo) > abs_tol; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    return 0.5 * (lo + hi);
}

/// Independent numeric minimiser of free_energy() over R^2 in
/// [1e-12, 1e12], searched in log R^2. Each comparison is made on the
/// free-energy difference to the current bracket midpoint so the flat
/// minimum is resolved to full precision.
inline double free_energy_minimizer_numeric(const MeanFieldInputs& in, double lo = 1e-12,
                                            double hi = 1e12, double rel_tol = 1e-12)
{
    in.validate();
    double a = std::log(lo);
    double b = std::log(hi);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

    auto shifted = [&](double u, double centre) {
        return free_energy_shift(std::exp(centre), u - centre, in);
    };

    std::size_t iterations = 0;
    while (b - a > rel_tol && iterations < 400) {
        const double c = b - inv_phi * (b - a);
        const double d = a + inv_phi * (b - a);
        const double centre = 0.5 * (a + b);
        if (shifted(c, centre) < shifted(d, centre))
            b = d;
        else
            a = c;
        ++iterations;
    }
    const double u = 0.5 * (a + b);
    if (u - std::log(lo) < 1.0 || std::log(hi) - u < 1.0) {
        std::ostringstream os;
        os << "free_energy_minimizer_numeric: minimum pinned at bracket edge (R^2 = "
           << std::exp(u) << ", alpha=" << in.alpha << " beta=" << in.beta << " mu=" << in.mu
           << " N=" << in.n_filaments << " L=" << in.big_l << ")";
        throw DomainError(os.str());
    }
    return std::exp(u);
}

struct GaussianFilamentExact {
    double r_squared = 0.0;
    double a_squared = 0.0;
};

/// Exact R^2 and a^2 of one interaction-free filament. The cyclic chain
/// diagonalises in Fourier modes with per-mode coefficient
///   c_i = (alpha beta / delta)(1 - cos theta_i) + mu delta,
/// and each complex mode has <|psi_i|^2> = 1 / c_i.
inline GaussianFilamentExact gaussian_single_filament_oracle(double alpha, double beta, double mu,
                                                             double big_l, std::size_t m)
{
    if (!(alpha > 0.0) || !(beta > 0.0) || !(mu > 0.0) || !(big_l > 0.0) || m < 2)
        throw DomainError("gaussian oracle: inputs must be positive and M >= 2");
    const double md = static_cast<double>(m);
    const double delta = big_l / md;
    const double k = alpha * beta / delta;
    CompensatedSum r2;
    CompensatedSum a2;
    for (std::size_t i = 0; i < m; ++i) {
        const double one_minus_cos =
            2.0 * std::pow(std::sin(std::numbers::pi * static_cast<double>(i) / md), 2);
        const double c = k * one_minus_cos + mu * delta;
        r2 += 1.0 / c;
        a2 += 2.0 * one_minus_cos / c;
    }
    return {r2.value() / md, a2.value() / md};
}

/// Per-mode coefficients c_i of the single-filament Gaussian.
inline std::vector<double> gaussian_mode_coefficients(double alpha, double beta, double mu,
                                                      double big_l, std::size_t m)
{
    const double md = static_cast<double>(m);
    const double delta = big_l / md;
    std::vector<double> c(m);
    for (std::size_t i = 0; i < m; ++i)
        c[i] = alpha * beta / delta
                   * 2.0 * std::pow(std::sin(std::numbers::pi * static_cast<double>(i) / md), 2)
               + mu * delta;
    return c;
}

} // namespace vortexfil

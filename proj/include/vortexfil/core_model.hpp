/**
 * @file core_model.hpp
 *
 * @brief Broken-segment model of N nearly parallel vortex filaments.
 *
 * Each filament is a closed ring of M beads spaced delta = L/M apart along
 * the z axis; bead k of filament i sits at the planar position psi_i(k).
 * Index arithmetic along a filament is cyclic, psi(M+1) == psi(1).
 *
 * The Gibbs weight of a state is exp(-beta*(kinetic + interaction) - mu*I)
 * with
 *
 *   kinetic     = alpha * sum_i sum_k |psi_i(k+1) - psi_i(k)|^2 / (2 delta)
 *   interaction = - sum_{i<j} sum_k delta * log|psi_i(k) - psi_j(k)|
 *   I           = sum_i sum_k delta * |psi_i(k)|^2
 *
 * All circulations are fixed to one.
 */

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vortexfil {

/// Planar bead position x + iy.
using PlanarPoint = std::complex<double>;

/// Closest approach allowed between same-plane beads before a state is
/// treated as singular.
inline constexpr double kDefaultMinSeparation = 1e-12;

/// Raised when two beads of different filaments in the same plane come
/// closer than the minimum separation.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double value) noexcept
    {
        const double t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value))
            compensation_ += (sum_ - t) + value;
        else
            compensation_ += (value - t) + sum_;
        sum_ = t;
    }

    CompensatedSum& operator+=(double value) noexcept
    {
        add(value);
        return *this;
    }

    [[nodiscard]] double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

/// Physical and discretisation parameters of the filament system.
class SystemParams {
public:
    SystemParams() = default;

    SystemParams(double alpha, double beta, double mu, double big_l,
                 std::size_t n_filaments, std::size_t n_segments)
        : alpha_(alpha), beta_(beta), mu_(mu), big_l_(big_l),
          n_filaments_(n_filaments), n_segments_(n_segments)
    {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(mu > 0.0) || !(big_l > 0.0))
            throw std::invalid_argument("SystemParams: alpha, beta, mu and L must be positive");
        if (n_filaments < 1)
            throw std::invalid_argument("SystemParams: need at least one filament");
        if (n_segments < 2)
            throw std::invalid_argument("SystemParams: need at least two segments per filament");
    }

    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double mu() const noexcept { return mu_; }
    [[nodiscard]] double big_l() const noexcept { return big_l_; }
    [[nodiscard]] std::size_t n_filaments() const noexcept { return n_filaments_; }
    [[nodiscard]] std::size_t n_segments() const noexcept { return n_segments_; }

    /// Axial bead spacing L/M; always derived, never stored.
    [[nodiscard]] double delta() const noexcept
    {
        return big_l_ / static_cast<double>(n_segments_);
    }

    /// Chain stiffness alpha*beta/delta.
    [[nodiscard]] double stiffness() const noexcept { return alpha_ * beta_ / delta(); }

    [[nodiscard]] SystemParams with_beta(double beta) const
    {
        return {alpha_, beta, mu_, big_l_, n_filaments_, n_segments_};
    }

    friend bool operator==(const SystemParams&, const SystemParams&) = default;

private:
    double alpha_ = 1.0;
    double beta_ = 1.0;
    double mu_ = 1.0;
    double big_l_ = 1.0;
    std::size_t n_filaments_ = 1;
    std::size_t n_segments_ = 2;
};

/// One closed filament: M beads, cyclic.
struct Filament {
    std::vector<PlanarPoint> beads;

    [[nodiscard]] std::size_t size() const noexcept { return beads.size(); }

    /// Bead at cyclic index k (any integer offset is folded into [0, M)).
    [[nodiscard]] const PlanarPoint& at_cyclic(std::ptrdiff_t k) const
    {
        const auto m = static_cast<std::ptrdiff_t>(beads.size());
        return beads[static_cast<std::size_t>(((k % m) + m) % m)];
    }

    friend bool operator==(const Filament&, const Filament&) = default;
};

/// Straight filament: all M beads at the same planar point.
inline Filament straight_filament(PlanarPoint where, std::size_t n_segments)
{
    return Filament{std::vector<PlanarPoint>(n_segments, where)};
}

struct SystemState {
    std::vector<Filament> filaments;

    [[nodiscard]] std::size_t n_filaments() const noexcept { return filaments.size(); }

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Energy terms kept apart so acceptance rules can weight them separately.
struct EnergyBreakdown {
    double kinetic = 0.0;
    double interaction = 0.0;
    double angular_momentum = 0.0;

    /// H = kinetic + interaction.
    [[nodiscard]] double hamiltonian() const noexcept { return kinetic + interaction; }

    /// -beta*H - mu*I.
    [[nodiscard]] double gibbs_exponent(const SystemParams& p) const noexcept
    {
        return -p.beta() * (kinetic + interaction) - p.mu() * angular_momentum;
    }

    EnergyBreakdown& operator+=(const EnergyBreakdown& o) noexcept
    {
        kinetic += o.kinetic;
        interaction += o.interaction;
        angular_momentum += o.angular_momentum;
        return *this;
    }

    friend EnergyBreakdown operator+(EnergyBreakdown a, const EnergyBreakdown& b) noexcept
    {
        return a += b;
    }

    friend EnergyBreakdown operator-(const EnergyBreakdown& a, const EnergyBreakdown& b) noexcept
    {
        return {a.kinetic - b.kinetic, a.interaction - b.interaction,
                a.angular_momentum - b.angular_momentum};
    }
};

/// Contiguous cyclic run of beads on one filament: first, first+1, ...,
/// first+count-1 (mod M).
struct BeadRange {
    std::size_t first = 0;
    std::size_t count = 0;
};

namespace detail {

inline void check_dimensions(const SystemState& state, const SystemParams& params)
{
    if (state.n_filaments() != params.n_filaments())
        throw std::invalid_argument("state has " + std::to_string(state.n_filaments())
                                    + " filaments, params expect "
                                    + std::to_string(params.n_filaments()));
    for (const auto& f : state.filaments)
        if (f.size() != params.n_segments())
            throw std::invalid_argument("filament has " + std::to_string(f.size())
                                        + " beads, params expect "
                                        + std::to_string(params.n_segments()));
}

inline double pair_log_distance(PlanarPoint a, PlanarPoint b, double min_separation)
{
    const double d = std::abs(a - b);
    if (!(d >= min_separation))
        throw SingularityError("beads closer than minimum separation ("
                               + std::to_string(d) + ")");
    return std::log(d);
}

inline std::size_t wrap(std::ptrdiff_t k, std::size_t m)
{
    const auto mm = static_cast<std::ptrdiff_t>(m);
    return static_cast<std::size_t>(((k % mm) + mm) % mm);
}

} // namespace detail

/// Full evaluation of the three energy terms.
inline EnergyBreakdown total_energy(const SystemState& state, const SystemParams& params,
                                    double min_separation = kDefaultMinSeparation)
{
    detail::check_dimensions(state, params);
    const std::size_t n = params.n_filaments();
    const std::size_t m = params.n_segments();
    const double delta = params.delta();

    CompensatedSum kinetic;
    CompensatedSum interaction;
    CompensatedSum angular;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& beads = state.filaments[i].beads;
        for (std::size_t k = 0; k < m; ++k) {
            const PlanarPoint next = beads[(k + 1) % m];
            kinetic += std::norm(next - beads[k]);
            angular += std::norm(beads[k]);
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& other = state.filaments[j].beads;
            for (std::size_t k = 0; k < m; ++k)
                interaction += detail::pair_log_distance(beads[k], other[k], min_separation);
        }
    }
    return {0.5 * params.alpha() / delta * kinetic.value(),
            -delta * interaction.value(),
            delta * angular.value()};
}

/// Change in each energy term when filament `index` is rigidly shifted by
/// `displacement`. Kinetic change is exactly zero.
inline EnergyBreakdown delta_energy_translate(const SystemState& state, const SystemParams& params,
                                              std::size_t index, PlanarPoint displacement,
                                              double min_separation = kDefaultMinSeparation)
{
    if (index >= state.n_filaments())
        throw std::out_of_range("filament index out of range");
    const std::size_t m = params.n_segments();
    const double delta = params.delta();
    const auto& beads = state.filaments[index].beads;

    double d_log = 0.0;
    double d_norm = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const PlanarPoint moved = beads[k] + displacement;
        d_norm += std::norm(moved) - std::norm(beads[k]);
        for (std::size_t j = 0; j < state.n_filaments(); ++j) {
            if (j == index)
                continue;
            const PlanarPoint other = state.filaments[j].beads[k];
            d_log += detail::pair_log_distance(moved, other, min_separation)
                     - std::log(std::abs(beads[k] - other));
        }
    }
    return {0.0, -delta * d_log, delta * d_norm};
}

/// Change in each energy term when the beads in `range` of filament `index`
/// are replaced by `new_beads`. The beads just outside the range stay fixed.
inline EnergyBreakdown delta_energy_regrow(const SystemState& state, const SystemParams& params,
                                           std::size_t index, BeadRange range,
                                           std::span<const PlanarPoint> new_beads,
                                           double min_separation = kDefaultMinSeparation)
{
    if (index >= state.n_filaments())
        throw std::out_of_range("filament index out of range");
    const std::size_t m = params.n_segments();
    if (range.count == 0 || range.count + 1 > m || range.first >= m)
        throw std::invalid_argument("regrow range must leave at least one fixed bead");
    if (new_beads.size() != range.count)
        throw std::invalid_argument("regrow bead count does not match range");

    const double delta = params.delta();
    const auto& beads = state.filaments[index].beads;
    const auto first = static_cast<std::ptrdiff_t>(range.first);
    const auto count = static_cast<std::ptrdiff_t>(range.count);

    auto old_at = [&](std::ptrdiff_t k) { return beads[detail::wrap(k, m)]; };
    auto new_at = [&](std::ptrdiff_t k) {
        const std::ptrdiff_t off = k - first;
        return (off >= 0 && off < count) ? new_beads[static_cast<std::size_t>(off)] : old_at(k);
    };

    // Segments (k, k+1) for k = first-1 .. first+count-1 touch the range.
    double d_kin = 0.0;
    for (std::ptrdiff_t k = first - 1; k < first + count; ++k)
        d_kin += std::norm(new_at(k + 1) - new_at(k)) - std::norm(old_at(k + 1) - old_at(k));

    double d_log = 0.0;
    double d_norm = 0.0;
    for (std::ptrdiff_t off = 0; off < count; ++off) {
        const std::size_t k = detail::wrap(first + off, m);
        const PlanarPoint fresh = new_beads[static_cast<std::size_t>(off)];
        d_norm += std::norm(fresh) - std::norm(beads[k]);
        for (std::size_t j = 0; j < state.n_filaments(); ++j) {
            if (j == index)
                continue;
            const PlanarPoint other = state.filaments[j].beads[k];
            d_log += detail::pair_log_distance(fresh, other, min_separation)
                     - std::log(std::abs(beads[k] - other));
        }
    }
    return {0.5 * params.alpha() / delta * d_kin, -delta * d_log, delta * d_norm};
}

/// (MN)^-1 sum_i sum_k |psi_i(k)|^2.
inline double mean_square_position(const SystemState& state, const SystemParams& params)
{
    detail::check_dimensions(state, params);
    CompensatedSum sum;
    for (const auto& f : state.filaments)
        for (const auto& b : f.beads)
            sum += std::norm(b);
    return sum.value() / static_cast<double>(params.n_filaments() * params.n_segments());
}

/// (MN)^-1 sum_i sum_k |psi_i(k) - psi_i(k+1)|^2, cyclic.
inline double mean_square_amplitude(const SystemState& state, const SystemParams& params)
{
    detail::check_dimensions(state, params);
    const std::size_t m = params.n_segments();
    CompensatedSum sum;
    for (const auto& f : state.filaments)
        for (std::size_t k = 0; k < m; ++k)
            sum += std::norm(f.beads[k] - f.beads[(k + 1) % m]);
    return sum.value() / static_cast<double>(params.n_filaments() * m);
}

/// delta / a for a given mean square amplitude; +inf for straight filaments.
inline double slope_from_amplitude(double mean_square_amp, double delta) noexcept
{
    if (!(mean_square_amp > 0.0))
        return std::numeric_limits<double>::infinity();
    return delta / std::sqrt(mean_square_amp);
}

inline double mean_slope(const SystemState& state, const SystemParams& params)
{
    return slope_from_amplitude(mean_square_amplitude(state, params), params.delta());
}

} // namespace vortexfil

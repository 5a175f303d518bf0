/**
 * @file sampler.hpp
 *
 * @brief Metropolis path-integral sampler over the filament Gibbs measure.
 *
 * Two moves, picked with equal probability:
 *   - translate: a uniform-disc displacement of one filament (rigid by
 *     default, or of bead 0 only);
 *   - regrow: bisection regrowth of a window of 2^level segments of one
 *     filament with its two end beads held fixed.
 *
 * In bridge mode the regrow move draws each midpoint from the Brownian
 * bridge of the kinetic action, so the kinetic factor cancels against the
 * proposal ratio and only the interaction and trap terms enter acceptance.
 * In naive mode interior beads get independent uniform-disc kicks and the
 * full change of beta*H + mu*I is used.
 */

#pragma once

#include "core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vortexfil {

enum class ProposalMode { bridge, naive };
enum class TranslateMove { rigid, single_bead };

inline std::string to_string(ProposalMode m) { return m == ProposalMode::bridge ? "bridge" : "naive"; }
inline std::string to_string(TranslateMove m)
{
    return m == TranslateMove::rigid ? "rigid" : "single_bead";
}

struct SamplerConfig {
    std::uint64_t seed = 1;
    std::size_t sweeps_total = 1000;
    std::size_t sweeps_burnin = 100;
    unsigned max_bisection_level = 1;
    double translate_radius = 0.1;
    ProposalMode mode = ProposalMode::bridge;
    TranslateMove translate_move = TranslateMove::rigid;
    double min_separation = kDefaultMinSeparation;
    /// Side of the square the initial filament positions are drawn from.
    double init_side = 10.0;

    /// Checks the config against a system with `n_segments` beads per filament.
    void validate(std::size_t n_segments) const
    {
        if (sweeps_burnin > sweeps_total)
            throw std::invalid_argument("sampler: sweeps_burnin exceeds sweeps_total");
        if (max_bisection_level < 1 || max_bisection_level > 30
            || (std::size_t{1} << max_bisection_level) >= n_segments)
            throw std::invalid_argument("sampler: need 1 <= max_bisection_level and 2^level < M");
        if (!(translate_radius >= 0.0) || !std::isfinite(translate_radius))
            throw std::invalid_argument("sampler: translate_radius must be finite and >= 0");
        if (!(min_separation > 0.0))
            throw std::invalid_argument("sampler: min_separation must be positive");
        if (!(init_side >= 0.0))
            throw std::invalid_argument("sampler: init_side must be >= 0");
    }

    friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct MoveCounter {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;

    [[nodiscard]] double rate() const noexcept
    {
        return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    }
};

struct AcceptanceStats {
    MoveCounter translate;
    MoveCounter regrow;
};

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform point in the disc of the given radius.
inline PlanarPoint uniform_disc(Rng& rng, double radius)
{
    const double r = radius * std::sqrt(uniform01(rng));
    const double phi = 2.0 * std::numbers::pi * uniform01(rng);
    return std::polar(r, phi);
}

/// Log of the Metropolis ratio. `count_kinetic` is false for bridge regrows.
inline double acceptance_exponent(const EnergyBreakdown& delta, const SystemParams& params,
                                  bool count_kinetic = true) noexcept
{
    const double dh = (count_kinetic ? delta.kinetic : 0.0) + delta.interaction;
    return -params.beta() * dh - params.mu() * delta.angular_momentum;
}

inline double acceptance_probability(const EnergyBreakdown& delta, const SystemParams& params,
                                     bool count_kinetic = true) noexcept
{
    const double x = acceptance_exponent(delta, params, count_kinetic);
    if (std::isnan(x) || x < -700.0)
        return 0.0;
    return x >= 0.0 ? 1.0 : std::exp(x);
}

/// u < min{1, exp(exponent)}.
inline bool metropolis_accept(const EnergyBreakdown& delta, const SystemParams& params, double u,
                              bool count_kinetic = true) noexcept
{
    const double x = acceptance_exponent(delta, params, count_kinetic);
    if (x >= 0.0)
        return true;
    if (std::isnan(x) || x < -700.0)
        return false;
    return u < std::exp(x);
}

struct TranslateProposal {
    std::size_t filament = 0;
    PlanarPoint displacement{};
};

struct RegrowProposal {
    std::size_t filament = 0;
    BeadRange range;
    std::vector<PlanarPoint> new_beads;
};

inline std::size_t pick_filament(const SystemState& state, Rng& rng)
{
    return std::uniform_int_distribution<std::size_t>(0, state.n_filaments() - 1)(rng);
}

inline TranslateProposal propose_translate(const SystemState& state, const SamplerConfig& config,
                                           Rng& rng)
{
    TranslateProposal p;
    p.filament = pick_filament(state, rng);
    p.displacement = uniform_disc(rng, config.translate_radius);
    return p;
}

/// Bisection regrowth of a window of 2^level segments anchored uniformly at
/// random. Returns the 2^level - 1 interior beads in window order.
inline RegrowProposal propose_bisection_regrow(const SystemState& state,
                                               const SystemParams& params,
                                               const SamplerConfig& config, Rng& rng)
{
    const std::size_t m = params.n_segments();
    const unsigned level = config.max_bisection_level;
    const std::size_t span = std::size_t{1} << level;
    if (span >= m)
        throw std::invalid_argument("bisection window must be shorter than the filament");

    RegrowProposal p;
    p.filament = pick_filament(state, rng);
    const std::size_t anchor = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    p.range = {(anchor + 1) % m, span - 1};

    const auto& beads = state.filaments[p.filament].beads;
    // window[0] and window[span] are the fixed ends.
    std::vector<PlanarPoint> window(span + 1);
    for (std::size_t s = 0; s <= span; ++s)
        window[s] = beads[(anchor + s) % m];

    if (config.mode == ProposalMode::bridge) {
        const double delta = params.delta();
        const double two_alpha_beta = 2.0 * params.alpha() * params.beta();
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t half = span / 2; half >= 1; half /= 2) {
            const double sigma = std::sqrt(static_cast<double>(half) * delta / two_alpha_beta);
            for (std::size_t s = half; s < span; s += 2 * half) {
                const PlanarPoint mean = 0.5 * (window[s - half] + window[s + half]);
                const double gx = gauss(rng);
                const double gy = gauss(rng);
                window[s] = mean + sigma * PlanarPoint(gx, gy);
            }
        }
    } else {
        for (std::size_t s = 1; s < span; ++s)
            window[s] += uniform_disc(rng, config.translate_radius);
    }
    p.new_beads.assign(window.begin() + 1, window.end() - 1);
    return p;
}

/// One Markov chain: state, running energies, RNG and counters.
class Chain {
public:
    Chain(SystemParams params, SamplerConfig config, SystemState initial)
        : params_(params), config_(config), state_(std::move(initial)), rng_(config.seed)
    {
        config_.validate(params_.n_segments());
        energy_ = total_energy(state_, params_, config_.min_separation);
    }

    /// Chain started from straight filaments with positions uniform in a
    /// square of side config.init_side centred on the origin.
    static Chain from_random_start(SystemParams params, SamplerConfig config)
    {
        Rng init_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
        SystemState state;
        const double half = 0.5 * config.init_side;
        std::uniform_real_distribution<double> coord(-half, half);
        for (std::size_t i = 0; i < params.n_filaments(); ++i) {
            const double x = coord(init_rng);
            const double y = coord(init_rng);
            state.filaments.push_back(straight_filament({x, y}, params.n_segments()));
        }
        return Chain(params, config, std::move(state));
    }

    [[nodiscard]] const SystemState& state() const noexcept { return state_; }
    [[nodiscard]] const SystemParams& params() const noexcept { return params_; }
    [[nodiscard]] const SamplerConfig& config() const noexcept { return config_; }
    [[nodiscard]] const AcceptanceStats& stats() const noexcept { return stats_; }
    [[nodiscard]] const EnergyBreakdown& energy() const noexcept { return energy_; }
    [[nodiscard]] Rng& rng() noexcept { return rng_; }

    /// H + (mu/beta) I of the current state, from the running energies.
    [[nodiscard]] double cumulative_energy_term() const noexcept
    {
        return energy_.hamiltonian() + params_.mu() / params_.beta() * energy_.angular_momentum;
    }

    /// Current separation threshold: min_separation * max(1, R).
    [[nodiscard]] double separation_threshold() const noexcept
    {
        const double r2 = energy_.angular_momentum
                          / (params_.big_l() * static_cast<double>(params_.n_filaments()));
        return config_.min_separation * std::max(1.0, std::sqrt(std::max(r2, 0.0)));
    }

    /// One translate attempt. Returns true when accepted.
    bool attempt_translate()
    {
        ++stats_.translate.proposed;
        const TranslateProposal p = propose_translate(state_, config_, rng_);
        const double u = uniform01(rng_);
        auto& beads = state_.filaments[p.filament].beads;
        try {
            if (config_.translate_move == TranslateMove::rigid) {
                const EnergyBreakdown d = delta_energy_translate(state_, params_, p.filament,
                                                                 p.displacement,
                                                                 separation_threshold());
                if (!metropolis_accept(d, params_, u))
                    return false;
                for (auto& b : beads)
                    b += p.displacement;
                energy_ += d;
            } else {
                const PlanarPoint moved = beads[0] + p.displacement;
                const EnergyBreakdown d =
                    delta_energy_regrow(state_, params_, p.filament, {0, 1},
                                        std::span<const PlanarPoint>(&moved, 1),
                                        separation_threshold());
                if (!metropolis_accept(d, params_, u))
                    return false;
                beads[0] = moved;
                energy_ += d;
            }
        } catch (const SingularityError&) {
            return false;
        }
        ++stats_.translate.accepted;
        return true;
    }

    /// One bisection regrow attempt. Returns true when accepted.
    bool attempt_regrow()
    {
        ++stats_.regrow.proposed;
        RegrowProposal p = propose_bisection_regrow(state_, params_, config_, rng_);
        const double u = uniform01(rng_);
        try {
            const EnergyBreakdown d = delta_energy_regrow(state_, params_, p.filament, p.range,
                                                          p.new_beads, separation_threshold());
            const bool count_kinetic = config_.mode == ProposalMode::naive;
            if (!metropolis_accept(d, params_, u, count_kinetic))
                return false;
            auto& beads = state_.filaments[p.filament].beads;
            for (std::size_t s = 0; s < p.new_beads.size(); ++s)
                beads[(p.range.first + s) % params_.n_segments()] = p.new_beads[s];
            energy_ += d;
        } catch (const SingularityError&) {
            return false;
        }
        ++stats_.regrow.accepted;
        return true;
    }

    /// N move attempts, each a translate or a regrow with probability 1/2.
    void sweep()
    {
        for (std::size_t n = 0; n < params_.n_filaments(); ++n) {
            if (uniform01(rng_) < 0.5)
                attempt_translate();
            else
                attempt_regrow();
        }
    }

    /// Recompute energies from scratch; returns the drift that was removed.
    EnergyBreakdown resync()
    {
        const EnergyBreakdown fresh = total_energy(state_, params_, 0.0);
        const EnergyBreakdown drift = energy_ - fresh;
        energy_ = fresh;
        return drift;
    }

private:
    SystemParams params_;
    SamplerConfig config_;
    SystemState state_;
    Rng rng_;
    EnergyBreakdown energy_;
    AcceptanceStats stats_;
};

/// Free-function form of Chain::sweep.
inline void sweep(Chain& chain) { chain.sweep(); }

/// E_cum^k = k^-1 sum_{i<=k} e_i, where e_i = H(s_i) + (mu/beta) I(s_i).
inline std::vector<double> cumulative_energy_mean(std::span<const double> energies)
{
    if (energies.empty())
        throw std::invalid_argument("cumulative_energy_mean: empty trace");
    std::vector<double> out(energies.size());
    CompensatedSum sum;
    for (std::size_t k = 0; k < energies.size(); ++k) {
        sum += energies[k];
        out[k] = sum.value() / static_cast<double>(k + 1);
    }
    return out;
}

/// First k (1-based count of samples seen) at which the trailing `window`
/// values of E_cum vary by at most rel_tol * (1 + |E_cum^k|); 0 if none.
inline std::size_t equilibration_index(std::span<const double> cumulative, std::size_t window,
                                       double rel_tol)
{
    if (window < 2)
        throw std::invalid_argument("equilibration_index: window must be >= 2");
    for (std::size_t k = window; k <= cumulative.size(); ++k) {
        const auto tail = cumulative.subspan(k - window, window);
        const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
        if (*hi - *lo <= rel_tol * (1.0 + std::abs(cumulative[k - 1])))
            return k;
    }
    return 0;
}

/// Streaming version of equilibration_index for use inside a running chain.
class EquilibrationDetector {
public:
    EquilibrationDetector(std::size_t window, double rel_tol) : window_(window), rel_tol_(rel_tol)
    {
        if (window < 2)
            throw std::invalid_argument("equilibration window must be >= 2");
    }

    /// Feed the next energy sample; returns true once settled.
    bool push(double energy)
    {
        sum_ += energy;
        ++count_;
        const double mean = sum_.value() / static_cast<double>(count_);
        tail_.push_back(mean);
        if (tail_.size() > window_)
            tail_.pop_front();
        if (tail_.size() < window_)
            return false;
        const auto [lo, hi] = std::minmax_element(tail_.begin(), tail_.end());
        return *hi - *lo <= rel_tol_ * (1.0 + std::abs(mean));
    }

    [[nodiscard]] std::size_t count() const noexcept { return count_; }

private:
    std::size_t window_;
    double rel_tol_;
    std::size_t count_ = 0;
    CompensatedSum sum_;
    std::deque<double> tail_;
};

} // namespace vortexfil

/**
 * @file observables.hpp
 *
 * @brief Trace records, streaming moments, blocked error bars and the
 * straightness diagnostic.
 */

#pragma once

#include "core_model.hpp"
#include "sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace vortexfil {

/// One per-sweep sample of the observables.
struct TraceRecord {
    std::size_t sweep_index = 0;
    double r_squared = 0.0;
    double a_squared = 0.0;
    double kinetic = 0.0;
    double interaction = 0.0;
    double angular_momentum = 0.0;
    AcceptanceStats acceptance;
};

inline TraceRecord record_of(const Chain& chain, std::size_t sweep_index)
{
    return {sweep_index,
            mean_square_position(chain.state(), chain.params()),
            mean_square_amplitude(chain.state(), chain.params()),
            chain.energy().kinetic,
            chain.energy().interaction,
            chain.energy().angular_momentum,
            chain.stats()};
}

/// Welford accumulator; merge() uses the pairwise update of Chan et al.
class RunningStats {
public:
    void accumulate(double x)
    {
        if (!std::isfinite(x))
            throw std::invalid_argument("RunningStats: non-finite sample");
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
    }

    void merge(const RunningStats& o)
    {
        if (o.count_ == 0)
            return;
        if (count_ == 0) {
            *this = o;
            return;
        }
        const double n1 = static_cast<double>(count_);
        const double n2 = static_cast<double>(o.count_);
        const double n = n1 + n2;
        const double d = o.mean_ - mean_;
        mean_ += d * n2 / n;
        m2_ += o.m2_ + d * d * n1 * n2 / n;
        count_ += o.count_;
    }

    [[nodiscard]] std::size_t count() const noexcept { return count_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }
    [[nodiscard]] double second_moment() const noexcept { return m2_; }

    /// Unbiased sample variance; 0 with fewer than two samples.
    [[nodiscard]] double variance() const noexcept
    {
        return count_ < 2 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(count_ - 1));
    }

    /// Naive standard error of the mean (ignores correlations).
    [[nodiscard]] double standard_error() const noexcept
    {
        return count_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count_));
    }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline RunningStats& accumulate(RunningStats& stats, double sample)
{
    stats.accumulate(sample);
    return stats;
}

struct BlockLevel {
    std::size_t block_size = 0;
    std::size_t n_blocks = 0;
    double error = 0.0;
};

struct BlockedError {
    std::vector<BlockLevel> levels;
    /// Error at the largest block size that still has >= 16 blocks.
    double plateau = 0.0;
    double mean = 0.0;
};

inline constexpr std::size_t kMinBlocks = 16;

/// Standard error of the mean from block means at block sizes 1, 2, 4, ...
/// as long as at least 16 blocks remain.
inline BlockedError blocked_error(std::span<const double> column)
{
    if (column.size() < kMinBlocks)
        throw std::invalid_argument("blocked_error: need at least 16 samples");
    BlockedError out;
    RunningStats all;
    for (double x : column)
        all.accumulate(x);
    out.mean = all.mean();

    for (std::size_t bs = 1; column.size() / bs >= kMinBlocks; bs *= 2) {
        const std::size_t nb = column.size() / bs;
        RunningStats means;
        for (std::size_t b = 0; b < nb; ++b) {
            CompensatedSum s;
            for (std::size_t i = 0; i < bs; ++i)
                s += column[b * bs + i];
            means.accumulate(s.value() / static_cast<double>(bs));
        }
        out.levels.push_back({bs, nb, means.standard_error()});
    }
    out.plateau = out.levels.back().error;
    return out;
}

struct StraightnessReport {
    double mean_a_squared = 0.0;
    double a = 0.0;         ///< sqrt of the mean square amplitude
    double ratio = 0.0;     ///< a / delta
    double slope = 0.0;     ///< delta / a, +inf when straight
    double angle_deg = 90.0; ///< atan(delta / a) w.r.t. the plane
    double threshold = 0.1;
    bool violation = false; ///< a >= threshold * delta
};

/// Straightness summary for a given mean square amplitude.
inline StraightnessReport straightness_from_amplitude(double mean_a_squared, double delta,
                                                      double threshold = 0.1)
{
    StraightnessReport r;
    r.mean_a_squared = mean_a_squared;
    r.a = std::sqrt(std::max(0.0, mean_a_squared));
    r.ratio = r.a / delta;
    r.slope = slope_from_amplitude(mean_a_squared, delta);
    r.angle_deg = std::atan2(delta, r.a) * 180.0 / std::numbers::pi;
    r.threshold = threshold;
    r.violation = r.a >= threshold * delta;
    return r;
}

inline StraightnessReport straightness_report(std::span<const TraceRecord> trace,
                                              const SystemParams& params, double threshold = 0.1)
{
    if (trace.empty())
        throw std::invalid_argument("straightness_report: empty trace");
    RunningStats a2;
    for (const auto& t : trace)
        a2.accumulate(t.a_squared);
    return straightness_from_amplitude(a2.mean(), params.delta(), threshold);
}

} // namespace vortexfil

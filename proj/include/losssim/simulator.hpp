#pragma once

// Packet-level simulation of a drop-tail buffer fed by renewal traffic and
// drained at a constant rate.
//
// State is kept in integer quanta: occupancy in units of 2^-36 of the buffer
// and time in units of eta0 * 2^-36, so one tick drains one quantum. Every
// accumulated quantity is an exact integer and the conservation identity
// holds without rounding.

#include "losssim/errors.hpp"
#include "losssim/fokker_planck.hpp"
#include "losssim/model.hpp"
#include "losssim/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace losssim
{

inline constexpr int kQuantumBits = 36;
inline constexpr std::int64_t kFullBuffer = std::int64_t{1} << kQuantumBits;
inline constexpr double kQuantum = 1.0 / static_cast<double>(kFullBuffer);
inline constexpr int kHistogramBins = 200;

/// Coarse increments used to estimate drift and diffusion are this many mean gaps long.
inline constexpr double kIncrementGaps = 50.0;
inline constexpr double kIncrementLow = 0.1;
inline constexpr double kIncrementHigh = 0.9;

struct RunConfig
{
    TrafficModel traffic{};
    /// Total simulated time, warmup included.
    double duration = 1e4;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    /// Starting occupancy; empty means a draw from the stationary law.
    std::optional<double> initial_ell = 0.0;
    /// Discarded prefix; empty means 10 relaxation times for a fixed start and 0 otherwise.
    std::optional<double> warmup;
    /// Length of the base measurement window.
    double window_length = 1.0;
};

struct WindowRecord
{
    std::int64_t lost = 0;         ///< quanta
    std::int64_t idle = 0;         ///< ticks of unused service
    std::uint32_t arrived = 0;
    std::uint32_t dropped = 0;
    std::int64_t end_occupancy = 0; ///< quanta, left limit at the window end
};

static_assert(sizeof(WindowRecord) == 32);

/// Consecutive half-open windows [t_start, t_end) covering the measured part of a run.
class WindowSeries
{
public:
    WindowSeries() = default;
    WindowSeries(double window_length, double t0, std::int64_t start_occupancy)
        : window_length_(window_length), t0_(t0), start_occupancy_(start_occupancy)
    {
    }

    std::size_t size() const { return records_.size(); }
    double window_length() const { return window_length_; }
    double t_start(std::size_t i) const { return t0_ + static_cast<double>(i) * window_length_; }
    double t_end(std::size_t i) const { return t_start(i + 1); }

    double lost_traffic(std::size_t i) const { return static_cast<double>(records_[i].lost) * kQuantum; }
    double idle_deficit(std::size_t i) const { return static_cast<double>(records_[i].idle) * kQuantum; }
    double end_occupancy(std::size_t i) const { return static_cast<double>(records_[i].end_occupancy) * kQuantum; }
    /// Occupancy at the start of window i.
    double start_occupancy(std::size_t i) const
    {
        return i == 0 ? static_cast<double>(start_occupancy_) * kQuantum : end_occupancy(i - 1);
    }
    const WindowRecord& record(std::size_t i) const { return records_[i]; }
    const std::vector<WindowRecord>& records() const { return records_; }

    void push(const WindowRecord& r) { records_.push_back(r); }
    void reserve(std::size_t n) { records_.reserve(n); }

    /// Merges runs of `factor` consecutive windows; a trailing remainder is dropped.
    WindowSeries coarsen(std::size_t factor) const
    {
        require(factor >= 1, "coarsening factor must be >= 1");
        WindowSeries out(window_length_ * static_cast<double>(factor), t0_, start_occupancy_);
        out.reserve(records_.size() / factor);
        for (std::size_t i = 0; i + factor <= records_.size(); i += factor)
        {
            WindowRecord r;
            for (std::size_t j = i; j < i + factor; ++j)
            {
                r.lost += records_[j].lost;
                r.idle += records_[j].idle;
                r.arrived += records_[j].arrived;
                r.dropped += records_[j].dropped;
            }
            r.end_occupancy = records_[i + factor - 1].end_occupancy;
            out.push(r);
        }
        return out;
    }

private:
    double window_length_ = 0.0;
    double t0_ = 0.0;
    std::int64_t start_occupancy_ = 0;
    std::vector<WindowRecord> records_;
};

/// Running mean and variance.
struct Welford
{
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++count;
        const double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Coarse occupancy increments of length `dt`.
struct IncrementStats
{
    double dt = 0.0;
    /// Increments during which the occupancy stayed inside [0.1, 0.9].
    Welford banded;
    /// Every increment with the boundary terms added back (lost - idle), i.e.
    /// the increment of the unconstrained process.
    Welford free;
};

struct RunSummary
{
    /// Fraction of measured time spent in each of 200 equal occupancy bins.
    std::array<double, kHistogramBins> occupancy_histogram{};
    std::array<std::int64_t, kHistogramBins> occupancy_ticks{};

    // Totals over the measured interval, in buffer fractions.
    double arrived_traffic = 0.0;
    double lost_traffic = 0.0;
    double idle_deficit = 0.0;
    double served_traffic = 0.0;
    double initial_occupancy = 0.0; ///< at the start of measurement
    double final_occupancy = 0.0;
    /// arrived - lost - served - (final - initial), computed in integer quanta.
    std::int64_t conservation_residual = 0;

    std::uint64_t packets_arrived = 0;
    std::uint64_t packets_dropped = 0;
    double elapsed_time = 0.0; ///< measured time
    double warmup = 0.0;

    IncrementStats increments;

    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::string generator = kGeneratorName;
};

struct RunOutput
{
    RunSummary summary;
    WindowSeries windows;
};

namespace detail
{

inline std::int64_t to_ticks(double time, double eta0, const char* what)
{
    const double ticks = std::round(time / eta0 * static_cast<double>(kFullBuffer));
    require(ticks < 0x1.0p62, std::string(what) + " is too long for the integer clock");
    return static_cast<std::int64_t>(ticks);
}

inline std::int64_t to_quanta(double fraction) { return std::llround(fraction * static_cast<double>(kFullBuffer)); }


struct HistogramEdges
{
    std::array<std::int64_t, kHistogramBins + 1> edge{};

    HistogramEdges()
    {
        for (int b = 0; b <= kHistogramBins; ++b)
        {
            edge[b] = (static_cast<std::int64_t>(b) << kQuantumBits) / kHistogramBins;
        }
    }

    /// Bin b with edge[b] <= x < edge[b + 1], for 0 <= x < full.
    static int bin_of(std::int64_t x)
    {
        return static_cast<int>((kHistogramBins * (x + 1) - 1) >> kQuantumBits);
    }
};

} // namespace detail

/// Effective warmup for a configuration. Only consults the diffusion
/// coefficient when the default applies.
inline double resolved_warmup(const RunConfig& config)
{
    if (config.warmup)
    {
        return *config.warmup;
    }
    if (!config.initial_ell)
    {
        return 0.0;
    }
    return 10.0 * 2.0 / derive_fp_params(config.traffic).sigma2;
}

inline void validate(const RunConfig& config)
{
    config.traffic.validate();
    require(std::isfinite(config.duration) && config.duration > 0.0, "duration must be positive");
    if (config.initial_ell)
    {
        require(*config.initial_ell >= 0.0 && *config.initial_ell <= 1.0, "initial_ell must lie in [0, 1]");
    }
    if (config.warmup)
    {
        require(std::isfinite(*config.warmup) && *config.warmup >= 0.0, "warmup must be non-negative");
    }
    require(std::isfinite(config.window_length) && config.window_length > 0.0, "window_length must be positive");
}

namespace detail
{

inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();
inline constexpr double kMaxTicks = 0x1.0p62;

/// x >= 0 rounded to the nearest integer, saturating at 2^62.
inline std::int64_t round_positive(double x)
{
    return x < kMaxTicks ? static_cast<std::int64_t>(x + 0.5) : static_cast<std::int64_t>(kMaxTicks);
}

class Engine
{
public:
    Engine(const RunConfig& config, RunOutput& out) : config_(config), out_(out), sum_(out.summary)
    {
        validate(config);
        const double eta0 = config.traffic.eta0;
        warmup_ = resolved_warmup(config);
        require(config.duration > warmup_, "duration must exceed warmup");
        scale_ = static_cast<double>(kFullBuffer) / eta0;
        end_ = to_ticks(config.duration, eta0, "duration");
        start_ = to_ticks(warmup_, eta0, "warmup");
        window_ = to_ticks(config.window_length, eta0, "window_length");
        require(window_ >= 1, "window_length is below the clock resolution");
        const double mean_gap = moments(config.traffic.inter_arrival).mean;
        grid_ = std::max<std::int64_t>(1, to_ticks(kIncrementGaps * mean_gap, eta0, "increment"));
        low_ = to_quanta(kIncrementLow);
        high_ = to_quanta(kIncrementHigh);

        gen_ = make_stream(config.seed, config.stream_id);
        const double ell0 = config.initial_ell ? *config.initial_ell
                                               : stationary_quantile(gen_.uniform_open0(),
                                                                     derive_fp_params(config.traffic).v);
        q_ = to_quanta(ell0);

        sum_.seed = config.seed;
        sum_.stream_id = config.stream_id;
        sum_.warmup = warmup_;
        sum_.increments.dt = static_cast<double>(grid_) / scale_;
        next_mark_ = start_;
        if (start_ == 0)
        {
            begin_measurement();
        }
    }

    template <class Gap, class Size>
    void loop(const Gap& gap_law, const Size& size_law)
    {
        std::int64_t t = 0;
        while (t < end_)
        {
            const std::int64_t p = std::max<std::int64_t>(1, round_positive(draw(size_law, gen_) * kFullBuffer));
            const std::int64_t g = round_positive(draw(gap_law, gen_) * scale_);

            // Arrival at t; drop-tail admits when the packet fits exactly.
            const bool admitted = q_ + p <= kFullBuffer;
            if (measuring_)
            {
                arrived_q_ += p;
                ++packets_;
                ++current_.arrived;
                if (!admitted)
                {
                    lost_q_ += p;
                    ++drops_;
                    grid_lost_ += p;
                    current_.lost += p;
                    ++current_.dropped;
                }
            }
            if (admitted)
            {
                q_ += p;
                grid_max_ = std::max(grid_max_, q_);
            }

            // Drain over [t, t + g), cut at window, increment, warmup and run boundaries.
            const std::int64_t stop = g >= end_ - t ? end_ : t + g;
            while (t < stop)
            {
                const std::int64_t mark = std::min(stop, next_mark_);
                const std::int64_t len = mark - t;
                const std::int64_t drained = std::min(len, q_);
                if (measuring_)
                {
                    const std::int64_t idle = len - drained;
                    add_occupancy(q_ - drained, q_);
                    sum_.occupancy_ticks[0] += idle;
                    idle_t_ += idle;
                    grid_idle_ += idle;
                    current_.idle += idle;
                }
                q_ -= drained;
                grid_min_ = std::min(grid_min_, q_);
                t = mark;
                if (t == next_mark_)
                {
                    handle_marks(t);
                }
            }
        }
    }

    void finish()
    {
        const std::int64_t measured = end_ - start_;
        const std::int64_t served = measured - idle_t_;
        sum_.conservation_residual = arrived_q_ - lost_q_ - served - (q_ - q_start_);
        sum_.arrived_traffic = static_cast<double>(arrived_q_) * kQuantum;
        sum_.lost_traffic = static_cast<double>(lost_q_) * kQuantum;
        sum_.idle_deficit = static_cast<double>(idle_t_) * kQuantum;
        sum_.served_traffic = static_cast<double>(served) * kQuantum;
        sum_.initial_occupancy = static_cast<double>(q_start_) * kQuantum;
        sum_.final_occupancy = static_cast<double>(q_) * kQuantum;
        sum_.elapsed_time = static_cast<double>(measured) / scale_;
        sum_.packets_arrived = packets_;
        sum_.packets_dropped = drops_;
        for (int b = 0; b < kHistogramBins; ++b)
        {
            sum_.occupancy_histogram[b] =
                static_cast<double>(sum_.occupancy_ticks[b]) / static_cast<double>(measured);
        }
    }

private:
    void begin_measurement()
    {
        measuring_ = true;
        q_start_ = q_;
        out_.windows = WindowSeries(config_.window_length, warmup_, q_);
        out_.windows.reserve(static_cast<std::size_t>((end_ - start_) / window_));
        next_window_ = start_ + window_ <= end_ ? start_ + window_ : kNever;
        next_grid_ = start_ + grid_ <= end_ ? start_ + grid_ : kNever;
        reset_grid();
        next_mark_ = std::min({next_window_, next_grid_, end_});
    }

    void reset_grid()
    {
        grid_q_ = grid_min_ = grid_max_ = q_;
        grid_lost_ = grid_idle_ = 0;
    }

    void handle_marks(std::int64_t now)
    {
        if (!measuring_)
        {
            if (now == start_)
            {
                begin_measurement();
            }
            return;
        }
        if (now == next_window_)
        {
            current_.end_occupancy = q_;
            out_.windows.push(current_);
            current_ = WindowRecord{};
            next_window_ = now + window_ <= end_ ? now + window_ : kNever;
        }
        if (now == next_grid_)
        {
            const std::int64_t delta = q_ - grid_q_;
            if (grid_min_ >= low_ && grid_max_ <= high_)
            {
                sum_.increments.banded.add(static_cast<double>(delta) * kQuantum);
            }
            sum_.increments.free.add(static_cast<double>(delta + grid_lost_ - grid_idle_) * kQuantum);
            reset_grid();
            next_grid_ = now + grid_ <= end_ ? now + grid_ : kNever;
        }
        next_mark_ = std::min({next_window_, next_grid_, end_});
    }

    void add_occupancy(std::int64_t lo, std::int64_t hi)
    {
        while (lo < hi)
        {
            const int b = HistogramEdges::bin_of(lo);
            const std::int64_t top = std::min(hi, edges_.edge[b + 1]);
            sum_.occupancy_ticks[b] += top - lo;
            lo = top;
        }
    }

    const RunConfig& config_;
    RunOutput& out_;
    RunSummary& sum_;
    HistogramEdges edges_;
    Xoshiro256pp gen_;

    double warmup_ = 0.0;
    double scale_ = 0.0; ///< ticks per unit time
    std::int64_t end_ = 0;
    std::int64_t start_ = 0;
    std::int64_t window_ = 0;
    std::int64_t grid_ = 0;
    std::int64_t low_ = 0;
    std::int64_t high_ = 0;

    std::int64_t q_ = 0;
    std::int64_t q_start_ = 0;
    std::int64_t arrived_q_ = 0;
    std::int64_t lost_q_ = 0;
    std::int64_t idle_t_ = 0;
    std::uint64_t packets_ = 0;
    std::uint64_t drops_ = 0;

    bool measuring_ = false;
    std::int64_t next_mark_ = 0;
    std::int64_t next_window_ = kNever;
    std::int64_t next_grid_ = kNever;
    WindowRecord current_;

    std::int64_t grid_q_ = 0;
    std::int64_t grid_min_ = 0;
    std::int64_t grid_max_ = 0;
    std::int64_t grid_lost_ = 0;
    std::int64_t grid_idle_ = 0;
};

} // namespace detail

/// Simulates one stream. Deterministic in (config, seed, stream_id).
inline RunOutput run(const RunConfig& config)
{
    RunOutput out;
    detail::Engine engine(config, out);
    const SizeSampler sizes = make_size_sampler(config.traffic.packet_size);
    std::visit([&](const auto& gap, const auto& size) { engine.loop(gap, size); }, config.traffic.inter_arrival,
               sizes);
    engine.finish();
    return out;
}

} // namespace losssim

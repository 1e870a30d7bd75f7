#pragma once

// Independent runs over the substreams of one base seed. Each run is reduced
// as soon as it finishes so only `threads` window traces are alive at once.

#include "losssim/harness/config.hpp"
#include "losssim/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace losssim::harness
{

inline int worker_count(int requested, int jobs)
{
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(n, 1, std::max(1, jobs));
}

/// Runs streams [first, first + count) and returns reduce(stream, output) for
/// each, ordered by stream. The result does not depend on the thread count.
template <class Reduce>
auto run_streams(const ExperimentConfig& config, int first, int count, Reduce&& reduce)
    -> std::vector<decltype(reduce(0, std::declval<RunOutput&&>()))>
{
    using Result = decltype(reduce(0, std::declval<RunOutput&&>()));
    std::vector<std::optional<Result>> slots(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;

    auto work = [&] {
        for (int i = next++; i < count; i = next++)
        {
            try
            {
                const int stream = first + i;
                slots[static_cast<std::size_t>(i)].emplace(
                    reduce(stream, run(config.run_config(static_cast<std::uint64_t>(stream)))));
            }
            catch (...)
            {
                std::lock_guard<std::mutex> g(failure_lock);
                if (!failure)
                {
                    failure = std::current_exception();
                }
                next = count;
            }
        }
    };

    const int workers = worker_count(config.threads, count);
    if (workers == 1)
    {
        work();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
        {
            pool.emplace_back(work);
        }
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
    std::vector<Result> out;
    out.reserve(slots.size());
    for (auto& s : slots)
    {
        out.push_back(std::move(*s));
    }
    return out;
}

template <class Reduce>
auto run_ensemble(const ExperimentConfig& config, Reduce&& reduce)
{
    return run_streams(config, 0, config.streams, std::forward<Reduce>(reduce));
}

} // namespace losssim::harness

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace contjump {

using Rng = std::mt19937_64;

/** @brief Independent stream derived from (seed, stream index, tag). */
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0);

/** @brief Exponential variate with the given rate (rate > 0). */
double exponential(Rng& rng, double rate);

/** @brief Uniform variate on [0,1). */
double uniform01(Rng& rng);

/** @brief Number of worker threads used when 0 is requested. */
int default_thread_count();

/**
 * @brief Run task(i) for i in [0, n) on up to `threads` workers.
 *
 * Tasks must write only to their own slot of any shared output.
 */
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task);

/** @brief parallel_for collecting one result per index, in index order. */
template <class R, class Fn>
std::vector<R> parallel_map(std::size_t n, int threads, Fn&& fn) {
  std::vector<R> out(n);
  parallel_for(n, threads, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace contjump

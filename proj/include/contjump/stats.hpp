#pragma once

#include <cstddef>
#include <vector>

namespace contjump {

/** @brief Monte Carlo estimate; stderr is sample std / sqrt(n). */
struct MCEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
};

/** @brief Welford accumulator with deterministic merge. */
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;
  double stderr_() const;
  MCEstimate estimate() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/** @brief Estimate of the mean of a sample vector. */
MCEstimate estimate_of(const std::vector<double>& xs);

/** @brief Combined stderr of two independent estimates. */
double combined_stderr(const MCEstimate& a, const MCEstimate& b);

/** @brief |a - b| <= k * combined stderr (independent estimates). */
bool agree_within(const MCEstimate& a, const MCEstimate& b, double k = 3.0);

/** @brief |a - exact| <= k * stderr. */
bool agree_within(const MCEstimate& a, double exact, double k = 3.0);

/** @brief Least-squares slope of y against x. */
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);
/** @brief Weighted least-squares slope. */
double fit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w);

}  // namespace contjump

#include <cstdint>
#include <functional>
#include <span>

#include "contjump/random.hpp"

namespace contjump {

/** @brief Samples per RNG block; fixed so results do not depend on the thread count. */
inline constexpr std::size_t kBlockSize = 64;

/**
 * @brief Monte Carlo driver: sample(rng, row) fills `columns` values per sample.
 *
 * Samples are grouped in fixed blocks, block b drawing from make_stream(seed, b, tag);
 * block accumulators are merged in block order.
 */
std::vector<RunningStats> mc_columns(std::size_t n_samples, std::size_t columns, std::uint64_t seed,
                                     std::uint64_t tag, int threads,
                                     const std::function<void(Rng&, std::span<double>)>& sample);

}  // namespace contjump

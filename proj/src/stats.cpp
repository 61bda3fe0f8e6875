#include "contjump/stats.hpp"

#include <algorithm>
#include <cmath>

#include "contjump/errors.hpp"

namespace contjump {

void RunningStats::add(double x) {
  ++n_;
  double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  double na = static_cast<double>(n_);
  double nb = static_cast<double>(other.n_);
  double delta = other.mean_ - mean_;
  double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  n_ += other.n_;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

double RunningStats::stderr_() const {
  return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

MCEstimate RunningStats::estimate() const { return {mean_, stderr_(), n_}; }

MCEstimate estimate_of(const std::vector<double>& xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s.estimate();
}

double combined_stderr(const MCEstimate& a, const MCEstimate& b) {
  return std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
}

bool agree_within(const MCEstimate& a, const MCEstimate& b, double k) {
  return std::abs(a.mean - b.mean) <= k * combined_stderr(a, b);
}

bool agree_within(const MCEstimate& a, double exact, double k) {
  return std::abs(a.mean - exact) <= k * a.stderr_;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  return fit_slope(x, y, std::vector<double>(x.size(), 1.0));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
    throw InvalidParameter("slope fit needs >= 2 points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  double mx = sx / sw, my = sy / sw, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

}  // namespace contjump

namespace contjump {

std::vector<RunningStats> mc_columns(std::size_t n_samples, std::size_t columns, std::uint64_t seed,
                                     std::uint64_t tag, int threads,
                                     const std::function<void(Rng&, std::span<double>)>& sample) {
  std::size_t blocks = (n_samples + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<RunningStats>> partial(blocks, std::vector<RunningStats>(columns));
  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng = make_stream(seed, b, tag);
    std::vector<double> row(columns);
    std::size_t end = std::min(n_samples, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      sample(rng, row);
      for (std::size_t c = 0; c < columns; ++c) partial[b][c].add(row[c]);
    }
  });
  std::vector<RunningStats> out(columns);
  for (const auto& p : partial)
    for (std::size_t c = 0; c < columns; ++c) out[c].merge(p[c]);
  return out;
}

}  // namespace contjump

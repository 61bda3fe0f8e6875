#include "contjump/cell_list.hpp"

#include <algorithm>
#include <cmath>

namespace contjump {

CellGrid::CellGrid(const TorusGeometry& geom, double cutoff) : dim_(geom.dim()) {
  int per = cutoff > 0.0 ? static_cast<int>(std::floor(geom.side() / cutoff)) : 1;
  single_ = per < 3;
  per_dim_ = single_ ? 1 : per;
  cell_side_ = geom.side() / per_dim_;
  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<std::size_t>(per_dim_);
  cells_.resize(single_ ? 1 : total);
}

std::array<int, kMaxDim> CellGrid::cell_coords(const Vec& x) const {
  std::array<int, kMaxDim> c{};
  for (int k = 0; k < dim_; ++k) c[k] = std::min(per_dim_ - 1, static_cast<int>(x[k] / cell_side_));
  return c;
}

std::size_t CellGrid::cell_index(const Vec& x) const {
  if (single_) return 0;
  auto c = cell_coords(x);
  std::size_t lin = 0;
  for (int k = 0; k < dim_; ++k) lin = lin * static_cast<std::size_t>(per_dim_) + static_cast<std::size_t>(c[k]);
  return lin;
}

void CellGrid::insert(std::size_t id, const Vec& x) { cells_[cell_index(x)].push_back(id); }

void CellGrid::remove(std::size_t id, const Vec& x) {
  auto& cell = cells_[cell_index(x)];
  auto it = std::find(cell.begin(), cell.end(), id);
  if (it == cell.end()) throw std::logic_error("cell grid out of sync");
  *it = cell.back();
  cell.pop_back();
}

std::uint64_t PairSet::key(std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

void PairSet::reset(std::size_t n_points) {
  pairs_.clear();
  position_.clear();
  adjacency_.assign(n_points, {});
}

bool PairSet::contains(std::size_t i, std::size_t j) const { return position_.count(key(i, j)) > 0; }

bool PairSet::insert(std::size_t i, std::size_t j) {
  if (i == j) return false;
  auto k = key(i, j);
  if (position_.count(k)) return false;
  position_[k] = pairs_.size();
  pairs_.emplace_back(std::min(i, j), std::max(i, j));
  adjacency_[i].push_back(j);
  adjacency_[j].push_back(i);
  return true;
}

bool PairSet::erase(std::size_t i, std::size_t j) {
  auto it = position_.find(key(i, j));
  if (it == position_.end()) return false;
  std::size_t pos = it->second;
  position_.erase(it);
  if (pos + 1 != pairs_.size()) {
    pairs_[pos] = pairs_.back();
    position_[key(pairs_[pos].first, pairs_[pos].second)] = pos;
  }
  pairs_.pop_back();
  auto drop = [](std::vector<std::size_t>& v, std::size_t x) {
    auto f = std::find(v.begin(), v.end(), x);
    if (f != v.end()) {
      *f = v.back();
      v.pop_back();
    }
  };
  drop(adjacency_[i], j);
  drop(adjacency_[j], i);
  return true;
}

void PairSet::erase_all(std::size_t i) {
  auto partners = adjacency_[i];
  for (std::size_t j : partners) erase(i, j);
}

}  // namespace contjump

#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "contjump/geometry.hpp"

namespace contjump {

/** @brief Uniform cell grid on the torus with cell side >= cutoff. */
class CellGrid {
 public:
  CellGrid(const TorusGeometry& geom, double cutoff);

  void insert(std::size_t id, const Vec& x);
  void remove(std::size_t id, const Vec& x);

  /** @brief Ids in the cells adjacent to x (every id once); includes ids at distance > cutoff. */
  template <class Fn>
  void for_neighbors(const Vec& x, Fn&& fn) const {
    if (single_) {
      for (std::size_t id : cells_[0]) fn(id);
      return;
    }
    auto c = cell_coords(x);
    int d = dim_;
    int span[kMaxDim] = {1, 1, 1};
    for (int k = 0; k < d; ++k) span[k] = 3;
    for (int a = 0; a < span[0]; ++a)
      for (int b = 0; b < span[1]; ++b)
        for (int e = 0; e < span[2]; ++e) {
          int off[kMaxDim] = {a - 1, b - 1, e - 1};
          std::size_t lin = 0;
          for (int k = 0; k < d; ++k) {
            int v = ((c[k] + off[k]) % per_dim_ + per_dim_) % per_dim_;
            lin = lin * static_cast<std::size_t>(per_dim_) + static_cast<std::size_t>(v);
          }
          for (std::size_t id : cells_[lin]) fn(id);
        }
  }

 private:
  std::array<int, kMaxDim> cell_coords(const Vec& x) const;
  std::size_t cell_index(const Vec& x) const;

  int dim_;
  int per_dim_;
  double cell_side_;
  bool single_;
  std::vector<std::vector<std::size_t>> cells_;
};

/** @brief Set of unordered index pairs with O(1) insert, erase and uniform sampling. */
class PairSet {
 public:
  explicit PairSet(std::size_t n_points = 0) : adjacency_(n_points) {}

  void reset(std::size_t n_points);
  bool insert(std::size_t i, std::size_t j);
  bool erase(std::size_t i, std::size_t j);
  void erase_all(std::size_t i);
  bool contains(std::size_t i, std::size_t j) const;
  std::size_t size() const { return pairs_.size(); }
  const std::pair<std::size_t, std::size_t>& at(std::size_t k) const { return pairs_[k]; }

 private:
  static std::uint64_t key(std::size_t i, std::size_t j);

  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::unordered_map<std::uint64_t, std::size_t> position_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

}  // namespace contjump

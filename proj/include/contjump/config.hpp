#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "contjump/kernels.hpp"
#include "contjump/observables.hpp"

namespace contjump {

inline constexpr std::uint64_t kDefaultSeed = 42;

/** @brief Experiment parameters shared by the subcommands. */
struct ExperimentParams {
  std::size_t samples = 2000;
  std::size_t replicas = 1000;
  std::vector<double> eps_diffusive{0.4, 0.2, 0.1, 0.05};
  std::vector<double> eps_bd{1.0, 0.5, 0.25, 0.125};
  double horizon = 0.0;  ///< <= 0 selects 5 / (2 <a>^2 |b|_inf)
  std::size_t bins = 10;
  double r_max = 0.0;    ///< <= 0 selects 2 r_b
  double diffusion_dt = 1e-4;
  std::size_t record_every = 100;
  // spectral gap
  std::size_t gap_replicas = 200;
  double gap_horizon = 50.0;
  double gap_dt = 0.05;
  // Fock truncation
  int fock_sites = 4;
  double fock_side = 4.0;
  int fock_n_max = 3;
};

/** @brief Validated run configuration. */
struct RunConfig {
  int dim = 1;
  double side = 20.0;
  KernelVariant variant = KernelVariant::Factorized;
  RadialProfile a = RadialProfile::uniform_ball(1.0, 0.5);
  RadialProfile b = RadialProfile::smooth_bump(1.0, 1.0);
  Mutation mutation = Mutation::None;
  int jump_nodes = 0;
  double z = 1.0;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<Observable> observables;  ///< empty: defaults chosen per subcommand
  TestProfile phi{{10.0, 0.0, 0.0}, 1.5, 0.5};  ///< test function for exponential and linear observables
  ExperimentParams experiment;

  TorusGeometry geometry() const;
  KernelSpec kernel() const;
  /** @brief Checks ranges and the torus-size invariant. */
  void validate() const;
};

/** @brief Parses YAML text; unknown keys and ill-typed fields raise ConfigurationError naming the key path. */
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/** @brief Canonical YAML rendering; parse_config_text(to_yaml(c)) reproduces c. */
std::string to_yaml(const RunConfig& config);

/** @brief FNV-1a hash of the canonical rendering, as 16 hex digits. */
std::string config_hash(const RunConfig& config);

/** @brief CLI flag, then CONTJUMP_SEED, then the config file, then kDefaultSeed. */
std::uint64_t resolve_seed(std::optional<std::uint64_t> cli_seed, const RunConfig& config);

std::string variant_name(KernelVariant v);
std::string mutation_name(Mutation m);

}  // namespace contjump

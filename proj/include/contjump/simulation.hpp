#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "contjump/geometry.hpp"
#include "contjump/kernels.hpp"
#include "contjump/observables.hpp"
#include "contjump/random.hpp"

namespace contjump {

enum class EventKind { Jump, PairBirth, PairDeath, Birth, Death };

/**
 * @brief One transition.
 *
 * Jump: points i, j move by u, v. PairBirth: points u, v appended. PairDeath: i and j removed
 * (larger index first, each by swap-with-last). Birth: u appended. Death: i removed by swap-with-last.
 */
struct Event {
  double t = 0.0;
  EventKind kind = EventKind::Jump;
  std::size_t i = 0;
  std::size_t j = 0;
  Vec u{};
  Vec v{};
};

struct Trajectory {
  int dim = 1;
  double horizon = 0.0;
  Configuration initial;
  std::vector<Event> events;
};

void apply_event(Configuration& gamma, const Event& e, const TorusGeometry& geom);

/** @brief State at time t (events with time <= t applied). */
Configuration state_at(const Trajectory& traj, const TorusGeometry& geom, double t);

/** @brief Binary-jump process by Gillespie thinning over a cell-list candidate pair set. */
Trajectory simulate_jumps(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double T,
                          Rng& rng);

/** @brief Limiting birth-and-death process (four channels). */
Trajectory simulate_bd(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double z,
                       double T, Rng& rng);

/** @brief Immigration-death process with per-particle death rate <a><b>. */
Trajectory simulate_free_bd(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double z,
                            double T, Rng& rng);

struct DiffusionPath {
  std::vector<double> times;
  std::vector<Configuration> states;
  std::vector<std::string> warnings;
};

/** @brief Euler-Maruyama for the limiting diffusion; records every `record_every` steps (0: endpoints). */
DiffusionPath simulate_diffusion(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec,
                                 double T, double dt, Rng& rng, std::size_t record_every = 0);

/** @brief Largest Euler-Maruyama step accepted without warning. */
double diffusion_step_limit(const KernelSpec& spec);

struct CountIn {
  Window window;
};

struct PairCorrelation {
  std::size_t bins = 10;
  double r_max = 1.0;
};

using Observation = std::variant<CountIn, PairCorrelation, Observable>;

/** @brief Observation of one configuration (one value, or one per bin). */
std::vector<double> measure(const Configuration& gamma, const TorusGeometry& geom, const Observation& obs);

/** @brief Pair-correlation estimate per distance bin: 2 * pairs / (L^d * shell volume). */
std::vector<double> pair_correlation(const Configuration& gamma, const TorusGeometry& geom, std::size_t bins,
                                     double r_max);

/** @brief Replays events and measures at each (ascending) sample time. */
std::vector<std::vector<double>> observe(const Trajectory& traj, const TorusGeometry& geom, const Observation& obs,
                                         const std::vector<double>& sample_times);

/** @brief Line-oriented text form: header records, then "t,event_kind,payload..." rows. */
void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is);

std::string event_kind_name(EventKind k);

}  // namespace contjump

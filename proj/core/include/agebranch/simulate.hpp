#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "agebranch/model.hpp"
#include "agebranch/renewal.hpp"
#include "agebranch/rng.hpp"

namespace agebranch {

// Stream-derivation domains. Each independent consumer of randomness owns a
// domain, so adding draws of one kind never shifts another kind's streams.
inline constexpr std::uint64_t kDomainTrajectory = 1;
inline constexpr std::uint64_t kDomainY = 2;
inline constexpr std::uint64_t kDomainSubtree = 3;
inline constexpr std::uint64_t kDomainResample = 4;

// One reproduction event of a single particle: the parent's age when the
// event fires and the number of children produced there. Zero-count events
// stay in the record; they consumed randomness but create no particles.
struct BirthEvent {
  double age = 0.0;
  long count = 0;
};

// Realizes the birth point process of one particle: an inhomogeneous Poisson
// process on (0, lifespan) with intensity s -> alpha(lifespan - s), thinned
// against the constant bound sup alpha. Candidate ages advance by an
// Exponential(sup alpha) clock. Every candidate consumes an age draw and an
// acceptance draw, in that order; accepted candidates consume exactly one
// count draw. The order is fixed so the stream layout survives refactoring.
std::vector<BirthEvent> sample_birth_process(const ModelSpec& spec,
                                             double lifespan, RngStream& rng);

// Population state at one observation time. remaining holds the remaining
// lifetimes of all particles alive at t, each strictly positive;
// generation_hist[g] counts the alive particles of generation g.
struct Snapshot {
  double t = 0.0;
  std::vector<double> remaining;
  std::size_t alive = 0;  // always remaining.size()
  std::vector<std::size_t> generation_hist;
  std::size_t births_by_t = 0;  // particles born at or before t, root included
  std::size_t deaths_by_t = 0;  // particles dead at or before t
};

struct TrajectoryResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // state of this trajectory's derived stream
  bool extinct = false;    // alive count 0 at the last observation time
  bool truncated = false;  // population cap hit; snapshots are then partial
  // alive == births_by_t - deaths_by_t and every remaining lifetime positive,
  // at every snapshot
  bool census_ok = true;
  std::size_t total_birth_events = 0;
  std::size_t total_created = 0;   // particles ever instantiated, root included
  long xi0 = 1, xi1 = 0, xi2 = 0;  // first generation sizes of the embedded process
  std::vector<Snapshot> snapshots;  // one per observation time, in order
};

// Exact depth-first simulation of one trajectory started from a single
// particle born at time 0. The trajectory stream is
// derive(master, kDomainTrajectory, index); identical (master, index,
// obs_times, max_pop) inputs reproduce a bit-identical result regardless of
// scheduling. obs_times must be nonnegative and strictly increasing. The run
// aborts with the truncated flag once total_created exceeds max_pop; extinct
// and truncated are mutually exclusive.
TrajectoryResult simulate_trajectory(const ModelSpec& spec,
                                     std::uint64_t master, std::size_t index,
                                     const std::vector<double>& obs_times,
                                     std::size_t max_pop = 1000000);

// Functionals of one snapshot: pop is the alive count, sum_f the sum of f
// over remaining lifetimes, w_f = e^{-alpha_tilde t} sum_f, and a_f the
// population average sum_f / pop, absent when pop = 0.
struct Observables {
  std::size_t pop = 0;
  double sum_f = 0.0;
  double w_f = 0.0;
  std::optional<double> a_f;
};

Observables observables(const Snapshot& snap, const TestFunction& f,
                        double alpha_tilde);

// One draw of the discounted offspring score sum_j n_j e^{-alpha_tilde s_j}
// over a full lifespan drawn fresh from the lifetime law.
double sample_Y(const ModelSpec& spec, const MalthusianSolution& sol,
                RngStream& rng);

// Sum of f over the particles alive at time `window` in a fresh subtree
// whose root starts with the given remaining lifetime; children draw i.i.d.
// lifespans as usual. Subtrees rooted after the window are never expanded.
double subtree_sum_f(const ModelSpec& spec, double root_remaining,
                     double window, const TestFunction& f, RngStream& rng);

// Runs sim.trajectories independent trajectories with master seed sim.seed,
// observation times sim.obs_times and cap sim.max_pop, distributing indices
// over sim.threads workers (0 = hardware concurrency). Results land in index
// order and are byte-identical for every thread count.
std::vector<TrajectoryResult> run_ensemble(const ModelSpec& spec,
                                           const SimConfig& sim);

}  // namespace agebranch

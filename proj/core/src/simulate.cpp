#include "agebranch/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace agebranch {

std::vector<BirthEvent> sample_birth_process(const ModelSpec& spec,
                                             double lifespan, RngStream& rng) {
  if (!(lifespan > 0.0))
    throw std::invalid_argument("sample_birth_process: lifespan must be positive");
  std::vector<BirthEvent> events;
  const double bound = spec.alpha.sup();
  if (bound <= 0.0) return events;
  double age = 0.0;
  for (;;) {
    age += rng.exp1() / bound;
    if (age >= lifespan) break;
    const double gate = rng.u01();
    // u01 never returns 0, so a zero intensity rejects with certainty and
    // an intensity equal to the bound accepts with certainty
    if (gate > spec.alpha.value(lifespan - age) / bound) continue;
    events.push_back({age, spec.offspring.sample(lifespan - age, rng)});
  }
  return events;
}

namespace {

struct Pending {
  double birth;
  long generation;
};

}  // namespace

TrajectoryResult simulate_trajectory(const ModelSpec& spec,
                                     std::uint64_t master, std::size_t index,
                                     const std::vector<double>& obs_times,
                                     std::size_t max_pop) {
  if (max_pop < 1)
    throw std::invalid_argument("simulate_trajectory: max_pop must be >= 1");
  for (std::size_t i = 0; i < obs_times.size(); ++i) {
    if (obs_times[i] < 0.0 || (i > 0 && obs_times[i] <= obs_times[i - 1]))
      throw std::invalid_argument(
          "simulate_trajectory: obs_times must be nonnegative and strictly increasing");
  }

  TrajectoryResult out;
  out.index = index;
  RngStream rng = RngStream::derive(master, kDomainTrajectory, index);
  out.seed = rng.state();

  const std::size_t nobs = obs_times.size();
  const double last_obs = nobs ? obs_times.back() : 0.0;
  std::vector<std::vector<double>> remaining(nobs);
  std::vector<std::vector<std::size_t>> gen_hist(nobs);
  // births_at[i] counts birth times landing in (obs_{i-1}, obs_i]; the
  // overflow slot nobs collects everything after the last observation
  std::vector<std::size_t> births_at(nobs + 1, 0), deaths_at(nobs + 1, 0);

  std::vector<Pending> stack;
  stack.push_back({0.0, 0});
  out.total_created = 1;

  while (!stack.empty()) {
    if (out.total_created > max_pop) {
      out.truncated = true;
      break;
    }
    const Pending p = stack.back();
    stack.pop_back();

    // draws per particle, in event order: lifespan first, then the birth
    // process
    const double lifespan = spec.lifetime.sample(rng);
    const double death = p.birth + lifespan;

    // the particle is alive at t exactly when birth <= t < death
    const std::size_t lo = static_cast<std::size_t>(
        std::lower_bound(obs_times.begin(), obs_times.end(), p.birth) -
        obs_times.begin());
    const std::size_t hi = static_cast<std::size_t>(
        std::lower_bound(obs_times.begin(), obs_times.end(), death) -
        obs_times.begin());
    ++births_at[lo];
    ++deaths_at[hi];
    for (std::size_t i = lo; i < hi; ++i) {
      remaining[i].push_back(death - obs_times[i]);
      auto& gh = gen_hist[i];
      const std::size_t g = static_cast<std::size_t>(p.generation);
      if (gh.size() <= g) gh.resize(g + 1, 0);
      ++gh[g];
    }

    const std::vector<BirthEvent> events = sample_birth_process(spec, lifespan, rng);
    out.total_birth_events += events.size();
    for (const BirthEvent& e : events) {
      if (p.generation == 0)
        out.xi1 += e.count;
      else if (p.generation == 1)
        out.xi2 += e.count;
      const double child_birth = p.birth + e.age;
      // subtrees rooted after the last observation never reach a snapshot;
      // such children are recorded but not expanded. Generations 0 and 1 are
      // always expanded so xi1 and xi2 stay complete.
      const bool expand =
          p.generation < 1 || (nobs > 0 && child_birth <= last_obs);
      for (long k = 0; k < e.count; ++k) {
        ++out.total_created;
        if (expand) stack.push_back({child_birth, p.generation + 1});
      }
    }
  }

  out.snapshots.resize(nobs);
  std::size_t births_cum = 0, deaths_cum = 0;
  for (std::size_t i = 0; i < nobs; ++i) {
    Snapshot& s = out.snapshots[i];
    s.t = obs_times[i];
    s.remaining = std::move(remaining[i]);
    s.alive = s.remaining.size();
    s.generation_hist = std::move(gen_hist[i]);
    births_cum += births_at[i];
    deaths_cum += deaths_at[i];
    s.births_by_t = births_cum;
    s.deaths_by_t = deaths_cum;
    if (s.alive != s.births_by_t - s.deaths_by_t) out.census_ok = false;
    for (double r : s.remaining)
      if (!(r > 0.0)) out.census_ok = false;
  }
  if (!out.truncated && nobs > 0) out.extinct = out.snapshots.back().alive == 0;
  return out;
}

Observables observables(const Snapshot& snap, const TestFunction& f,
                        double alpha_tilde) {
  Observables o;
  o.pop = snap.alive;
  double acc = 0.0;
  for (double r : snap.remaining) acc += f.value(r);
  o.sum_f = acc;
  o.w_f = std::exp(-alpha_tilde * snap.t) * acc;
  if (o.pop > 0) o.a_f = acc / static_cast<double>(o.pop);
  return o;
}

double sample_Y(const ModelSpec& spec, const MalthusianSolution& sol,
                RngStream& rng) {
  const double lifespan = spec.lifetime.sample(rng);
  double y = 0.0;
  for (const BirthEvent& e : sample_birth_process(spec, lifespan, rng))
    y += static_cast<double>(e.count) * std::exp(-sol.alpha_tilde * e.age);
  return y;
}

double subtree_sum_f(const ModelSpec& spec, double root_remaining,
                     double window, const TestFunction& f, RngStream& rng) {
  if (!(root_remaining > 0.0))
    throw std::invalid_argument("subtree_sum_f: root_remaining must be positive");
  if (window < 0.0)
    throw std::invalid_argument("subtree_sum_f: window must be nonnegative");
  // lifespan < 0 marks a particle whose lifespan is still to be drawn; the
  // root's is fixed by its remaining lifetime
  struct Node {
    double birth, lifespan;
  };
  std::vector<Node> stack{{0.0, root_remaining}};
  double acc = 0.0;
  while (!stack.empty()) {
    const Node nd = stack.back();
    stack.pop_back();
    const double lifespan =
        nd.lifespan > 0.0 ? nd.lifespan : spec.lifetime.sample(rng);
    const double death = nd.birth + lifespan;
    if (nd.birth <= window && window < death) acc += f.value(death - window);
    for (const BirthEvent& e : sample_birth_process(spec, lifespan, rng)) {
      const double child_birth = nd.birth + e.age;
      if (child_birth > window) continue;
      for (long k = 0; k < e.count; ++k) stack.push_back({child_birth, -1.0});
    }
  }
  return acc;
}

std::vector<TrajectoryResult> run_ensemble(const ModelSpec& spec,
                                           const SimConfig& sim) {
  if (sim.trajectories < 0)
    throw std::invalid_argument("run_ensemble: trajectories must be >= 0");
  if (sim.max_pop < 1)
    throw std::invalid_argument("run_ensemble: max_pop must be >= 1");
  const std::size_t n = static_cast<std::size_t>(sim.trajectories);
  const std::size_t cap = static_cast<std::size_t>(sim.max_pop);
  std::vector<TrajectoryResult> results(n);

  std::size_t workers = sim.threads > 0
                            ? static_cast<std::size_t>(sim.threads)
                            : std::thread::hardware_concurrency();
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));

  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      results[i] = simulate_trajectory(spec, sim.seed, i, sim.obs_times, cap);
    return results;
  }

  std::atomic<std::size_t> cursor{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        results[i] = simulate_trajectory(spec, sim.seed, i, sim.obs_times, cap);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return results;
}

}  // namespace agebranch

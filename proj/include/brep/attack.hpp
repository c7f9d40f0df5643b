#ifndef BREP_ATTACK_HPP
#define BREP_ATTACK_HPP

// Boundary-repelling search in a generator's latent space using hard labels
// only. Each pass samples N points on a sphere of radius R around the current
// center z. If all N keep the target label, R grows by gamma and z becomes
// the best point so far. Otherwise the mean of the outside directions,
// negated, gives a step direction; the step is kept only if the new center
// still carries the target label.

#include "brep/core.hpp"
#include "brep/models.hpp"
#include "brep/oracle.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace brep {

class InitFailed : public Error {
 public:
  explicit InitFailed(std::uint64_t tries)
      : Error("no in-class starting point after " + std::to_string(tries) + " tries"), tries_(tries) {}
  std::uint64_t tries() const { return tries_; }

 private:
  std::uint64_t tries_;
};

using StepRule = std::function<double(double radius)>;

/// alpha = min(R / divisor, cap); the defaults give min(R/3, 3).
struct MinRatioStep {
  double divisor = 3.0;
  double cap = 3.0;
  double operator()(double radius) const { return std::min(radius / divisor, cap); }
};

inline double step_size(double radius, const StepRule& rule = MinRatioStep{}) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
  return rule(radius);
}

struct AttackConfig {
  std::size_t target_class = 0;
  std::size_t num_samples = 32;  // N
  double initial_radius = 2.0;   // R0
  double radius_multiplier = 1.3;  // gamma
  StepRule step_rule = MinRatioStep{};
  std::size_t max_iters = 1000;
  std::optional<std::uint64_t> budget;
  std::size_t init_max_tries = 1000;
  bool normalize_direction = true;
  // Stops the ladder if every sample keeps clearing, e.g. a class that
  // covers the whole latent space.
  double max_radius = 1e9;
  // Keep every accepted center in the result (z0 first).
  bool record_path = false;

  void validate() const {
    if (num_samples == 0) throw InvalidArgument("N must be at least 1");
    if (!(initial_radius > 0.0) || !std::isfinite(initial_radius)) throw InvalidArgument("R0 must be positive");
    if (!(radius_multiplier > 1.0) || !std::isfinite(radius_multiplier)) throw InvalidArgument("gamma must exceed 1");
    if (max_iters == 0) throw InvalidArgument("maxIters must be positive");
    if (init_max_tries == 0) throw InvalidArgument("init_max_tries must be positive");
    if (budget && *budget == 0) throw InvalidArgument("budget must be positive");
    if (!step_rule) throw InvalidArgument("step rule is empty");
    if (!(max_radius > initial_radius)) throw InvalidArgument("max_radius must exceed R0");
  }
};

/// Mean of Phi-weighted sphere directions, where Phi is 0 inside the target
/// class and -1 outside; the hard-label stand-in for the margin gradient.
struct DirectionEstimate {
  Vector vector;
  double outside_fraction = 0.0;
  std::size_t outside_count = 0;
};

enum class Termination { MaxIters, BudgetExhausted, InitFailed, RadiusLimit };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::MaxIters: return "max-iters";
    case Termination::BudgetExhausted: return "budget-exhausted";
    case Termination::InitFailed: return "init-failed";
    case Termination::RadiusLimit: return "radius-limit";
  }
  return "unknown";
}

/// One cleared radius.
struct TraceRow {
  double radius = 0.0;
  std::size_t iters_to_clear = 0;
  std::uint64_t queries_to_clear = 0;
  std::uint64_t cumulative_queries = 0;
  Vector center;
};

/// Where every oracle query went.
struct QueryLedger {
  std::uint64_t init_tries = 0;
  std::uint64_t loop_passes = 0;  // completed sphere batches
  std::uint64_t sphere_queries = 0;
  std::uint64_t verifications = 0;
  std::uint64_t total() const { return init_tries + sphere_queries + verifications; }
};

struct AttackResult {
  std::optional<Vector> z_star;  // empty only when no starting point was found
  std::optional<Vector> z0;
  double cleared_radius = 0.0;   // largest radius cleared, 0 if none
  double current_radius = 0.0;   // radius in play at termination
  std::vector<TraceRow> trace;
  Termination termination = Termination::MaxIters;
  QueryLedger ledger;
  std::uint64_t oracle_count = 0;
  std::size_t accepted_updates = 0;
  std::size_t rejected_updates = 0;
  std::size_t skipped_updates = 0;
  std::vector<Vector> path;  // filled when config.record_path
};

/// 0 if G(z) carries label c*, -1 otherwise. One query.
template <Generator G>
int phi(LabelOracle& oracle, const G& generator, std::size_t target, const Vector& z) {
  return oracle.query(generator(z)) == target ? 0 : -1;
}

/// Estimate from labeled sphere samples: (1/N) * sum Phi_n * u_n.
inline DirectionEstimate estimate_from_batch(const SphereBatch& batch, const std::vector<int>& phis) {
  if (phis.size() != batch.size() || batch.size() == 0) {
    throw InvalidArgument("batch and label counts differ");
  }
  DirectionEstimate est;
  est.vector = Vector::Zero(static_cast<Eigen::Index>(batch.directions[0].dim()));
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (phis[n] != 0) {
      est.vector -= batch.directions[n].vector();
      ++est.outside_count;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  est.vector *= inv_n;
  est.outside_fraction = static_cast<double>(est.outside_count) * inv_n;
  return est;
}

/// Labels one sphere batch; throws BudgetExhausted if the oracle refuses a
/// query part way through (the partial batch is dropped).
template <Generator G>
std::vector<int> label_batch(LabelOracle& oracle, const G& generator, std::size_t target,
                             const Vector& z, const SphereBatch& batch) {
  std::vector<int> phis(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    phis[n] = phi(oracle, generator, target, batch.point(z, n));
  }
  return phis;
}

/// Draws N fresh directions and queries z + R * u_n for each. Exactly N queries.
template <Generator G>
DirectionEstimate estimate_direction(LabelOracle& oracle, const G& generator, std::size_t target,
                                     const Vector& z, double radius, std::size_t n, RngStream& rng) {
  check_input(generator.latent_dim(), z);
  const SphereBatch batch = sample_sphere_batch(generator.latent_dim(), n, radius, rng);
  return estimate_from_batch(batch, label_batch(oracle, generator, target, z, batch));
}

/// z + alpha * v / |v| (normalized) or z + alpha * v.
inline Vector apply_update(const Vector& z, const DirectionEstimate& est, double alpha, bool normalize) {
  vec::require_same_dim(z, est.vector);
  const double n = est.vector.norm();
  if (n == 0.0) throw NumericalError("no direction: estimate is zero");
  return normalize ? Vector(z + (alpha / n) * est.vector) : Vector(z + alpha * est.vector);
}

struct InitResult {
  Vector z;
  std::uint64_t tries = 0;
};

/// Samples z ~ N(0, I) until G(z) carries label c*. One query per try.
template <Generator G>
InitResult initialize_in_class(LabelOracle& oracle, const G& generator, std::size_t target,
                               RngStream& rng, std::size_t max_tries) {
  if (max_tries == 0) throw InvalidArgument("init_max_tries must be positive");
  for (std::size_t t = 1; t <= max_tries; ++t) {
    Vector z = rng.normal_vector(generator.latent_dim());
    if (phi(oracle, generator, target, z) == 0) return {std::move(z), t};
  }
  throw InitFailed(max_tries);
}

/// Full attack. `oracle` answers in the generator's output space; the budget
/// in `config` is enforced by a CountingOracle owned by this call.
///
/// A sphere batch is only started when the remaining budget covers all N of
/// its queries, so no partial batch is ever issued and the ledger
/// init_tries + loop_passes * N + verifications equals the oracle count.
template <Generator G>
AttackResult brep_attack(const AttackConfig& config, LabelOracle& oracle, const G& generator,
                         RngStream& rng) {
  config.validate();
  if (generator.output_dim() != oracle.input_dim()) {
    throw DimensionMismatch(oracle.input_dim(), generator.output_dim());
  }
  const std::size_t c_star = config.target_class;
  const std::size_t n = config.num_samples;
  const std::size_t dim = generator.latent_dim();
  CountingOracle counter(oracle, config.budget);
  AttackResult res;
  res.current_radius = config.initial_radius;

  Vector z;
  try {
    auto init = initialize_in_class(counter, generator, c_star, rng, config.init_max_tries);
    z = std::move(init.z);
    res.ledger.init_tries = init.tries;
  } catch (const InitFailed& e) {
    res.ledger.init_tries = e.tries();
    res.termination = Termination::InitFailed;
    res.oracle_count = counter.count();
    return res;
  } catch (const BudgetExhausted& e) {
    res.ledger.init_tries = e.count();
    res.termination = Termination::BudgetExhausted;
    res.oracle_count = counter.count();
    return res;
  }
  res.z0 = z;
  res.z_star = z;
  if (config.record_path) res.path.push_back(z);

  std::size_t rung = 0;
  double radius = config.initial_radius;
  std::size_t iters = 0;
  std::uint64_t queries_at_rung_start = counter.count();
  res.termination = Termination::MaxIters;

  while (iters < config.max_iters) {
    if (!counter.can_afford(n)) {
      res.termination = Termination::BudgetExhausted;
      break;
    }
    const SphereBatch batch = sample_sphere_batch(dim, n, radius, rng);
    const std::vector<int> phis = label_batch(counter, generator, c_star, z, batch);
    ++res.ledger.loop_passes;
    res.ledger.sphere_queries += n;
    const DirectionEstimate est = estimate_from_batch(batch, phis);

    if (est.outside_count == 0) {
      const std::uint64_t now = counter.count();
      res.trace.push_back({radius, iters, now - queries_at_rung_start, now, z});
      res.z_star = z;
      res.cleared_radius = radius;
      ++rung;
      radius = config.initial_radius * std::pow(config.radius_multiplier, static_cast<double>(rung));
      res.current_radius = radius;
      iters = 0;
      queries_at_rung_start = now;
      if (radius > config.max_radius) {
        res.termination = Termination::RadiusLimit;
        break;
      }
      continue;
    }

    if (est.vector.squaredNorm() == 0.0) {
      // Outside directions cancelled exactly; resample.
      ++res.skipped_updates;
      ++iters;
      continue;
    }
    const Vector candidate = apply_update(z, est, config.step_rule(radius), config.normalize_direction);
    if (!counter.can_afford(1)) {
      res.termination = Termination::BudgetExhausted;
      break;
    }
    ++res.ledger.verifications;
    if (phi(counter, generator, c_star, candidate) == 0) {
      z = candidate;
      ++res.accepted_updates;
      if (config.record_path) res.path.push_back(z);
    } else {
      ++res.rejected_updates;
    }
    ++iters;
  }
  res.oracle_count = counter.count();
  return res;
}

}  // namespace brep

#endif  // BREP_ATTACK_HPP

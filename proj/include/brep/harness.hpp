#ifndef BREP_HARNESS_HPP
#define BREP_HARNESS_HPP

// Experiment orchestration: build a synthetic task, train a target and a
// differently-built evaluator on the private classes, fit the prior on the
// public classes, attack every (target class, seed) pair and score the
// recovered points with the evaluator.

#include "brep/attack.hpp"
#include "brep/models.hpp"
#include "brep/oracle.hpp"
#include "brep/serialization.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace brep {

inline constexpr const char* kToolVersion = "0.1.0";

class ValidationError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// "75.67" for 227 / 300.
inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction + 0.0);
  return buf;
}

struct Accuracy {
  std::size_t successes = 0;
  std::size_t attempts = 0;

  double value() const {
    if (attempts == 0) throw ValidationError("accuracy is undefined for zero attempts");
    return static_cast<double>(successes) / static_cast<double>(attempts);
  }
  std::string percent() const { return format_percent(value()); }
};

struct DatasetParams {
  std::size_t num_classes = 10;
  std::size_t dim = 16;
  double separation = 10.0;
  double spread = 1.0;
  std::size_t samples_per_class = 200;
  double public_fraction = 0.5;
};

struct GeneratorChoice {
  enum class Kind { Identity, Affine };
  Kind kind = Kind::Affine;
  std::size_t latent_dim = 8;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DatasetParams dataset;
  ArchitectureSpec target = ArchitectureSpec::linear();
  ArchitectureSpec evaluator = ArchitectureSpec::mlp({32});
  GeneratorChoice generator;
  AttackConfig attack;                       // target_class is set per run
  std::vector<std::size_t> target_classes;   // dataset class ids; empty = all private
  std::vector<std::uint64_t> seeds{0};       // attack seeds
  std::vector<std::uint64_t> budgets;        // budget sweep grid
  std::vector<std::size_t> n_grid;           // N trade-off grid
  std::optional<std::uint64_t> n_budget;     // shared budget for the N sweep
  std::size_t jobs = 1;

  void validate() const {
    if (dataset.num_classes < 2 || dataset.dim == 0 || dataset.samples_per_class < 2) {
      throw ValidationError("dataset parameters out of range");
    }
    if (!(dataset.separation > 0.0) || !(dataset.spread > 0.0)) {
      throw ValidationError("separation and spread must be positive");
    }
    if (!(dataset.public_fraction >= 0.0 && dataset.public_fraction <= 1.0)) {
      throw ValidationError("public_fraction must lie in [0, 1]");
    }
    if (target.kind == evaluator.kind && target.hidden == evaluator.hidden) {
      throw ValidationError("evaluator architecture must differ from the target architecture");
    }
    if (generator.kind == GeneratorChoice::Kind::Affine &&
        (generator.latent_dim == 0 || generator.latent_dim > dataset.dim)) {
      throw ValidationError("latent_dim must lie in [1, dim]");
    }
    if (seeds.empty()) throw ValidationError("at least one attack seed is required");
    if (jobs == 0) throw ValidationError("jobs must be positive");
    const auto priv = private_classes();
    for (auto c : target_classes) {
      if (std::find(priv.begin(), priv.end(), c) == priv.end()) {
        throw ValidationError("target class " + std::to_string(c) + " is not a private class");
      }
    }
    if (priv.size() < 2) throw ValidationError("need at least two private classes");
    if (generator.kind == GeneratorChoice::Kind::Affine && public_classes().empty()) {
      throw ValidationError("an affine prior needs public classes");
    }
    if (!std::is_sorted(budgets.begin(), budgets.end())) throw ValidationError("budgets must be ascending");
    try {
      AttackConfig probe = attack;
      probe.validate();
    } catch (const InvalidArgument& e) {
      throw ValidationError(std::string("attack: ") + e.what());
    }
  }

  std::vector<std::size_t> public_classes() const {
    const auto n_pub = static_cast<std::size_t>(
        std::lround(dataset.public_fraction * static_cast<double>(dataset.num_classes)));
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < n_pub; ++c) out.push_back(c);
    return out;
  }
  std::vector<std::size_t> private_classes() const {
    const auto n_pub = public_classes().size();
    std::vector<std::size_t> out;
    for (std::size_t c = n_pub; c < dataset.num_classes; ++c) out.push_back(c);
    return out;
  }
  std::vector<std::size_t> effective_targets() const {
    return target_classes.empty() ? private_classes() : target_classes;
  }
};

// ---------------------------------------------------------------------------
// Spec files

namespace detail {

inline Json arch_to_json(const ArchitectureSpec& a) {
  Json j;
  j["kind"] = a.name();
  if (a.kind == ArchitectureSpec::Kind::Mlp) j["hidden"] = a.hidden;
  j["learning_rate"] = a.learning_rate;
  j["momentum"] = a.momentum;
  j["l2"] = a.l2;
  j["min_epochs"] = a.min_epochs;
  j["max_epochs"] = a.max_epochs;
  return j;
}

inline ArchitectureSpec arch_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  ArchitectureSpec a;
  if (kind == "linear") {
    a = ArchitectureSpec::linear();
  } else if (kind == "mlp") {
    a = ArchitectureSpec::mlp(j.value("hidden", std::vector<std::size_t>{32}));
  } else {
    throw ValidationError("unknown architecture '" + kind + "'");
  }
  a.learning_rate = j.value("learning_rate", a.learning_rate);
  a.momentum = j.value("momentum", a.momentum);
  a.l2 = j.value("l2", a.l2);
  a.min_epochs = j.value("min_epochs", a.min_epochs);
  a.max_epochs = j.value("max_epochs", a.max_epochs);
  return a;
}

inline void require_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw ValidationError(std::string("unknown key '") + it.key() + "' in " + where);
    }
  }
}

}  // namespace detail

/// Spec document (all keys optional except where noted):
/// {
///   "name": str, "seed": uint,
///   "dataset": {"num_classes", "dim", "separation", "spread", "samples_per_class", "public_fraction"},
///   "target":    {"kind": "linear"|"mlp", "hidden": [..], "learning_rate", "momentum", "l2", "min_epochs", "max_epochs"},
///   "evaluator": {same as target, different kind},
///   "generator": {"kind": "identity"|"affine", "latent_dim"},
///   "attack": {"N", "R0", "gamma", "max_iters", "budget" (uint or null), "init_max_tries",
///              "normalize_direction", "step": {"divisor", "cap"}},
///   "target_classes": [..], "seeds": [..], "budgets": [..], "n_grid": [..], "n_budget": uint, "jobs": uint
/// }
inline ExperimentSpec spec_from_json(const Json& j) {
  try {
    detail::require_keys(j,
                         {"name", "seed", "dataset", "target", "evaluator", "generator", "attack",
                          "target_classes", "seeds", "budgets", "n_grid", "n_budget", "jobs"},
                         "spec");
    ExperimentSpec s;
    s.name = j.value("name", s.name);
    s.seed = j.value("seed", s.seed);
    if (j.contains("dataset")) {
      const Json& d = j["dataset"];
      detail::require_keys(d, {"num_classes", "dim", "separation", "spread", "samples_per_class", "public_fraction"},
                           "dataset");
      s.dataset.num_classes = d.value("num_classes", s.dataset.num_classes);
      s.dataset.dim = d.value("dim", s.dataset.dim);
      s.dataset.separation = d.value("separation", s.dataset.separation);
      s.dataset.spread = d.value("spread", s.dataset.spread);
      s.dataset.samples_per_class = d.value("samples_per_class", s.dataset.samples_per_class);
      s.dataset.public_fraction = d.value("public_fraction", s.dataset.public_fraction);
    }
    if (j.contains("target")) s.target = detail::arch_from_json(j["target"]);
    if (j.contains("evaluator")) s.evaluator = detail::arch_from_json(j["evaluator"]);
    if (j.contains("generator")) {
      const Json& g = j["generator"];
      detail::require_keys(g, {"kind", "latent_dim"}, "generator");
      const std::string kind = g.value("kind", "affine");
      if (kind == "identity") {
        s.generator.kind = GeneratorChoice::Kind::Identity;
      } else if (kind == "affine") {
        s.generator.kind = GeneratorChoice::Kind::Affine;
      } else {
        throw ValidationError("unknown generator kind '" + kind + "'");
      }
      s.generator.latent_dim = g.value("latent_dim", s.generator.latent_dim);
    }
    if (j.contains("attack")) {
      const Json& a = j["attack"];
      detail::require_keys(a, {"N", "R0", "gamma", "max_iters", "budget", "init_max_tries", "normalize_direction",
                               "step", "max_radius"},
                           "attack");
      s.attack.num_samples = a.value("N", s.attack.num_samples);
      s.attack.initial_radius = a.value("R0", s.attack.initial_radius);
      s.attack.radius_multiplier = a.value("gamma", s.attack.radius_multiplier);
      s.attack.max_iters = a.value("max_iters", s.attack.max_iters);
      if (a.contains("budget") && !a["budget"].is_null()) s.attack.budget = a["budget"].get<std::uint64_t>();
      s.attack.init_max_tries = a.value("init_max_tries", s.attack.init_max_tries);
      s.attack.normalize_direction = a.value("normalize_direction", s.attack.normalize_direction);
      s.attack.max_radius = a.value("max_radius", s.attack.max_radius);
      MinRatioStep step;
      if (a.contains("step")) {
        detail::require_keys(a["step"], {"divisor", "cap"}, "attack.step");
        step.divisor = a["step"].value("divisor", step.divisor);
        step.cap = a["step"].value("cap", step.cap);
        if (!(step.divisor > 0.0) || !(step.cap > 0.0)) throw ValidationError("step divisor and cap must be positive");
      }
      s.attack.step_rule = step;
    }
    s.target_classes = j.value("target_classes", s.target_classes);
    s.seeds = j.value("seeds", s.seeds);
    s.budgets = j.value("budgets", s.budgets);
    s.n_grid = j.value("n_grid", s.n_grid);
    if (j.contains("n_budget") && !j["n_budget"].is_null()) s.n_budget = j["n_budget"].get<std::uint64_t>();
    s.jobs = j.value("jobs", s.jobs);
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed spec: ") + e.what());
  }
}

inline Json spec_to_json(const ExperimentSpec& s) {
  Json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["dataset"] = {{"num_classes", s.dataset.num_classes},
                  {"dim", s.dataset.dim},
                  {"separation", s.dataset.separation},
                  {"spread", s.dataset.spread},
                  {"samples_per_class", s.dataset.samples_per_class},
                  {"public_fraction", s.dataset.public_fraction}};
  j["target"] = detail::arch_to_json(s.target);
  j["evaluator"] = detail::arch_to_json(s.evaluator);
  j["generator"] = {{"kind", s.generator.kind == GeneratorChoice::Kind::Affine ? "affine" : "identity"},
                    {"latent_dim", s.generator.latent_dim}};
  const auto* step = s.attack.step_rule.target<MinRatioStep>();
  j["attack"] = {{"N", s.attack.num_samples},
                 {"R0", s.attack.initial_radius},
                 {"gamma", s.attack.radius_multiplier},
                 {"max_iters", s.attack.max_iters},
                 {"budget", s.attack.budget ? Json(*s.attack.budget) : Json(nullptr)},
                 {"init_max_tries", s.attack.init_max_tries},
                 {"normalize_direction", s.attack.normalize_direction},
                 {"max_radius", s.attack.max_radius},
                 {"step", {{"divisor", step ? step->divisor : 0.0}, {"cap", step ? step->cap : 0.0}}}};
  j["target_classes"] = s.target_classes;
  j["seeds"] = s.seeds;
  j["budgets"] = s.budgets;
  j["n_grid"] = s.n_grid;
  j["n_budget"] = s.n_budget ? Json(*s.n_budget) : Json(nullptr);
  j["jobs"] = s.jobs;
  return j;
}

// ---------------------------------------------------------------------------
// Runs

/// Everything an experiment attacks and judges with; read-only once built.
struct World {
  SyntheticDataset dataset;
  TrainedClassifier target;
  TrainedClassifier evaluator;
  AnyGenerator generator;
};

inline World prepare_world(const ExperimentSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed);
  RngStream data_rng = root.split(1);
  RngStream target_rng = root.split(2);
  RngStream eval_rng = root.split(3);
  const auto& d = spec.dataset;
  SyntheticDataset ds = make_gaussian_mixture(d.num_classes, d.dim, d.separation, d.spread, d.samples_per_class,
                                              d.public_fraction, data_rng);
  TrainedClassifier target = train_classifier(ds, ds.private_classes, spec.target, target_rng);
  TrainedClassifier evaluator = train_classifier(ds, ds.private_classes, spec.evaluator, eval_rng);
  AnyGenerator generator = spec.generator.kind == GeneratorChoice::Kind::Affine
                               ? AnyGenerator(fit_affine_generator(ds.rows_of(ds.public_classes),
                                                                   spec.generator.latent_dim))
                               : AnyGenerator(IdentityGenerator(d.dim));
  return World{std::move(ds), std::move(target), std::move(evaluator), std::move(generator)};
}

/// One (target class, seed) attack and the evaluator's verdicts.
struct ClassRun {
  std::size_t target_class = 0;  // dataset class id
  std::uint64_t seed = 0;
  AttackResult result;
  bool success = false;
  std::vector<bool> snapshot_success;  // verdict on the center of each cleared radius
  std::string error;
};

inline bool evaluator_agrees(const World& w, std::size_t class_id, const Vector& z) {
  const std::size_t idx = hard_label(w.evaluator.model, w.generator(z));
  return w.evaluator.class_ids[idx] == class_id;
}

inline ClassRun run_one(const World& w, const ExperimentSpec& spec, std::size_t class_id, std::uint64_t seed,
                        const AttackConfig& attack) {
  ClassRun run;
  run.target_class = class_id;
  run.seed = seed;
  try {
    const auto idx = w.target.index_of(class_id);
    if (!idx) throw ValidationError("target class not known to the target model");
    AttackConfig cfg = attack;
    cfg.target_class = *idx;
    ModelOracle oracle(w.target.model);
    RngStream rng = RngStream(spec.seed, 0x1000 + seed).split(class_id);
    run.result = brep_attack(cfg, oracle, w.generator, rng);
    if (run.result.z_star) run.success = evaluator_agrees(w, class_id, *run.result.z_star);
    for (const auto& row : run.result.trace) run.snapshot_success.push_back(evaluator_agrees(w, class_id, row.center));
  } catch (const Error& e) {
    run.error = e.what();
    run.success = false;
  }
  return run;
}

/// Runs every (class, seed) pair, `jobs` at a time; output order is fixed.
inline std::vector<ClassRun> run_attacks(const World& w, const ExperimentSpec& spec, const AttackConfig& attack) {
  std::vector<std::pair<std::size_t, std::uint64_t>> work;
  for (auto s : spec.seeds)
    for (auto c : spec.effective_targets()) work.emplace_back(c, s);
  std::vector<ClassRun> runs(work.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < work.size();) {
      runs[i] = run_one(w, spec, work[i].first, work[i].second, attack);
    }
  };
  const std::size_t jobs = std::min(spec.jobs, std::max<std::size_t>(work.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return runs;
}

/// Fraction of recovered points the evaluator assigns to the intended class.
/// A run without a recovered point counts as a failure.
inline Accuracy attack_accuracy(const std::vector<ClassRun>& runs) {
  if (runs.empty()) throw ValidationError("accuracy is undefined for an empty result list");
  Accuracy a;
  a.attempts = runs.size();
  for (const auto& r : runs) a.successes += r.success ? 1 : 0;
  return a;
}

inline Accuracy attack_accuracy(const std::vector<std::pair<std::size_t, std::optional<Vector>>>& outcomes,
                                const TrainedClassifier& evaluator, const AnyGenerator& generator) {
  if (outcomes.empty()) throw ValidationError("accuracy is undefined for an empty result list");
  Accuracy a;
  a.attempts = outcomes.size();
  for (const auto& [class_id, z] : outcomes) {
    if (z && evaluator.class_ids[hard_label(evaluator.model, generator(*z))] == class_id) ++a.successes;
  }
  return a;
}

struct RunManifest {
  ExperimentSpec spec;
  std::vector<ClassRun> runs;
  Accuracy accuracy;
  double target_train_accuracy = 0.0;
  double evaluator_train_accuracy = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> invocation;
};

inline RunManifest run_experiment(const ExperimentSpec& spec, const World* prebuilt = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  spec.validate();
  std::optional<World> local;
  if (!prebuilt) local.emplace(prepare_world(spec));
  const World& w = prebuilt ? *prebuilt : *local;

  {
    ModelOracle probe(w.target.model);
    probe_determinism(probe, w.generator(Vector::Zero(static_cast<Eigen::Index>(w.generator.latent_dim()))));
  }

  RunManifest m;
  m.spec = spec;
  m.runs = run_attacks(w, spec, spec.attack);
  m.accuracy = attack_accuracy(m.runs);
  m.target_train_accuracy = w.target.train_accuracy;
  m.evaluator_train_accuracy = w.evaluator.train_accuracy;
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

inline Json manifest_to_json(const RunManifest& m) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["invocation"] = m.invocation;
  j["spec"] = spec_to_json(m.spec);
  j["target_train_accuracy"] = m.target_train_accuracy;
  j["evaluator_train_accuracy"] = m.evaluator_train_accuracy;
  j["normalize_direction"] = m.spec.attack.normalize_direction;
  Json runs = Json::array();
  for (const auto& r : m.runs) {
    Json jr;
    jr["target_class"] = r.target_class;
    jr["seed"] = r.seed;
    jr["termination"] = to_string(r.result.termination);
    jr["success"] = r.success;
    if (!r.error.empty()) jr["error"] = r.error;
    jr["z_star"] = r.result.z_star ? to_json(*r.result.z_star) : Json(nullptr);
    jr["cleared_radius"] = r.result.cleared_radius;
    jr["final_radius"] = r.result.current_radius;
    jr["queries"] = {{"init_tries", r.result.ledger.init_tries},
                     {"loop_passes", r.result.ledger.loop_passes},
                     {"sphere_queries", r.result.ledger.sphere_queries},
                     {"verifications", r.result.ledger.verifications},
                     {"ledger_total", r.result.ledger.total()},
                     {"oracle_count", r.result.oracle_count}};
    jr["updates"] = {{"accepted", r.result.accepted_updates},
                     {"rejected", r.result.rejected_updates},
                     {"skipped", r.result.skipped_updates}};
    Json trace = Json::array();
    for (std::size_t i = 0; i < r.result.trace.size(); ++i) {
      const auto& row = r.result.trace[i];
      trace.push_back({{"radius", row.radius},
                       {"iters_to_clear", row.iters_to_clear},
                       {"queries_to_clear", row.queries_to_clear},
                       {"cumulative_queries", row.cumulative_queries},
                       {"success", static_cast<bool>(r.snapshot_success[i])},
                       {"center", to_json(row.center)}});
    }
    jr["trace"] = trace;
    runs.push_back(jr);
  }
  j["runs"] = runs;
  j["totals"] = {{"attempts", m.accuracy.attempts},
                 {"successes", m.accuracy.successes},
                 {"accuracy", m.accuracy.value()},
                 {"accuracy_percent", m.accuracy.percent()}};
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j;
}

/// Manifest JSON without wall-clock fields, for reproducibility checks.
inline Json strip_wall_clock(Json j) {
  j.erase("wall_clock_seconds");
  return j;
}

inline void write_traces_csv(std::ostream& os, const RunManifest& m) {
  os << "target_class,seed,radius,iters_to_clear,cumulative_queries\n";
  char buf[128];
  for (const auto& r : m.runs) {
    for (const auto& row : r.result.trace) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%zu,%llu\n", r.target_class,
                    static_cast<unsigned long long>(r.seed), row.radius, row.iters_to_clear,
                    static_cast<unsigned long long>(row.cumulative_queries));
      os << buf;
    }
  }
}

// ---------------------------------------------------------------------------
// Reports and sweeps

struct RadiusReportRow {
  double radius = 0.0;
  std::size_t reached = 0;
  std::size_t total = 0;
  double reach_fraction = 0.0;
  std::size_t min_iters = 0;
  std::size_t max_iters = 0;
  double mean_iters = 0.0;
  // Verdict on the center that cleared this radius, over runs that reached it.
  double success_reached = 0.0;
  // Verdict on z_star, over runs whose largest cleared radius is this one.
  std::size_t halted = 0;
  double success_halted = 0.0;
};

/// Per cleared radius across every run of every manifest, ordered by radius.
inline std::vector<RadiusReportRow> radius_report(const std::vector<Json>& manifests) {
  if (manifests.empty()) throw ValidationError("radius report needs at least one manifest");
  struct Acc {
    double radius = 0.0;
    std::vector<std::size_t> iters;
    std::size_t snap_ok = 0;
    std::size_t halted = 0;
    std::size_t halted_ok = 0;
  };
  std::vector<Acc> rungs;
  std::size_t total = 0;
  for (const auto& m : manifests) {
    if (!m.contains("runs") || !m["runs"].is_array()) throw FormatError("manifest has no runs");
    for (const auto& r : m["runs"]) {
      ++total;
      const auto& trace = r.at("trace");
      for (std::size_t k = 0; k < trace.size(); ++k) {
        if (rungs.size() <= k) {
          rungs.emplace_back();
          rungs.back().radius = trace[k].at("radius").get<double>();
        }
        rungs[k].iters.push_back(trace[k].at("iters_to_clear").get<std::size_t>());
        rungs[k].snap_ok += trace[k].at("success").get<bool>() ? 1 : 0;
        if (k + 1 == trace.size()) {
          ++rungs[k].halted;
          rungs[k].halted_ok += r.at("success").get<bool>() ? 1 : 0;
        }
      }
    }
  }
  std::vector<RadiusReportRow> rows;
  for (const auto& a : rungs) {
    RadiusReportRow row;
    row.radius = a.radius;
    row.reached = a.iters.size();
    row.total = total;
    row.reach_fraction = static_cast<double>(row.reached) / static_cast<double>(total);
    row.min_iters = *std::min_element(a.iters.begin(), a.iters.end());
    row.max_iters = *std::max_element(a.iters.begin(), a.iters.end());
    row.mean_iters = static_cast<double>(std::accumulate(a.iters.begin(), a.iters.end(), std::size_t{0})) /
                     static_cast<double>(a.iters.size());
    row.success_reached = static_cast<double>(a.snap_ok) / static_cast<double>(row.reached);
    row.halted = a.halted;
    row.success_halted = a.halted ? static_cast<double>(a.halted_ok) / static_cast<double>(a.halted) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_report_csv(std::ostream& os, const std::vector<RadiusReportRow>& rows) {
  os << "radius,reach_percent,min_iters,max_iters,avg_iters,success_percent,halted,halted_success_percent\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%s,%zu,%zu,%.2f,%s,%zu,%s\n", r.radius,
                  format_percent(r.reach_fraction).c_str(), r.min_iters, r.max_iters, r.mean_iters,
                  format_percent(r.success_reached).c_str(), r.halted,
                  r.halted ? format_percent(r.success_halted).c_str() : "");
    os << buf;
  }
}

struct SweepPoint {
  std::uint64_t budget = 0;
  std::size_t n = 0;
  Accuracy accuracy;
  double mean_queries = 0.0;
};

/// One experiment per budget, identical seeds and world.
inline std::vector<SweepPoint> budget_sweep(const ExperimentSpec& spec, const std::vector<std::uint64_t>& budgets,
                                            const World* prebuilt = nullptr) {
  if (budgets.empty()) throw ValidationError("budget grid is empty");
  if (!std::is_sorted(budgets.begin(), budgets.end())) throw ValidationError("budgets must be ascending");
  if (budgets.front() == 0) throw ValidationError("budgets must be positive");
  std::optional<World> local;
  if (!prebuilt) local.emplace(prepare_world(spec));
  const World& w = prebuilt ? *prebuilt : *local;
  std::vector<SweepPoint> out;
  for (auto b : budgets) {
    AttackConfig cfg = spec.attack;
    cfg.budget = b;
    const auto runs = run_attacks(w, spec, cfg);
    SweepPoint p;
    p.budget = b;
    p.n = cfg.num_samples;
    p.accuracy = attack_accuracy(runs);
    for (const auto& r : runs) p.mean_queries += static_cast<double>(r.result.oracle_count);
    p.mean_queries /= static_cast<double>(runs.size());
    out.push_back(p);
  }
  return out;
}

/// Same budget, varying N.
inline std::vector<SweepPoint> n_tradeoff_sweep(const ExperimentSpec& spec, std::uint64_t budget,
                                                const std::vector<std::size_t>& n_grid,
                                                const World* prebuilt = nullptr) {
  if (n_grid.empty()) throw ValidationError("N grid is empty");
  if (budget == 0) throw ValidationError("budget must be positive");
  for (auto n : n_grid) {
    if (n == 0 || n > budget) throw ValidationError("every N must lie in [1, budget]");
  }
  std::optional<World> local;
  if (!prebuilt) local.emplace(prepare_world(spec));
  const World& w = prebuilt ? *prebuilt : *local;
  std::vector<SweepPoint> out;
  for (auto n : n_grid) {
    AttackConfig cfg = spec.attack;
    cfg.budget = budget;
    cfg.num_samples = n;
    const auto runs = run_attacks(w, spec, cfg);
    SweepPoint p;
    p.budget = budget;
    p.n = n;
    p.accuracy = attack_accuracy(runs);
    for (const auto& r : runs) p.mean_queries += static_cast<double>(r.result.oracle_count);
    p.mean_queries /= static_cast<double>(runs.size());
    out.push_back(p);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& pts) {
  os << "budget,log2_budget,N,successes,attempts,accuracy_percent,mean_queries\n";
  char buf[192];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%llu,%.4f,%zu,%zu,%zu,%s,%.2f\n", static_cast<unsigned long long>(p.budget),
                  std::log2(static_cast<double>(p.budget)), p.n, p.accuracy.successes, p.accuracy.attempts,
                  p.accuracy.percent().c_str(), p.mean_queries);
    os << buf;
  }
}

struct SeedStudy {
  std::vector<std::uint64_t> seeds;
  std::vector<Accuracy> accuracies;
  /// max - min accuracy, in percentage points.
  double spread_points() const {
    double lo = 1.0, hi = 0.0;
    for (const auto& a : accuracies) {
      lo = std::min(lo, a.value());
      hi = std::max(hi, a.value());
    }
    return 100.0 * (hi - lo);
  }
};

/// Reruns the experiment once per attack seed on the same world.
inline SeedStudy seed_study(const ExperimentSpec& spec, const std::vector<std::uint64_t>& seeds,
                            const World* prebuilt = nullptr) {
  if (seeds.size() < 2) throw ValidationError("a seed study needs at least two seeds");
  std::optional<World> local;
  if (!prebuilt) local.emplace(prepare_world(spec));
  const World& w = prebuilt ? *prebuilt : *local;
  SeedStudy out;
  for (auto s : seeds) {
    ExperimentSpec one = spec;
    one.seeds = {s};
    out.seeds.push_back(s);
    out.accuracies.push_back(attack_accuracy(run_attacks(w, one, one.attack)));
  }
  return out;
}

}  // namespace brep

#endif  // BREP_HARNESS_HPP

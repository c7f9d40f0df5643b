#ifndef BREP_CLI_HPP
#define BREP_CLI_HPP

// Command-line front end. Exit codes:
//   0  success (per-class attack failures are recorded, not fatal)
//   1  unexpected internal error
//   2  usage error or invalid spec / model / arguments
//   3  I/O failure
//   4  numerical degeneracy (e.g. zero gradient at the base point)

#include "brep/harness.hpp"
#include "brep/oracle.hpp"
#include "brep/serialization.hpp"
#include "brep/theory.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace brep::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kIo = 3, kNumerical = 4 };

namespace detail {

namespace fs = std::filesystem;

class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string join_invocation(const std::vector<std::string>& args) {
  std::string out;
  for (const auto& a : args) {
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline void write_file(const fs::path& path, const std::string& text) {
  try {
    write_text_file(path.string(), text);
  } catch (const std::ios_base::failure&) {
    throw IoError("cannot write " + path.string());
  }
}

inline Json read_json(const std::string& path) {
  try {
    return read_json_file(path);
  } catch (const std::ios_base::failure&) {
    throw IoError("cannot read " + path);
  }
}

/// "# brep_cli <version>: <invocation>" line that leads every CSV.
inline std::string csv_preamble(const std::vector<std::string>& invocation) {
  return std::string("# brep_cli ") + kToolVersion + ": " + join_invocation(invocation) + "\n";
}

inline Json meta_json(const std::vector<std::string>& invocation) {
  return {{"tool_version", kToolVersion}, {"invocation", invocation}};
}

inline ExperimentSpec load_spec(const std::string& path, const std::optional<std::uint64_t>& seed,
                                const std::optional<std::size_t>& jobs) {
  ExperimentSpec spec = spec_from_json(read_json(path));
  if (seed) spec.seed = *seed;
  if (jobs) spec.jobs = *jobs;
  spec.validate();
  return spec;
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(lo * std::pow(hi / lo, t));
  }
  return out;
}

// Built-in theory testbeds.
struct Testbed {
  MarginModel model;
  Vector point;
  std::vector<double> radii;
};

/// 16-D two-class linear model; margin 1 at the base point, boundary 4 away.
inline Testbed linear_testbed() {
  const Eigen::Index d = 16;
  Matrix w = Matrix::Zero(2, d);
  w(0, 0) = 0.25;
  Vector b = Vector::Zero(2);
  Vector z = Vector::Zero(d);
  z[0] = 4.0;
  return {MarginModel(LinearSoftmaxClassifier(w, b), 0), z, {0.5, 2.0, 8.0, 32.0}};
}

/// 8-D unit-ball class; base point halfway between center and boundary.
inline Testbed curved_testbed() {
  const Eigen::Index d = 8;
  Vector z = Vector::Zero(d);
  z[0] = 0.5;
  return {MarginModel(QuadraticBallClassifier(Vector::Zero(d)), 0), z, log_grid(0.1, 10.0, 12)};
}

inline volatile std::sig_atomic_t g_stop = 0;
inline void on_signal(int) { g_stop = 1; }

}  // namespace detail

/// Entry point shared by the binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  std::vector<std::string> invocation(argv, argv + argc);

  CLI::App app{"Label-only boundary-repulsion model inversion toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string spec_path, out_dir;

  // attack
  auto* attack = app.add_subcommand("attack", "Run every (target class, seed) attack in a spec");
  attack->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  attack->add_option("--out", out_dir, "Output directory")->required();
  attack->add_option("--seed", seed, "Override the spec's master seed");
  attack->add_option("--jobs", jobs, "Parallel (class, seed) runs")->check(CLI::PositiveNumber);

  // verify-theory
  std::string testbed, model_path, point_text, csv_path;
  std::vector<double> radii;
  std::size_t samples = 512, trials = 100, target = 0;
  std::uint64_t theory_seed = 0;
  auto* theory = app.add_subcommand("verify-theory", "Alignment of the hard-label estimate with the margin gradient");
  auto* tb = theory->add_option("--testbed", testbed, "Built-in testbed: linear or curved")
                 ->check(CLI::IsMember({"linear", "curved"}));
  auto* mp = theory->add_option("--model", model_path, "Model JSON (identity generator)");
  tb->excludes(mp);
  theory->add_option("--target", target, "Target class for --model");
  theory->add_option("--point", point_text, "Comma-separated base point for --model");
  theory->add_option("--radii", radii, "Ascending radii (default depends on testbed)")->delimiter(',');
  theory->add_option("--samples", samples, "Sphere samples per trial");
  theory->add_option("--trials", trials, "Trials per radius (at least 30)");
  theory->add_option("--seed", theory_seed, "Seed");
  theory->add_option("--out", csv_path, "Output CSV")->required();

  // sweep-budget
  std::vector<std::uint64_t> budgets;
  auto* sweep_b = app.add_subcommand("sweep-budget", "Accuracy against query budget");
  sweep_b->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  sweep_b->add_option("--out", out_dir, "Output directory")->required();
  sweep_b->add_option("--budgets", budgets, "Ascending budgets (default: spec budgets)")->delimiter(',');
  sweep_b->add_option("--seed", seed, "Override the spec's master seed");
  sweep_b->add_option("--jobs", jobs, "Parallel (class, seed) runs")->check(CLI::PositiveNumber);

  // sweep-n
  std::vector<std::size_t> n_grid;
  std::optional<std::uint64_t> n_budget;
  auto* sweep_n = app.add_subcommand("sweep-n", "Accuracy against N at a fixed budget");
  sweep_n->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  sweep_n->add_option("--out", out_dir, "Output directory")->required();
  sweep_n->add_option("--budget", n_budget, "Shared budget (default: spec n_budget)");
  sweep_n->add_option("--n-grid", n_grid, "Sample counts (default: spec n_grid)")->delimiter(',');
  sweep_n->add_option("--seed", seed, "Override the spec's master seed");
  sweep_n->add_option("--jobs", jobs, "Parallel (class, seed) runs")->check(CLI::PositiveNumber);

  // report
  std::vector<std::string> manifests;
  auto* report = app.add_subcommand("report", "Per-radius table from one or more manifests");
  report->add_option("--manifest", manifests, "Manifest JSON (repeatable)")->required();
  report->add_option("--out", out_dir, "Output directory")->required();

  // serve-oracle
  std::string listen = "127.0.0.1:0";
  bool use_stdio = false;
  auto* serve = app.add_subcommand("serve-oracle", "Answer label queries for a model");
  serve->add_option("--model", model_path, "Model JSON")->required();
  serve->add_option("--listen", listen, "host:port (port 0 picks one)");
  serve->add_flag("--stdio", use_stdio, "Serve requests on stdin/stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*attack) {
      const ExperimentSpec spec = detail::load_spec(spec_path, seed, jobs);
      const World world = prepare_world(spec);
      RunManifest m = run_experiment(spec, &world);
      m.invocation = invocation;
      const Json manifest = manifest_to_json(m);
      std::vector<Json> one{manifest};
      std::ostringstream traces, rep;
      traces << detail::csv_preamble(invocation);
      write_traces_csv(traces, m);
      rep << detail::csv_preamble(invocation);
      write_report_csv(rep, radius_report(one));
      Json models = detail::meta_json(invocation);
      models["target"] = model_to_json(world.target.model);
      models["target_class_ids"] = world.target.class_ids;
      models["evaluator"] = model_to_json(world.evaluator.model);
      models["evaluator_class_ids"] = world.evaluator.class_ids;
      models["generator"] = generator_to_json(world.generator);

      const fs::path dir(out_dir);
      detail::ensure_dir(dir);
      detail::write_file(dir / "manifest.json", dump_json(manifest) + "\n");
      detail::write_file(dir / "traces.csv", traces.str());
      detail::write_file(dir / "report.csv", rep.str());
      Json target_doc = model_to_json(world.target.model);
      target_doc.update(detail::meta_json(invocation));
      detail::write_file(dir / "target_model.json", dump_json(target_doc) + "\n");
      detail::write_file(dir / "models.json", dump_json(models) + "\n");
      out << "accuracy " << m.accuracy.percent() << "% (" << m.accuracy.successes << "/" << m.accuracy.attempts
          << ")\n";
      return kOk;
    }

    if (*theory) {
      std::optional<detail::Testbed> bed;
      if (!model_path.empty()) {
        AnyClassifier model = model_from_json(detail::read_json(model_path));
        Vector z;
        if (point_text.empty()) {
          z = Vector::Zero(static_cast<Eigen::Index>(input_dim(model)));
        } else {
          std::vector<double> vals;
          std::stringstream ss(point_text);
          for (std::string tok; std::getline(ss, tok, ',');) {
            auto v = protocol::parse_real(tok);
            if (!v) throw InvalidArgument("bad --point value '" + tok + "'");
            vals.push_back(*v);
          }
          z = vec::from(vals);
        }
        check_input(input_dim(model), z);
        bed.emplace(detail::Testbed{MarginModel(std::move(model), target), z, detail::log_grid(0.1, 10.0, 12)});
      } else if (testbed == "curved") {
        bed.emplace(detail::curved_testbed());
      } else if (testbed == "linear") {
        bed.emplace(detail::linear_testbed());
      } else {
        throw InvalidArgument("give --testbed or --model");
      }
      if (!radii.empty()) bed->radii = radii;
      RngStream rng(theory_seed);
      const IdentityGenerator gen(bed->model.input_dim());
      const AlignmentCurve curve = alignment_sweep(bed->model, gen, bed->point, bed->radii, samples, trials, rng);
      std::ostringstream csv;
      csv << detail::csv_preamble(invocation);
      write_alignment_csv(csv, curve);
      const fs::path path(csv_path);
      if (path.has_parent_path()) detail::ensure_dir(path.parent_path());
      detail::write_file(path, csv.str());
      out << "argmax radius " << curve.points[curve.argmax()].radius << "\n";
      return kOk;
    }

    if (*sweep_b) {
      const ExperimentSpec spec = detail::load_spec(spec_path, seed, jobs);
      const auto grid = budgets.empty() ? spec.budgets : budgets;
      const auto pts = budget_sweep(spec, grid);
      std::ostringstream csv;
      csv << detail::csv_preamble(invocation);
      write_sweep_csv(csv, pts);
      const fs::path dir(out_dir);
      detail::ensure_dir(dir);
      detail::write_file(dir / "sweep_budget.csv", csv.str());
      return kOk;
    }

    if (*sweep_n) {
      const ExperimentSpec spec = detail::load_spec(spec_path, seed, jobs);
      const auto grid = n_grid.empty() ? spec.n_grid : n_grid;
      const auto budget = n_budget ? n_budget : spec.n_budget;
      if (!budget) throw InvalidArgument("no budget given for the N sweep");
      const auto pts = n_tradeoff_sweep(spec, *budget, grid);
      std::ostringstream csv;
      csv << detail::csv_preamble(invocation);
      write_sweep_csv(csv, pts);
      const fs::path dir(out_dir);
      detail::ensure_dir(dir);
      detail::write_file(dir / "sweep_n.csv", csv.str());
      return kOk;
    }

    if (*report) {
      std::vector<Json> docs;
      for (const auto& p : manifests) docs.push_back(detail::read_json(p));
      std::ostringstream csv;
      csv << detail::csv_preamble(invocation);
      write_report_csv(csv, radius_report(docs));
      const fs::path dir(out_dir);
      detail::ensure_dir(dir);
      detail::write_file(dir / "report.csv", csv.str());
      return kOk;
    }

    if (*serve) {
      const AnyClassifier model = model_from_json(detail::read_json(model_path));
      if (use_stdio) {
        protocol::serve_stream(model, std::cin, out);
        return kOk;
      }
      OracleServer server(model, Endpoint::parse(listen));
      detail::g_stop = 0;
      std::signal(SIGINT, detail::on_signal);
      std::signal(SIGTERM, detail::on_signal);
      server.start();
      out << "LISTENING " << server.endpoint().str() << std::endl;
      while (!detail::g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      server.stop();
      out << "served " << server.served() << "\n";
      return kOk;
    }
  } catch (const detail::IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::ios_base::failure& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingFailed& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace brep::cli

#endif  // BREP_CLI_HPP

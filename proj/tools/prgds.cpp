// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line front end: simulate, fit, evaluate, selftest. Exit codes:
// 0 success, 1 usage error, 2 data error, 3 numeric failure, 4 selftest
// failure. Every run is deterministic given its full flag set, and every
// file output starts with a header recording version, flags, and seeds.

#include <omp.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prgds/baseline.hpp"
#include "prgds/checkpoint.hpp"
#include "prgds/engine.hpp"
#include "prgds/errors.hpp"
#include "prgds/evaluation.hpp"
#include "prgds/hyperfile.hpp"
#include "prgds/model.hpp"
#include "prgds/selftest.hpp"
#include "prgds/tensor.hpp"

namespace {

using namespace prgds;

constexpr const char* kVersion = "prgds 1.0.0";

std::string quote_arg(const std::string& a) {
  if (a.find_first_of(" \t\"") == std::string::npos) return a;
  std::string out = "\"";
  for (char c : a) {
    if (c == '"') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_invocation(int argc, char** argv) {
  std::string out = "prgds";
  for (int i = 1; i < argc; ++i) {
    out += ' ';
    out += quote_arg(argv[i]);
  }
  return out;
}

std::vector<std::string> output_header(const std::string& invocation) {
  return {std::string(kVersion), "invocation: " + invocation};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string hyper_file;
  std::vector<long> dims;
  long num_steps = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate(const SimulateArgs& args, const std::string& invocation) {
  ModelHyper hyper =
      args.hyper_file.empty() ? ModelHyper{} : load_hyper_file(args.hyper_file);
  validate(hyper);
  for (long d : args.dims) {
    if (d < 1) throw DataError("--dims entries must be positive");
  }
  if (args.num_steps < 1) throw DataError("--T must be positive");

  Rng rng(args.seed);
  const ModelState state = sample_prior(hyper, args.dims, args.num_steps, rng);
  const SparseCountSequence data = simulate_data(state, rng);

  auto comments = output_header(invocation);
  comments.push_back("seed: " + std::to_string(args.seed));
  write_coordinate_file(data, args.out, comments);

  const std::string state_path = args.out + ".state";
  std::ofstream sf(state_path, std::ios::binary);
  if (!sf) throw DataError("cannot open " + state_path + " for writing");
  write_state(sf, state);
  if (!sf) throw DataError("write failed for " + state_path);

  std::cerr << "simulate: wrote " << data.nnz() << " entries (total "
            << data.total() << ") to " << args.out << " and the generating state to "
            << state_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string model;
  std::string data_path;
  std::string hyper_file;
  std::uint64_t mask_seed = 0;
  bool mask_seed_given = false;
  long n_smoothing = 0;
  double epsilon_theta = 1.0;
  bool epsilon_theta_given = false;
  bool stationary_rho = false;
  long num_components = 100;
  bool num_components_given = false;
  McmcConfig config;
  std::string out_samples;
  long checkpoint_every = 500;
  bool quiet = false;
};

int run_fit(const FitArgs& args, const std::string& invocation) {
  const SparseCountSequence data = load_coordinate_file(args.data_path);

  ModelHyper hyper =
      args.hyper_file.empty() ? ModelHyper{} : load_hyper_file(args.hyper_file);
  if (args.num_components_given) {
    hyper.num_components = args.num_components;
  } else if (args.hyper_file.empty()) {
    hyper.num_components = 100;  // protocol default for fitting
  }
  if (args.epsilon_theta_given) hyper.eps_theta = args.epsilon_theta;
  if (args.stationary_rho) hyper.stationary_rho = true;
  validate(hyper);

  HoldoutMask mask = HoldoutMask::none(data.num_steps());
  if (args.mask_seed_given) {
    Rng mask_rng(args.mask_seed);
    mask = make_holdout_mask(data.num_steps(), args.n_smoothing, mask_rng);
  } else if (args.n_smoothing > 0) {
    throw DataError("--n-smoothing requires --mask-seed");
  }
  auto mask_comments = output_header(invocation);
  mask_comments.push_back(args.mask_seed_given
                              ? "mask-seed: " + std::to_string(args.mask_seed)
                              : "mask-seed: none (nothing held out)");
  write_mask_file(mask, args.out_samples + ".mask", mask_comments);

  FitOptions options;
  if (!args.quiet) options.progress = &std::cerr;
  if (args.checkpoint_every > 0) {
    options.checkpoint_prefix = args.out_samples + ".ckpt";
    options.checkpoint_every = args.checkpoint_every;
  }

  PosteriorSampleSet result =
      args.model == "static" ? fit_static_cp(data, mask, hyper, args.config, options)
                             : fit(data, mask, hyper, args.config, options);
  result.dataset = args.data_path;
  result.mask_seed = args.mask_seed_given ? args.mask_seed : 0;
  result.invocation = invocation;
  save_samples(args.out_samples, result);
  std::cerr << "fit: saved " << result.samples.size() << " posterior samples to "
            << args.out_samples << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string samples;
  std::string baseline_samples;
  std::string data_path;
  std::string mask_path;
  std::string out_csv;
};

int run_evaluate(const EvaluateArgs& args, const std::string& invocation) {
  const PosteriorSampleSet model = load_samples(args.samples);
  const PosteriorSampleSet baseline = load_samples(args.baseline_samples);
  const SparseCountSequence data = load_coordinate_file(args.data_path);
  const HoldoutMask mask = load_mask_file(args.mask_path);
  if (mask.smoothing.empty() && mask.forecasting.empty()) {
    throw DataError("mask holds no steps; nothing to evaluate");
  }

  std::vector<EvalRow> rows;
  for (HeldoutSubset subset : {HeldoutSubset::kSmoothing,
                               HeldoutSubset::kForecasting, HeldoutSubset::kAll}) {
    if (subset == HeldoutSubset::kSmoothing && mask.smoothing.empty()) continue;
    if (subset == HeldoutSubset::kForecasting && mask.forecasting.empty()) continue;
    const double base_rate = information_rate(baseline, data, mask, subset);
    const double model_rate = information_rate(model, data, mask, subset);
    rows.push_back({baseline.model_name, baseline.dataset, baseline.mask_seed,
                    subset_name(subset), base_rate, 0.0});
    rows.push_back({model.model_name, model.dataset, model.mask_seed,
                    subset_name(subset), model_rate,
                    information_gain(base_rate, model_rate)});
  }

  std::ofstream out(args.out_csv);
  if (!out) throw DataError("cannot open " + args.out_csv + " for writing");
  for (const auto& c : output_header(invocation)) out << "# " << c << '\n';
  write_eval_csv(out, rows);
  if (!out) throw DataError("write failed for " + args.out_csv);
  std::cerr << "evaluate: wrote " << rows.size() << " rows to " << args.out_csv
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string invocation = join_invocation(argc, argv);

  CLI::App app{"Gibbs-sampling toolkit for dynamical sparse count tensors"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP thread budget (0 keeps the runtime default)");

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Draw a model instance and a data sequence");
  sim_cmd->add_option("--hyper-file", sim.hyper_file,
                      "key=value hyperparameter file (defaults when omitted)");
  sim_cmd->add_option("--dims", sim.dims, "mode dimensions")
      ->required()
      ->expected(1, -1);
  sim_cmd->add_option("--T", sim.num_steps, "number of time steps")->required();
  sim_cmd->add_option("--seed", sim.seed, "generator seed");
  sim_cmd->add_option("--out", sim.out, "output data file (.gz supported)")
      ->required();

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Run the Gibbs sampler");
  fit_cmd->add_option("--model", fit_args.model, "model family")
      ->required()
      ->check(CLI::IsMember({"prgds", "static"}));
  fit_cmd->add_option("--data", fit_args.data_path, "coordinate data file")
      ->required();
  fit_cmd->add_option("--hyper-file", fit_args.hyper_file,
                      "key=value hyperparameter file");
  auto* mask_seed_opt = fit_cmd->add_option(
      "--mask-seed", fit_args.mask_seed,
      "seed for the held-out mask; omitting it holds nothing out");
  fit_cmd->add_option("--n-smoothing", fit_args.n_smoothing,
                      "number of held-out interior steps");
  auto* eps_opt =
      fit_cmd->add_option("--epsilon-theta", fit_args.epsilon_theta,
                          "activation shape offset: 0 sparse, 1 dense")
          ->check(CLI::IsMember({0.0, 1.0}));
  fit_cmd->add_flag("--stationary-rho", fit_args.stationary_rho,
                    "share one scaling factor across steps");
  auto* k_opt = fit_cmd->add_option("--K", fit_args.num_components,
                                    "number of components (default 100)");
  fit_cmd->add_option("--iters", fit_args.config.n_iterations, "iterations per chain");
  fit_cmd->add_option("--burnin", fit_args.config.burn_in, "burn-in iterations");
  fit_cmd->add_option("--thin", fit_args.config.thin, "thinning interval");
  fit_cmd->add_option("--chains", fit_args.config.n_chains, "number of chains");
  fit_cmd->add_option("--seed", fit_args.config.seed, "sampler seed");
  fit_cmd->add_option("--out-samples", fit_args.out_samples,
                      "output posterior sample archive")
      ->required();
  fit_cmd->add_option("--checkpoint-every", fit_args.checkpoint_every,
                      "iterations between checkpoints (0 disables)");
  fit_cmd->add_flag("--quiet", fit_args.quiet, "suppress progress lines");

  EvaluateArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score held-out steps and the gain vs a baseline");
  eval_cmd->add_option("--samples", eval_args.samples, "model sample archive")
      ->required();
  eval_cmd->add_option("--baseline-samples", eval_args.baseline_samples,
                       "baseline sample archive")
      ->required();
  eval_cmd->add_option("--data", eval_args.data_path, "coordinate data file")
      ->required();
  eval_cmd->add_option("--mask", eval_args.mask_path, "held-out mask file")
      ->required();
  eval_cmd->add_option("--out-csv", eval_args.out_csv, "output CSV")->required();

  std::string suite;
  CLI::App* self_cmd = app.add_subcommand("selftest", "Run a built-in check suite");
  self_cmd->add_option("--suite", suite, "which suite to run")
      ->required()
      ->check(CLI::IsMember({"distributions", "geweke", "scaling"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  fit_args.mask_seed_given = mask_seed_opt->count() > 0;
  fit_args.epsilon_theta_given = eps_opt->count() > 0;
  fit_args.num_components_given = k_opt->count() > 0;

  try {
    if (threads > 0) omp_set_num_threads(threads);
    if (sim_cmd->parsed()) return run_simulate(sim, invocation);
    if (fit_cmd->parsed()) return run_fit(fit_args, invocation);
    if (eval_cmd->parsed()) return run_evaluate(eval_args, invocation);
    if (self_cmd->parsed()) {
      std::cout << kVersion << " selftest suite " << suite << '\n';
      return run_suite(suite, std::cout) ? 0 : 4;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

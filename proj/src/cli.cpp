#include "aor/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aor/common.hpp"
#include "aor/io.hpp"
#include "aor/lagrange.hpp"
#include "aor/metrics.hpp"
#include "aor/recovery.hpp"
#include "aor/synthgen.hpp"
#include "aor/tuning.hpp"

namespace aor::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

/// Pull a key from a config section unless the flag was given explicitly.
template <typename T>
void config_default(const json& section, const char* key, const CLI::Option* opt, T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (section.contains(key)) value = section.at(key).get<T>();
}

void write_run_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed,
                        const json& effective_config, ordered_json extra = {}) {
  ordered_json manifest;
  manifest["tool"] = "aor";
  manifest["version"] = "0.1.0";
  manifest["command"] = command;
  manifest["seed"] = seed;
  const std::string body = effective_config.dump();
  manifest["config_hash"] = fnv1a(body.data(), body.size());
  manifest["config"] = effective_config;
  for (auto& [k, v] : extra.items()) manifest[k] = v;
  manifest["created_at"] = utc_now();
  io::write_text_file(dir / "run_manifest.json", manifest.dump(2) + "\n");
}

struct GenerateArgs {
  std::string out;
  std::string config_path;
  synth::ScenarioConfig scenario;
  int samples = 1;
};

int cmd_generate(const GenerateArgs& args) {
  if (args.samples < 1) throw ValidationError("generate: --samples must be >= 1");
  args.scenario.validate();
  const std::string stamp = utc_now();
  if (args.samples == 1) {
    const synth::Scenario scenario = synth::generate(args.scenario);
    io::write_scenario(args.out, scenario, args.scenario, stamp);
    std::cout << "wrote scenario to " << args.out << " (" << scenario.network.num_links()
              << " links, " << scenario.od_pairs.size() << " OD pairs)\n";
  } else {
    const std::vector<synth::Scenario> family = synth::generate_family(args.scenario, args.samples);
    for (std::size_t i = 0; i < family.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%03zu", i);
      io::write_scenario(fs::path(args.out) / name, family[i], args.scenario, stamp);
    }
    std::cout << "wrote " << family.size() << " samples to " << args.out << "\n";
  }
  return kOk;
}

struct SolverArgs {
  double tol = 1e-8;
  std::int64_t max_iter = 0;
  bool jacobi = false;
};

struct RecoverArgs {
  std::string in;
  std::string out;
  std::string config_path;
  std::string hyper_file;
  bool no_lr = false;
  Hyperparameters hyper{1e-6, 1e-4, 100.0, 0.0};
  SolverArgs solver;
  lr::LrConfig lr_config;
  /// Flat q prior on every OD column (vehicles/bin); enabled when >= 0.
  double demand_prior = -1.0;
};

Hyperparameters load_hyper_file(const std::string& path) {
  const json j = json::parse(io::read_text_file(path));
  Hyperparameters h;
  h.w_x = j.at("w_x").get<double>();
  h.w_q = j.at("w_q").get<double>();
  h.w_sx = j.at("w_sx").get<double>();
  h.w_sq = j.at("w_sq").get<double>();
  return h;
}

void warn_unreachable(const synth::Scenario& sc) {
  int unreachable = 0;
  for (const auto& ps : sc.path_sets)
    if (ps.paths.empty()) ++unreachable;
  if (unreachable > 0)
    std::cerr << "warning: " << unreachable
              << " OD pair(s) unreachable; excluded from the assignment\n";
}

int cmd_recover(const RecoverArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const io::LoadedScenario loaded = io::load_scenario(args.in);
  const synth::Scenario& sc = loaded.scenario;
  warn_unreachable(sc);
  const auto t1 = std::chrono::steady_clock::now();

  Hyperparameters hyper = args.hyper;
  if (!args.hyper_file.empty()) hyper = load_hyper_file(args.hyper_file);
  hyper.validate();

  CgOptions cg{args.solver.tol, args.solver.max_iter, args.solver.jacobi};

  Observations observations = sc.observations;
  if (args.demand_prior >= 0.0) {
    observations.observed_od_cols.clear();
    observations.q0.clear();
    for (int j = 0; j < sc.index.od_time_count(); ++j) {
      observations.observed_od_cols.push_back(j);
      observations.q0.push_back(args.demand_prior);
    }
  }

  fs::create_directories(args.out);
  RecoveryResult result;
  bool solver_ok = true;
  if (args.no_lr) {
    result = recover(sc.assignment, observations, hyper, cg);
    solver_ok = result.converged;
  } else {
    lr::LrConfig lrc = args.lr_config;
    lrc.cg = cg;
    const lr::LrResult lr_result = lr::lr_solve(sc.assignment, observations, hyper, lrc);
    solver_ok = !lr_result.solver_failure && !lr_result.trajectory.empty();
    result = lr_result.best;

    std::string traj = "iter,gap,step,mu,Z_R,Z_F\n";
    for (const auto& rec : lr_result.trajectory)
      traj += std::to_string(rec.iter) + "," + format_double(rec.gap) + "," +
              format_double(rec.step) + "," + format_double(rec.mu) + "," +
              format_double(rec.z_relaxed) + "," + format_double(rec.z_feasible) + "\n";
    io::write_text_file(fs::path(args.out) / "lr_trajectory.csv", traj);
  }
  const auto t2 = std::chrono::steady_clock::now();

  const int num_bins = sc.index.num_bins();
  // an early inner-solver failure can leave no iterate at all
  result.x.resize(static_cast<std::size_t>(sc.assignment.A.rows()), 0.0);
  result.q.resize(static_cast<std::size_t>(sc.assignment.A.cols()), 0.0);
  io::write_flow_estimates(fs::path(args.out) / "flows_est.csv", sc.network, num_bins, result.x);
  io::write_demand_estimates(fs::path(args.out) / "demand_est.csv", sc.index.num_od(), num_bins,
                             result.q);

  ordered_json extra;
  if (!sc.x_true.empty()) {
    metrics::FlowSeries series{sc.network.num_links(), num_bins, sc.x_true, result.x};
    std::vector<std::optional<RoadClass>> classes;
    for (const Link& l : sc.network.links()) classes.push_back(l.road_class);
    const io::MetricsReport report = io::build_metrics_report(series, classes);
    io::write_metrics_report(args.out, report, sc.network);
    extra["wrme"] = report.global.value;
    std::cout << "wrme " << format_double(report.global.value) << "\n";
  }

  const auto seconds = [](auto a, auto b) {
    return std::chrono::duration<double>(b - a).count();
  };
  extra["build_seconds"] = seconds(t0, t1);
  extra["solve_seconds"] = seconds(t1, t2);
  extra["cg_iterations"] = result.cg_iterations;
  extra["residual_norm"] = result.residual_norm;
  extra["converged"] = solver_ok;
  extra["negative_x_before_projection"] = result.negative_x_count;
  extra["negative_q_before_projection"] = result.negative_q_count;

  json effective = {{"hyperparameters",
                     {{"w_x", hyper.w_x},
                      {"w_q", hyper.w_q},
                      {"w_sx", hyper.w_sx},
                      {"w_sq", hyper.w_sq},
                      {"demand_prior", args.demand_prior}}},
                    {"solver", {{"tol", cg.tol}, {"max_iter", cg.max_iter}, {"jacobi", cg.jacobi}}},
                    {"lr",
                     {{"enabled", !args.no_lr},
                      {"mu0", args.lr_config.mu0},
                      {"gap_threshold", args.lr_config.gap_threshold},
                      {"iterations", args.lr_config.iterations}}}};
  write_run_manifest(args.out, "recover", loaded.config.seed, effective, extra);

  if (!solver_ok) {
    std::cerr << "solver did not converge; estimates written with partial results\n";
    return kSolverNotConverged;
  }
  std::cout << "wrote estimates to " << args.out << "\n";
  return kOk;
}

struct BuildArgs {
  std::string in;
  std::string out;
};

int cmd_build(const BuildArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const io::LoadedScenario loaded = io::load_scenario(args.in);
  const synth::Scenario& sc = loaded.scenario;
  warn_unreachable(sc);
  const auto t1 = std::chrono::steady_clock::now();

  fs::create_directories(args.out);
  io::write_sparse(fs::path(args.out) / "assignment_matrix.txt", sc.assignment.A);
  io::write_index_map(fs::path(args.out) / "index_map.txt", sc.index, sc.network, sc.od_pairs,
                      sc.profile.grid());

  ordered_json extra;
  extra["build_seconds"] = std::chrono::duration<double>(t1 - t0).count();
  extra["nnz"] = sc.assignment.A.nnz();
  extra["rows"] = sc.assignment.A.rows();
  extra["cols"] = sc.assignment.A.cols();
  write_run_manifest(args.out, "build", loaded.config.seed, json::object(), extra);
  std::cout << "wrote assignment matrix (" << sc.assignment.A.rows() << "x"
            << sc.assignment.A.cols() << ", " << sc.assignment.A.nnz() << " nnz) to " << args.out
            << "\n";
  return kOk;
}

struct TuneArgs {
  std::string samples_dir;
  std::string out;
  std::string config_path;
  tuning::SgdConfig sgd;
  Hyperparameters init{0.0, 0.0, 0.0, 0.0};
  bool init_given = false;
};

int cmd_tune(const TuneArgs& args) {
  std::vector<fs::path> dirs;
  if (!fs::exists(args.samples_dir)) throw IoError("missing samples directory " + args.samples_dir);
  for (const auto& entry : fs::directory_iterator(args.samples_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty() && fs::exists(fs::path(args.samples_dir) / "manifest.json"))
    dirs.push_back(args.samples_dir);  // a single scenario dir is a valid family
  if (dirs.empty()) throw ValidationError("tune: no sample directories under " + args.samples_dir);

  std::vector<tuning::TrainingSample> samples;
  samples.reserve(dirs.size());
  for (const fs::path& dir : dirs) {
    io::LoadedScenario loaded = io::load_scenario(dir);
    samples.push_back(
        synth::to_training_sample(loaded.scenario, dir.filename().string()));
  }

  const Hyperparameters init =
      args.init_given ? args.init : tuning::random_init(derive_seed(args.sgd.seed, 0x1717));
  const tuning::SgdResult result = tuning::sgd_tune(samples, args.sgd, init);

  fs::create_directories(args.out);
  std::string traj = "epoch,w_x,w_q,w_sx,w_sq,loss\n";
  for (const auto& p : result.trajectory)
    traj += std::to_string(p.epoch) + "," + format_double(p.hyper.w_x) + "," +
            format_double(p.hyper.w_q) + "," + format_double(p.hyper.w_sx) + "," +
            format_double(p.hyper.w_sq) + "," + format_double(p.loss) + "\n";
  io::write_text_file(fs::path(args.out) / "sgd_trajectory.csv", traj);

  ordered_json tuned;
  tuned["w_x"] = result.hyper.w_x;
  tuned["w_q"] = result.hyper.w_q;
  tuned["w_sx"] = result.hyper.w_sx;
  tuned["w_sq"] = result.hyper.w_sq;
  io::write_text_file(fs::path(args.out) / "tuned_hyperparameters.json", tuned.dump(2) + "\n");

  ordered_json extra;
  extra["samples"] = dirs.size();
  extra["skipped_epochs"] = result.skipped_epochs;
  json effective = {{"epochs", args.sgd.epochs},
                    {"learning_rate", args.sgd.learning_rate},
                    {"hyper_floor", args.sgd.hyper_floor},
                    {"init",
                     {{"w_x", init.w_x}, {"w_q", init.w_q}, {"w_sx", init.w_sx}, {"w_sq", init.w_sq}}}};
  write_run_manifest(args.out, "tune", args.sgd.seed, effective, extra);
  std::cout << "tuned hyperparameters written to " << args.out << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string estimates;
  std::string truth;
  std::string nodes;
  std::string links;
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const Network network = io::load_network(args.nodes, args.links);
  const std::vector<double> truth = io::load_flows(args.truth, network, -1, "flow");
  const int num_bins = static_cast<int>(truth.size()) / network.num_links();
  const std::vector<double> estimate = io::load_flows(args.estimates, network, num_bins, "flow_est");

  metrics::FlowSeries series{network.num_links(), num_bins, truth, estimate};
  std::vector<std::optional<RoadClass>> classes;
  for (const Link& l : network.links()) classes.push_back(l.road_class);

  fs::create_directories(args.out);
  const io::MetricsReport report = io::build_metrics_report(series, classes);
  io::write_metrics_report(args.out, report, network);
  write_run_manifest(args.out, "evaluate", 0, json::object(),
                     ordered_json{{"wrme", report.global.value}});
  std::cout << "wrme " << format_double(report.global.value) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Analytical optimized traffic flow recovery"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic scenario");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--config", gen.config_path, "Config file (JSON)");
  auto* g_seed = generate->add_option("--seed", gen.scenario.seed, "Random seed");
  auto* g_rows = generate->add_option("--rows", gen.scenario.grid_rows, "Lattice rows");
  auto* g_cols = generate->add_option("--cols", gen.scenario.grid_cols, "Lattice cols");
  auto* g_od = generate->add_option("--num-od", gen.scenario.num_od, "Number of OD pairs");
  auto* g_bins = generate->add_option("--bins", gen.scenario.bins, "Time bins");
  auto* g_dt = generate->add_option("--delta-t", gen.scenario.delta_t, "Bin width (s)");
  auto* g_obs = generate->add_option("--obs-fraction", gen.scenario.obs_fraction,
                                     "Observed fraction of (link, bin) rows");
  auto* g_bias = generate->add_flag("--obs-bias", gen.scenario.obs_bias,
                                    "Flow-weighted sensor placement");
  auto* g_noise = generate->add_option("--noise-std", gen.scenario.noise_std,
                                       "Observation noise standard deviation");
  auto* g_mismatch = generate->add_option("--speed-mismatch", gen.scenario.speed_mismatch,
                                          "Forward-map speed perturbation fraction");
  auto* g_k = generate->add_option("--paths-per-od", gen.scenario.paths_per_od,
                                   "Candidate paths per OD pair");
  auto* g_samples = generate->add_option("--samples", gen.samples, "Number of sample scenarios");

  BuildArgs build;
  CLI::App* build_cmd = app.add_subcommand("build", "Build and export the assignment matrix");
  build_cmd->add_option("--in", build.in, "Scenario directory")->required();
  build_cmd->add_option("--out", build.out, "Output directory")->required();

  RecoverArgs rec;
  CLI::App* recover_cmd = app.add_subcommand("recover", "Recover link flows and OD demands");
  recover_cmd->add_option("--in", rec.in, "Scenario directory")->required();
  recover_cmd->add_option("--out", rec.out, "Output directory")->required();
  recover_cmd->add_option("--config", rec.config_path, "Config file (JSON)");
  recover_cmd->add_option("--hyper-file", rec.hyper_file,
                          "Tuned hyperparameters (JSON, overrides flags)");
  recover_cmd->add_flag("--no-lr", rec.no_lr, "Skip Lagrangian relaxation");
  auto* r_wx = recover_cmd->add_option("--w-x", rec.hyper.w_x, "Link flow regularization weight");
  auto* r_wq = recover_cmd->add_option("--w-q", rec.hyper.w_q, "Demand regularization weight");
  auto* r_wsx =
      recover_cmd->add_option("--w-sx", rec.hyper.w_sx, "Link flow deviation penalty weight");
  auto* r_wsq =
      recover_cmd->add_option("--w-sq", rec.hyper.w_sq, "OD demand deviation penalty weight");
  auto* r_tol = recover_cmd->add_option("--tol", rec.solver.tol, "CG relative tolerance");
  auto* r_maxit = recover_cmd->add_option("--max-iter", rec.solver.max_iter, "CG iteration cap");
  auto* r_jacobi = recover_cmd->add_flag("--jacobi", rec.solver.jacobi, "Jacobi preconditioner");
  auto* r_prior = recover_cmd->add_option(
      "--demand-prior", rec.demand_prior,
      "Flat demand prior (vehicles/bin) applied to every OD column");
  auto* r_mu0 = recover_cmd->add_option("--mu0", rec.lr_config.mu0, "LR control parameter");
  auto* r_gt =
      recover_cmd->add_option("--gap-threshold", rec.lr_config.gap_threshold, "LR gap threshold");
  auto* r_iters =
      recover_cmd->add_option("--lr-iterations", rec.lr_config.iterations, "LR iterations");

  TuneArgs tune;
  CLI::App* tune_cmd = app.add_subcommand("tune", "SGD hyperparameter tuning");
  tune_cmd->add_option("--samples-dir", tune.samples_dir, "Directory of sample scenarios")
      ->required();
  tune_cmd->add_option("--out", tune.out, "Output directory")->required();
  tune_cmd->add_option("--config", tune.config_path, "Config file (JSON)");
  auto* t_epochs = tune_cmd->add_option("--epochs", tune.sgd.epochs, "SGD epochs");
  auto* t_lr =
      tune_cmd->add_option("--learning-rate", tune.sgd.learning_rate, "SGD learning rate");
  auto* t_seed = tune_cmd->add_option("--seed", tune.sgd.seed, "Sampling seed");
  auto* t_floor = tune_cmd->add_option("--hyper-floor", tune.sgd.hyper_floor,
                                       "Lower clamp for hyperparameters");
  auto* t_tol = tune_cmd->add_option("--tol", tune.sgd.cg.tol, "Inner CG tolerance");
  auto* t_wx = tune_cmd->add_option("--init-w-x", tune.init.w_x, "Initial w_x");
  auto* t_wq = tune_cmd->add_option("--init-w-q", tune.init.w_q, "Initial w_q");
  auto* t_wsx = tune_cmd->add_option("--init-w-sx", tune.init.w_sx, "Initial w_sx");
  auto* t_wsq = tune_cmd->add_option("--init-w-sq", tune.init.w_sq, "Initial w_sq");

  EvaluateArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Compare estimates against ground truth");
  eval_cmd->add_option("--estimates", eval.estimates, "flows_est.csv")->required();
  eval_cmd->add_option("--truth", eval.truth, "flows_true.csv")->required();
  eval_cmd->add_option("--nodes", eval.nodes, "nodes.csv")->required();
  eval_cmd->add_option("--links", eval.links, "links.csv")->required();
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidationError;
  }

  try {
    if (generate->parsed()) {
      const json cfg = load_config_file(gen.config_path).value("scenario", json::object());
      config_default(cfg, "seed", g_seed, gen.scenario.seed);
      config_default(cfg, "grid_rows", g_rows, gen.scenario.grid_rows);
      config_default(cfg, "grid_cols", g_cols, gen.scenario.grid_cols);
      config_default(cfg, "num_od", g_od, gen.scenario.num_od);
      config_default(cfg, "bins", g_bins, gen.scenario.bins);
      config_default(cfg, "delta_t", g_dt, gen.scenario.delta_t);
      config_default(cfg, "obs_fraction", g_obs, gen.scenario.obs_fraction);
      config_default(cfg, "obs_bias", g_bias, gen.scenario.obs_bias);
      config_default(cfg, "noise_std", g_noise, gen.scenario.noise_std);
      config_default(cfg, "speed_mismatch", g_mismatch, gen.scenario.speed_mismatch);
      config_default(cfg, "paths_per_od", g_k, gen.scenario.paths_per_od);
      config_default(cfg, "samples", g_samples, gen.samples);
      if (cfg.contains("demand_range"))
        gen.scenario.demand_range = cfg.at("demand_range").get<std::array<double, 2>>();
      if (cfg.contains("speed_range"))
        gen.scenario.speed_range = cfg.at("speed_range").get<std::array<double, 2>>();
      if (cfg.contains("length_range"))
        gen.scenario.length_range = cfg.at("length_range").get<std::array<double, 2>>();
      return cmd_generate(gen);
    }
    if (build_cmd->parsed()) return cmd_build(build);
    if (recover_cmd->parsed()) {
      const json file = load_config_file(rec.config_path);
      const json hyper_cfg = file.value("hyperparameters", json::object());
      config_default(hyper_cfg, "w_x", r_wx, rec.hyper.w_x);
      config_default(hyper_cfg, "w_q", r_wq, rec.hyper.w_q);
      config_default(hyper_cfg, "w_sx", r_wsx, rec.hyper.w_sx);
      config_default(hyper_cfg, "w_sq", r_wsq, rec.hyper.w_sq);
      config_default(hyper_cfg, "demand_prior", r_prior, rec.demand_prior);
      const json solver_cfg = file.value("solver", json::object());
      config_default(solver_cfg, "tol", r_tol, rec.solver.tol);
      config_default(solver_cfg, "max_iter", r_maxit, rec.solver.max_iter);
      config_default(solver_cfg, "jacobi", r_jacobi, rec.solver.jacobi);
      const json lr_cfg = file.value("lr", json::object());
      config_default(lr_cfg, "mu0", r_mu0, rec.lr_config.mu0);
      config_default(lr_cfg, "gap_threshold", r_gt, rec.lr_config.gap_threshold);
      config_default(lr_cfg, "iterations", r_iters, rec.lr_config.iterations);
      return cmd_recover(rec);
    }
    if (tune_cmd->parsed()) {
      const json sgd_cfg = load_config_file(tune.config_path).value("sgd", json::object());
      config_default(sgd_cfg, "epochs", t_epochs, tune.sgd.epochs);
      config_default(sgd_cfg, "learning_rate", t_lr, tune.sgd.learning_rate);
      config_default(sgd_cfg, "seed", t_seed, tune.sgd.seed);
      config_default(sgd_cfg, "hyper_floor", t_floor, tune.sgd.hyper_floor);
      config_default(sgd_cfg, "tol", t_tol, tune.sgd.cg.tol);
      tune.init_given = t_wx->count() || t_wq->count() || t_wsx->count() || t_wsq->count();
      if (tune.init_given) {
        if (!(t_wx->count() && t_wq->count() && t_wsx->count() && t_wsq->count()))
          throw ValidationError("tune: provide all four --init-w-* values or none");
      }
      return cmd_tune(tune);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(eval);
    return kValidationError;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  }
}

}  // namespace aor::cli

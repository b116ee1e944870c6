// Command-line front end: training runs, checkpoint evaluation, dropout-rate
// sweeps, gradient verification, and autoencoder pretraining.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnmd/gradcheck.hpp"
#include "dnmd/harness.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Output root: --out flag, else $DNMD_OUT, else ./runs.
std::string output_root(const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("DNMD_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

dnmd::RunConfig load_run_config(const std::string& path) {
  return dnmd::RunConfig::from_config(dnmd::Config::load(path));
}

int cmd_train(const std::string& config_path, std::uint64_t seed, bool seed_set,
              const std::string& out) {
  dnmd::RunConfig rc = load_run_config(config_path);
  if (seed_set) rc.seed = seed;
  const fs::path dir = fs::path(output_root(out)) / rc.run_id();
  const auto t0 = Clock::now();
  const dnmd::TrainResult result = dnmd::run_training_to_dir(rc, dir.string());
  std::printf("train %s: %lld steps, %lld episodes, %.1fs -> %s\n", rc.run_id().c_str(),
              static_cast<long long>(result.steps), static_cast<long long>(result.episodes),
              seconds_since(t0), dir.string().c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_dir, int episodes, const std::string& link_failure,
             std::uint64_t seed, bool seed_set) {
  dnmd::Checkpoint ck = dnmd::load_checkpoint(checkpoint_dir);
  const dnmd::LinkFailure failure = dnmd::LinkFailure::parse(link_failure);
  const dnmd::EvalSummary s =
      dnmd::evaluate_checkpoint(ck, episodes, failure, seed_set ? seed : ck.rc.seed);
  std::printf("eval %s link=%s episodes=%d mean_return=%.4f (sd %.4f) catches=%.4f (sd %.4f)\n",
              ck.rc.run_id().c_str(), failure.name().c_str(), s.episodes, s.mean_return,
              s.std_return, s.mean_catches, s.std_catches);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& ps, int seeds,
              const std::string& out) {
  const dnmd::RunConfig base = load_run_config(config_path);
  const std::string algo =
      base.continuous() ? dnmd::kind_name(base.kind) : dnmd::mode_name(base.mode);
  const fs::path root = fs::path(output_root(out)) / ("sweep-" + base.env_name + "-" + algo);
  const auto t0 = Clock::now();
  const std::vector<dnmd::SweepRow> rows = dnmd::run_sweep(base, ps, seeds, root.string());
  for (const dnmd::SweepAggregate& a : dnmd::aggregate_sweep(rows))
    std::printf("p=%g seeds=%d mean_return=%.4f (sd %.4f) catches=%.4f (sd %.4f)\n", a.p, a.seeds,
                a.mean_return, a.std_return, a.mean_catches, a.std_catches);
  std::printf("sweep: %zu runs, %.1fs -> %s\n", rows.size(), seconds_since(t0),
              root.string().c_str());
  return 0;
}

int cmd_gradcheck(double tol) {
  const auto t0 = Clock::now();
  const std::vector<dnmd::GradCheckReport> reports = dnmd::run_gradcheck();
  for (const dnmd::GradCheckReport& r : reports)
    std::printf("%-32s max_rel_err=%.3e checked=%zu skipped=%zu\n", r.name.c_str(), r.max_rel_err,
                r.params_checked, r.params_skipped);
  const bool ok = dnmd::gradcheck_passed(reports, tol);
  std::printf("gradcheck: %s (tol %g, %.2fs)\n", ok ? "PASS" : "FAIL", tol, seconds_since(t0));
  return ok ? 0 : 1;
}

int cmd_pretrain_ae(const std::string& env_name, const std::string& config_path, int samples,
                    std::uint64_t seed, int epochs, int code_dim, const std::string& out) {
  dnmd::RunConfig rc;
  if (!config_path.empty()) {
    rc = load_run_config(config_path);
    if (rc.continuous())
      throw std::invalid_argument("pretrain-ae: waterworld has no message channel");
  } else {
    rc = dnmd::RunConfig::from_config(
        dnmd::Config::parse_string("env.name=" + env_name + "\ntrain.total_steps=1\n"));
  }
  const std::unique_ptr<dnmd::DiscreteEnv> env = dnmd::make_discrete_env(rc);
  const auto t0 = Clock::now();
  const dnmd::PretrainResult result =
      dnmd::pretrain_autoencoder(*env, samples, seed, epochs, 1e-3, code_dim);
  const fs::path path = fs::path(output_root(out)) / "ae.bin";
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("pretrain-ae: cannot write " + path.string());
  result.model->save(os);
  if (!os.good()) throw std::runtime_error("pretrain-ae: write failed");
  std::printf("pretrain-ae %s: %d samples, held-out mse %.6f -> %.6f, %.1fs -> %s\n",
              rc.env_name.c_str(), result.samples, result.untrained_mse, result.trained_mse,
              seconds_since(t0), path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-wise message-dropout: training, evaluation, and sweeps"};
  app.require_subcommand(1);
  int exit_code = 0;

  std::string config_path, out, link_failure = "none", env_name = "pursuit", checkpoint_dir;
  std::uint64_t seed = 0;
  int episodes = 50, seeds = 5, samples = 100000, epochs = 5, code_dim = 32;
  double tol = 1e-4;
  std::vector<double> ps;

  CLI::App* train = app.add_subcommand("train", "train one run from a config file");
  train->add_option("--config", config_path, "key=value config file")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* train_seed = train->add_option("--seed", seed, "override train.seed");
  train->add_option("--out", out, "output root (default $DNMD_OUT or ./runs)");
  train->callback(
      [&] { exit_code = cmd_train(config_path, seed, !train_seed->empty(), out); });

  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved checkpoint greedily");
  eval->add_option("--checkpoint-dir", checkpoint_dir, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--episodes", episodes, "evaluation episodes (default 50)");
  eval->add_option("--link-failure", link_failure, "none | half | all | prob:q");
  CLI::Option* eval_seed = eval->add_option("--seed", seed, "evaluation seed (default: run seed)");
  eval->callback([&] {
    exit_code = cmd_eval(checkpoint_dir, episodes, link_failure, seed, !eval_seed->empty());
  });

  CLI::App* sweep = app.add_subcommand("sweep", "train and evaluate a p x seed grid");
  sweep->add_option("--config", config_path, "base config file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--p", ps, "comma-separated dropout rates")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "seeds per rate (default 5)");
  sweep->add_option("--out", out, "output root (default $DNMD_OUT or ./runs)");
  sweep->callback([&] { exit_code = cmd_sweep(config_path, ps, seeds, out); });

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--tol", tol, "max relative error (default 1e-4)");
  gradcheck->callback([&] { exit_code = cmd_gradcheck(tol); });

  CLI::App* pretrain = app.add_subcommand("pretrain-ae", "pretrain the message autoencoder");
  pretrain->add_option("--env", env_name, "environment family (default pursuit)");
  pretrain->add_option("--config", config_path, "derive the environment from a config file")
      ->check(CLI::ExistingFile);
  pretrain->add_option("--samples", samples, "observations to collect (default 1e5)");
  pretrain->add_option("--seed", seed, "rollout and init seed")->default_val(1);
  pretrain->add_option("--epochs", epochs, "training epochs (default 5)");
  pretrain->add_option("--code-dim", code_dim, "compressed message size (default 32)");
  pretrain->add_option("--out", out, "output root (default $DNMD_OUT or ./runs)");
  pretrain->callback([&] {
    exit_code = cmd_pretrain_ae(env_name, config_path, samples, seed, epochs, code_dim, out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

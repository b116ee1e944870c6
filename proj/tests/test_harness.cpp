#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dnmd/harness.hpp"

namespace {

using dnmd::AgentMode;
using dnmd::Config;
using dnmd::EvalSummary;
using dnmd::JointRecord;
using dnmd::LinkFailure;
using dnmd::LinkState;
using dnmd::MetricsWriter;
using dnmd::Rng;
using dnmd::RunConfig;
using dnmd::TrainResult;
using dnmd::Transition;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("dnmd_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

RunConfig tiny_pursuit_config(const std::string& mode, double p, std::int64_t steps) {
  Config c = Config::parse_string(
      "env.name = pursuit\n"
      "env.n_pursuers = 2\n"
      "env.m_evaders = 1\n"
      "env.width = 5\n"
      "env.height = 5\n"
      "env.horizon = 30\n"
      "agent.mode = " + mode + "\n"
      "agent.p = " + dnmd::format_double(p) + "\n"
      "train.total_steps = " + std::to_string(steps) + "\n"
      "train.batch_size = 8\n"
      "train.warmup = 16\n"
      "train.metrics_every = 20\n");
  return RunConfig::from_config(c);
}

TEST(RunConfigTest, ParsesPursuitWithDefaults) {
  Config c = Config::parse_string(
      "env.name = pursuit\n"
      "train.total_steps = 1000\n");
  const RunConfig rc = RunConfig::from_config(c);
  EXPECT_EQ(rc.family, dnmd::EnvFamily::Pursuit);
  EXPECT_EQ(rc.pursuit.n_pursuers, 4);
  EXPECT_EQ(rc.pursuit.m_evaders, 2);
  EXPECT_EQ(rc.pursuit.width, 10);
  EXPECT_EQ(rc.mode, AgentMode::DCC_MD);
  EXPECT_EQ(rc.p, 0.2);
  EXPECT_EQ(rc.dqn.gamma, 0.99);
  EXPECT_EQ(rc.dqn.lr, 1e-4);
  EXPECT_EQ(rc.dqn.eps.anneal_steps, 500);  // half the run by default
  EXPECT_EQ(rc.effective_replay_capacity(), 200000u);
  EXPECT_EQ(rc.effective_warmup(), 320);
  EXPECT_EQ(rc.run_id(), "pursuit-dcc_md-p0.2-s1");
}

TEST(RunConfigTest, ParsesWaterworldWithDerivedCounts) {
  Config c = Config::parse_string(
      "env.name = waterworld\n"
      "env.n_agents = 6\n"
      "env.n_coop = 3\n"
      "train.total_steps = 10\n");
  const RunConfig rc = RunConfig::from_config(c);
  EXPECT_TRUE(rc.continuous());
  EXPECT_EQ(rc.water.n_food, 3);    // N/2 unless overridden
  EXPECT_EQ(rc.water.n_poison, 6);  // N unless overridden
  EXPECT_EQ(rc.ddpg.gamma, 0.95);
  EXPECT_EQ(rc.ddpg.sigma, 0.15);
  EXPECT_EQ(rc.effective_replay_capacity(), 500000u);
  EXPECT_EQ(rc.run_id(), "waterworld-maddpg_md-p0.2-s1");
}

TEST(RunConfigTest, RejectsBadInput) {
  EXPECT_THROW(RunConfig::from_config(Config::parse_string("env.name = chess\n"
                                                           "train.total_steps = 1\n")),
               std::invalid_argument);
  EXPECT_THROW(RunConfig::from_config(Config::parse_string("env.name = pursuit\n"
                                                           "env.n_agents = 4\n"  // nav-only key
                                                           "train.total_steps = 1\n")),
               std::invalid_argument);
  EXPECT_THROW(RunConfig::from_config(Config::parse_string("env.name = pursuit\n"
                                                           "agent.p = 1.5\n"
                                                           "train.total_steps = 1\n")),
               std::invalid_argument);
  // total_steps is required
  EXPECT_THROW(RunConfig::from_config(Config::parse_string("env.name = pursuit\n")),
               std::invalid_argument);
}

TEST(RunConfigTest, ConfigRoundTripPreservesEverything) {
  RunConfig rc = tiny_pursuit_config("dcc_md", 0.3, 77);
  rc.seed = 9;
  rc.eval_episodes = 7;
  const RunConfig back = RunConfig::from_config(rc.to_config());
  EXPECT_EQ(back.env_name, rc.env_name);
  EXPECT_EQ(back.pursuit.n_pursuers, rc.pursuit.n_pursuers);
  EXPECT_EQ(back.pursuit.horizon, rc.pursuit.horizon);
  EXPECT_EQ(back.mode, rc.mode);
  EXPECT_EQ(back.p, rc.p);
  EXPECT_EQ(back.seed, rc.seed);
  EXPECT_EQ(back.total_steps, rc.total_steps);
  EXPECT_EQ(back.eval_episodes, rc.eval_episodes);
  EXPECT_EQ(back.dqn.eps.anneal_steps, rc.dqn.eps.anneal_steps);
  EXPECT_EQ(back.run_id(), rc.run_id());
}

TEST(LinkFailureTest, ParseAndName) {
  EXPECT_EQ(LinkFailure::parse("none").kind, LinkFailure::Kind::None);
  EXPECT_EQ(LinkFailure::parse("half").kind, LinkFailure::Kind::Half);
  EXPECT_EQ(LinkFailure::parse("all").kind, LinkFailure::Kind::All);
  const LinkFailure p = LinkFailure::parse("prob:0.3");
  EXPECT_EQ(p.kind, LinkFailure::Kind::Prob);
  EXPECT_EQ(p.q, 0.3);
  EXPECT_EQ(p.name(), "prob:0.3");
  EXPECT_THROW(LinkFailure::parse("sometimes"), std::invalid_argument);
  EXPECT_THROW(LinkFailure::parse("prob:1.5"), std::invalid_argument);
  EXPECT_THROW(LinkFailure::parse("prob:x"), std::invalid_argument);
}

TEST(LinkStateTest, RegimesBreakTheRightPairs) {
  Rng rng(1);
  const int n = 5;  // 10 unordered pairs

  const LinkState none(LinkFailure{}, n, rng);
  const LinkState all(LinkFailure::parse("all"), n, rng);
  int broken_all = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      EXPECT_FALSE(none.broken(i, j));
      EXPECT_TRUE(all.broken(i, j));
      EXPECT_EQ(all.broken(i, j), all.broken(j, i));
      ++broken_all;
    }
  EXPECT_EQ(broken_all, 10);

  LinkState half(LinkFailure::parse("half"), n, rng);
  int broken = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      EXPECT_EQ(half.broken(i, j), half.broken(j, i));
      if (half.broken(i, j)) ++broken;
    }
  EXPECT_EQ(broken, 5);  // floor(10 / 2), fixed for the whole run
  Rng other(2);
  half.begin_step(other);  // no-op outside the Prob regime
  int still_broken = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) still_broken += half.broken(i, j) ? 1 : 0;
  EXPECT_EQ(still_broken, 5);

  LinkState prob(LinkFailure::parse("prob:1"), n, rng);
  prob.begin_step(rng);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) EXPECT_TRUE(prob.broken(i, j));
}

TEST(MessageGatherTest, OrdersSendersAndZeroesBrokenLinks) {
  const std::vector<std::vector<double>> outgoing{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  EXPECT_EQ(dnmd::gather_messages(outgoing, 1), (std::vector<double>{1.0, 2.0, 5.0, 6.0}));

  Rng rng(3);
  const LinkState all(LinkFailure::parse("all"), 3, rng);
  EXPECT_EQ(dnmd::gather_messages(outgoing, 1, &all), (std::vector<double>{0.0, 0.0, 0.0, 0.0}));
}

TEST(MessageGatherTest, MaterializeBuildsPerAgentViews) {
  JointRecord rec;
  rec.obs = {{1.0}, {2.0}, {3.0}};
  rec.obs_next = {{4.0}, {5.0}, {6.0}};
  rec.actions = {0, 1, 2};
  rec.rewards = {0.5, -0.5, 0.0};
  rec.terminal = true;

  const Transition t1 = dnmd::materialize(rec, 1, true);
  EXPECT_EQ(t1.o, std::vector<double>{2.0});
  EXPECT_EQ(t1.m, (std::vector<double>{1.0, 3.0}));
  EXPECT_EQ(t1.o_next, std::vector<double>{5.0});
  EXPECT_EQ(t1.m_next, (std::vector<double>{4.0, 6.0}));
  EXPECT_EQ(t1.action, 1);
  EXPECT_EQ(t1.r, -0.5);
  EXPECT_TRUE(t1.terminal);

  const Transition t_fdc = dnmd::materialize(rec, 1, false);
  EXPECT_TRUE(t_fdc.m.empty());

  rec.msgs = {{9.0}, {8.0}, {7.0}};  // compressed outgoing messages win over raw obs
  rec.msgs_next = {{-9.0}, {-8.0}, {-7.0}};
  const Transition t_codec = dnmd::materialize(rec, 0, true);
  EXPECT_EQ(t_codec.m, (std::vector<double>{8.0, 7.0}));
  EXPECT_EQ(t_codec.m_next, (std::vector<double>{-8.0, -7.0}));
}

TEST(TrainingTest, ZeroStepsYieldsHeaderOnlyCsv) {
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 0);
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult result = dnmd::run_training(rc, metrics);
  EXPECT_EQ(result.steps, 0);
  EXPECT_EQ(result.episodes, 0);
  EXPECT_EQ(os.str(), std::string(dnmd::kMetricsHeader) + "\n");
}

TEST(TrainingTest, MetricsCadenceCoversTheFinalStep) {
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 50);
  std::ostringstream os;
  MetricsWriter metrics(os);
  dnmd::run_training(rc, metrics);
  std::istringstream is(os.str());
  const std::vector<dnmd::MetricsRow> rows = dnmd::read_metrics(is);
  ASSERT_EQ(rows.size(), 3u);  // steps 20, 40, and the final 50
  EXPECT_EQ(rows[0].step, 20);
  EXPECT_EQ(rows[1].step, 40);
  EXPECT_EQ(rows[2].step, 50);
  EXPECT_EQ(rows[0].run_id, "pursuit-dcc_md-p0.2-s1");
  EXPECT_EQ(rows[0].env, "pursuit");
  EXPECT_EQ(rows[2].eps, rc.dqn.eps.value(49));
}

TEST(TrainingTest, RepeatedRunsAreByteIdentical) {
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 120);
  std::ostringstream a, b;
  {
    MetricsWriter metrics(a);
    dnmd::run_training(rc, metrics);
  }
  {
    MetricsWriter metrics(b);
    dnmd::run_training(rc, metrics);
  }
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("\n"), std::string::npos);
}

TEST(TrainingTest, EnvAndExplorationStreamsIgnoreDropoutRate) {
  // With eps pinned at 1 every action comes from the exploration stream, so
  // two runs differing only in p must visit identical episodes. Training is
  // disabled (warmup above the horizon) to isolate the stream plumbing.
  RunConfig a = tiny_pursuit_config("dcc_md", 0.2, 100);
  a.warmup = 1000;
  a.dqn.eps.start = 1.0;
  a.dqn.eps.end = 1.0;
  RunConfig b = a;
  b.p = 0.5;
  b.dqn.p = 0.5;

  std::ostringstream os_a, os_b;
  {
    MetricsWriter m(os_a);
    dnmd::run_training(a, m);
  }
  {
    MetricsWriter m(os_b);
    dnmd::run_training(b, m);
  }
  std::istringstream is_a(os_a.str()), is_b(os_b.str());
  const auto rows_a = dnmd::read_metrics(is_a);
  const auto rows_b = dnmd::read_metrics(is_b);
  ASSERT_EQ(rows_a.size(), rows_b.size());
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    EXPECT_EQ(rows_a[i].mean_return, rows_b[i].mean_return);
    EXPECT_EQ(rows_a[i].catches, rows_b[i].catches);
    EXPECT_EQ(rows_a[i].episodes_done, rows_b[i].episodes_done);
  }
}

TEST(TrainingTest, PipelineTrainsAndCountsEpisodes) {
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 400);
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult result = dnmd::run_training(rc, metrics);
  EXPECT_GE(result.episodes, 10);  // horizon 30 caps episode length
  EXPECT_GT(result.agents.front().updates(), 0);
  std::istringstream is(os.str());
  const auto rows = dnmd::read_metrics(is);
  bool trained = false;
  for (const auto& row : rows) trained = trained || row.loss != 0.0;
  EXPECT_TRUE(trained);
}

TEST(TrainingTest, WaterworldLoopRunsBothUpdateCadences) {
  Config c = Config::parse_string(
      "env.name = waterworld\n"
      "env.n_agents = 2\n"
      "env.n_coop = 2\n"
      "env.horizon = 25\n"
      "train.total_steps = 60\n"
      "train.batch_size = 4\n"
      "train.warmup = 8\n"
      "train.metrics_every = 30\n");
  const RunConfig rc = RunConfig::from_config(c);
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult result = dnmd::run_training(rc, metrics);
  ASSERT_NE(result.trainer, nullptr);
  EXPECT_GT(result.trainer->critic_updates(), 0);
  EXPECT_EQ(result.episodes, 2);
  std::istringstream is(os.str());
  const auto rows = dnmd::read_metrics(is);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, "maddpg_md");
  EXPECT_EQ(rows[0].eps, 0.15);  // exploration scale column carries sigma
}

TEST(CheckpointTest, RoundTripRestoresParametersBitExactly) {
  TempDir tmp("ckpt");
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 80);
  const TrainResult trained = dnmd::run_training_to_dir(rc, tmp.path.string());
  ASSERT_TRUE(std::filesystem::exists(tmp.path / "metrics.csv"));
  ASSERT_TRUE(std::filesystem::exists(tmp.path / "checkpoint" / "manifest.txt"));

  dnmd::Checkpoint ck = dnmd::load_checkpoint((tmp.path / "checkpoint").string());
  EXPECT_EQ(ck.step, 80);
  EXPECT_EQ(ck.rc.run_id(), rc.run_id());
  ASSERT_EQ(ck.agents.size(), trained.agents.size());
  for (std::size_t i = 0; i < ck.agents.size(); ++i)
    EXPECT_TRUE(ck.agents[i].online() == trained.agents[i].online()) << "agent " << i;

  // The restored policies behave identically.
  const auto env1 = dnmd::make_discrete_env(rc);
  const auto env2 = dnmd::make_discrete_env(rc);
  const EvalSummary e1 = dnmd::evaluate(trained.agents, *env1, 3, LinkFailure{}, 5);
  const EvalSummary e2 = dnmd::evaluate(ck.agents, *env2, 3, LinkFailure{}, 5);
  EXPECT_EQ(e1.mean_return, e2.mean_return);
  EXPECT_EQ(e1.mean_catches, e2.mean_catches);
}

TEST(CheckpointTest, SchemaMismatchIsRejected) {
  TempDir tmp("ckpt_bad");
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 10);
  dnmd::run_training_to_dir(rc, tmp.path.string());
  // Corrupt the manifest so the declared topology no longer matches the nets
  // (the sense range sets the observation window, hence every input width).
  const auto manifest = tmp.path / "checkpoint" / "manifest.txt";
  std::string text = read_file(manifest);
  const auto at = text.find("env.sense_range=3");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 17, "env.sense_range=2");
  std::ofstream(manifest, std::ios::binary) << text;
  EXPECT_THROW(dnmd::load_checkpoint((tmp.path / "checkpoint").string()), std::runtime_error);
}

TEST(CheckpointTest, WaterworldRoundTrip) {
  TempDir tmp("ckpt_water");
  Config c = Config::parse_string(
      "env.name = waterworld\n"
      "env.n_agents = 2\n"
      "env.n_coop = 2\n"
      "env.horizon = 20\n"
      "train.total_steps = 30\n"
      "train.batch_size = 4\n"
      "train.warmup = 8\n");
  const RunConfig rc = RunConfig::from_config(c);
  const TrainResult trained = dnmd::run_training_to_dir(rc, tmp.path.string());
  dnmd::Checkpoint ck = dnmd::load_checkpoint((tmp.path / "checkpoint").string());
  ASSERT_NE(ck.trainer, nullptr);
  EXPECT_TRUE(ck.trainer->actor() == trained.trainer->actor());
  EXPECT_TRUE(ck.trainer->critic().f1() == trained.trainer->critic().f1());
  EXPECT_TRUE(ck.trainer->critic().g() == trained.trainer->critic().g());
  EXPECT_THROW(dnmd::evaluate_checkpoint(ck, 1, LinkFailure::parse("half"), 1),
               std::invalid_argument);
  const EvalSummary e = dnmd::evaluate_checkpoint(ck, 2, LinkFailure{}, 3);
  EXPECT_EQ(e.episodes, 2);
}

TEST(EvaluationTest, NeverTrainsAndIsSeedReproducible) {
  const RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 60);
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult trained = dnmd::run_training(rc, metrics);
  std::vector<dnmd::QNet> before;
  for (const auto& a : trained.agents) before.push_back(a.online());

  const auto env = dnmd::make_discrete_env(rc);
  const EvalSummary e1 = dnmd::evaluate(trained.agents, *env, 4, LinkFailure::parse("half"), 11);
  const EvalSummary e2 = dnmd::evaluate(trained.agents, *env, 4, LinkFailure::parse("half"), 11);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_TRUE(trained.agents[i].online() == before[i]) << "agent " << i;
  EXPECT_EQ(e1.mean_return, e2.mean_return);
  EXPECT_EQ(e1.std_catches, e2.std_catches);
}

TEST(EvaluationTest, FdcIsInvariantToLinkFailure) {
  const RunConfig rc = tiny_pursuit_config("fdc", 0.0, 60);
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult trained = dnmd::run_training(rc, metrics);
  const auto env = dnmd::make_discrete_env(rc);
  const EvalSummary none = dnmd::evaluate(trained.agents, *env, 5, LinkFailure{}, 7);
  for (const char* spec : {"half", "all", "prob:0.7"}) {
    const EvalSummary failed = dnmd::evaluate(trained.agents, *env, 5, LinkFailure::parse(spec), 7);
    EXPECT_EQ(none.mean_return, failed.mean_return) << spec;
    EXPECT_EQ(none.mean_catches, failed.mean_catches) << spec;
  }
}

TEST(SweepTest, WritesRawAndAggregatedTables) {
  TempDir tmp("sweep");
  Config c = Config::parse_string(
      "env.name = nav\n"
      "env.n_agents = 2\n"
      "env.n_landmarks = 2\n"
      "env.horizon = 10\n"
      "train.total_steps = 30\n"
      "train.batch_size = 4\n"
      "train.warmup = 8\n"
      "train.metrics_every = 10\n"
      "train.eval_episodes = 3\n");
  const RunConfig base = RunConfig::from_config(c);
  const std::vector<dnmd::SweepRow> rows =
      dnmd::run_sweep(base, {0.0, 0.5}, 2, tmp.path.string());
  ASSERT_EQ(rows.size(), 4u);  // |p| x |seeds|

  std::ifstream raw(tmp.path / "sweep_raw.csv", std::ios::binary);
  const auto raw_rows = dnmd::read_metrics(raw);
  ASSERT_EQ(raw_rows.size(), 4u);
  EXPECT_EQ(raw_rows[0].p, 0.0);
  EXPECT_EQ(raw_rows[2].p, 0.5);
  EXPECT_EQ(raw_rows[1].seed, 2u);
  EXPECT_TRUE(std::filesystem::exists(tmp.path / raw_rows[0].run_id / "metrics.csv"));

  // The aggregation must equal a recomputation from the raw rows.
  const auto agg = dnmd::aggregate_sweep(rows);
  ASSERT_EQ(agg.size(), 2u);
  for (const auto& a : agg) {
    double total = 0.0;
    int count = 0;
    for (const auto& r : raw_rows)
      if (r.p == a.p) {
        total += r.mean_return;
        ++count;
      }
    EXPECT_EQ(a.seeds, count);
    EXPECT_NEAR(a.mean_return, total / count, 1e-12);
  }
  const std::string agg_text = read_file(tmp.path / "sweep_agg.csv");
  EXPECT_EQ(agg_text.rfind("p,seeds,mean_return,std_return,mean_catches,std_catches\n", 0), 0u);
  EXPECT_EQ(std::count(agg_text.begin(), agg_text.end(), '\n'), 3);
}

TEST(PretrainTest, ReducesHeldOutReconstructionError) {
  dnmd::PursuitConfig pc;
  pc.n_pursuers = 2;
  pc.m_evaders = 1;
  pc.width = 5;
  pc.height = 5;
  pc.horizon = 50;
  dnmd::PursuitEnv env(pc);
  const dnmd::PretrainResult result = dnmd::pretrain_autoencoder(env, 600, 3, 3, 1e-3, 8, 24);
  EXPECT_EQ(result.samples, 600);
  EXPECT_GT(result.untrained_mse, 0.0);
  EXPECT_LT(result.trained_mse, result.untrained_mse);
  EXPECT_EQ(result.model->code_dim(), 8);
}

TEST(PretrainTest, CompressedMessagesFlowThroughTraining) {
  TempDir tmp("codec");
  dnmd::PursuitConfig pc;
  pc.n_pursuers = 2;
  pc.m_evaders = 1;
  pc.width = 5;
  pc.height = 5;
  pc.horizon = 30;
  dnmd::PursuitEnv env(pc);
  const dnmd::PretrainResult pre = dnmd::pretrain_autoencoder(env, 200, 3, 1, 1e-3, 8, 24);
  const auto ae_path = tmp.path / "ae.bin";
  {
    std::ofstream os(ae_path, std::ios::binary);
    pre.model->save(os);
  }

  RunConfig rc = tiny_pursuit_config("dcc_md", 0.2, 60);
  rc.ae_checkpoint = ae_path.string();
  std::ostringstream os;
  MetricsWriter metrics(os);
  const TrainResult trained = dnmd::run_training(rc, metrics, (tmp.path / "ckpt").string());
  ASSERT_NE(trained.codec, nullptr);
  // Message blocks now carry the 8-dim code, not the 75-dim observation.
  EXPECT_EQ(trained.agents.front().online().layout().message_dim(), 8);

  // The checkpoint is self-contained: the model rides along as ae.bin.
  dnmd::Checkpoint ck = dnmd::load_checkpoint((tmp.path / "ckpt").string());
  ASSERT_NE(ck.codec_model, nullptr);
  EXPECT_TRUE(*ck.codec_model == *trained.codec_model);
  EXPECT_TRUE(ck.agents.front().online() == trained.agents.front().online());
  const EvalSummary e = dnmd::evaluate_checkpoint(ck, 2, LinkFailure{}, 5);
  EXPECT_EQ(e.episodes, 2);
}

}  // namespace

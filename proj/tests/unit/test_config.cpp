#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aolo/checkpoint.hpp"
#include "aolo/commands.hpp"
#include "aolo/config.hpp"
#include "aolo/report.hpp"

using namespace aolo;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  apply_ini(c, in);
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aolo_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsMatchTableValues) {
  const RunConfig c;
  const EnvConfig env = c.env_config();
  EXPECT_EQ(env.inference.n_gpu, 8.0);
  EXPECT_EQ(env.inference.p_gpu, 428.0);
  EXPECT_EQ(env.inference.omega_pf, 156e12);
  EXPECT_EQ(env.comm.k_rate, 1e9);
  EXPECT_EQ(env.box.p_max, 60.0);
  EXPECT_NEAR(env.constraints.t_trans_th, 5e-4, 1e-18);
  const TrainerConfig t = c.trainer_config();
  EXPECT_EQ(t.discount, 0.99);
  EXPECT_EQ(t.tau, 0.005);
  EXPECT_EQ(t.batch, 512);
  EXPECT_EQ(t.noise_sigma, 0.1);
  EXPECT_EQ(t.total_steps(), 30000);
  EXPECT_EQ(c.total_steps(), 30000);
  EXPECT_EQ(c.snn.t_snn, 10);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, DumpReadsBackIdentically) {
  RunConfig c;
  c.run.seed = 99;
  c.run.policy = "mlp";
  c.env.epsilon = 0.0625;
  c.trainer.lr_actor = 3.3e-4;
  c.snn.hidden = {64, 32, 16};
  c.snn.train_encoder = false;
  c.trainer.critic_hidden = {};
  const std::string text = dump_config(c);
  const RunConfig back = parse(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.snn.hidden, (std::vector<int>{64, 32, 16}));
  EXPECT_TRUE(back.trainer.critic_hidden.empty());
  EXPECT_EQ(back.trainer.lr_actor, 3.3e-4);
}

TEST(Config, EveryFieldIsDocumentedAndUnique) {
  std::set<std::string> keys;
  for (const auto& f : config_fields()) {
    EXPECT_TRUE(keys.insert(f.key).second) << f.key;
    EXPECT_GT(std::string(f.doc).size(), 5u) << f.key;
  }
  const std::string text = dump_config(RunConfig{});
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '=')), keys.size());
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  const fs::path path = fs::path(AOLO_SOURCE_DIR) / "configs" / "default.ini";
  EXPECT_EQ(read_file(path), dump_config(RunConfig{}));
  EXPECT_EQ(dump_config(load_config_file(path.string())), dump_config(RunConfig{}));
}

TEST(Config, PartialFileKeepsOtherDefaults) {
  const RunConfig c = parse("[trainer]\nbatch = 64\n[snn]\nhidden = 32\n");
  EXPECT_EQ(c.trainer.batch, 64);
  EXPECT_EQ(c.snn.hidden, std::vector<int>{32});
  EXPECT_EQ(c.trainer.tau, 0.005);
}

TEST(Config, UnknownKeysAreErrors) {
  EXPECT_NE(config_error([] { parse("[trainer]\nbatchsize = 64\n"); }).find("trainer.batchsize"), std::string::npos);
  EXPECT_NE(config_error([] { parse("[nosuch]\nx = 1\n"); }).find("nosuch.x"), std::string::npos);
  EXPECT_FALSE(config_error([] { parse("seed = 1\n"); }).empty());
  RunConfig c;
  EXPECT_THROW(apply_override(c, "run.sed=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "run.seed"), ConfigError);
}

TEST(Config, ValueParsingIsStrict) {
  RunConfig c;
  EXPECT_THROW(apply_override(c, "trainer.batch=12x"), ConfigError);
  EXPECT_THROW(apply_override(c, "trainer.batch=1.5"), ConfigError);
  EXPECT_THROW(apply_override(c, "snn.train_encoder=maybe"), ConfigError);
  EXPECT_THROW(apply_override(c, "snn.hidden=8,,4"), ConfigError);
  EXPECT_THROW(apply_override(c, "env.epsilon="), ConfigError);
  apply_override(c, " trainer.tau = 0.01 ");
  EXPECT_EQ(c.trainer.tau, 0.01);
  apply_override(c, "env.epsilon=+1e-6");
  EXPECT_EQ(c.env.epsilon, 1e-6);
  apply_override(c, "snn.train_encoder=off");
  EXPECT_FALSE(c.snn.train_encoder);
}

TEST(Config, ValidationNamesTheField) {
  auto failing = [](const std::string& assignment) {
    RunConfig c;
    apply_override(c, assignment);
    return config_error([&] { c.validate(); });
  };
  EXPECT_NE(failing("trainer.discount=1").find("discount"), std::string::npos);
  EXPECT_NE(failing("trainer.tau=0").find("tau"), std::string::npos);
  EXPECT_NE(failing("run.policy=ppo").find("run.policy"), std::string::npos);
  EXPECT_NE(failing("snn.t_snn=0").find("t_snn"), std::string::npos);
  EXPECT_NE(failing("env.epsilon=1").find("epsilon"), std::string::npos);
  EXPECT_NE(failing("mlp.hidden=0").find("mlp.hidden"), std::string::npos);
  EXPECT_NE(failing("run.oracle_resolution=1").find("oracle_resolution"), std::string::npos);
  EXPECT_NE(failing("run.jobs=-1").find("run.jobs"), std::string::npos);
}

TEST(Config, ResolvePrecedence) {
  const fs::path dir = temp_dir("precedence");
  const fs::path file = dir / "c.ini";
  {
    std::ofstream out(file);
    out << "[run]\nseed = 5\npolicy = mlp\nout_dir = from_file\n[trainer]\nbatch = 32\n";
  }
  CommandOptions opts;
  opts.config_path = file.string();
  RunConfig c = resolve_config(opts);
  EXPECT_EQ(c.run.seed, 5u);
  EXPECT_EQ(c.trainer.batch, 32);
  opts.overrides = {"run.seed=6", "trainer.batch=16"};
  c = resolve_config(opts);
  EXPECT_EQ(c.run.seed, 6u);
  EXPECT_EQ(c.trainer.batch, 16);
  opts.seed = 7;
  opts.policy = "random";
  opts.steps = 123;
  c = resolve_config(opts);
  EXPECT_EQ(c.run.seed, 7u);
  EXPECT_EQ(c.run.policy, "random");
  EXPECT_EQ(c.total_steps(), 123);
  EXPECT_EQ(c.run.out_dir, "from_file");
  opts.out_dir = "flag";
  EXPECT_EQ(resolve_config(opts).run.out_dir, "flag");
  opts.config_path = (dir / "missing.ini").string();
  EXPECT_THROW(resolve_config(opts), ConfigError);
}

TEST(Config, PrepareDirFreezesResolvedConfig) {
  const fs::path dir = temp_dir("freeze") / "run";
  RunConfig c;
  c.run.seed = 31;
  prepare_dir(dir, c);
  EXPECT_EQ(read_file(dir / "config.ini"), dump_config(c));
  EXPECT_EQ(load_config_file((dir / "config.ini").string()).run.seed, 31u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  Mat<float> a(3, 4);
  Mat<double> b(2, 1);
  fill_uniform(a, 1.0, rng);
  fill_uniform(b, 1.0, rng);
  a(0, 0) = -0.0f;
  b(1, 0) = std::numeric_limits<double>::denorm_min();
  Checkpoint ck;
  ck.meta = "[run]\nseed = 1\n";
  ck.add("a", a);
  ck.add("b", b);
  ck.add("empty", Mat<double>(0, 3));
  const fs::path path = temp_dir("ckpt") / "x.ckpt";
  save_checkpoint(path.string(), ck);
  const Checkpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.meta, ck.meta);
  const Mat<float> a2 = back.get<float>("a");
  const Mat<double> b2 = back.get<double>("b");
  EXPECT_EQ(std::memcmp(a.data(), a2.data(), sizeof(float) * a.size()), 0);
  EXPECT_EQ(std::memcmp(b.data(), b2.data(), sizeof(double) * b.size()), 0);
  EXPECT_EQ(back.get<double>("empty").cols(), 3);
  EXPECT_THROW(back.get<double>("a"), CheckpointError);
  EXPECT_THROW(back.get<float>("missing"), CheckpointError);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path dir = temp_dir("corrupt");
  Checkpoint ck;
  ck.meta = "m";
  ck.add("w", Mat<double>(Mat<double>::Ones(4, 4)));
  save_checkpoint((dir / "good.ckpt").string(), ck);
  const std::string bytes = read_file(dir / "good.ckpt");
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return (dir / name).string();
  };
  EXPECT_THROW(load_checkpoint(write("truncated.ckpt", bytes.substr(0, bytes.size() - 5))), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.ckpt", bad_magic)), CheckpointError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(load_checkpoint(write("version.ckpt", bad_version)), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("empty.ckpt", "")), CheckpointError);
  EXPECT_THROW(load_checkpoint((dir / "absent.ckpt").string()), CheckpointError);
}

TEST(Checkpoint, RestoreChecksShapes) {
  Rng rng(2);
  MlpActor<double> small(5, 2, {4}, rng), big(5, 2, {8}, rng);
  Checkpoint ck;
  ck.add_all(small.param_names("actor."), small.params());
  MlpActor<double> copy(5, 2, {4}, rng);
  ck.restore(copy.param_names("actor."), copy.params());
  for (std::size_t i = 0; i < copy.params().size(); ++i) EXPECT_EQ(copy.params()[i], small.params()[i]);
  EXPECT_THROW(ck.restore(big.param_names("actor."), big.params()), CheckpointError);
  MlpActor<double> deeper(5, 2, {4, 4}, rng);
  EXPECT_THROW(ck.restore(deeper.param_names("actor."), deeper.params()), CheckpointError);
}

TEST(Report, MetricsRowFormat) {
  StepMetrics m;
  m.step = 3;
  m.episode = 0;
  m.reward = -100;
  m.kappa = 42;
  m.p_trans = 0.1;
  EXPECT_EQ(metrics_row(m), "3,0,-100,0,42,0.1,0,,");
  m.feasible = true;
  m.critic_loss = 0.5;
  m.actor_obj = -12.25;
  EXPECT_EQ(metrics_row(m), "3,0,-100,0,42,0.1,1,0.5,-12.25");
}

TEST(Report, ValuesRoundTripThroughText) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    EXPECT_EQ(std::stod(format_value(v)), v);
  }
}

TEST(Report, RunSummaryWindows) {
  RunSummary s(100, 10);
  for (long i = 0; i < 100; ++i) {
    StepMetrics m;
    m.step = i;
    m.reward = i < 10 ? -50.0 : (i >= 90 ? -5.0 : -20.0);
    m.feasible = i >= 95;
    m.carbon_mg = 4.0;
    if (i >= 20) m.critic_loss = 1.0;
    s(m);
  }
  EXPECT_EQ(s.steps(), 100);
  EXPECT_EQ(s.updates(), 80);
  EXPECT_EQ(s.early_mean_reward(), -50.0);
  EXPECT_EQ(s.final_mean_reward(), -5.0);
  EXPECT_EQ(s.final_feasibility(), 0.5);
  EXPECT_EQ(s.final_mean_carbon_mg(), 4.0);
  RunSummary none(10);
  StepMetrics m;
  m.step = 9;
  none(m);
  EXPECT_FALSE(none.final_mean_carbon_mg());
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
  for (unsigned jobs : {1u, 3u, 8u}) {
    std::vector<int> hits(50, 0);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 50);
    EXPECT_THROW(parallel_for(20, jobs,
                              [](std::size_t i) {
                                if (i == 7) throw DomainError("boom");
                              }),
                 DomainError);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

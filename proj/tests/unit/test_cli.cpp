#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dspear::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "dspear_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path micro_config(const fs::path& dir) {
  const auto p = dir / "micro.cfg";
  std::ofstream(p) << "env = hinge_door\n"
                      "horizon = 30\n"
                      "total_steps = 150\n"
                      "warmup_steps = 80\n"
                      "batch_size = 16\n"
                      "hidden_units = 8, 8\n"
                      "buffer_capacity = 500\n"
                      "eval_episodes = 2\n"
                      "seeds = 0..2\n";
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train on a micro config writes its CSV and policy") {
  const auto dir = scratch("train");
  const auto cfg = micro_config(dir);
  const Outcome o = run({"train", "-c", cfg.string(), "-o", (dir / "out").string(), "--seed", "1"});
  CHECK(o.code == 0);
  CHECK(fs::exists(dir / "out" / "dspear_hinge_door_seed1.csv"));
  CHECK(fs::exists(dir / "out" / "dspear_hinge_door_seed1.policy.bin"));
  CHECK(o.out.find("updates") != std::string::npos);

  const Outcome e = run({"eval", "-c", cfg.string(), "--policy",
                         (dir / "out" / "dspear_hinge_door_seed1.policy.bin").string(), "--episodes", "3"});
  CHECK(e.code == 0);
  CHECK(e.out.find("episodes 3") != std::string::npos);

  const Outcome wrong = run({"eval", "--policy", (dir / "out" / "dspear_hinge_door_seed1.policy.bin").string()});
  CHECK(wrong.code == 2);
}

TEST_CASE("bad config path exits 4") {
  const Outcome o = run({"train", "-c", "/nonexistent/dir/run.cfg"});
  CHECK(o.code == 4);
  CHECK(o.err.find("run.cfg") != std::string::npos);
}

TEST_CASE("config errors exit 2") {
  CHECK(run({"train", "--set", "gamma=1.5"}).code == 2);
  CHECK(run({"train", "--set", "no_such_key=1"}).code == 2);
  CHECK(run({"suite", "--variants", "dspear,bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("suite with one failing seed exits 3 and keeps the other CSVs") {
  const auto dir = scratch("suite");
  const auto cfg = micro_config(dir);
  const Outcome o = run({"suite", "-c", cfg.string(), "-o", (dir / "runs").string(), "--set", "fault_seed=1"});
  CHECK(o.code == 3);
  CHECK(o.err.find("seed 1") != std::string::npos);
  REQUIRE(fs::exists(dir / "runs"));
  fs::path run_dir;
  for (const auto& e : fs::directory_iterator(dir / "runs")) run_dir = e.path();
  CHECK(fs::exists(run_dir / "dspear_hinge_door_seed0.csv"));
  CHECK(!fs::exists(run_dir / "dspear_hinge_door_seed1.csv"));
  CHECK(fs::exists(run_dir / "dspear_hinge_door_seed2.csv"));
  CHECK(fs::exists(run_dir / "failures.csv"));
}

TEST_CASE("suite over variants prints one row per variant") {
  const auto dir = scratch("variants");
  const auto cfg = micro_config(dir);
  const Outcome o = run({"suite", "-c", cfg.string(), "-o", (dir / "runs").string(), "--set", "seeds=0",
                         "--variants", "dspear,no_dual_stream,no_high_critic,no_low_actor,uniform_sac"});
  CHECK(o.code == 0);
  for (const char* v : {"no_dual_stream", "no_high_critic", "no_low_actor", "uniform_sac"})
    CHECK(o.out.find(v) != std::string::npos);
}

TEST_CASE("output root falls back to the environment variable") {
  const auto dir = scratch("envroot");
  const auto cfg = micro_config(dir);
  ::setenv("DSPEAR_OUTPUT_ROOT", (dir / "from_env").string().c_str(), 1);
  const Outcome o = run({"train", "-c", cfg.string()});
  ::unsetenv("DSPEAR_OUTPUT_ROOT");
  CHECK(o.code == 0);
  CHECK(fs::exists(dir / "from_env" / "dspear_hinge_door_seed0.csv"));
}

TEST_CASE("inspect-buffer") {
  const auto dir = scratch("inspect");
  const auto cfg = micro_config(dir);
  const auto snap = dir / "buf.bin";
  REQUIRE(run({"train", "-c", cfg.string(), "-o", dir.string(), "--set", "buffer_snapshot=" + snap.string()}).code == 0);
  const Outcome o = run({"inspect-buffer", snap.string()});
  CHECK(o.code == 0);
  CHECK(o.out.find("size 150") != std::string::npos);
  CHECK(run({"inspect-buffer", (dir / "missing.bin").string()}).code == 4);
  std::ofstream(dir / "junk.bin") << "not a buffer";
  CHECK(run({"inspect-buffer", (dir / "junk.bin").string()}).code == 4);
}

TEST_CASE("random-policy calibration verb") {
  const Outcome o = run({"eval", "--set", "hidden_units=8", "--calibration-seeds", "3", "--set", "horizon=20"});
  CHECK(o.code == 0);
  CHECK(o.out.find("mean ") != std::string::npos);
}

}

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "dspear/config.hpp"
#include "dspear/errors.hpp"
#include "dspear/harness.hpp"
#include "dspear/snapshot.hpp"

namespace dspear::cli {
namespace {

constexpr const char* kOutputEnv = "DSPEAR_OUTPUT_ROOT";

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool paper_scale = false;
  std::string output;
  int verbosity = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Config file (key = value per line)");
  cmd->add_option("--set", o.overrides, "Override a config key: --set key=value (repeatable)");
  cmd->add_flag("--paper-scale", o.paper_scale, "Full-size horizon, step budget and warm-up");
  cmd->add_option("-o,--output", o.output, "Output root directory (else $DSPEAR_OUTPUT_ROOT, else config)");
  cmd->add_flag("-v,--verbose", o.verbosity, "More output");
}

RunConfig load_config(const CommonOptions& o) {
  std::optional<std::filesystem::path> path;
  if (!o.config_path.empty()) path = o.config_path;
  RunConfig cfg = parse_config(path, o.overrides, o.paper_scale);
  if (!o.output.empty()) {
    cfg.output = o.output;
  } else if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') {
    cfg.output = env;
  }
  return cfg;
}

int run_train(const CommonOptions& common, std::optional<std::uint64_t> seed_opt, std::ostream& out) {
  RunConfig cfg = load_config(common);
  const std::uint64_t seed = seed_opt.value_or(cfg.seeds.front());
  if (common.verbosity > 0) out << serialize_config(cfg);
  RunResult r = train(cfg, seed);
  const std::filesystem::path root(cfg.output);
  const auto csv = root / (run_file_stem(cfg, seed) + ".csv");
  const auto policy = root / (run_file_stem(cfg, seed) + ".policy.bin");
  write_metrics_csv(csv, r.metrics);
  save_net(policy, r.policy.net());

  out << std::left << std::setw(16) << "variant" << cfg.variant << '\n'
      << std::setw(16) << "env" << cfg.env << '\n'
      << std::setw(16) << "seed" << seed << '\n'
      << std::setw(16) << "env_steps" << r.env_steps << '\n'
      << std::setw(16) << "updates" << r.updates << '\n'
      << std::setw(16) << "episodes" << r.metrics.size() << '\n'
      << std::setw(16) << "final_return" << r.final_eval.mean << '\n'
      << std::setw(16) << "metrics" << csv.string() << '\n'
      << std::setw(16) << "policy" << policy.string() << '\n';
  return 0;
}

int run_suite_cmd(const CommonOptions& common, const std::vector<std::string>& variants,
                  std::size_t workers, std::ostream& out, std::ostream& err) {
  RunConfig base = load_config(common);
  std::vector<RunConfig> configs;
  if (variants.empty()) {
    configs.push_back(base);
  } else {
    for (const auto& v : variants) {
      RunConfig c = base;
      c.variant = v;
      validate(c);
      configs.push_back(std::move(c));
    }
  }
  const SuiteSummary s = run_suite(configs, base.output, workers);

  out << "run directory: " << s.run_dir.string() << '\n';
  out << std::left << std::setw(16) << "variant" << std::setw(12) << "env" << std::setw(7) << "seeds"
      << std::setw(14) << "mean" << "std\n";
  for (const auto& a : s.aggregates) {
    out << std::setw(16) << a.variant << std::setw(12) << a.env << std::setw(7) << a.seeds << std::setw(14)
        << a.mean << a.stddev << '\n';
  }
  for (const auto& r : s.runs) {
    if (!r.ok) err << "run " << r.variant << "/" << r.env << "/seed " << r.seed << " failed: " << r.error << '\n';
  }
  return static_cast<int>(s.exit_code());
}

int run_eval(const CommonOptions& common, const std::string& policy_path, std::size_t episodes,
             std::size_t calibration_seeds, std::uint64_t seed, std::ostream& out) {
  RunConfig cfg = load_config(common);
  if (episodes > 0) cfg.eval_episodes = episodes;
  const EnvKind kind = parse_env_kind(cfg.env);
  if (!policy_path.empty()) {
    GaussianPolicy policy(load_net(policy_path));
    const EnvSpec spec = env_spec(kind, cfg.horizon);
    if (policy.state_dim() != spec.state_dim || policy.action_dim() != spec.action_dim) {
      throw ConfigError("policy dimensions do not match environment " + cfg.env);
    }
    const EvalResult r = evaluate(policy, kind, cfg.horizon, cfg.eval_episodes, seed);
    out << "episodes " << r.returns.size() << "\nmean_return " << r.mean << "\nreturns";
    for (double x : r.returns) out << ' ' << x;
    out << '\n';
    return 0;
  }
  const EvalResult r = random_policy_baseline(cfg, calibration_seeds);
  const double mean = r.mean;
  double ss = 0.0;
  for (double x : r.returns) ss += (x - mean) * (x - mean);
  const auto [lo, hi] = std::minmax_element(r.returns.begin(), r.returns.end());
  out << "random-policy calibration on " << cfg.env << " (" << calibration_seeds << " seeds x "
      << cfg.eval_episodes << " episodes)\n"
      << "mean " << mean << "\nstd " << std::sqrt(ss / static_cast<double>(r.returns.size())) << "\nmin " << *lo
      << "\nmax " << *hi << '\n';
  return 0;
}

int run_inspect(const std::string& path, std::ostream& out) {
  ReplayBuffer b = load_buffer(path);
  out << "size " << b.size() << "\ncapacity " << b.capacity() << "\nstate_dim " << b.state_dim()
      << "\naction_dim " << b.action_dim() << "\ncursor " << b.cursor() << '\n';
  if (b.empty()) return 0;
  const auto p = b.priorities();
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  const auto dones = b.raw_dones();
  const auto terminal = std::count_if(dones.begin(), dones.end(), [](double d) { return d != 0.0; });
  out << "priority_min " << *lo << "\npriority_mean " << mean << "\npriority_max " << *hi
      << "\npriority_cv " << coefficient_of_variation(p, 1e-6) << "\nterminal " << terminal << '\n';
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stream prioritized replay for soft actor-critic"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* train_cmd = app.add_subcommand("train", "Train one seed and write its metrics CSV");
  add_common(train_cmd, common);
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--seed", train_seed, "Seed (default: first entry of `seeds`)");

  auto* suite_cmd = app.add_subcommand("suite", "Train every seed (and variant) into a timestamped directory");
  add_common(suite_cmd, common);
  std::vector<std::string> variants;
  std::size_t workers = 1;
  suite_cmd->add_option("--variants", variants, "Variant tags to run (default: config variant)")->delimiter(',');
  suite_cmd->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved policy, or calibrate random policies");
  add_common(eval_cmd, common);
  std::string policy_path;
  std::size_t episodes = 0;
  std::size_t calibration_seeds = 100;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--policy", policy_path, "Policy file written by `train`");
  eval_cmd->add_option("--episodes", episodes, "Episodes per policy (default: eval_episodes)");
  eval_cmd->add_option("--calibration-seeds", calibration_seeds, "Random policies to average without --policy");
  eval_cmd->add_option("--seed", eval_seed, "Seed for evaluation start states");

  auto* inspect_cmd = app.add_subcommand("inspect-buffer", "Summarize a replay-buffer snapshot");
  std::string buffer_path;
  inspect_cmd->add_option("path", buffer_path, "Snapshot file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*train_cmd) return run_train(common, train_seed, out);
    if (*suite_cmd) return run_suite_cmd(common, variants, workers, out, err);
    if (*eval_cmd) return run_eval(common, policy_path, episodes, calibration_seeds, eval_seed, out);
    if (*inspect_cmd) return run_inspect(buffer_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  }
  return static_cast<int>(ExitCode::kConfig);
}

}  // namespace dspear::cli

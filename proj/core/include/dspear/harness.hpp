#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dspear/config.hpp"
#include "dspear/envs.hpp"
#include "dspear/errors.hpp"
#include "dspear/policy.hpp"
#include "dspear/replay.hpp"
#include "dspear/sac.hpp"

namespace dspear {

/// One row per completed training episode.
struct MetricRow {
  std::size_t step = 0;
  std::size_t episode = 0;
  double episode_return = 0.0;
  double cv = 0.0;
  double lambda = 1.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,episode,return,cv,lambda,critic_loss,actor_loss,alpha,wall_ms";
inline constexpr const char* kSummaryHeader = "variant,env,seed,final_return_mean10";

/// Batch-assembly behaviour implied by an ablation tag:
///   no_high_critic  critic stream drawn uniformly from the candidate pool
///   no_low_actor    actor stream drawn uniformly from the candidate pool
///   no_dual_stream  lambda forced to 1 (one uniform batch for both)
///   uniform_sac     no_dual_stream plus a squared-error critic loss
AssemblyOptions apply_variant(Variant variant, AssemblyOptions base);
CriticLoss critic_loss_for(Variant variant);

AssemblyOptions assembly_options(const RunConfig& config);
SacOptions sac_options(const RunConfig& config, const EnvSpec& spec);

/// Observation points inside the training loop, for instrumented tests.
struct TrainHooks {
  std::function<void(const ReplayBuffer&)> before_insert;
  std::function<void(const ReplayBuffer&, std::size_t slot)> after_insert;
  std::function<void(std::size_t step, const BatchAssembly&, const UpdateReport&)> on_update;
};

struct EvalResult {
  double mean = 0.0;
  std::vector<double> returns;
};

struct RunResult {
  std::vector<MetricRow> metrics;
  std::size_t env_steps = 0;
  std::size_t updates = 0;
  EvalResult final_eval;
  GaussianPolicy policy;
};

/// Runs the full training loop for one seed. A NumericError is rethrown with
/// the offending environment step in its message.
RunResult train(const RunConfig& config, std::uint64_t seed, const TrainHooks& hooks = {});

/// Deterministic policy (tanh of the mean) for `episodes` episodes whose
/// start states are derived from `seed`. episodes == 0 is a ConfigError.
EvalResult evaluate(const GaussianPolicy& policy, EnvKind env, std::size_t horizon,
                    std::size_t episodes, std::uint64_t seed);

/// Mean deterministic return of freshly initialized (untrained) policies,
/// one per seed in [0, num_seeds).
EvalResult random_policy_baseline(const RunConfig& config, std::size_t num_seeds);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

/// Canonical per-run file name: <variant>_<env>_seed<k>.csv
std::string run_file_stem(const RunConfig& config, std::uint64_t seed);

struct SuiteRun {
  std::string variant;
  std::string env;
  std::uint64_t seed = 0;
  bool ok = false;
  double final_return_mean10 = 0.0;
  ExitCode error_code = ExitCode::kOk;
  std::string error;
  std::filesystem::path csv;
};

struct SuiteAggregate {
  std::string variant;
  std::string env;
  std::size_t seeds = 0;
  double mean = 0.0;
  /// Population standard deviation across seeds (0 for a single seed).
  double stddev = 0.0;
};

struct SuiteSummary {
  std::filesystem::path run_dir;
  std::vector<SuiteRun> runs;
  std::vector<SuiteAggregate> aggregates;

  bool all_ok() const;
  /// Exit code of the first failed run, or kOk.
  ExitCode exit_code() const;
};

/// Runs every (config, seed) pair into a fresh timestamped directory under
/// `output_root`. Failures are recorded per run and do not stop the suite.
/// Up to `workers` runs execute concurrently; each run is single-threaded.
SuiteSummary run_suite(const std::vector<RunConfig>& configs, const std::filesystem::path& output_root,
                       std::size_t workers = 1);

}  // namespace dspear

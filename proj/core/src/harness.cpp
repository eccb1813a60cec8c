#include "dspear/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "dspear/snapshot.hpp"

namespace dspear {
namespace {

// Sub-stream ids for Rng::derive, one per stochastic component of a run.
constexpr std::uint64_t kLearnerStream = 0;
constexpr std::uint64_t kBufferStream = 2;
constexpr std::uint64_t kEpisodeStream = 3;
constexpr std::uint64_t kExploreStream = 4;
constexpr std::uint64_t kEvalStream = 99;

std::string fmt_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  const std::string base = "suite-" + timestamp();
  for (int k = 0;; ++k) {
    auto dir = root / (k == 0 ? base : base + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

}  // namespace

AssemblyOptions apply_variant(Variant variant, AssemblyOptions base) {
  switch (variant) {
    case Variant::kDspear:
      break;
    case Variant::kNoHighCritic:
      base.critic_mode = StreamMode::kUniform;
      break;
    case Variant::kNoLowActor:
      base.actor_mode = StreamMode::kUniform;
      break;
    case Variant::kNoDualStream:
    case Variant::kUniformSac:
      base.force_full_anchor = true;
      break;
  }
  return base;
}

CriticLoss critic_loss_for(Variant variant) {
  return variant == Variant::kUniformSac ? CriticLoss::kMse : CriticLoss::kHuber;
}

AssemblyOptions assembly_options(const RunConfig& config) {
  AssemblyOptions o;
  o.batch_size = config.batch_size;
  o.candidate_ratio = config.candidate_ratio;
  o.alpha_c = config.alpha_c;
  o.beta_a = config.beta_a;
  o.eps = config.epsilon;
  return apply_variant(parse_variant(config.variant), o);
}

SacOptions sac_options(const RunConfig& config, const EnvSpec& spec) {
  SacOptions o;
  o.state_dim = spec.state_dim;
  o.action_dim = spec.action_dim;
  o.hidden = config.hidden_units;
  o.gamma = config.gamma;
  o.tau = config.tau;
  o.huber_delta = config.huber_delta;
  o.actor_lr = config.actor_lr;
  o.critic_lr = config.critic_lr;
  o.alpha_lr = config.alpha_lr;
  o.init_alpha = config.init_alpha;
  o.critic_loss = critic_loss_for(parse_variant(config.variant));
  return o;
}

RunResult train(const RunConfig& config, std::uint64_t seed, const TrainHooks& hooks) {
  validate(config);
  const EnvKind kind = parse_env_kind(config.env);
  Environment env(kind, config.horizon);
  const EnvSpec& spec = env.spec();

  SacLearner learner(sac_options(config, spec), Rng::derive(seed, kLearnerStream));
  ReplayBuffer buffer(config.buffer_capacity, spec.state_dim, spec.action_dim,
                      Rng::derive(seed, kBufferStream));
  AnchorController controller(config.lambda_min, config.epsilon, config.cv_samples);
  const AssemblyOptions assembly = assembly_options(config);
  Rng explore(Rng::derive(seed, kExploreStream));
  const std::uint64_t episode_seed_base = Rng::derive(seed, kEpisodeStream);
  const bool inject_fault = config.fault_seed >= 0 && static_cast<std::uint64_t>(config.fault_seed) == seed;

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  MetricRow last;
  last.alpha = learner.alpha();

  std::size_t episode = 0;
  double episode_return = 0.0;
  Vector obs = env.reset(Rng::derive(episode_seed_base, episode));
  Vector action(spec.action_dim);

  for (std::size_t t = 1; t <= config.total_steps; ++t) {
    try {
      if (t <= config.warmup_steps) {
        for (Eigen::Index d = 0; d < action.size(); ++d) action(d) = explore.uniform(spec.action_low, spec.action_high);
      } else {
        action = learner.act(obs, false);
      }
      const EnvStep st = env.step(std::span<const double>(action.data(), action.size()));
      const double reward = st.reward;
      Vector next_obs = st.observation;
      if (inject_fault && t == config.warmup_steps + 1) {
        next_obs(0) = std::numeric_limits<double>::quiet_NaN();
      }
      if (!next_obs.allFinite() || !std::isfinite(reward)) {
        throw NumericError("environment returned a non-finite transition");
      }

      if (hooks.before_insert) hooks.before_insert(buffer);
      const std::size_t slot = buffer.insert(std::span<const double>(obs.data(), obs.size()),
                                             std::span<const double>(action.data(), action.size()),
                                             reward,
                                             std::span<const double>(next_obs.data(), next_obs.size()),
                                             st.terminal);
      if (hooks.after_insert) hooks.after_insert(buffer, slot);
      episode_return += reward;

      if (t > config.warmup_steps && buffer.size() >= config.batch_size) {
        for (std::size_t u = 0; u < config.updates_per_step; ++u) {
          const BatchAssembly batches = assemble_batches(buffer, controller, assembly);
          const TransitionBatch critic_batch = buffer.gather(batches.critic_batch());
          const TransitionBatch actor_batch = buffer.gather(batches.actor_batch());

          UpdateReport report;
          CriticReport cr = learner.critic_update(critic_batch);
          buffer.update_priorities(critic_batch.indices, cr.abs_td);
          const ActorReport ar = learner.actor_update(actor_batch);
          const TemperatureReport tr = learner.temperature_update(actor_batch);
          learner.polyak_update(config.tau);

          report.critic_loss = cr.loss;
          report.actor_loss = ar.loss;
          report.temperature_loss = tr.loss;
          report.alpha = tr.alpha;
          report.critic_grad_norm = cr.grad_norm;
          report.actor_grad_norm = ar.grad_norm;
          report.abs_td = std::move(cr.abs_td);
          ++result.updates;

          last.cv = batches.cv;
          last.lambda = batches.lambda;
          last.critic_loss = report.critic_loss;
          last.actor_loss = report.actor_loss;
          last.alpha = report.alpha;
          if (hooks.on_update) hooks.on_update(t, batches, report);
        }
      }

      obs = next_obs;
      if (st.done) {
        MetricRow row = last;
        row.step = t;
        row.episode = episode;
        row.episode_return = episode_return;
        if (config.log_wall_clock) {
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        result.metrics.push_back(row);
        ++episode;
        episode_return = 0.0;
        obs = env.reset(Rng::derive(episode_seed_base, episode));
      }
      result.env_steps = t;
    } catch (const NumericError& e) {
      throw NumericError("seed " + std::to_string(seed) + ", step " + std::to_string(t) + ": " + e.what());
    }
  }

  result.final_eval = evaluate(learner.actor(), kind, config.horizon, config.eval_episodes,
                               Rng::derive(seed, kEvalStream));
  result.policy = learner.actor();
  if (!config.buffer_snapshot.empty()) save_buffer(config.buffer_snapshot, buffer);
  return result;
}

EvalResult evaluate(const GaussianPolicy& policy, EnvKind kind, std::size_t horizon,
                    std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("evaluate: episodes must be >= 1");
  Environment env(kind, horizon);
  EvalResult out;
  for (std::size_t k = 0; k < episodes; ++k) {
    Vector obs = env.reset(Rng::derive(seed, 1000 + k));
    double ret = 0.0;
    while (true) {
      const Vector a = policy.deterministic_action(obs);
      const EnvStep st = env.step(std::span<const double>(a.data(), a.size()));
      ret += st.reward;
      obs = st.observation;
      if (st.done) break;
    }
    out.returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean = sum / static_cast<double>(episodes);
  return out;
}

EvalResult random_policy_baseline(const RunConfig& config, std::size_t num_seeds) {
  if (num_seeds == 0) throw ConfigError("random baseline needs at least one seed");
  const EnvKind kind = parse_env_kind(config.env);
  const EnvSpec spec = env_spec(kind, config.horizon);
  EvalResult out;
  double sum = 0.0;
  for (std::uint64_t s = 0; s < num_seeds; ++s) {
    SacLearner fresh(sac_options(config, spec), Rng::derive(s, kLearnerStream));
    const EvalResult r =
        evaluate(fresh.actor(), kind, config.horizon, config.eval_episodes, Rng::derive(s, kEvalStream));
    out.returns.push_back(r.mean);
    sum += r.mean;
  }
  out.mean = sum / static_cast<double>(num_seeds);
  return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.episode << ',' << fmt_real(r.episode_return) << ',' << fmt_real(r.cv) << ','
        << fmt_real(r.lambda) << ',' << fmt_real(r.critic_loss) << ',' << fmt_real(r.actor_loss) << ','
        << fmt_real(r.alpha) << ',' << fmt_real(r.wall_ms) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_metrics_csv(out, rows);
  if (!out) throw IoError("failed writing " + path.string());
}

std::string run_file_stem(const RunConfig& config, std::uint64_t seed) {
  return config.variant + "_" + config.env + "_seed" + std::to_string(seed);
}

bool SuiteSummary::all_ok() const {
  for (const auto& r : runs) {
    if (!r.ok) return false;
  }
  return true;
}

ExitCode SuiteSummary::exit_code() const {
  for (const auto& r : runs) {
    if (!r.ok) return r.error_code;
  }
  return ExitCode::kOk;
}

SuiteSummary run_suite(const std::vector<RunConfig>& configs, const std::filesystem::path& output_root,
                       std::size_t workers) {
  if (configs.empty()) throw ConfigError("suite needs at least one config");
  for (const auto& c : configs) validate(c);

  SuiteSummary summary;
  summary.run_dir = fresh_run_dir(output_root);

  struct Job {
    const RunConfig* config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : configs) {
    std::ofstream cfg(summary.run_dir / ("config_" + c.variant + "_" + c.env + ".cfg"), std::ios::binary);
    cfg << serialize_config(c);
    for (auto s : c.seeds) jobs.push_back({&c, s});
  }
  summary.runs.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      SuiteRun& run = summary.runs[i];
      run.variant = job.config->variant;
      run.env = job.config->env;
      run.seed = job.seed;
      run.csv = summary.run_dir / (run_file_stem(*job.config, job.seed) + ".csv");
      try {
        RunResult r = train(*job.config, job.seed);
        write_metrics_csv(run.csv, r.metrics);
        run.final_return_mean10 = r.final_eval.mean;
        run.ok = true;
      } catch (const Error& e) {
        run.error = e.what();
        run.error_code = e.exit_code();
      } catch (const std::exception& e) {
        run.error = e.what();
        run.error_code = ExitCode::kIo;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }

  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : summary.runs) {
    auto key = std::make_pair(r.variant, r.env);
    if (!groups.contains(key)) order.push_back(key);
    auto& g = groups[key];
    if (r.ok) g.push_back(r.final_return_mean10);
  }
  for (const auto& key : order) {
    const auto& xs = groups[key];
    SuiteAggregate agg{key.first, key.second, xs.size(), 0.0, 0.0};
    if (!xs.empty()) {
      for (double x : xs) agg.mean += x;
      agg.mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - agg.mean) * (x - agg.mean);
      agg.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    }
    summary.aggregates.push_back(agg);
  }

  std::ofstream sum(summary.run_dir / "summary.csv", std::ios::binary);
  sum << kSummaryHeader << '\n';
  for (const auto& r : summary.runs) {
    if (r.ok) sum << r.variant << ',' << r.env << ',' << r.seed << ',' << fmt_real(r.final_return_mean10) << '\n';
  }
  std::ofstream agg(summary.run_dir / "aggregate.csv", std::ios::binary);
  agg << "variant,env,seeds,mean,std\n";
  for (const auto& a : summary.aggregates) {
    agg << a.variant << ',' << a.env << ',' << a.seeds << ',' << fmt_real(a.mean) << ',' << fmt_real(a.stddev) << '\n';
  }
  if (!summary.all_ok()) {
    std::ofstream fail(summary.run_dir / "failures.csv", std::ios::binary);
    fail << "variant,env,seed,exit_code,error\n";
    for (const auto& r : summary.runs) {
      if (r.ok) continue;
      std::string msg = r.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      fail << r.variant << ',' << r.env << ',' << r.seed << ',' << static_cast<int>(r.error_code) << ',' << msg << '\n';
    }
  }
  if (!sum || !agg) throw IoError("failed writing suite summary in " + summary.run_dir.string());
  return summary;
}

}  // namespace dspear

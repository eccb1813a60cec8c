#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dspear {

enum class Variant { kDspear, kNoDualStream, kNoHighCritic, kNoLowActor, kUniformSac };

Variant parse_variant(std::string_view tag);
std::string_view to_string(Variant v);
inline constexpr Variant kAllVariants[] = {Variant::kDspear, Variant::kNoDualStream,
                                           Variant::kNoHighCritic, Variant::kNoLowActor,
                                           Variant::kUniformSac};

/// Every knob of a training run. Field names double as config-file keys.
///
/// Defaults are the desk-scale setting; `apply_paper_scale` switches the
/// horizon, step budget and warm-up to the full-size values.
struct RunConfig {
  std::string env = "point_lift";
  std::size_t horizon = 200;
  std::size_t total_steps = 50'000;
  std::size_t warmup_steps = 2'000;
  std::size_t updates_per_step = 1;
  std::size_t batch_size = 256;
  double gamma = 0.99;
  double lambda_min = 0.5;
  std::size_t candidate_ratio = 4;
  double alpha_c = 1.0;
  double beta_a = 1.0;
  double epsilon = 1e-6;
  double huber_delta = 0.1;
  double tau = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double init_alpha = 0.2;
  std::vector<std::size_t> hidden_units{256, 256};
  std::size_t buffer_capacity = 1'000'000;
  std::size_t cv_samples = 1000;
  std::size_t eval_episodes = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string variant = "dspear";
  std::string output = "runs";
  /// Real wall-clock in the wall_ms column; off keeps metric files
  /// byte-reproducible.
  bool log_wall_clock = false;
  /// Write the final replay buffer here when non-empty.
  std::string buffer_snapshot;
  /// Test hook: the run with this seed sees a NaN observation on its first
  /// step after warm-up, which aborts it with a numeric error. -1 disables.
  std::int64_t fault_seed = -1;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

void apply_paper_scale(RunConfig& config);

/// Names of every accepted key, in serialization order.
const std::vector<std::string>& config_keys();

/// Applies one `key = value` assignment. Unknown keys and malformed values
/// throw ConfigError; `origin` prefixes the message (e.g. "run.cfg:3").
void set_config_value(RunConfig& config, std::string_view key, std::string_view value,
                      std::string_view origin = "");

/// Parses config text (one `key = value` per line, '#' comments) on top of
/// `base`. Does not validate.
RunConfig parse_config_text(std::string_view text, RunConfig base = {},
                            std::string_view source = "<text>");

/// Defaults, then the preset, then the file, then `key=value` overrides;
/// the result is validated. A missing file is an IoError.
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides, bool paper_scale = false);

/// Text that `parse_config_text` maps back to an identical RunConfig.
std::string serialize_config(const RunConfig& config);

}  // namespace dspear

#include "dspear/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dspear/envs.hpp"
#include "dspear/errors.hpp"

namespace dspear {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::string_view origin, std::string_view key, const std::string& what) {
  std::string msg;
  if (!origin.empty()) msg += std::string(origin) + ": ";
  msg += "key '" + std::string(key) + "': " + what;
  throw ConfigError(msg);
}

std::string_view unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

template <typename T>
T parse_int(std::string_view v, std::string_view origin, std::string_view key) {
  v = trim(v);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    fail(origin, key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view v, std::string_view origin, std::string_view key) {
  v = trim(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    fail(origin, key, "expected a finite real number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v, std::string_view origin, std::string_view key) {
  v = trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(origin, key, "expected true or false, got '" + std::string(v) + "'");
}

/// "1, 2, 3", "[1, 2, 3]" or a closed range "1..5" (also bracketed).
template <typename T>
std::vector<T> parse_int_list(std::string_view v, std::string_view origin, std::string_view key) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = trim(v.substr(1, v.size() - 2));
  std::vector<T> out;
  if (v.empty()) return out;
  if (auto dots = v.find(".."); dots != std::string_view::npos) {
    const T lo = parse_int<T>(v.substr(0, dots), origin, key);
    const T hi = parse_int<T>(v.substr(dots + 2), origin, key);
    if (hi < lo) fail(origin, key, "range end precedes range start");
    for (T x = lo; x <= hi; ++x) out.push_back(x);
    return out;
  }
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_int<T>(v.substr(0, comma), origin, key));
    if (comma == std::string_view::npos) break;
    v = v.substr(comma + 1);
  }
  return out;
}

std::string fmt_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(xs[i]);
  }
  return s;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DSPEAR_SIZE_FIELD(name)                                                                     \
  Field{#name, [](RunConfig& c, std::string_view v, std::string_view o) {                           \
          c.name = parse_int<std::size_t>(v, o, #name);                                             \
        },                                                                                          \
        [](const RunConfig& c) { return std::to_string(c.name); }}
#define DSPEAR_REAL_FIELD(name)                                                                     \
  Field{#name, [](RunConfig& c, std::string_view v, std::string_view o) {                           \
          c.name = parse_real(v, o, #name);                                                         \
        },                                                                                          \
        [](const RunConfig& c) { return fmt_real(c.name); }}
#define DSPEAR_STRING_FIELD(name)                                                                   \
  Field{#name, [](RunConfig& c, std::string_view v, std::string_view) {                             \
          c.name = std::string(unquote(trim(v)));                                                   \
        },                                                                                          \
        [](const RunConfig& c) { return "\"" + c.name + "\""; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DSPEAR_STRING_FIELD(env),
      DSPEAR_SIZE_FIELD(horizon),
      DSPEAR_SIZE_FIELD(total_steps),
      DSPEAR_SIZE_FIELD(warmup_steps),
      DSPEAR_SIZE_FIELD(updates_per_step),
      DSPEAR_SIZE_FIELD(batch_size),
      DSPEAR_REAL_FIELD(gamma),
      DSPEAR_REAL_FIELD(lambda_min),
      DSPEAR_SIZE_FIELD(candidate_ratio),
      DSPEAR_REAL_FIELD(alpha_c),
      DSPEAR_REAL_FIELD(beta_a),
      DSPEAR_REAL_FIELD(epsilon),
      DSPEAR_REAL_FIELD(huber_delta),
      DSPEAR_REAL_FIELD(tau),
      DSPEAR_REAL_FIELD(actor_lr),
      DSPEAR_REAL_FIELD(critic_lr),
      DSPEAR_REAL_FIELD(alpha_lr),
      DSPEAR_REAL_FIELD(init_alpha),
      Field{"hidden_units",
            [](RunConfig& c, std::string_view v, std::string_view o) {
              c.hidden_units = parse_int_list<std::size_t>(v, o, "hidden_units");
            },
            [](const RunConfig& c) { return fmt_list(c.hidden_units); }},
      DSPEAR_SIZE_FIELD(buffer_capacity),
      DSPEAR_SIZE_FIELD(cv_samples),
      DSPEAR_SIZE_FIELD(eval_episodes),
      Field{"seeds",
            [](RunConfig& c, std::string_view v, std::string_view o) {
              c.seeds = parse_int_list<std::uint64_t>(v, o, "seeds");
            },
            [](const RunConfig& c) { return fmt_list(c.seeds); }},
      DSPEAR_STRING_FIELD(variant),
      DSPEAR_STRING_FIELD(output),
      Field{"log_wall_clock",
            [](RunConfig& c, std::string_view v, std::string_view o) {
              c.log_wall_clock = parse_bool(v, o, "log_wall_clock");
            },
            [](const RunConfig& c) { return std::string(c.log_wall_clock ? "true" : "false"); }},
      DSPEAR_STRING_FIELD(buffer_snapshot),
      Field{"fault_seed",
            [](RunConfig& c, std::string_view v, std::string_view o) {
              c.fault_seed = parse_int<std::int64_t>(v, o, "fault_seed");
            },
            [](const RunConfig& c) { return std::to_string(c.fault_seed); }},
  };
  return table;
}

#undef DSPEAR_SIZE_FIELD
#undef DSPEAR_REAL_FIELD
#undef DSPEAR_STRING_FIELD

}  // namespace

Variant parse_variant(std::string_view tag) {
  if (tag == "dspear") return Variant::kDspear;
  if (tag == "no_dual_stream") return Variant::kNoDualStream;
  if (tag == "no_high_critic") return Variant::kNoHighCritic;
  if (tag == "no_low_actor") return Variant::kNoLowActor;
  if (tag == "uniform_sac") return Variant::kUniformSac;
  throw ConfigError("unknown variant '" + std::string(tag) +
                    "' (expected dspear, no_dual_stream, no_high_critic, no_low_actor, uniform_sac)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kDspear: return "dspear";
    case Variant::kNoDualStream: return "no_dual_stream";
    case Variant::kNoHighCritic: return "no_high_critic";
    case Variant::kNoLowActor: return "no_low_actor";
    case Variant::kUniformSac: return "uniform_sac";
  }
  return "?";
}

void validate(const RunConfig& c) {
  auto bad = [](std::string_view key, const std::string& what) { fail("", key, what); };
  try {
    parse_env_kind(c.env);
  } catch (const ConfigError& e) {
    bad("env", e.what());
  }
  try {
    parse_variant(c.variant);
  } catch (const ConfigError& e) {
    bad("variant", e.what());
  }
  if (c.horizon < 1) bad("horizon", "must be >= 1");
  if (c.total_steps < 1) bad("total_steps", "must be >= 1");
  if (c.warmup_steps > c.total_steps) bad("warmup_steps", "must not exceed total_steps");
  if (c.updates_per_step < 1) bad("updates_per_step", "must be >= 1");
  if (c.batch_size < 1) bad("batch_size", "N must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) bad("gamma", "γ ∈ (0,1) required, got " + fmt_real(c.gamma));
  if (!(c.lambda_min > 0.0 && c.lambda_min <= 1.0)) bad("lambda_min", "λ_min ∈ (0,1] required");
  if (c.candidate_ratio < 1) bad("candidate_ratio", "must be >= 1");
  if (!(c.alpha_c >= 0.0)) bad("alpha_c", "must be >= 0");
  if (!(c.beta_a >= 0.0)) bad("beta_a", "must be >= 0");
  if (!(c.epsilon > 0.0)) bad("epsilon", "ε must be > 0");
  if (!(c.huber_delta > 0.0)) bad("huber_delta", "δ must be > 0");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) bad("tau", "τ ∈ (0,1] required");
  if (!(c.actor_lr > 0.0)) bad("actor_lr", "must be > 0");
  if (!(c.critic_lr > 0.0)) bad("critic_lr", "must be > 0");
  if (!(c.alpha_lr > 0.0)) bad("alpha_lr", "must be > 0");
  if (!(c.init_alpha > 0.0)) bad("init_alpha", "α must be > 0");
  if (c.hidden_units.empty()) bad("hidden_units", "at least one hidden layer required");
  for (auto h : c.hidden_units) {
    if (h < 1) bad("hidden_units", "widths must be >= 1");
  }
  if (c.buffer_capacity < c.batch_size) bad("buffer_capacity", "must be >= batch_size");
  if (c.cv_samples < 1) bad("cv_samples", "must be >= 1");
  if (c.eval_episodes < 1) bad("eval_episodes", "must be >= 1");
  if (c.seeds.empty()) bad("seeds", "at least one seed required");
}

void apply_paper_scale(RunConfig& c) {
  c.horizon = 500;
  c.total_steps = 250'000;
  c.warmup_steps = 5'000;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value,
                      std::string_view origin) {
  key = trim(key);
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value, origin);
      return;
    }
  }
  fail(origin, key, "unknown key");
}

RunConfig parse_config_text(std::string_view text, RunConfig base, std::string_view source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string origin = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ": expected 'key = value', got '" + std::string(line) + "'");
    }
    set_config_value(base, line.substr(0, eq), line.substr(eq + 1), origin);
  }
  return base;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides, bool paper_scale) {
  RunConfig config;
  if (paper_scale) apply_paper_scale(config);
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config file " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    config = parse_config_text(ss.str(), config, path->string());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    set_config_value(config, std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1),
                     "override");
  }
  validate(config);
  return config;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace dspear

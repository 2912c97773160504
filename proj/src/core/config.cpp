#include "iad/core/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"

namespace iad::core {

namespace {

using policy::TerminationOverride;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + value + "'");
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec == std::errc() && ptr == value.data() + value.size()) return v;
  // Allow 5e5-style step counts.
  const double d = to_double(key, value);
  if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return static_cast<std::int64_t>(d);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  for (const std::string& part : split(value, ',')) {
    out.push_back(static_cast<int>(to_int(key, trim(part))));
  }
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"layout", [](const TrainConfig& c) { return c.layout; },
       [](TrainConfig& c, const std::string& v) { c.layout = v; }},
      {"layouts_dir", [](const TrainConfig& c) { return c.layouts_dir.string(); },
       [](TrainConfig& c, const std::string& v) { c.layouts_dir = v; }},
      {"mode", [](const TrainConfig& c) { return train_mode_name(c.mode); },
       [](TrainConfig& c, const std::string& v) { c.mode = parse_train_mode(v); }},
      {"num_skills", [](const TrainConfig& c) { return std::to_string(c.num_skills); },
       [](TrainConfig& c, const std::string& v) {
         c.num_skills = static_cast<int>(to_int("num_skills", v));
       }},
      {"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
       [](TrainConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(to_int("seed", v));
       }},
      {"gamma", [](const TrainConfig& c) { return format_double(c.hp.gamma); },
       [](TrainConfig& c, const std::string& v) { c.hp.gamma = to_double("gamma", v); }},
      {"gae_lambda", [](const TrainConfig& c) { return format_double(c.hp.gae_lambda); },
       [](TrainConfig& c, const std::string& v) { c.hp.gae_lambda = to_double("gae_lambda", v); }},
      {"clip", [](const TrainConfig& c) { return format_double(c.hp.clip); },
       [](TrainConfig& c, const std::string& v) { c.hp.clip = to_double("clip", v); }},
      {"value_coef", [](const TrainConfig& c) { return format_double(c.hp.value_coef); },
       [](TrainConfig& c, const std::string& v) { c.hp.value_coef = to_double("value_coef", v); }},
      {"entropy_start", [](const TrainConfig& c) { return format_double(c.hp.entropy.start); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.entropy.start = to_double("entropy_start", v);
       }},
      {"entropy_end", [](const TrainConfig& c) { return format_double(c.hp.entropy.end); },
       [](TrainConfig& c, const std::string& v) { c.hp.entropy.end = to_double("entropy_end", v); }},
      {"tau_start", [](const TrainConfig& c) { return format_double(c.hp.tau.start); },
       [](TrainConfig& c, const std::string& v) { c.hp.tau.start = to_double("tau_start", v); }},
      {"tau_end", [](const TrainConfig& c) { return format_double(c.hp.tau.end); },
       [](TrainConfig& c, const std::string& v) { c.hp.tau.end = to_double("tau_end", v); }},
      {"lr",
       [](const TrainConfig& c) { return c.hp.lr ? format_double(c.hp.lr->initial) : "layout"; },
       [](TrainConfig& c, const std::string& v) {
         if (v == "layout") {
           c.hp.lr.reset();
           return;
         }
         LearningRate lr = c.hp.lr.value_or(LearningRate{});
         lr.initial = to_double("lr", v);
         c.hp.lr = lr;
       }},
      {"lr_decay_ratio",
       [](const TrainConfig& c) {
         return c.hp.lr ? format_double(c.hp.lr->decay_ratio) : "layout";
       },
       [](TrainConfig& c, const std::string& v) {
         if (v == "layout") return;
         LearningRate lr = c.hp.lr.value_or(LearningRate{});
         lr.decay_ratio = to_double("lr_decay_ratio", v);
         c.hp.lr = lr;
       }},
      {"epochs", [](const TrainConfig& c) { return std::to_string(c.hp.epochs); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.epochs = static_cast<int>(to_int("epochs", v));
       }},
      {"minibatch_steps", [](const TrainConfig& c) { return std::to_string(c.hp.minibatch_steps); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.minibatch_steps = static_cast<int>(to_int("minibatch_steps", v));
       }},
      {"minibatch_envs", [](const TrainConfig& c) { return std::to_string(c.hp.minibatch_envs); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.minibatch_envs = static_cast<int>(to_int("minibatch_envs", v));
       }},
      {"n_envs", [](const TrainConfig& c) { return std::to_string(c.hp.n_envs); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.n_envs = static_cast<int>(to_int("n_envs", v));
       }},
      {"horizon", [](const TrainConfig& c) { return std::to_string(c.hp.horizon); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.horizon = static_cast<int>(to_int("horizon", v));
       }},
      {"total_steps", [](const TrainConfig& c) { return std::to_string(c.hp.total_steps); },
       [](TrainConfig& c, const std::string& v) { c.hp.total_steps = to_int("total_steps", v); }},
      {"max_grad_norm", [](const TrainConfig& c) { return format_double(c.hp.max_grad_norm); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.max_grad_norm = to_double("max_grad_norm", v);
       }},
      {"normalize_advantages",
       [](const TrainConfig& c) { return std::string(c.hp.normalize_advantages ? "true" : "false"); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.normalize_advantages = to_bool("normalize_advantages", v);
       }},
      {"termination_loss",
       [](const TrainConfig& c) { return termination_loss_name(c.hp.termination_loss); },
       [](TrainConfig& c, const std::string& v) {
         c.hp.termination_loss = parse_termination_loss(v);
       }},
      {"conv_channels", [](const TrainConfig& c) { return join_ints(c.conv_channels); },
       [](TrainConfig& c, const std::string& v) {
         c.conv_channels = to_int_list("conv_channels", v);
       }},
      {"dense", [](const TrainConfig& c) { return join_ints(c.dense); },
       [](TrainConfig& c, const std::string& v) { c.dense = to_int_list("dense", v); }},
      {"recurrent", [](const TrainConfig& c) { return std::to_string(c.recurrent); },
       [](TrainConfig& c, const std::string& v) {
         c.recurrent = static_cast<int>(to_int("recurrent", v));
       }},
      {"cell", [](const TrainConfig& c) { return grad::cell_kind_name(c.cell); },
       [](TrainConfig& c, const std::string& v) {
         try {
           c.cell = grad::parse_cell_kind(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("cell: ") + e.what());
         }
       }},
      {"partners", [](const TrainConfig& c) { return c.partners; },
       [](TrainConfig& c, const std::string& v) { c.partners = v; }},
      {"jsd_weight", [](const TrainConfig& c) { return format_double(c.jsd_weight); },
       [](TrainConfig& c, const std::string& v) { c.jsd_weight = to_double("jsd_weight", v); }},
      {"jsd_references",
       [](const TrainConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.jsd_references.size(); ++i) {
           out += (i > 0 ? "," : "") + c.jsd_references[i];
         }
         return out;
       },
       [](TrainConfig& c, const std::string& v) {
         c.jsd_references.clear();
         if (trim(v).empty()) return;
         for (const std::string& part : split(v, ',')) c.jsd_references.push_back(trim(part));
       }},
      {"termination_override",
       [](const TrainConfig& c) { return termination_override_name(c.termination_override); },
       [](TrainConfig& c, const std::string& v) {
         c.termination_override = parse_termination_override(v);
       }},
      {"stop_at_return", [](const TrainConfig& c) { return format_double(c.stop_at_return); },
       [](TrainConfig& c, const std::string& v) {
         c.stop_at_return = to_double("stop_at_return", v);
       }},
      {"stop_window", [](const TrainConfig& c) { return std::to_string(c.stop_window); },
       [](TrainConfig& c, const std::string& v) {
         c.stop_window = static_cast<int>(to_int("stop_window", v));
       }},
      {"checkpoint_every", [](const TrainConfig& c) { return std::to_string(c.checkpoint_every); },
       [](TrainConfig& c, const std::string& v) {
         c.checkpoint_every = static_cast<int>(to_int("checkpoint_every", v));
       }},
  };
  return table;
}

}  // namespace

std::string train_mode_name(TrainMode mode) { return mode == TrainMode::kIad ? "iad" : "flat"; }

TrainMode parse_train_mode(const std::string& text) {
  if (text == "iad") return TrainMode::kIad;
  if (text == "flat") return TrainMode::kFlat;
  throw ConfigError("mode must be 'iad' or 'flat', got '" + text + "'");
}

std::string termination_loss_name(TerminationLoss loss) {
  return loss == TerminationLoss::kCrossEntropy ? "cross_entropy" : "policy_gradient";
}

TerminationLoss parse_termination_loss(const std::string& text) {
  if (text == "cross_entropy") return TerminationLoss::kCrossEntropy;
  if (text == "policy_gradient") return TerminationLoss::kPolicyGradient;
  throw ConfigError("termination_loss must be 'cross_entropy' or 'policy_gradient', got '" +
                    text + "'");
}

std::string termination_override_name(TerminationOverride mode) {
  switch (mode) {
    case TerminationOverride::kLearned: return "learned";
    case TerminationOverride::kNever: return "never";
    case TerminationOverride::kAlways: return "always";
  }
  return "learned";
}

TerminationOverride parse_termination_override(const std::string& text) {
  if (text == "learned") return TerminationOverride::kLearned;
  if (text == "never") return TerminationOverride::kNever;
  if (text == "always") return TerminationOverride::kAlways;
  throw ConfigError("termination_override must be learned, never or always, got '" + text + "'");
}

void HyperParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(clip > 0.0)) fail("clip must be positive");
  if (value_coef < 0.0) fail("value_coef must be non-negative");
  if (entropy.start < 0.0 || entropy.end < 0.0) fail("entropy coefficients must be non-negative");
  if (tau.start < tau.end) fail("tau schedule must be non-increasing");
  if (tau.end < 0.0) fail("tau must be non-negative");
  if (lr && (!(lr->initial >= 0.0) || !(lr->decay_ratio > 0.0))) {
    fail("lr must be non-negative and lr_decay_ratio positive");
  }
  if (epochs < 1) fail("epochs must be >= 1");
  if (minibatch_steps < 1) fail("minibatch_steps must be >= 1");
  if (minibatch_envs < 0) fail("minibatch_envs must be >= 0");
  if (n_envs < 1) fail("n_envs must be >= 1");
  if (horizon < 0) fail("horizon must be >= 0");
  if (total_steps < 1) fail("total_steps must be >= 1");
  if (max_grad_norm < 0.0) fail("max_grad_norm must be >= 0");
}

void TrainConfig::validate() const {
  hp.validate();
  if (num_skills < 1) throw ConfigError("num_skills must be >= 1");
  if (mode == TrainMode::kFlat && num_skills != 1) {
    throw ConfigError("flat mode trains a single-skill policy; set num_skills = 1");
  }
  if (dense.empty() || recurrent < 1) throw ConfigError("network needs dense layers and a recurrent size");
  for (int c : conv_channels) {
    if (c < 1) throw ConfigError("conv_channels entries must be positive");
  }
  if (jsd_weight < 0.0) throw ConfigError("jsd_weight must be non-negative");
  if (stop_window < 1) throw ConfigError("stop_window must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

policy::PolicyConfig TrainConfig::policy_config(int channels, int height, int width) const {
  policy::PolicyConfig p;
  p.num_skills = num_skills;
  p.obs_channels = channels;
  p.height = height;
  p.width = width;
  p.conv_channels = conv_channels;
  p.dense = dense;
  p.recurrent = recurrent;
  p.cell = cell;
  return p;
}

std::string TrainConfig::to_key_values() const {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << " = " << f.get(*this) << "\n";
  return out.str();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_train_config(const std::string& text, const std::string& source) {
  TrainConfig config;
  std::vector<KeyValueEntry> entries;
  try {
    entries = parse_key_values(text);
  } catch (const ParseError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  for (const KeyValueEntry& e : entries) {
    try {
      apply_setting(config, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(source + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_train_config(read_text_file(path), path.string());
}

}  // namespace iad::core

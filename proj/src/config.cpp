#include "spg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spg/errors.hpp"

namespace spg {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  return out;
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': bad unsigned '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad bool '" + v + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::validate() const {
  (void)task_enum();
  if (n < 2) throw ConfigError("n must be >= 2");
  if (task_enum() == Task::kTsp && n < 3) throw ConfigError("tsp needs n >= 3");
  if (train_count < 1) throw ConfigError("train_count must be >= 1");
  if (test_count < 1) throw ConfigError("test_count must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(actor_lr > 0) || !(critic_lr > 0)) throw ConfigError("lr must be > 0");
  if (!(lr_decay > 0) || lr_decay > 1) throw ConfigError("lr_decay in (0,1]");
  if (lr_decay_steps < 1) throw ConfigError("lr_decay_steps must be >= 1");
  if (k_exchange != 2) throw ConfigError("only k_exchange = 2 is supported");
  if (epsilon_start < 0 || epsilon_start > 1)
    throw ConfigError("epsilon_start in [0,1]");
  if (epsilon_end < 0 || epsilon_end > 1)
    throw ConfigError("epsilon_end in [0,1]");
  if (!(epsilon_decay > 0) || epsilon_decay > 1)
    throw ConfigError("epsilon_decay in (0,1]");
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  if (sinkhorn_iters < 0) throw ConfigError("sinkhorn_iters must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (buffer_capacity < batch_size)
    throw ConfigError("buffer_capacity must be >= batch_size");
  if (!(grad_clip > 0)) throw ConfigError("grad_clip must be > 0");
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_key_values()
    const {
  return {
      {"task", task},
      {"n", std::to_string(n)},
      {"train_count", std::to_string(train_count)},
      {"test_count", std::to_string(test_count)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"data_seed", std::to_string(data_seed)},
      {"actor_lr", fmt_double(actor_lr)},
      {"critic_lr", fmt_double(critic_lr)},
      {"lr_decay", fmt_double(lr_decay)},
      {"lr_decay_steps", std::to_string(lr_decay_steps)},
      {"adam_beta1", fmt_double(adam_beta1)},
      {"adam_beta2", fmt_double(adam_beta2)},
      {"adam_eps", fmt_double(adam_eps)},
      {"k_exchange", std::to_string(k_exchange)},
      {"epsilon_start", fmt_double(epsilon_start)},
      {"epsilon_end", fmt_double(epsilon_end)},
      {"epsilon_decay", fmt_double(epsilon_decay)},
      {"tau", fmt_double(tau)},
      {"sinkhorn_iters", std::to_string(sinkhorn_iters)},
      {"batch_size", std::to_string(batch_size)},
      {"buffer_capacity", std::to_string(buffer_capacity)},
      {"grad_clip", fmt_double(grad_clip)},
      {"penalty", penalty ? "true" : "false"},
      {"data_dir", data_dir},
      {"out_dir", out_dir},
      {"generate", generate ? "true" : "false"},
      {"resumable", resumable ? "true" : "false"},
      {"resume_from", resume_from},
  };
}

void RunConfig::apply_key_value(const std::string& key,
                                const std::string& value) {
  if (key == "task") task = value;
  else if (key == "n") n = static_cast<int>(parse_int(key, value));
  else if (key == "train_count") train_count = parse_int(key, value);
  else if (key == "test_count") test_count = parse_int(key, value);
  else if (key == "epochs") epochs = static_cast<int>(parse_int(key, value));
  else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "data_seed") data_seed = parse_uint(key, value);
  else if (key == "actor_lr") actor_lr = parse_double(key, value);
  else if (key == "critic_lr") critic_lr = parse_double(key, value);
  else if (key == "lr_decay") lr_decay = parse_double(key, value);
  else if (key == "lr_decay_steps") lr_decay_steps = parse_int(key, value);
  else if (key == "adam_beta1") adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_double(key, value);
  else if (key == "adam_eps") adam_eps = parse_double(key, value);
  else if (key == "k_exchange") k_exchange = static_cast<int>(parse_int(key, value));
  else if (key == "epsilon_start") epsilon_start = parse_double(key, value);
  else if (key == "epsilon_end") epsilon_end = parse_double(key, value);
  else if (key == "epsilon_decay") epsilon_decay = parse_double(key, value);
  else if (key == "tau") tau = parse_double(key, value);
  else if (key == "sinkhorn_iters") sinkhorn_iters = static_cast<int>(parse_int(key, value));
  else if (key == "batch_size") batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "buffer_capacity") buffer_capacity = parse_int(key, value);
  else if (key == "grad_clip") grad_clip = parse_double(key, value);
  else if (key == "penalty") penalty = parse_bool(key, value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "generate") generate = parse_bool(key, value);
  else if (key == "resumable") resumable = parse_bool(key, value);
  else if (key == "resume_from") resume_from = value;
  else throw ConfigError("unknown config key: " + key);
}

std::string RunConfig::print() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_key_values()) os << k << " = " << v << "\n";
  return os.str();
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    base.apply_key_value(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace spg

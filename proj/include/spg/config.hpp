#pragma once

// Run configuration: every hyperparameter with its stock default, a flat
// key=value file format, and a round-trippable echo. Unknown keys are
// rejected.

#include <string>
#include <utility>
#include <vector>

#include "spg/envs.hpp"

namespace spg {

struct RunConfig {
  std::string task = "mwm";
  int n = 10;
  int64_t train_count = 500000;
  int64_t test_count = 1000;
  int epochs = 20;
  uint64_t seed = 1;
  uint64_t data_seed = 9001;

  double actor_lr = 1e-5;
  double critic_lr = 2e-4;
  double lr_decay = 0.95;        // multiplicative, applied every lr_decay_steps
  int64_t lr_decay_steps = 5000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int k_exchange = 2;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  double epsilon_decay = 0.95;  // per epoch

  double tau = 0.05;
  int sinkhorn_iters = 10;

  int batch_size = 128;
  int64_t buffer_capacity = 1000000;
  double grad_clip = 1.0;
  bool penalty = true;

  std::string data_dir = "data";
  std::string out_dir = "";
  bool generate = false;
  bool resumable = false;
  std::string resume_from = "";

  Task task_enum() const { return task_from_name(task); }
  void validate() const;  // ConfigError on out-of-range values

  // Stable key order; values parse back to an identical config.
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  void apply_key_value(const std::string& key, const std::string& value);
  std::string print() const;
};

RunConfig parse_config_file(const std::string& path, RunConfig base = {});
RunConfig parse_config_text(const std::string& text, RunConfig base = {});

}  // namespace spg

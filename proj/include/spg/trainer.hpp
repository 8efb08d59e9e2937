#pragma once

// Training loop: batched environment interaction with ε-greedy k-exchange
// exploration, FIFO replay, one critic update (hard-target MSE plus
// stop-gradient penalty MSE) and one actor update (gradient ascent on
// mean Q(s, π(s)) with the critic frozen) per step. Evaluation runs on the
// held-out split with ε = 0 and BatchNorm in eval mode after every epoch.
//
// All randomness is drawn from streams keyed by (seed, purpose, counter), so
// reruns are bit-identical and resume needs only the counters plus state.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spg/adam.hpp"
#include "spg/config.hpp"
#include "spg/dataset.hpp"
#include "spg/nets.hpp"
#include "spg/replay.hpp"

namespace spg::train {

double lr_at(double lr0, double decay, int64_t decay_steps, int64_t t);
double epsilon_at(double start, double end, double decay, int epoch);

struct EpochMetrics {
  int epoch = 0;     // 1-based
  int64_t step = 0;  // optimizer updates completed so far
  double mean_test_reward = 0.0;
  double mean_opt_ratio = std::numeric_limits<double>::quiet_NaN();
  double critic_hard_mse = std::numeric_limits<double>::quiet_NaN();
  double critic_penalty_mse = std::numeric_limits<double>::quiet_NaN();
  double epsilon = 0.0;
  double actor_lr = 0.0;
  double critic_lr = 0.0;
  // Extra diagnostics, not part of the CSV contract.
  double median_opt_ratio = std::numeric_limits<double>::quiet_NaN();
  double mean_tour_length = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<EpochMetrics> rows;
};

struct QDiagRow {
  double hard_q, soft_q, reward;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

class Trainer {
 public:
  Trainer(RunConfig cfg, Dataset train_set, Dataset test_set);

  // Runs the configured number of epochs (continuing after a resume);
  // writes metrics.csv and per-epoch checkpoints when out_dir is set.
  TrainReport run();

  EpochMetrics train_epoch(int epoch);
  EpochMetrics evaluate(int epoch_label);
  std::vector<QDiagRow> q_diagnostics(int count);

  void save_checkpoint(const std::string& prefix) const;
  void resume(const std::string& prefix);

  // Step internals (exposed for tests).
  void act_and_store(const std::vector<const Instance*>& batch, double eps);
  std::pair<double, double> critic_update(
      const std::vector<const Experience*>& batch);
  void actor_update(const std::vector<const Instance*>& states);

  nets::Policy& policy() { return *policy_; }
  ReplayBuffer& buffer() { return buffer_; }
  const RunConfig& config() const { return cfg_; }
  int64_t updates() const { return updates_; }
  int64_t env_steps() const { return env_steps_; }
  int epochs_done() const { return epochs_done_; }
  double current_actor_lr() const;
  double current_critic_lr() const;

 private:
  EpochMetrics evaluate_into(int epoch_label);

  RunConfig cfg_;
  Task task_;
  Dataset train_, test_;
  std::unique_ptr<nets::Policy> policy_;
  std::vector<ad::Tensor> actor_params_, critic_params_;
  ad::AdamState adam_actor_, adam_critic_;
  ReplayBuffer buffer_;
  int64_t env_steps_ = 0;
  int64_t updates_ = 0;
  int epochs_done_ = 0;
  std::vector<double> test_opt_weight_;  // mwm: cached optimal weights
};

}  // namespace spg::train

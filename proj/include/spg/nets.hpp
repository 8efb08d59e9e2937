#pragma once

// Actor-critic architectures. The matching pair embeds two point sets,
// fuses them with a batched outer product and runs a GRU over the fused
// rows; the sequential pair embeds one set and runs a bidirectional GRU.
// Actors emit a doubly-stochastic matrix through the Sinkhorn layer and
// round it with the assignment solver; gradients flow only through the soft
// output (the rounded permutation is plain data, not part of any tape).
//
// Batched state layout: (B·N)×K leaves, batch-major. Critic action input is
// the flattened (B·N)×N matrix, either a materialized permutation or a soft
// relaxation.

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spg/batchnorm.hpp"
#include "spg/checkpoint.hpp"
#include "spg/envs.hpp"
#include "spg/gru.hpp"
#include "spg/sinkhorn.hpp"

namespace spg::nets {

using ad::BatchNorm;
using ad::BnMode;
using ad::GruParams;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

struct StateBatch {
  int b = 0, n = 0, k = 0;
  Tensor x1;  // (B·N)×K
  Tensor x2;  // matching tasks only
};

StateBatch make_state_batch(Task task, const std::vector<const Instance*>& in);

struct ActorBatchResult {
  Tensor soft;                          // B×N×N
  std::vector<PermutationMatrix> hard;  // hungarian(soft), per instance
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

int64_t count_parameters(const std::vector<Tensor>& params);

class Policy {
 public:
  virtual ~Policy() = default;

  Task task() const { return task_; }
  int n() const { return n_; }
  int k() const { return k_; }

  virtual Tensor actor_soft(Tape& t, const StateBatch& sb, double tau,
                            int iters) = 0;
  // actor_soft plus per-instance rounding (batch-parallel, order-stable).
  ActorBatchResult actor_forward(Tape& t, const StateBatch& sb, double tau,
                                 int iters);

  virtual Tensor critic_q(Tape& t, const StateBatch& sb,
                          const Tensor& action_flat, BnMode mode) = 0;
  // Q for two actions on the same states. Stages that do not depend on the
  // action are evaluated once; running stats advance once per shared stage
  // and once per action-dependent stage, hard leg first.
  virtual std::pair<Tensor, Tensor> critic_q_pair(Tape& t,
                                                  const StateBatch& sb,
                                                  const Tensor& hard_flat,
                                                  const Tensor& soft_flat,
                                                  BnMode mode) = 0;

  virtual std::vector<Tensor> actor_params() const = 0;
  virtual std::vector<Tensor> critic_params() const = 0;
  virtual std::vector<NamedTensor> named_params() const = 0;
  // Non-trainable state (BatchNorm running statistics).
  virtual std::vector<CheckpointEntry> extra_state() const = 0;
  virtual void load_extra_state(
      const std::map<std::string, CheckpointEntry>& index) = 0;

  std::vector<CheckpointEntry> checkpoint_entries() const;
  void load_params(const std::map<std::string, CheckpointEntry>& index);

  static std::unique_ptr<Policy> make(Task task, int n, uint64_t seed);

 protected:
  Policy(Task task, int n, int k) : task_(task), n_(n), k_(k) {}
  Task task_;
  int n_, k_;
};

}  // namespace spg::nets

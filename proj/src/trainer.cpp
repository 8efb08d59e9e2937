#include "spg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spg/threadpool.hpp"

namespace spg::train {

namespace ad = spg::ad;

double lr_at(double lr0, double decay, int64_t decay_steps, int64_t t) {
  return lr0 * std::pow(decay, static_cast<double>(t / decay_steps));
}

double epsilon_at(double start, double end, double decay, int epoch) {
  return std::max(end, start * std::pow(decay, static_cast<double>(epoch)));
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ad::Tensor hard_actions_tensor(const std::vector<const Experience*>& batch,
                               int n) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<double> flat(b * n * n, 0.0);
  for (int64_t i = 0; i < b; ++i) {
    const auto& perm = batch[i]->hard.perm;
    for (int r = 0; r < n; ++r) flat[(i * n + r) * n + perm[r]] = 1.0;
  }
  return ad::Tensor::from(ad::Shape::mat(b * n, n), std::move(flat));
}

ad::Tensor soft_actions_tensor(const std::vector<const Experience*>& batch,
                               int n) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<double> flat(b * n * n);
  for (int64_t i = 0; i < b; ++i)
    std::copy(batch[i]->soft.begin(), batch[i]->soft.end(),
              flat.begin() + i * n * n);
  return ad::Tensor::from(ad::Shape::mat(b * n, n), std::move(flat));
}

void check_finite(const ad::Tensor& t, const char* what) {
  for (double v : t.value())
    if (!std::isfinite(v))
      throw NumericError(std::string(what) + ": non-finite value");
}

// Temporarily drops requires_grad so backward skips a parameter set.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<ad::Tensor>& params) : params_(params) {
    saved_.reserve(params.size());
    for (auto& p : params_) {
      saved_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~FreezeGuard() {
    for (size_t i = 0; i < params_.size(); ++i)
      params_[i].set_requires_grad(saved_[i]);
  }

 private:
  std::vector<ad::Tensor>& params_;
  std::vector<bool> saved_;
};

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN()
                    : std::accumulate(xs.begin(), xs.end(), 0.0) /
                          static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

std::string metrics_csv_header() {
  return "epoch,step,mean_test_reward,mean_opt_ratio,critic_hard_mse,"
         "critic_penalty_mse,epsilon,actor_lr,critic_lr";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream os;
  os << m.epoch << "," << m.step << "," << fmt(m.mean_test_reward) << ","
     << fmt(m.mean_opt_ratio) << "," << fmt(m.critic_hard_mse) << ","
     << fmt(m.critic_penalty_mse) << "," << fmt(m.epsilon) << ","
     << fmt(m.actor_lr) << "," << fmt(m.critic_lr);
  return os.str();
}

Trainer::Trainer(RunConfig cfg, Dataset train_set, Dataset test_set)
    : cfg_(std::move(cfg)),
      task_(cfg_.task_enum()),
      train_(std::move(train_set)),
      test_(std::move(test_set)),
      buffer_(static_cast<uint64_t>(cfg_.buffer_capacity)) {
  cfg_.validate();
  if (train_.task != task_ || test_.task != task_)
    throw DataError("trainer: dataset task does not match config task");
  if (train_.n != cfg_.n || test_.n != cfg_.n)
    throw DataError("trainer: dataset N does not match config N");
  if (train_.instances.empty() || test_.instances.empty())
    throw DataError("trainer: empty dataset");
  policy_ = nets::Policy::make(task_, cfg_.n, cfg_.seed);
  actor_params_ = policy_->actor_params();
  critic_params_ = policy_->critic_params();
  adam_actor_.beta1 = adam_critic_.beta1 = cfg_.adam_beta1;
  adam_actor_.beta2 = adam_critic_.beta2 = cfg_.adam_beta2;
  adam_actor_.eps = adam_critic_.eps = cfg_.adam_eps;
  adam_actor_.init_like(actor_params_);
  adam_critic_.init_like(critic_params_);
  if (task_ == Task::kMwm) {
    test_opt_weight_.resize(test_.instances.size());
    global_pool().parallel_for(
        0, static_cast<int64_t>(test_.instances.size()), [&](int64_t i) {
          test_opt_weight_[i] = mwm_optimal(test_.instances[i]).first;
        });
  }
}

double Trainer::current_actor_lr() const {
  return lr_at(cfg_.actor_lr, cfg_.lr_decay, cfg_.lr_decay_steps, updates_);
}
double Trainer::current_critic_lr() const {
  return lr_at(cfg_.critic_lr, cfg_.lr_decay, cfg_.lr_decay_steps, updates_);
}

void Trainer::act_and_store(const std::vector<const Instance*>& batch,
                            double eps) {
  ad::Tape tape(/*recording=*/false);
  nets::StateBatch sb = nets::make_state_batch(task_, batch);
  nets::ActorBatchResult res =
      policy_->actor_forward(tape, sb, cfg_.tau, cfg_.sinkhorn_iters);
  Rng explore = derive_rng(cfg_.seed, Stream::kExplore,
                           static_cast<uint64_t>(env_steps_));
  const int n = cfg_.n;
  for (size_t b = 0; b < batch.size(); ++b) {
    PermutationMatrix hard = std::move(res.hard[b]);
    const double* soft_begin = res.soft.value().data() + b * n * n;
    std::vector<double> soft(soft_begin, soft_begin + n * n);
    if (explore.uniform() < eps) {
      auto [h2, s2] = k_exchange(hard, soft, cfg_.k_exchange, explore);
      hard = std::move(h2);
      soft = std::move(s2);
    }
    const double r = reward(task_, *batch[b], hard);
    buffer_.push(Experience{*batch[b], std::move(soft), std::move(hard), r});
  }
  ++env_steps_;
}

std::pair<double, double> Trainer::critic_update(
    const std::vector<const Experience*>& batch) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<const Instance*> states(batch.size());
  std::vector<double> rewards(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    states[i] = &batch[i]->state;
    rewards[i] = batch[i]->reward;
  }
  ad::Tape tape;
  nets::StateBatch sb = nets::make_state_batch(task_, states);
  ad::Tensor r = ad::Tensor::from(ad::Shape::mat(b, 1), std::move(rewards));
  ad::Tensor hard = hard_actions_tensor(batch, cfg_.n);

  double hard_mse_v, penalty_v = std::numeric_limits<double>::quiet_NaN();
  ad::Tensor loss;
  if (cfg_.penalty) {
    ad::Tensor soft = soft_actions_tensor(batch, cfg_.n);
    auto [qh, qs] =
        policy_->critic_q_pair(tape, sb, hard, soft, ad::BnMode::kTrain);
    check_finite(qh, "critic update (hard Q)");
    check_finite(qs, "critic update (soft Q)");
    ad::Tensor hard_mse = ad::mse(tape, qh, r);
    // stop_grad(Q(s,P)): the target is a detached copy of the hard Q values.
    ad::Tensor target = ad::Tensor::from(ad::Shape::mat(b, 1), qh.value());
    ad::Tensor penalty = ad::mse(tape, qs, target);
    loss = ad::add(tape, hard_mse, penalty);
    hard_mse_v = hard_mse.item();
    penalty_v = penalty.item();
  } else {
    ad::Tensor qh = policy_->critic_q(tape, sb, hard, ad::BnMode::kTrain);
    check_finite(qh, "critic update (hard Q)");
    ad::Tensor hard_mse = ad::mse(tape, qh, r);
    loss = hard_mse;
    hard_mse_v = hard_mse.item();
  }
  tape.backward(loss);
  ad::clip_grad_norm(critic_params_, cfg_.grad_clip);
  ad::adam_step(critic_params_, adam_critic_, current_critic_lr());
  ad::zero_grads(critic_params_);
  ad::zero_grads(actor_params_);
  return {hard_mse_v, penalty_v};
}

void Trainer::actor_update(const std::vector<const Instance*>& states) {
  const int64_t b = static_cast<int64_t>(states.size());
  ad::Tape tape;
  nets::StateBatch sb = nets::make_state_batch(task_, states);
  ad::Tensor soft;
  ad::Tensor q;
  {
    FreezeGuard freeze(critic_params_);
    soft = policy_->actor_soft(tape, sb, cfg_.tau, cfg_.sinkhorn_iters);
    check_finite(soft, "actor update (soft action)");
    ad::Tensor soft_flat =
        ad::reshape(tape, soft, ad::Shape::mat(b * cfg_.n, cfg_.n));
    q = policy_->critic_q(tape, sb, soft_flat, ad::BnMode::kTrainNoUpdate);
    check_finite(q, "actor update (Q)");
    // Ascend mean Q: minimize its negation.
    ad::Tensor loss = ad::neg(tape, ad::mean_all(tape, q));
    tape.backward(loss);
  }
  ad::clip_grad_norm(actor_params_, cfg_.grad_clip);
  ad::adam_step(actor_params_, adam_actor_, current_actor_lr());
  ad::zero_grads(actor_params_);
  ad::zero_grads(critic_params_);
}

EpochMetrics Trainer::train_epoch(int epoch) {
  const double eps = epsilon_at(cfg_.epsilon_start, cfg_.epsilon_end,
                                cfg_.epsilon_decay, epoch);
  const int64_t train_size = static_cast<int64_t>(train_.instances.size());
  std::vector<int64_t> order(train_size);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = derive_rng(cfg_.seed, Stream::kShuffle,
                           static_cast<uint64_t>(epoch));
  shuffle.shuffle(order);

  std::vector<double> hard_losses, penalty_losses;
  for (int64_t pos = 0; pos < train_size; pos += cfg_.batch_size) {
    const int64_t bsz = std::min<int64_t>(cfg_.batch_size, train_size - pos);
    std::vector<const Instance*> batch(bsz);
    for (int64_t i = 0; i < bsz; ++i)
      batch[i] = &train_.instances[order[pos + i]];
    act_and_store(batch, eps);

    if (buffer_.size() >= static_cast<uint64_t>(cfg_.batch_size)) {
      Rng pick = derive_rng(cfg_.seed, Stream::kSample,
                            static_cast<uint64_t>(updates_));
      std::vector<const Experience*> sample(cfg_.batch_size);
      std::vector<const Instance*> sample_states(cfg_.batch_size);
      for (int i = 0; i < cfg_.batch_size; ++i) {
        sample[i] = &buffer_.sample(pick);
        sample_states[i] = &sample[i]->state;
      }
      auto [h, p] = critic_update(sample);
      hard_losses.push_back(h);
      if (cfg_.penalty) penalty_losses.push_back(p);
      actor_update(sample_states);
      ++updates_;
    }
  }
  ++epochs_done_;

  EpochMetrics m = evaluate_into(epoch + 1);
  m.critic_hard_mse = mean_of(hard_losses);
  m.critic_penalty_mse = cfg_.penalty
                             ? mean_of(penalty_losses)
                             : std::numeric_limits<double>::quiet_NaN();
  m.epsilon = eps;
  return m;
}

EpochMetrics Trainer::evaluate(int epoch_label) {
  return evaluate_into(epoch_label);
}

EpochMetrics Trainer::evaluate_into(int epoch_label) {
  EpochMetrics m;
  m.epoch = epoch_label;
  m.step = updates_;
  m.epsilon = 0.0;
  m.actor_lr = current_actor_lr();
  m.critic_lr = current_critic_lr();

  const int64_t test_size = static_cast<int64_t>(test_.instances.size());
  std::vector<double> rewards(test_size);
  std::vector<double> ratios;
  if (task_ == Task::kMwm) ratios.resize(test_size);
  for (int64_t pos = 0; pos < test_size; pos += cfg_.batch_size) {
    const int64_t bsz = std::min<int64_t>(cfg_.batch_size, test_size - pos);
    std::vector<const Instance*> batch(bsz);
    for (int64_t i = 0; i < bsz; ++i) batch[i] = &test_.instances[pos + i];
    ad::Tape tape(/*recording=*/false);
    nets::StateBatch sb = nets::make_state_batch(task_, batch);
    nets::ActorBatchResult res =
        policy_->actor_forward(tape, sb, cfg_.tau, cfg_.sinkhorn_iters);
    for (int64_t i = 0; i < bsz; ++i) {
      const double r = reward(task_, *batch[i], res.hard[i]);
      rewards[pos + i] = r;
      if (task_ == Task::kMwm)
        ratios[pos + i] = optimality_ratio_given(*batch[i], res.hard[i],
                                                 test_opt_weight_[pos + i]);
    }
  }
  m.mean_test_reward = mean_of(rewards);
  if (task_ == Task::kMwm) {
    m.mean_opt_ratio = mean_of(ratios);
    m.median_opt_ratio = median_of(ratios);
  }
  if (task_ == Task::kTsp) m.mean_tour_length = -m.mean_test_reward;
  return m;
}

std::vector<QDiagRow> Trainer::q_diagnostics(int count) {
  const int64_t test_size = static_cast<int64_t>(test_.instances.size());
  std::vector<int64_t> order(test_size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(cfg_.seed, Stream::kDiag,
                       static_cast<uint64_t>(epochs_done_));
  rng.shuffle(order);
  const int64_t b = std::min<int64_t>(count, test_size);
  std::vector<const Instance*> states(b);
  for (int64_t i = 0; i < b; ++i) states[i] = &test_.instances[order[i]];

  ad::Tape tape(/*recording=*/false);
  nets::StateBatch sb = nets::make_state_batch(task_, states);
  nets::ActorBatchResult res =
      policy_->actor_forward(tape, sb, cfg_.tau, cfg_.sinkhorn_iters);
  std::vector<const Experience*> fake;
  std::vector<Experience> exps(b);
  fake.reserve(b);
  const int n = cfg_.n;
  for (int64_t i = 0; i < b; ++i) {
    exps[i].state = *states[i];
    const double* soft_begin = res.soft.value().data() + i * n * n;
    exps[i].soft.assign(soft_begin, soft_begin + n * n);
    exps[i].hard = res.hard[i];
    exps[i].reward = reward(task_, *states[i], res.hard[i]);
    fake.push_back(&exps[i]);
  }
  ad::Tensor hard = hard_actions_tensor(fake, n);
  ad::Tensor soft = soft_actions_tensor(fake, n);
  ad::Tensor qh = policy_->critic_q(tape, sb, hard, ad::BnMode::kEval);
  ad::Tensor qs = policy_->critic_q(tape, sb, soft, ad::BnMode::kEval);
  std::vector<QDiagRow> rows(b);
  for (int64_t i = 0; i < b; ++i)
    rows[i] = {qh.value()[i], qs.value()[i], exps[i].reward};
  return rows;
}

void Trainer::save_checkpoint(const std::string& prefix) const {
  std::vector<CheckpointEntry> entries = policy_->checkpoint_entries();
  const auto named = policy_->named_params();
  const size_t actor_count = actor_params_.size();
  auto put_adam = [&](const std::string& name,
                      const std::vector<double>& buf) {
    entries.push_back(
        {name, {static_cast<uint64_t>(buf.size())}, buf});
  };
  for (size_t i = 0; i < named.size(); ++i) {
    const bool is_actor = i < actor_count;
    const auto& st = is_actor ? adam_actor_ : adam_critic_;
    const size_t j = is_actor ? i : i - actor_count;
    put_adam("/adam/" + named[i].name + "/m", st.m[j]);
    put_adam("/adam/" + named[i].name + "/v", st.v[j]);
  }
  put_adam("/adam/actor/t", {static_cast<double>(adam_actor_.t)});
  put_adam("/adam/critic/t", {static_cast<double>(adam_critic_.t)});
  spg::save_checkpoint(prefix + ".spgc", entries);

  std::ofstream mf(prefix + ".manifest");
  if (!mf) throw DataError("cannot write manifest: " + prefix + ".manifest");
  mf << "# run manifest\n" << cfg_.print();
  mf << "ckpt_epoch = " << epochs_done_ << "\n";
  mf << "ckpt_env_steps = " << env_steps_ << "\n";
  mf << "ckpt_updates = " << updates_ << "\n";
  if (cfg_.resumable) save_buffer(prefix + ".spgb", buffer_, task_, cfg_.n);
}

void Trainer::resume(const std::string& prefix) {
  std::ifstream mf(prefix + ".manifest");
  if (!mf) throw DataError("cannot open manifest: " + prefix + ".manifest");
  std::string line;
  int64_t ck_epoch = -1, ck_env = -1, ck_updates = -1;
  RunConfig saved;
  while (std::getline(mf, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    auto strip = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string()
                                    : s.substr(a, b - a + 1);
    };
    key = strip(key);
    val = strip(val);
    if (key == "ckpt_epoch") ck_epoch = std::stoll(val);
    else if (key == "ckpt_env_steps") ck_env = std::stoll(val);
    else if (key == "ckpt_updates") ck_updates = std::stoll(val);
    else saved.apply_key_value(key, val);
  }
  if (ck_epoch < 0 || ck_env < 0 || ck_updates < 0)
    throw DataError("manifest " + prefix + ".manifest: missing counters");
  if (saved.task != cfg_.task || saved.n != cfg_.n ||
      saved.seed != cfg_.seed || saved.batch_size != cfg_.batch_size ||
      saved.buffer_capacity != cfg_.buffer_capacity)
    throw DataError("resume: checkpoint was produced by a different config");

  auto index = checkpoint_index(load_checkpoint(prefix + ".spgc"));
  policy_->load_params(index);
  const auto named = policy_->named_params();
  const size_t actor_count = actor_params_.size();
  auto fetch = [&](const std::string& name) -> const std::vector<double>& {
    auto it = index.find(name);
    if (it == index.end())
      throw DataError("checkpoint missing optimizer entry '" + name + "'");
    return it->second.data;
  };
  for (size_t i = 0; i < named.size(); ++i) {
    const bool is_actor = i < actor_count;
    auto& st = is_actor ? adam_actor_ : adam_critic_;
    const size_t j = is_actor ? i : i - actor_count;
    st.m[j] = fetch("/adam/" + named[i].name + "/m");
    st.v[j] = fetch("/adam/" + named[i].name + "/v");
  }
  adam_actor_.t = static_cast<int64_t>(fetch("/adam/actor/t")[0]);
  adam_critic_.t = static_cast<int64_t>(fetch("/adam/critic/t")[0]);
  epochs_done_ = static_cast<int>(ck_epoch);
  env_steps_ = ck_env;
  updates_ = ck_updates;
  if (std::filesystem::exists(prefix + ".spgb"))
    buffer_ = load_buffer(prefix + ".spgb", task_, cfg_.n);
}

TrainReport Trainer::run() {
  namespace fs = std::filesystem;
  const bool emit = !cfg_.out_dir.empty();
  std::ofstream csv;
  if (emit) {
    fs::create_directories(cfg_.out_dir);
    const std::string path = cfg_.out_dir + "/metrics.csv";
    const bool fresh = epochs_done_ == 0;
    const bool existed = fs::exists(path);
    csv.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw DataError("cannot write metrics.csv in " + cfg_.out_dir);
    if (fresh || !existed) csv << metrics_csv_header() << "\n";
  }
  TrainReport report;
  for (int epoch = epochs_done_; epoch < cfg_.epochs; ++epoch) {
    EpochMetrics m = train_epoch(epoch);
    report.rows.push_back(m);
    if (emit) {
      csv << metrics_csv_row(m) << "\n";
      csv.flush();
      save_checkpoint(cfg_.out_dir + "/checkpoint_ep" +
                      std::to_string(epochs_done_));
    }
  }
  return report;
}

}  // namespace spg::train

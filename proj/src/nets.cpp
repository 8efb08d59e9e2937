#include "spg/nets.hpp"

#include <cmath>

#include "spg/threadpool.hpp"

namespace spg::nets {

namespace {

constexpr int kHidden = 128;
constexpr double kLeakySlope = 0.01;

Tensor linear_init(Shape s, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(s, -bound, bound, rng, /*requires_grad=*/true);
}

void load_tensor(const std::map<std::string, CheckpointEntry>& index,
                 const std::string& name, Tensor& t) {
  auto it = index.find(name);
  if (it == index.end())
    throw DataError("checkpoint is missing entry '" + name + "'");
  if (it->second.data.size() != t.value().size())
    throw DataError("checkpoint entry '" + name + "' has " +
                    std::to_string(it->second.data.size()) +
                    " values, expected " + std::to_string(t.value().size()));
  t.value() = it->second.data;
}

void load_buffer(const std::map<std::string, CheckpointEntry>& index,
                 const std::string& name, std::vector<double>& buf) {
  auto it = index.find(name);
  if (it == index.end())
    throw DataError("checkpoint is missing entry '" + name + "'");
  if (it->second.data.size() != buf.size())
    throw DataError("checkpoint entry '" + name + "' size mismatch");
  buf = it->second.data;
}

std::vector<uint64_t> dims_of(const Tensor& t) {
  std::vector<uint64_t> d;
  for (int i = 0; i < t.shape().rank; ++i)
    d.push_back(static_cast<uint64_t>(t.shape()[i]));
  return d;
}

}  // namespace

StateBatch make_state_batch(Task task,
                            const std::vector<const Instance*>& in) {
  if (in.empty()) throw ShapeError("make_state_batch: empty batch");
  StateBatch sb;
  sb.b = static_cast<int>(in.size());
  sb.n = in[0]->n;
  sb.k = feature_dim(task);
  const int64_t rows = static_cast<int64_t>(sb.b) * sb.n;
  std::vector<double> x1(rows * sb.k);
  std::vector<double> x2;
  if (task == Task::kMwm) x2.resize(rows * sb.k);
  for (int b = 0; b < sb.b; ++b) {
    const Instance& inst = *in[b];
    if (inst.n != sb.n)
      throw ShapeError("make_state_batch: mixed instance sizes");
    double* dst1 = x1.data() + static_cast<int64_t>(b) * sb.n * sb.k;
    switch (task) {
      case Task::kSort:
        for (int i = 0; i < sb.n; ++i) dst1[i] = inst.feat[i];
        break;
      case Task::kTsp:
        std::copy(inst.feat.begin(), inst.feat.end(), dst1);
        break;
      case Task::kMwm: {
        std::copy(inst.feat.begin(), inst.feat.begin() + 2 * sb.n, dst1);
        double* dst2 = x2.data() + static_cast<int64_t>(b) * sb.n * sb.k;
        std::copy(inst.feat.begin() + 2 * sb.n, inst.feat.end(), dst2);
        break;
      }
    }
  }
  sb.x1 = Tensor::from(Shape::mat(rows, sb.k), std::move(x1));
  if (task == Task::kMwm)
    sb.x2 = Tensor::from(Shape::mat(rows, sb.k), std::move(x2));
  return sb;
}

int64_t count_parameters(const std::vector<Tensor>& params) {
  int64_t total = 0;
  for (const auto& p : params) total += p.shape().numel();
  return total;
}

ActorBatchResult Policy::actor_forward(Tape& t, const StateBatch& sb,
                                       double tau, int iters) {
  ActorBatchResult out;
  out.soft = actor_soft(t, sb, tau, iters);
  const int n = n_;
  out.hard.resize(sb.b);
  const double* soft = out.soft.value().data();
  global_pool().parallel_for(0, sb.b, [&](int64_t b) {
    out.hard[b] = hungarian_max(soft + b * n * n, n);
  });
  return out;
}

std::vector<CheckpointEntry> Policy::checkpoint_entries() const {
  std::vector<CheckpointEntry> entries;
  for (const auto& np : named_params()) {
    CheckpointEntry e;
    e.name = np.name;
    e.dims = dims_of(np.tensor);
    e.data = np.tensor.value();
    entries.push_back(std::move(e));
  }
  for (auto& e : extra_state()) entries.push_back(std::move(e));
  return entries;
}

void Policy::load_params(const std::map<std::string, CheckpointEntry>& index) {
  for (auto& np : named_params()) {
    Tensor t = np.tensor;
    load_tensor(index, np.name, t);
  }
  load_extra_state(index);
}

// ---------------------------------------------------------------------------
// SPG+Matching

namespace {

class MatchingPolicy final : public Policy {
 public:
  MatchingPolicy(int n, int k, uint64_t seed) : Policy(Task::kMwm, n, k) {
    uint64_t ord = 0;
    auto next = [&] { return derive_rng(seed, Stream::kParamInit, ord++); };
    auto rng = next();
    w_e_ = linear_init(Shape::mat(k, kHidden), k, rng);
    b_e_ = Tensor::zeros(Shape::vec(kHidden), true);
    rng = next();
    gru_ = GruParams::init(n, kHidden, rng);
    rng = next();
    w_a_ = linear_init(Shape::mat(kHidden, n), kHidden, rng);
    b_a_ = Tensor::zeros(Shape::vec(n), true);

    rng = next();
    cw_e_ = linear_init(Shape::mat(k, kHidden), k, rng);
    cb_e_ = Tensor::zeros(Shape::vec(kHidden), true);
    rng = next();
    cgru_ = GruParams::init(n, kHidden, rng);
    rng = next();
    w_c_ = linear_init(Shape::mat(kHidden, kHidden), kHidden, rng);
    b_c_ = Tensor::zeros(Shape::vec(kHidden), true);
    bn_c_ = BatchNorm(kHidden);
    rng = next();
    w_d_ = linear_init(Shape::mat(n, kHidden), n, rng);
    b_d_ = Tensor::zeros(Shape::vec(kHidden), true);
    bn_d_ = BatchNorm(kHidden);
    rng = next();
    w_f_ = linear_init(Shape::mat(kHidden, n), kHidden, rng);
    b_f_ = Tensor::zeros(Shape::vec(n), true);
    bn_f_ = BatchNorm(n);
    rng = next();
    w_g1_ = linear_init(Shape::mat(n, 1), n, rng);
    rng = next();
    w_g2_ = linear_init(Shape::mat(n, 1), n, rng);
  }

  Tensor actor_soft(Tape& t, const StateBatch& sb, double tau,
                    int iters) override {
    Tensor h = trunk(t, sb, w_e_, b_e_, gru_);
    Tensor logits = ad::affine(t, h, w_a_, b_a_);
    Tensor cube = ad::reshape(t, logits, Shape::cube(sb.b, n_, n_));
    return ad::sinkhorn(t, cube, tau, iters);
  }

  Tensor critic_q(Tape& t, const StateBatch& sb, const Tensor& action_flat,
                  BnMode mode) override {
    Tensor yc = state_leg(t, sb, mode);
    return action_leg(t, sb.b, yc, action_flat, mode);
  }

  std::pair<Tensor, Tensor> critic_q_pair(Tape& t, const StateBatch& sb,
                                          const Tensor& hard_flat,
                                          const Tensor& soft_flat,
                                          BnMode mode) override {
    Tensor yc = state_leg(t, sb, mode);
    Tensor qh = action_leg(t, sb.b, yc, hard_flat, mode);
    Tensor qs = action_leg(t, sb.b, yc, soft_flat, mode);
    return {qh, qs};
  }

  std::vector<Tensor> actor_params() const override {
    return {w_e_, b_e_, gru_.w_ih, gru_.w_hh, gru_.b_ih, gru_.b_hh, w_a_,
            b_a_};
  }
  std::vector<Tensor> critic_params() const override {
    return {cw_e_,         cb_e_,        cgru_.w_ih,   cgru_.w_hh,
            cgru_.b_ih,    cgru_.b_hh,   w_c_,         b_c_,
            bn_c_.gamma,   bn_c_.beta,   w_d_,         b_d_,
            bn_d_.gamma,   bn_d_.beta,   w_f_,         b_f_,
            bn_f_.gamma,   bn_f_.beta,   w_g1_,        w_g2_};
  }
  std::vector<NamedTensor> named_params() const override {
    return {{"actor/w_e", w_e_},
            {"actor/b_e", b_e_},
            {"actor/gru/w_ih", gru_.w_ih},
            {"actor/gru/w_hh", gru_.w_hh},
            {"actor/gru/b_ih", gru_.b_ih},
            {"actor/gru/b_hh", gru_.b_hh},
            {"actor/w_a", w_a_},
            {"actor/b_a", b_a_},
            {"critic/w_e", cw_e_},
            {"critic/b_e", cb_e_},
            {"critic/gru/w_ih", cgru_.w_ih},
            {"critic/gru/w_hh", cgru_.w_hh},
            {"critic/gru/b_ih", cgru_.b_ih},
            {"critic/gru/b_hh", cgru_.b_hh},
            {"critic/w_c", w_c_},
            {"critic/b_c", b_c_},
            {"critic/bn_c/gamma", bn_c_.gamma},
            {"critic/bn_c/beta", bn_c_.beta},
            {"critic/w_d", w_d_},
            {"critic/b_d", b_d_},
            {"critic/bn_d/gamma", bn_d_.gamma},
            {"critic/bn_d/beta", bn_d_.beta},
            {"critic/w_f", w_f_},
            {"critic/b_f", b_f_},
            {"critic/bn_f/gamma", bn_f_.gamma},
            {"critic/bn_f/beta", bn_f_.beta},
            {"critic/w_g1", w_g1_},
            {"critic/w_g2", w_g2_}};
  }
  std::vector<CheckpointEntry> extra_state() const override {
    std::vector<CheckpointEntry> es;
    auto put = [&](const std::string& name, const std::vector<double>& buf) {
      es.push_back({name, {static_cast<uint64_t>(buf.size())}, buf});
    };
    put("critic/bn_c/running_mean", bn_c_.running_mean);
    put("critic/bn_c/running_var", bn_c_.running_var);
    put("critic/bn_d/running_mean", bn_d_.running_mean);
    put("critic/bn_d/running_var", bn_d_.running_var);
    put("critic/bn_f/running_mean", bn_f_.running_mean);
    put("critic/bn_f/running_var", bn_f_.running_var);
    return es;
  }
  void load_extra_state(
      const std::map<std::string, CheckpointEntry>& index) override {
    load_buffer(index, "critic/bn_c/running_mean", bn_c_.running_mean);
    load_buffer(index, "critic/bn_c/running_var", bn_c_.running_var);
    load_buffer(index, "critic/bn_d/running_mean", bn_d_.running_mean);
    load_buffer(index, "critic/bn_d/running_var", bn_d_.running_var);
    load_buffer(index, "critic/bn_f/running_mean", bn_f_.running_mean);
    load_buffer(index, "critic/bn_f/running_var", bn_f_.running_var);
  }

 private:
  // Shared embed → outer-product fuse → GRU trunk; returns (B·N)×H.
  Tensor trunk(Tape& t, const StateBatch& sb, const Tensor& w_e,
               const Tensor& b_e, const GruParams& gru) const {
    Tensor e1 = ad::leaky_relu(t, ad::affine(t, sb.x1, w_e, b_e), kLeakySlope);
    Tensor e2 = ad::leaky_relu(t, ad::affine(t, sb.x2, w_e, b_e), kLeakySlope);
    Tensor e1c = ad::reshape(t, e1, Shape::cube(sb.b, n_, kHidden));
    Tensor e2c = ad::reshape(t, e2, Shape::cube(sb.b, n_, kHidden));
    Tensor fused = ad::bmm_nt(t, e2c, e1c);           // B×N×N
    Tensor seq = ad::transpose01(t, fused);           // N×B×N, time-major
    Tensor h0 = Tensor::zeros(Shape::mat(sb.b, kHidden));
    Tensor h = ad::gru_forward(t, seq, h0, gru);      // N×B×H
    Tensor hb = ad::transpose01(t, h);                // B×N×H
    return ad::reshape(t, hb, Shape::mat(static_cast<int64_t>(sb.b) * n_,
                                         kHidden));
  }

  Tensor state_leg(Tape& t, const StateBatch& sb, BnMode mode) {
    Tensor h = trunk(t, sb, cw_e_, cb_e_, cgru_);
    Tensor yc = ad::affine(t, h, w_c_, b_c_);
    return ad::leaky_relu(t, ad::batchnorm(t, yc, bn_c_, mode), kLeakySlope);
  }

  Tensor action_leg(Tape& t, int b, const Tensor& yc,
                    const Tensor& action_flat, BnMode mode) {
    Tensor ed = ad::leaky_relu(
        t, ad::batchnorm(t, ad::affine(t, action_flat, w_d_, b_d_), bn_d_,
                         mode),
        kLeakySlope);
    Tensor yf = ad::leaky_relu(
        t, ad::batchnorm(t, ad::affine(t, ad::add(t, yc, ed), w_f_, b_f_),
                         bn_f_, mode),
        kLeakySlope);
    Tensor v = ad::matmul(t, yf, w_g1_);  // (B·N)×1
    Tensor vb = ad::reshape(t, v, Shape::mat(b, n_));
    return ad::matmul(t, vb, w_g2_);  // B×1
  }

  Tensor w_e_, b_e_, w_a_, b_a_;
  GruParams gru_;
  Tensor cw_e_, cb_e_;
  GruParams cgru_;
  Tensor w_c_, b_c_, w_d_, b_d_, w_f_, b_f_, w_g1_, w_g2_;
  BatchNorm bn_c_{1}, bn_d_{1}, bn_f_{1};
};

// ---------------------------------------------------------------------------
// SPG+Sequential

class SequentialPolicy final : public Policy {
 public:
  SequentialPolicy(Task task, int n, int k, uint64_t seed)
      : Policy(task, n, k) {
    uint64_t ord = 100;  // distinct stream ordinals from the matching nets
    auto next = [&] { return derive_rng(seed, Stream::kParamInit, ord++); };
    auto rng = next();
    w_e_ = linear_init(Shape::mat(k, kHidden), k, rng);
    b_e_ = Tensor::zeros(Shape::vec(kHidden), true);
    rng = next();
    gru_f_ = GruParams::init(kHidden, kHidden, rng);
    rng = next();
    gru_b_ = GruParams::init(kHidden, kHidden, rng);
    rng = next();
    w_a_ = linear_init(Shape::mat(2 * kHidden, n), 2 * kHidden, rng);
    b_a_ = Tensor::zeros(Shape::vec(n), true);

    rng = next();
    w_j_ = linear_init(Shape::mat(k, kHidden), k, rng);
    b_j_ = Tensor::zeros(Shape::vec(kHidden), true);
    bn_j_ = BatchNorm(kHidden);
    rng = next();
    w_k_ = linear_init(Shape::mat(n, kHidden), n, rng);
    b_k_ = Tensor::zeros(Shape::vec(kHidden), true);
    bn_k_ = BatchNorm(kHidden);
    rng = next();
    w_l_ = linear_init(Shape::mat(kHidden, kHidden), kHidden, rng);
    b_l_ = Tensor::zeros(Shape::vec(kHidden), true);
    bn_l_ = BatchNorm(kHidden);
    rng = next();
    cgru_f_ = GruParams::init(kHidden, kHidden, rng);
    rng = next();
    cgru_b_ = GruParams::init(kHidden, kHidden, rng);
    rng = next();
    w_m_ = linear_init(Shape::mat(2 * kHidden, kHidden), 2 * kHidden, rng);
    b_m_ = Tensor::zeros(Shape::vec(kHidden), true);
    rng = next();
    w_n1_ = linear_init(Shape::mat(kHidden, 1), kHidden, rng);
    rng = next();
    w_n2_ = linear_init(Shape::mat(kHidden, 1), kHidden, rng);
  }

  Tensor actor_soft(Tape& t, const StateBatch& sb, double tau,
                    int iters) override {
    Tensor e = ad::leaky_relu(t, ad::affine(t, sb.x1, w_e_, b_e_),
                              kLeakySlope);
    Tensor h = bigru_trunk(t, e, sb.b, gru_f_, gru_b_);  // (B·N)×2H
    Tensor logits = ad::affine(t, h, w_a_, b_a_);
    Tensor cube = ad::reshape(t, logits, Shape::cube(sb.b, n_, n_));
    return ad::sinkhorn(t, cube, tau, iters);
  }

  Tensor critic_q(Tape& t, const StateBatch& sb, const Tensor& action_flat,
                  BnMode mode) override {
    Tensor e1 = ad::leaky_relu(
        t, ad::batchnorm(t, ad::affine(t, sb.x1, w_j_, b_j_), bn_j_, mode),
        kLeakySlope);
    Tensor e2 = ad::leaky_relu(
        t, ad::batchnorm(t, ad::affine(t, action_flat, w_k_, b_k_), bn_k_,
                         mode),
        kLeakySlope);
    Tensor fused = ad::leaky_relu(
        t, ad::batchnorm(t, ad::affine(t, ad::add(t, e1, e2), w_l_, b_l_),
                         bn_l_, mode),
        kLeakySlope);
    Tensor h = bigru_trunk(t, fused, sb.b, cgru_f_, cgru_b_);  // (B·N)×2H
    Tensor ym = ad::leaky_relu(t, ad::affine(t, h, w_m_, b_m_), kLeakySlope);
    Tensor u = ad::reshape(t, ad::matmul(t, ym, w_n1_), Shape::mat(sb.b, n_));
    Tensor w = ad::reshape(t, ad::matmul(t, ym, w_n2_), Shape::mat(sb.b, n_));
    return ad::rowsum(t, ad::mul(t, u, w));  // B×1
  }

  std::pair<Tensor, Tensor> critic_q_pair(Tape& t, const StateBatch& sb,
                                          const Tensor& hard_flat,
                                          const Tensor& soft_flat,
                                          BnMode mode) override {
    // Action fuses before the recurrent stage, so nothing can be shared.
    Tensor qh = critic_q(t, sb, hard_flat, mode);
    Tensor qs = critic_q(t, sb, soft_flat, mode);
    return {qh, qs};
  }

  std::vector<Tensor> actor_params() const override {
    return {w_e_, b_e_, gru_f_.w_ih, gru_f_.w_hh, gru_f_.b_ih, gru_f_.b_hh,
            gru_b_.w_ih, gru_b_.w_hh, gru_b_.b_ih, gru_b_.b_hh, w_a_, b_a_};
  }
  std::vector<Tensor> critic_params() const override {
    return {w_j_,         b_j_,         bn_j_.gamma,  bn_j_.beta,
            w_k_,         b_k_,         bn_k_.gamma,  bn_k_.beta,
            w_l_,         b_l_,         bn_l_.gamma,  bn_l_.beta,
            cgru_f_.w_ih, cgru_f_.w_hh, cgru_f_.b_ih, cgru_f_.b_hh,
            cgru_b_.w_ih, cgru_b_.w_hh, cgru_b_.b_ih, cgru_b_.b_hh,
            w_m_,         b_m_,         w_n1_,        w_n2_};
  }
  std::vector<NamedTensor> named_params() const override {
    return {{"actor/w_e", w_e_},
            {"actor/b_e", b_e_},
            {"actor/gru_f/w_ih", gru_f_.w_ih},
            {"actor/gru_f/w_hh", gru_f_.w_hh},
            {"actor/gru_f/b_ih", gru_f_.b_ih},
            {"actor/gru_f/b_hh", gru_f_.b_hh},
            {"actor/gru_b/w_ih", gru_b_.w_ih},
            {"actor/gru_b/w_hh", gru_b_.w_hh},
            {"actor/gru_b/b_ih", gru_b_.b_ih},
            {"actor/gru_b/b_hh", gru_b_.b_hh},
            {"actor/w_a", w_a_},
            {"actor/b_a", b_a_},
            {"critic/w_j", w_j_},
            {"critic/b_j", b_j_},
            {"critic/bn_j/gamma", bn_j_.gamma},
            {"critic/bn_j/beta", bn_j_.beta},
            {"critic/w_k", w_k_},
            {"critic/b_k", b_k_},
            {"critic/bn_k/gamma", bn_k_.gamma},
            {"critic/bn_k/beta", bn_k_.beta},
            {"critic/w_l", w_l_},
            {"critic/b_l", b_l_},
            {"critic/bn_l/gamma", bn_l_.gamma},
            {"critic/bn_l/beta", bn_l_.beta},
            {"critic/gru_f/w_ih", cgru_f_.w_ih},
            {"critic/gru_f/w_hh", cgru_f_.w_hh},
            {"critic/gru_f/b_ih", cgru_f_.b_ih},
            {"critic/gru_f/b_hh", cgru_f_.b_hh},
            {"critic/gru_b/w_ih", cgru_b_.w_ih},
            {"critic/gru_b/w_hh", cgru_b_.w_hh},
            {"critic/gru_b/b_ih", cgru_b_.b_ih},
            {"critic/gru_b/b_hh", cgru_b_.b_hh},
            {"critic/w_m", w_m_},
            {"critic/b_m", b_m_},
            {"critic/w_n1", w_n1_},
            {"critic/w_n2", w_n2_}};
  }
  std::vector<CheckpointEntry> extra_state() const override {
    std::vector<CheckpointEntry> es;
    auto put = [&](const std::string& name, const std::vector<double>& buf) {
      es.push_back({name, {static_cast<uint64_t>(buf.size())}, buf});
    };
    put("critic/bn_j/running_mean", bn_j_.running_mean);
    put("critic/bn_j/running_var", bn_j_.running_var);
    put("critic/bn_k/running_mean", bn_k_.running_mean);
    put("critic/bn_k/running_var", bn_k_.running_var);
    put("critic/bn_l/running_mean", bn_l_.running_mean);
    put("critic/bn_l/running_var", bn_l_.running_var);
    return es;
  }
  void load_extra_state(
      const std::map<std::string, CheckpointEntry>& index) override {
    load_buffer(index, "critic/bn_j/running_mean", bn_j_.running_mean);
    load_buffer(index, "critic/bn_j/running_var", bn_j_.running_var);
    load_buffer(index, "critic/bn_k/running_mean", bn_k_.running_mean);
    load_buffer(index, "critic/bn_k/running_var", bn_k_.running_var);
    load_buffer(index, "critic/bn_l/running_mean", bn_l_.running_mean);
    load_buffer(index, "critic/bn_l/running_var", bn_l_.running_var);
  }

 private:
  // Embed (B·N)×H → time-major bidirectional GRU → (B·N)×2H.
  Tensor bigru_trunk(Tape& t, const Tensor& flat, int b, const GruParams& f,
                     const GruParams& bw) const {
    Tensor cube = ad::reshape(t, flat, Shape::cube(b, n_, kHidden));
    Tensor seq = ad::transpose01(t, cube);  // N×B×H
    Tensor h0 = Tensor::zeros(Shape::mat(b, kHidden));
    Tensor h = ad::bigru_forward(t, seq, h0, h0, f, bw);  // N×B×2H
    Tensor hb = ad::transpose01(t, h);
    return ad::reshape(
        t, hb, Shape::mat(static_cast<int64_t>(b) * n_, 2 * kHidden));
  }

  Tensor w_e_, b_e_, w_a_, b_a_;
  GruParams gru_f_, gru_b_;
  Tensor w_j_, b_j_, w_k_, b_k_, w_l_, b_l_, w_m_, b_m_, w_n1_, w_n2_;
  GruParams cgru_f_, cgru_b_;
  BatchNorm bn_j_{1}, bn_k_{1}, bn_l_{1};
};

}  // namespace

std::unique_ptr<Policy> Policy::make(Task task, int n, uint64_t seed) {
  if (n < 2)
    throw ConfigError("policy: need N >= 2, got " + std::to_string(n));
  const int k = feature_dim(task);
  if (task == Task::kMwm)
    return std::make_unique<MatchingPolicy>(n, k, seed);
  return std::make_unique<SequentialPolicy>(task, n, k, seed);
}

}  // namespace spg::nets

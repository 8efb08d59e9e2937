// Trainer mechanics: schedules, replay behavior, exploration frequency,
// update isolation, stop-gradient semantics, determinism, checkpoint resume.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spg/sinkhorn.hpp"
#include "spg/trainer.hpp"
#include "testutil.hpp"

using namespace spg;
using namespace spg::train;
namespace ad = spg::ad;

namespace {

RunConfig tiny_config(const char* task, int n) {
  RunConfig cfg;
  cfg.task = task;
  cfg.n = n;
  cfg.train_count = 256;
  cfg.test_count = 64;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.buffer_capacity = 4096;
  cfg.seed = 7;
  cfg.data_seed = 17;
  return cfg;
}

Trainer make_trainer(const RunConfig& cfg) {
  Dataset train = generate_dataset(cfg.task_enum(), cfg.n,
                                   static_cast<uint64_t>(cfg.train_count),
                                   cfg.data_seed);
  Dataset test = generate_dataset(cfg.task_enum(), cfg.n,
                                  static_cast<uint64_t>(cfg.test_count),
                                  test_split_seed(cfg.data_seed));
  return Trainer(cfg, std::move(train), std::move(test));
}

std::vector<const Instance*> first_ptrs(const Dataset& ds, int count) {
  std::vector<const Instance*> out;
  for (int i = 0; i < count; ++i) out.push_back(&ds.instances[i]);
  return out;
}

std::vector<std::vector<double>> snapshot(const std::vector<ad::Tensor>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& p : ps) out.push_back(p.value());
  return out;
}

}  // namespace

TEST_CASE("learning-rate and epsilon schedules") {
  CHECK(lr_at(1e-5, 0.95, 5000, 0) == 1e-5);
  CHECK(lr_at(1e-5, 0.95, 5000, 4999) == 1e-5);
  CHECK(lr_at(1e-5, 0.95, 5000, 5000) == doctest::Approx(1e-5 * 0.95));
  CHECK(lr_at(1e-5, 0.95, 5000, 10000) ==
        doctest::Approx(1e-5 * 0.95 * 0.95).epsilon(1e-15));
  CHECK(epsilon_at(1.0, 0.01, 0.95, 0) == 1.0);
  CHECK(epsilon_at(1.0, 0.01, 0.95, 3) ==
        doctest::Approx(0.95 * 0.95 * 0.95));
  CHECK(epsilon_at(1.0, 0.01, 0.95, 500) == 0.01);
}

TEST_CASE("replay buffer FIFO eviction and uniform sampling") {
  ReplayBuffer buf(8);
  auto mk = [](double tag) {
    Experience e;
    e.state.n = 2;
    e.state.feat = {tag, tag};
    e.soft = {1, 0, 0, 1};
    e.hard = PermutationMatrix::identity(2);
    e.reward = tag;
    return e;
  };
  for (int i = 0; i < 11; ++i) buf.push(mk(i));
  CHECK(buf.size() == 8);
  CHECK(buf.inserted() == 11);
  // Oldest three (0,1,2) are gone.
  std::vector<double> tags;
  for (uint64_t i = 0; i < buf.size(); ++i) tags.push_back(buf.at(i).reward);
  std::sort(tags.begin(), tags.end());
  CHECK(tags == std::vector<double>{3, 4, 5, 6, 7, 8, 9, 10});

  // Uniform sampling: chi-square over 1e5 draws across 8 occupants.
  Rng rng = derive_rng(91, Stream::kTest, 0);
  std::map<double, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[buf.sample(rng).reward] += 1;
  REQUIRE(counts.size() == 8);
  double chi2 = 0;
  const double expect = draws / 8.0;
  for (const auto& [tag, c] : counts)
    chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 24.3);  // chi2(7 dof) at p=0.001
}

TEST_CASE("act: epsilon 0 keeps the policy action, epsilon 1 always perturbs") {
  RunConfig cfg = tiny_config("mwm", 5);
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 5, 32, 555);
  auto batch = first_ptrs(probe, 32);

  tr.act_and_store(batch, 0.0);
  // With no exploration the stored action equals a fresh greedy forward.
  ad::Tape t(false);
  nets::StateBatch sb = nets::make_state_batch(Task::kMwm, batch);
  auto fresh = tr.policy().actor_forward(t, sb, cfg.tau, cfg.sinkhorn_iters);
  for (int i = 0; i < 32; ++i) {
    CHECK(tr.buffer().at(i).hard == fresh.hard[i]);
    CHECK(tr.buffer().at(i).soft ==
          std::vector<double>(fresh.soft.value().begin() + i * 25,
                              fresh.soft.value().begin() + (i + 1) * 25));
  }
  tr.act_and_store(batch, 1.0);
  int changed = 0;
  for (int i = 0; i < 32; ++i) {
    const auto& e = tr.buffer().at(32 + i);
    CHECK(e.hard.is_valid());
    if (!(e.hard == fresh.hard[i])) ++changed;
    // A row swap on a generic soft matrix always changes it.
    CHECK(e.soft !=
          std::vector<double>(fresh.soft.value().begin() + i * 25,
                              fresh.soft.value().begin() + (i + 1) * 25));
  }
  // Swapping two rows of the permutation always changes it.
  CHECK(changed == 32);
}

TEST_CASE("act: perturbation frequency tracks epsilon") {
  RunConfig cfg = tiny_config("mwm", 5);
  cfg.buffer_capacity = 20000;
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 5, 128, 556);
  auto batch = first_ptrs(probe, 128);
  ad::Tape t(false);
  nets::StateBatch sb = nets::make_state_batch(Task::kMwm, batch);
  auto fresh = tr.policy().actor_forward(t, sb, cfg.tau, cfg.sinkhorn_iters);
  const int rounds = 80;  // 10240 exploration draws
  for (int r = 0; r < rounds; ++r) tr.act_and_store(batch, 0.5);
  int64_t perturbed = 0;
  for (int r = 0; r < rounds; ++r)
    for (int i = 0; i < 128; ++i)
      if (!(tr.buffer().at(r * 128 + i).hard == fresh.hard[i])) ++perturbed;
  const double freq = static_cast<double>(perturbed) / (rounds * 128.0);
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("stored rewards recompute exactly from (s, P)") {
  RunConfig cfg = tiny_config("tsp", 5);
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kTsp, 5, 64, 557);
  tr.act_and_store(first_ptrs(probe, 64), 0.7);
  for (uint64_t i = 0; i < tr.buffer().size(); ++i) {
    const Experience& e = tr.buffer().at(i);
    CHECK(std::fabs(e.reward - reward(Task::kTsp, e.state, e.hard)) <= 1e-12);
  }
}

TEST_CASE("critic update leaves actor parameters untouched and vice versa") {
  RunConfig cfg = tiny_config("mwm", 4);
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 4, 16, 558);
  tr.act_and_store(first_ptrs(probe, 16), 0.5);
  std::vector<const Experience*> sample;
  std::vector<const Instance*> states;
  for (int i = 0; i < 16; ++i) {
    sample.push_back(&tr.buffer().at(i));
    states.push_back(&sample.back()->state);
  }
  const auto actor_before = snapshot(tr.policy().actor_params());
  tr.critic_update(sample);
  const auto actor_after = snapshot(tr.policy().actor_params());
  CHECK(actor_before == actor_after);

  const auto critic_before = snapshot(tr.policy().critic_params());
  auto bn_before = tr.policy().extra_state();
  tr.actor_update(states);
  const auto critic_after = snapshot(tr.policy().critic_params());
  auto bn_after = tr.policy().extra_state();
  CHECK(critic_before == critic_after);
  // kTrainNoUpdate in the actor pass must leave running stats alone.
  REQUIRE(bn_before.size() == bn_after.size());
  for (size_t i = 0; i < bn_before.size(); ++i)
    CHECK(bn_before[i].data == bn_after[i].data);
}

TEST_CASE("critic loss is zero for a critic that already fits") {
  RunConfig cfg = tiny_config("mwm", 4);
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 4, 16, 600);
  auto batch = first_ptrs(probe, 16);
  // Build experiences whose reward equals the critic's current prediction
  // and whose soft action is the materialized hard action.
  ad::Tape t(false);
  nets::StateBatch sb = nets::make_state_batch(Task::kMwm, batch);
  std::vector<Experience> exps(16);
  std::vector<const Experience*> sample;
  std::vector<double> hard_flat(16 * 4 * 4, 0.0);
  for (int i = 0; i < 16; ++i) {
    exps[i].state = *batch[i];
    exps[i].hard = PermutationMatrix::identity(4);
    exps[i].soft = exps[i].hard.materialize();
    for (int r = 0; r < 4; ++r) hard_flat[(i * 4 + r) * 4 + r] = 1.0;
  }
  ad::Tensor act = ad::Tensor::from(ad::Shape::mat(64, 4), hard_flat);
  ad::Tensor q =
      tr.policy().critic_q(t, sb, act, ad::BnMode::kTrainNoUpdate);
  for (int i = 0; i < 16; ++i) {
    exps[i].reward = q.value()[i];
    sample.push_back(&exps[i]);
  }
  auto [hard_mse, penalty_mse] = tr.critic_update(sample);
  CHECK(hard_mse == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(penalty_mse == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("penalty gradient equals the detached-recomputation oracle") {
  // The penalty target must act as a constant: computing Q(s,P) in a
  // separate no-record pass and using those numbers as the target gives
  // bit-identical critic gradients.
  RunConfig cfg = tiny_config("mwm", 4);
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 4, 8, 601);
  auto batch = first_ptrs(probe, 8);
  std::vector<Experience> exps(8);
  std::vector<const Experience*> sample;
  Rng rng = derive_rng(93, Stream::kTest, 0);
  for (int i = 0; i < 8; ++i) {
    exps[i].state = *batch[i];
    ad::Tape tt(false);
    ad::Tensor logits = ad::Tensor::uniform(ad::Shape::mat(4, 4), -1, 1, rng);
    std::vector<double> soft = ad::sinkhorn(tt, logits, 0.5, 10).value();
    auto [h2, s2] =
        k_exchange(PermutationMatrix::identity(4), soft, 2, rng);
    exps[i].hard = std::move(h2);
    exps[i].soft = std::move(s2);
    exps[i].reward = rng.uniform(-1.0, 1.0);
    sample.push_back(&exps[i]);
  }

  auto policy2 = nets::Policy::make(Task::kMwm, 4, cfg.seed);
  // Mirror the parameters so both paths start identical.
  policy2->load_params(
      checkpoint_index(tr.policy().checkpoint_entries()));

  // Path A: trainer's critic update gradient (before the Adam step) is not
  // directly observable, so recompute both paths manually.
  auto grads_with_target = [&](nets::Policy& pol,
                               bool recompute_target_no_record) {
    for (auto& p : pol.critic_params()) p.zero_grad();
    ad::Tape t;
    std::vector<const Instance*> states;
    for (auto* e : sample) states.push_back(&e->state);
    nets::StateBatch sb = nets::make_state_batch(Task::kMwm, states);
    std::vector<double> hard_flat(8 * 16, 0.0), soft_flat(8 * 16);
    for (int i = 0; i < 8; ++i) {
      for (int r = 0; r < 4; ++r)
        hard_flat[(i * 4 + r) * 4 + sample[i]->hard.perm[r]] = 1.0;
      std::copy(sample[i]->soft.begin(), sample[i]->soft.end(),
                soft_flat.begin() + i * 16);
    }
    ad::Tensor hard = ad::Tensor::from(ad::Shape::mat(32, 4), hard_flat);
    ad::Tensor soft = ad::Tensor::from(ad::Shape::mat(32, 4), soft_flat);
    std::vector<double> target_vals;
    if (recompute_target_no_record) {
      ad::Tape tn(false);
      nets::StateBatch sb2 = nets::make_state_batch(Task::kMwm, states);
      target_vals =
          pol.critic_q(tn, sb2, hard, ad::BnMode::kTrainNoUpdate).value();
    }
    auto [qh, qs] =
        pol.critic_q_pair(t, sb, hard, soft, ad::BnMode::kTrainNoUpdate);
    if (!recompute_target_no_record) target_vals = qh.value();
    ad::Tensor target =
        ad::Tensor::from(ad::Shape::mat(8, 1), target_vals);
    ad::Tensor loss = ad::mse(t, qs, target);
    t.backward(loss);
    std::vector<std::vector<double>> grads;
    for (const auto& p : pol.critic_params())
      grads.push_back(p.grad().empty()
                          ? std::vector<double>(p.value().size(), 0.0)
                          : p.grad());
    for (auto& p : pol.critic_params()) p.zero_grad();
    return grads;
  };
  auto g_detached_copy = grads_with_target(tr.policy(), false);
  auto g_norecord = grads_with_target(*policy2, true);
  REQUIRE(g_detached_copy.size() == g_norecord.size());
  for (size_t i = 0; i < g_detached_copy.size(); ++i)
    CHECK(g_detached_copy[i] == g_norecord[i]);
}

TEST_CASE("ablation flag drops the penalty term") {
  RunConfig cfg = tiny_config("mwm", 4);
  cfg.penalty = false;
  Trainer tr = make_trainer(cfg);
  Dataset probe = generate_dataset(Task::kMwm, 4, 16, 602);
  tr.act_and_store(first_ptrs(probe, 16), 1.0);
  std::vector<const Experience*> sample;
  for (int i = 0; i < 16; ++i) sample.push_back(&tr.buffer().at(i));
  auto [hard_mse, penalty_mse] = tr.critic_update(sample);
  CHECK(std::isfinite(hard_mse));
  CHECK(std::isnan(penalty_mse));
}

TEST_CASE("actor ascends toward the rewarded vertex on a 2x2 toy") {
  // Logits -> sinkhorn -> linear "critic" that rewards the swap permutation.
  Rng rng = derive_rng(94, Stream::kTest, 0);
  ad::Tensor logits = ad::Tensor::uniform(ad::Shape::mat(2, 2), -0.1, 0.1,
                                          rng, true);
  std::vector<ad::Tensor> params = {logits};
  ad::AdamState adam;
  adam.init_like(params);
  auto swap_mass = [&]() {
    ad::Tape t(false);
    auto soft = ad::sinkhorn(t, logits, 0.5, 10);
    return soft.value()[1] + soft.value()[2];
  };
  const double before = swap_mass();
  for (int step = 0; step < 100; ++step) {
    ad::Tape t;
    ad::Tensor soft = ad::sinkhorn(t, logits, 0.5, 10);
    ad::Tensor target =
        ad::Tensor::from(ad::Shape::mat(2, 2), {0, 1, 1, 0});
    ad::Tensor q = ad::sum_all(t, ad::mul(t, soft, target));
    t.backward(ad::neg(t, q));
    ad::clip_grad_norm(params, 1.0);
    ad::adam_step(params, adam, 1e-2);
    ad::zero_grads(params);
  }
  CHECK(swap_mass() > before);
  CHECK(swap_mass() > 1.5);  // mass concentrated on the rewarded vertex
}

TEST_CASE("smoke run: one epoch on tiny sorting produces one metrics row") {
  RunConfig cfg = tiny_config("sort", 5);
  cfg.out_dir = "trainer_smoke_out";
  Trainer tr = make_trainer(cfg);
  TrainReport rep = tr.run();
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].epoch == 1);
  CHECK(std::isfinite(rep.rows[0].mean_test_reward));
  CHECK(rep.rows[0].mean_test_reward >= -1.0);
  CHECK(rep.rows[0].mean_test_reward <= 1.0);
  std::ifstream csv(cfg.out_dir + "/metrics.csv");
  REQUIRE(csv.good());
  std::string header, row, extra;
  std::getline(csv, header);
  CHECK(header == metrics_csv_header());
  CHECK(std::getline(csv, row).good());
  CHECK_FALSE(std::getline(csv, extra).good());
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("seeded reruns are bit-identical; evaluation is side-effect free") {
  RunConfig cfg = tiny_config("mwm", 4);
  cfg.epochs = 2;
  auto run_rows = [&]() {
    Trainer tr = make_trainer(cfg);
    TrainReport rep = tr.run();
    std::string out;
    for (const auto& r : rep.rows) out += metrics_csv_row(r) + "\n";
    return out;
  };
  const std::string a = run_rows();
  const std::string b = run_rows();
  CHECK(a == b);

  Trainer tr = make_trainer(cfg);
  EpochMetrics e1 = tr.evaluate(0);
  EpochMetrics e2 = tr.evaluate(0);
  CHECK(metrics_csv_row(e1) == metrics_csv_row(e2));
  CHECK(e1.epsilon == 0.0);
}

TEST_CASE("checkpoint resume continues bit-identically") {
  namespace fs = std::filesystem;
  RunConfig base = tiny_config("mwm", 4);
  base.resumable = true;

  // Straight 3-epoch run.
  RunConfig cfg_a = base;
  cfg_a.epochs = 3;
  cfg_a.out_dir = "resume_a";
  {
    Trainer tr = make_trainer(cfg_a);
    tr.run();
  }
  // 2 epochs, then resume for the third.
  RunConfig cfg_b = base;
  cfg_b.epochs = 2;
  cfg_b.out_dir = "resume_b";
  {
    Trainer tr = make_trainer(cfg_b);
    tr.run();
  }
  RunConfig cfg_c = base;
  cfg_c.epochs = 3;
  cfg_c.out_dir = "resume_c";
  {
    Trainer tr = make_trainer(cfg_c);
    tr.resume("resume_b/checkpoint_ep2");
    CHECK(tr.epochs_done() == 2);
    tr.run();
  }
  auto read_lines = [](const std::string& path) {
    std::ifstream f(path);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(f, l)) lines.push_back(l);
    return lines;
  };
  auto rows_a = read_lines("resume_a/metrics.csv");
  auto rows_c = read_lines("resume_c/metrics.csv");
  REQUIRE(rows_a.size() == 4);  // header + 3 epochs
  REQUIRE(rows_c.size() == 2);  // header + resumed epoch 3
  CHECK(rows_c[1] == rows_a[3]);
  fs::remove_all("resume_a");
  fs::remove_all("resume_b");
  fs::remove_all("resume_c");
}

TEST_CASE("q_diagnostics returns finite triples of the requested size") {
  RunConfig cfg = tiny_config("mwm", 4);
  Trainer tr = make_trainer(cfg);
  auto rows = tr.q_diagnostics(20);
  REQUIRE(rows.size() == 20);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.hard_q));
    CHECK(std::isfinite(r.soft_q));
    CHECK(std::isfinite(r.reward));
  }
  // Determinism.
  auto rows2 = tr.q_diagnostics(20);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].hard_q == rows2[i].hard_q);
    CHECK(rows[i].soft_q == rows2[i].soft_q);
  }
}

TEST_CASE("untrained matching policy lands near the random baseline ratio") {
  RunConfig cfg = tiny_config("mwm", 10);
  cfg.test_count = 500;
  Trainer tr = make_trainer(cfg);
  EpochMetrics m = tr.evaluate(0);
  CHECK(m.mean_opt_ratio > 0.60);
  CHECK(m.mean_opt_ratio < 0.80);
}

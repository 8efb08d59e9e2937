// Command-line entry point: dataset generation, training, evaluation,
// multi-seed sweeps and Q-value diagnostics.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "spg/dataset.hpp"
#include "spg/trainer.hpp"

namespace fs = std::filesystem;
using namespace spg;

namespace {

std::string data_base(const std::string& dir, const std::string& task,
                      int n) {
  return dir + "/" + task + std::to_string(n);
}

// Loads or (with cfg.generate) creates the train/test datasets for a run.
std::pair<Dataset, Dataset> resolve_datasets(const RunConfig& cfg) {
  const Task task = cfg.task_enum();
  const std::string base = data_base(cfg.data_dir, cfg.task, cfg.n);
  const std::string train_path = base + "_train.spgd";
  const std::string test_path = base + "_test.spgd";
  if (fs::exists(train_path) && fs::exists(test_path)) {
    Dataset train = read_dataset_expect(train_path, task, cfg.n);
    Dataset test = read_dataset_expect(test_path, task, cfg.n);
    if (static_cast<int64_t>(train.count()) != cfg.train_count)
      throw DataError(train_path + " holds " + std::to_string(train.count()) +
                      " instances, config wants " +
                      std::to_string(cfg.train_count));
    if (static_cast<int64_t>(test.count()) != cfg.test_count)
      throw DataError(test_path + " holds " + std::to_string(test.count()) +
                      " instances, config wants " +
                      std::to_string(cfg.test_count));
    return {std::move(train), std::move(test)};
  }
  if (!cfg.generate)
    throw DataError("datasets not found under " + cfg.data_dir +
                    " (run gen-data or pass --generate)");
  Dataset train = generate_dataset(task, cfg.n,
                                   static_cast<uint64_t>(cfg.train_count),
                                   cfg.data_seed);
  Dataset test = generate_dataset(task, cfg.n,
                                  static_cast<uint64_t>(cfg.test_count),
                                  test_split_seed(cfg.data_seed));
  fs::create_directories(cfg.data_dir);
  write_dataset(train_path, train);
  write_dataset(test_path, test);
  return {std::move(train), std::move(test)};
}

void add_config_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--task", cfg.task, "Task: sort|mwm|tsp");
  cmd->add_option("--n", cfg.n, "Problem size N");
  cmd->add_option("--train-count", cfg.train_count, "Training instances");
  cmd->add_option("--test-count", cfg.test_count, "Held-out instances");
  cmd->add_option("--epochs", cfg.epochs, "Training epochs");
  cmd->add_option("--seed", cfg.seed, "Training seed");
  cmd->add_option("--data-seed", cfg.data_seed, "Dataset seed");
  cmd->add_option("--actor-lr", cfg.actor_lr, "Actor learning rate");
  cmd->add_option("--critic-lr", cfg.critic_lr, "Critic learning rate");
  cmd->add_option("--lr-decay", cfg.lr_decay, "LR decay factor");
  cmd->add_option("--lr-decay-steps", cfg.lr_decay_steps,
                  "Steps per LR decay");
  cmd->add_option("--adam-beta1", cfg.adam_beta1, "Adam beta1");
  cmd->add_option("--adam-beta2", cfg.adam_beta2, "Adam beta2");
  cmd->add_option("--adam-eps", cfg.adam_eps, "Adam epsilon");
  cmd->add_option("--epsilon-start", cfg.epsilon_start, "Exploration start");
  cmd->add_option("--epsilon-end", cfg.epsilon_end, "Exploration floor");
  cmd->add_option("--epsilon-decay", cfg.epsilon_decay,
                  "Exploration decay per epoch");
  cmd->add_option("--tau", cfg.tau, "Sinkhorn temperature");
  cmd->add_option("--sinkhorn-iters", cfg.sinkhorn_iters,
                  "Sinkhorn iterations");
  cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
  cmd->add_option("--buffer-capacity", cfg.buffer_capacity,
                  "Replay buffer capacity");
  cmd->add_option("--grad-clip", cfg.grad_clip, "Gradient norm clip");
  cmd->add_flag("--no-penalty", [&cfg](int64_t) { cfg.penalty = false; },
                "Drop the critic penalty term (ablation)");
  cmd->add_option("--data-dir", cfg.data_dir, "Dataset directory");
  cmd->add_option("--out", cfg.out_dir, "Run output directory");
  cmd->add_flag("--generate", cfg.generate,
                "Generate datasets when missing");
  cmd->add_flag("--resumable", cfg.resumable,
                "Dump the replay buffer with each checkpoint");
  cmd->add_option("--resume-from", cfg.resume_from,
                  "Checkpoint prefix to resume from");
}

// --config files apply before the remaining flags override them.
RunConfig preload_config(int argc, char** argv) {
  RunConfig cfg;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config")
      cfg = parse_config_file(argv[i + 1], cfg);
  return cfg;
}

double percentile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double idx = p / 100.0 * static_cast<double>(xs.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  const size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

std::string agg_row(const std::string& name, const std::vector<double>& xs) {
  std::ostringstream os;
  const double mean =
      std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  std::vector<double> med = xs;
  std::sort(med.begin(), med.end());
  const double median = med.size() % 2
                            ? med[med.size() / 2]
                            : 0.5 * (med[med.size() / 2 - 1] + med[med.size() / 2]);
  os << name << "," << mean << "," << median << "," << percentile(xs, 16) << ","
     << percentile(xs, 84) << "," << percentile(xs, 2.5) << ","
     << percentile(xs, 97.5);
  return os.str();
}

int cmd_train(RunConfig cfg, bool print_config) {
  cfg.validate();
  if (print_config) {
    std::cout << cfg.print();
    return 0;
  }
  if (cfg.out_dir.empty())
    cfg.out_dir = "runs/" + cfg.task + std::to_string(cfg.n) + "-seed" +
                  std::to_string(cfg.seed);
  auto [train_set, test_set] = resolve_datasets(cfg);
  train::Trainer trainer(cfg, std::move(train_set), std::move(test_set));
  if (!cfg.resume_from.empty()) trainer.resume(cfg.resume_from);
  train::TrainReport report = trainer.run();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : report.rows) best = std::max(best, r.mean_test_reward);
  const auto& last = report.rows.empty() ? train::EpochMetrics{}
                                         : report.rows.back();
  std::printf(
      "train done: task=%s n=%d seed=%llu epochs=%d final_reward=%.6f "
      "best_reward=%.6f metrics=%s/metrics.csv\n",
      cfg.task.c_str(), cfg.n, static_cast<unsigned long long>(cfg.seed),
      trainer.epochs_done(), last.mean_test_reward, best,
      cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint) {
  cfg.validate();
  auto [train_set, test_set] = resolve_datasets(cfg);
  (void)train_set;
  train::Trainer trainer(cfg, test_set, test_set);
  if (!checkpoint.empty()) {
    auto index = checkpoint_index(load_checkpoint(checkpoint + ".spgc"));
    trainer.policy().load_params(index);
  }
  train::EpochMetrics m = trainer.evaluate(0);
  std::printf("mean_test_reward=%.6f", m.mean_test_reward);
  if (cfg.task_enum() == Task::kMwm)
    std::printf(" mean_opt_ratio=%.6f median_opt_ratio=%.6f", m.mean_opt_ratio,
                m.median_opt_ratio);
  if (cfg.task_enum() == Task::kTsp)
    std::printf(" mean_tour_length=%.6f", m.mean_tour_length);
  std::printf("\n");
  return 0;
}

int cmd_diag_q(RunConfig cfg, const std::string& checkpoint, int count,
               const std::string& out_path) {
  cfg.validate();
  auto [train_set, test_set] = resolve_datasets(cfg);
  (void)train_set;
  train::Trainer trainer(cfg, test_set, test_set);
  if (!checkpoint.empty()) {
    auto index = checkpoint_index(load_checkpoint(checkpoint + ".spgc"));
    trainer.policy().load_params(index);
  }
  auto rows = trainer.q_diagnostics(count);
  std::ostream* os = &std::cout;
  std::ofstream f;
  if (!out_path.empty()) {
    f.open(out_path);
    if (!f) throw DataError("cannot write " + out_path);
    os = &f;
  }
  (*os) << "hard_q,soft_q,reward\n";
  for (const auto& r : rows)
    (*os) << r.hard_q << "," << r.soft_q << "," << r.reward << "\n";
  return 0;
}

int cmd_sweep(RunConfig cfg, const std::vector<uint64_t>& seeds,
              const std::string& out_root) {
  cfg.validate();
  if (seeds.empty()) throw ConfigError("sweep: need at least one seed");
  fs::create_directories(out_root);
  auto [train_set, test_set] = resolve_datasets(cfg);
  std::vector<double> best_reward, best_ratio, final_reward;
  std::ofstream seeds_csv(out_root + "/seeds.csv");
  seeds_csv << "seed,best_mean_reward,final_mean_reward,best_mean_opt_ratio\n";
  for (uint64_t s : seeds) {
    RunConfig child = cfg;
    child.seed = s;
    child.out_dir = out_root + "/seed_" + std::to_string(s);
    train::Trainer trainer(child, train_set, test_set);
    train::TrainReport rep = trainer.run();
    double best = -std::numeric_limits<double>::infinity();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rep.rows) {
      best = std::max(best, r.mean_test_reward);
      if (!std::isnan(r.mean_opt_ratio))
        ratio = std::isnan(ratio) ? r.mean_opt_ratio
                                  : std::max(ratio, r.mean_opt_ratio);
    }
    best_reward.push_back(best);
    final_reward.push_back(rep.rows.back().mean_test_reward);
    if (!std::isnan(ratio)) best_ratio.push_back(ratio);
    seeds_csv << s << "," << best << "," << rep.rows.back().mean_test_reward
              << "," << ratio << "\n";
    seeds_csv.flush();
    std::printf("sweep seed %llu done: best=%.6f final=%.6f\n",
                static_cast<unsigned long long>(s), best,
                rep.rows.back().mean_test_reward);
  }
  std::ofstream agg(out_root + "/aggregate.csv");
  agg << "metric,mean,median,p16,p84,p2_5,p97_5\n";
  agg << agg_row("best_mean_reward", best_reward) << "\n";
  agg << agg_row("final_mean_reward", final_reward) << "\n";
  if (!best_ratio.empty())
    agg << agg_row("best_mean_opt_ratio", best_ratio) << "\n";
  std::printf("sweep done: %zu seeds, aggregate=%s/aggregate.csv\n",
              seeds.size(), out_root.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sinkhorn policy gradient over permutation actions"};
  app.require_subcommand(1);

  RunConfig cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::string config_path;  // consumed by preload; registered so CLI11 accepts it

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate dataset files");
  std::string g_task = "mwm", g_out = "data";
  int g_n = 10;
  int64_t g_count = 500000, g_test_count = 1000;
  uint64_t g_seed = 9001;
  gen->add_option("--task", g_task, "Task: sort|mwm|tsp")->required();
  gen->add_option("--n", g_n, "Problem size N")->required();
  gen->add_option("--count", g_count, "Training instances")->required();
  gen->add_option("--test-count", g_test_count,
                  "Held-out instances (default 1000)");
  gen->add_option("--seed", g_seed, "Dataset seed");
  gen->add_option("--out", g_out, "Output directory");

  // train
  auto* tr = app.add_subcommand("train", "Train a policy");
  bool print_config = false;
  tr->add_option("--config", config_path, "Flat key = value config file");
  add_config_options(tr, cfg);
  tr->add_flag("--print-config", print_config,
               "Echo the resolved config and exit");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string e_checkpoint;
  ev->add_option("--config", config_path, "Flat key = value config file");
  add_config_options(ev, cfg);
  ev->add_option("--checkpoint", e_checkpoint,
                 "Checkpoint prefix (without .spgc)")
      ->required();

  // diag-q
  auto* dq = app.add_subcommand("diag-q", "Dump hard/soft Q-value triples");
  std::string d_checkpoint, d_out;
  int d_count = 100;
  dq->add_option("--config", config_path, "Flat key = value config file");
  add_config_options(dq, cfg);
  dq->add_option("--checkpoint", d_checkpoint,
                 "Checkpoint prefix (without .spgc)");
  dq->add_option("--count", d_count, "Number of states to sample");
  dq->add_option("--csv", d_out, "Write CSV here instead of stdout");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run several seeds and aggregate");
  std::vector<uint64_t> s_seeds;
  std::string s_out = "sweep";
  sw->add_option("--config", config_path, "Flat key = value config file");
  add_config_options(sw, cfg);
  sw->add_option("--seeds", s_seeds, "Seed list")->required();
  sw->add_option("--sweep-out", s_out, "Sweep output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      if (g_count < 1) throw ConfigError("gen-data: --count must be >= 1");
      if (g_test_count < 1)
        throw ConfigError("gen-data: --test-count must be >= 1");
      const Task task = task_from_name(g_task);
      fs::create_directories(g_out);
      Dataset train = generate_dataset(task, g_n,
                                       static_cast<uint64_t>(g_count), g_seed);
      Dataset test =
          generate_dataset(task, g_n, static_cast<uint64_t>(g_test_count),
                           test_split_seed(g_seed));
      const std::string base = data_base(g_out, g_task, g_n);
      write_dataset(base + "_train.spgd", train);
      write_dataset(base + "_test.spgd", test);
      std::printf("wrote %s_train.spgd (%llu) and %s_test.spgd (%llu)\n",
                  base.c_str(), static_cast<unsigned long long>(train.count()),
                  base.c_str(), static_cast<unsigned long long>(test.count()));
      return 0;
    }
    if (tr->parsed()) return cmd_train(cfg, print_config);
    if (ev->parsed()) return cmd_eval(cfg, e_checkpoint);
    if (dq->parsed()) return cmd_diag_q(cfg, d_checkpoint, d_count, d_out);
    if (sw->parsed()) return cmd_sweep(cfg, s_seeds, s_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/analysis.hpp"
#include "fedsim/server.hpp"

namespace fedsim {

/// Dataset + model + partition + poison construction knobs.
struct TaskConfig {
  std::string generator = "blobs";  // blobs | file
  std::string file_path;
  // Data, split, partition, and poison draws key off this seed, not the run's
  // master_seed: lifespan medians over seeds rerun one fixed task the way the
  // paper reruns one dataset, with only run randomness varying.
  std::uint64_t data_seed = 5;
  int num_classes = 10;
  int per_class = 200;
  int dims = 32;
  double spread = 2.2;
  std::vector<int> hidden = {64};  // MLP hidden widths
  int total_devices = 200;
  double dirichlet_alpha = 0.5;
  double test_fraction = 0.2;

  std::string poison_kind = "pixel_trigger";  // base_case | pixel_trigger | edge_case
  int source_class = 5;
  int target_class = 9;
  int poison_train_n = 112;
  int poison_eval_n = 64;
  TriggerPatch trigger{0, 0, 1, 8, 4.0};
  double edge_shift = 10.0;  // OOD mean offset in units of spread

  bool operator==(const TaskConfig&) const = default;
};

/// One full experiment. The defaults are the desk-scale configuration the
/// acceptance runs use: 10-class blobs, 2-layer MLP (d = 2762), 200 devices,
/// 10 per round, clip defense on, trigger backdoor inserted over 20 attacked
/// rounds at every second round from round 100.
struct ExperimentConfig {
  TaskConfig task;
  int total_rounds = 300;
  int devices_per_round = 10;
  TrainConfig benign_train{0.1, 32, 4};
  DefenseConfig defense{2.0, 0.0, std::nullopt};
  AttackConfig attack{AttackMethod::kMasked, 0.05, 3.0, 2.0, TrainConfig{0.3, 32, 10}};
  AttackPlan plan{100, 20, 2, 1};
  std::uint64_t master_seed = 1;
  int eval_every = 1;
  double kappa = 0.5;
  std::string output_dir = "out";
  int threads = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Field-level validation; throws ConfigError naming the field.
void validate(const ExperimentConfig& cfg);

struct BuiltTask {
  FedTask task;
  // Original dataset row behind each train/test row, for aliasing checks.
  std::vector<int> train_source;
  std::vector<int> test_source;
};

/// Deterministically builds data, partition, poison splits and model spec
/// from task.data_seed. The poison pool is drawn once and split into disjoint
/// attacker-train and attack-eval halves.
BuiltTask build_fed_task(const TaskConfig& cfg);

struct ExperimentLog {
  std::vector<RoundLog> rounds;  // one per evaluated round
  ExperimentConfig config;
  int lifespan = -1;
  int last_attack_round = -1;
  int post_attack_start = -1;  // first round after the attack concludes
  double benign_acc_at_stop = 0.0;
  ParamVector params_at_attack_stop;
  ParamVector final_params;
  double wall_seconds = 0.0;
};

/// Runs total_rounds of FedAvg with the configured attacker schedule and
/// derives the post-attack lifespan. Fully deterministic per master_seed.
ExperimentLog run_experiment(const ExperimentConfig& cfg);

/// Post-attack attack-accuracy series (the lifespan input) from a log.
AccuracySeries post_attack_series(const ExperimentLog& log);

struct MaskSweepRow {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  int lifespan = -1;
};

/// One masked run per (ratio, seed); seeds are master_seed + 0..n_seeds-1.
std::vector<MaskSweepRow> sweep_mask_ratio(const ExperimentConfig& base,
                                           const std::vector<double>& ratios, int n_seeds);

struct AttackNumRow {
  int attack_num = 0;
  std::uint64_t seed = 0;
  int baseline_lifespan = -1;
  int masked_lifespan = -1;
};

/// Baseline and masked lifespans per (attack_num, seed).
std::vector<AttackNumRow> sweep_attack_num(const ExperimentConfig& base,
                                           const std::vector<int>& nums, int n_seeds);

struct ClipCandidate {
  double p = 0.0;
  double final_benign_acc = 0.0;
};

struct ClipChoice {
  double chosen_p = 0.0;
  double unclipped_acc = 0.0;
  std::vector<ClipCandidate> table;
};

/// Attack-free sweep over clip bounds; picks the smallest p whose final
/// benign accuracy is within one point of the unclipped run.
ClipChoice tune_clip(const ExperimentConfig& base, const std::vector<double>& candidates);

/// Lossless key = value serialization; parse(serialize(cfg)) == cfg.
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// rounds.csv: fixed header, one row per evaluated round.
std::string rounds_csv(const ExperimentLog& log);
/// Structured-text summary: config snapshot + derived metrics. Contains no
/// wall-clock data, so identical runs serialize byte-identically.
std::string summary_text(const ExperimentLog& log, const HessianReport* hessian = nullptr);

void write_file(const std::string& path, const std::string& content);

}  // namespace fedsim

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedsim/attack.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Server-side defense pipeline knobs: per-update clip -> mean -> Gaussian
/// noise -> top-k sparsification.
struct DefenseConfig {
  std::optional<double> clip_norm;
  double dp_sigma = 0.0;
  std::optional<double> server_topk;

  bool operator==(const DefenseConfig&) const = default;
};

void validate(const DefenseConfig& cfg);

/// Everything one experiment needs: data, partition, poison splits, model.
struct FedTask {
  Dataset train;
  DevicePartition partition;
  PoisonedDataset poison_train;  // what the attacker optimizes on
  PoisonedDataset poison_eval;   // held-out, disjoint sources; measures attack accuracy
  Dataset clean_test;
  ModelSpec model_spec;
};

struct ServerState {
  ParamVector global_params;
  int round = 0;
  // The post-defense aggregate applied last round; what a participant can
  // reconstruct from two consecutive global models, and what the attacker
  // masks on. All zeros before the first round.
  ParamVector last_broadcast_update;
};

ServerState init_server(const Model& model, std::uint64_t master_seed);

struct RoundLog {
  int round = 0;
  double benign_acc = 0.0;
  double attack_acc = 0.0;
  bool attacker_present = false;
  double aggregate_norm = 0.0;
  std::vector<bool> clipped;  // per participating update, device order

  // Instrumentation: hash of the post-defense aggregate, and for attacked
  // rounds the hash of the broadcast the mask was computed from plus the
  // mask-support zero check.
  std::uint64_t aggregate_hash = 0;
  std::uint64_t mask_source_hash = 0;
  bool mask_support_ok = true;
};

struct RoundConfig {
  int total_devices = 0;
  int devices_per_round = 10;
  TrainConfig benign_train;
  DefenseConfig defense;
  AttackConfig attack;
  AttackPlan plan;
  std::uint64_t master_seed = 0;
  int threads = 1;
  bool evaluate = true;
};

/// Local SGD on the device's own slice; returns the delta start - end.
ParamVector benign_local_update(const Model& model, const ParamVector& global_params,
                                const Dataset& ds, const std::vector<int>& device_indices,
                                const TrainConfig& cfg, std::uint64_t seed);

/// Rescales onto the L2 ball of radius p; passthrough when already inside.
ParamVector clip_update(const ParamVector& u, double p);

/// Coordinatewise mean with pairwise summation in fixed order, so the result
/// is independent of how device work was scheduled.
ParamVector fedavg_aggregate(const std::vector<ParamVector>& updates);

/// u + N(0, sigma^2 I), deterministic per seed. sigma = 0 is bit-identical.
ParamVector add_gaussian_noise(const ParamVector& u, double sigma, std::uint64_t seed);

/// Keeps the ceil(topk*d) largest-|agg| coordinates, zeroes the rest.
ParamVector server_sparsify(const ParamVector& agg, double topk);

struct RoundResult {
  ServerState state;
  RoundLog log;
};

/// One FedAvg round: sample devices (substituting the attacker when the plan
/// says so), collect updates, run the defense pipeline, apply the aggregate,
/// store it as the next broadcast, and evaluate.
RoundResult run_round(const ServerState& state, const Model& model, const FedTask& task,
                      const RoundConfig& cfg);

}  // namespace fedsim

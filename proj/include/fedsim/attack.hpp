#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Coordinates the attacker refuses to update, with the ratio that chose them.
/// Indices are strictly increasing; |indices| = ceil(ratio * d).
struct MaskSet {
  std::vector<int> indices;
  double ratio = 0.0;

  bool contains(int i) const;
  bool empty() const { return indices.empty(); }
};

enum class AttackMethod { kBaseline, kMasked };

struct AttackConfig {
  AttackMethod method = AttackMethod::kMasked;
  double mask_ratio = 0.05;               // ignored by kBaseline
  double boost = 1.0;
  std::optional<double> pgd_norm_bound;   // pre-shrink to survive the server clip
  TrainConfig local_train;

  bool operator==(const AttackConfig&) const = default;
};

void validate(const AttackConfig& cfg);

/// When and how often the attacker shows up. Attacked rounds are
/// start_round, start_round + frequency, ... (attack_num of them);
/// attack_num = 0 disables the attacker entirely.
struct AttackPlan {
  int start_round = 100;
  int attack_num = 20;
  int frequency = 1;
  int attackers_per_round = 1;

  bool is_attack_round(int round) const;
  /// Last attacked round, or -1 when attack_num = 0.
  int last_attack_round() const;

  bool operator==(const AttackPlan&) const = default;
};

void validate(const AttackPlan& plan);

/// Number of masked coordinates for ratio k over dimension d: ceil(k*d),
/// computed so that exactly-integral k*d never rounds up past itself.
int mask_size(double k, int d);

/// Indices of the ceil(k*d) largest-|g| coordinates, ties to the lower index.
MaskSet top_k_mask(const ParamVector& g, double k);

/// Zeroes every coordinate in the mask, passes the rest through.
ParamVector project_out(const ParamVector& g, const MaskSet& mask);

/// Elementwise scaling of an update.
ParamVector boost(const ParamVector& update, double factor);

/// Rescales onto the L2 ball of the given radius; within-bound vectors pass
/// through bit-identically.
ParamVector norm_preproject(const ParamVector& update, double bound);

/// One attacked round of PGD on the poisoned dataset.
///
/// Runs local_epochs of minibatch SGD starting from the broadcast global
/// params; when pgd_norm_bound is set, every step projects the local model
/// back onto the L2 ball of that radius around the start, so the walk is
/// optimized within the budget rather than rescaled after the fact. With
/// kMasked, the top-k mask of the downloaded aggregate is computed once for
/// the round and every step's gradient is zeroed on it; an all-zero
/// downloaded_grad (nothing broadcast yet) degrades to an empty mask. The
/// returned upload is boost * delta with delta = start - end, norm-projected
/// to pgd_norm_bound before boosting.
ParamVector attacker_local_update(const Model& model, const ParamVector& global_params,
                                  const ParamVector& downloaded_grad,
                                  const PoisonedDataset& poison, const AttackConfig& cfg,
                                  std::uint64_t seed);

}  // namespace fedsim

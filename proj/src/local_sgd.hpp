#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

struct MaskSet;

/// Shared local-training loop: local_epochs passes over the index list,
/// reshuffled each epoch from one RNG stream seeded with `seed`, minibatches
/// of batch_size (final partial batch kept). When `mask` is non-null, each
/// step's gradient is zeroed on the mask before the SGD step. When
/// `ball_radius` is positive, each step ends by projecting the parameters
/// back onto the L2 ball of that radius around `start` (PGD).
ParamVector local_sgd(const Model& model, const ParamVector& start, const Dataset& data,
                      const std::vector<int>& indices, const TrainConfig& cfg,
                      std::uint64_t seed, const MaskSet* mask, double ball_radius = 0.0);

}  // namespace fedsim

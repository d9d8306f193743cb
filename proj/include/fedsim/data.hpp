#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim {

/// In-memory labeled dataset; inputs row-major (count x dims).
struct Dataset {
  std::vector<double> inputs;
  std::vector<int> labels;
  int dims = 0;
  int num_classes = 0;
  // Image view of a row for trigger patches; flat data uses 1 x dims.
  int img_h = 1;
  int img_w = 0;

  int size() const { return static_cast<int>(labels.size()); }
  const double* row(int i) const { return inputs.data() + static_cast<std::size_t>(i) * dims; }

  Batch batch(const std::vector<int>& indices) const;
  Batch full_batch() const;
};

/// Per-device index lists into a parent dataset. Lists are disjoint and
/// every device is nonempty.
struct DevicePartition {
  std::vector<std::vector<int>> device_indices;

  int total_devices() const { return static_cast<int>(device_indices.size()); }
};

enum class PoisonKind { kBaseCase, kPixelTrigger, kEdgeCase };

/// Rectangular patch stamped onto the image view of an input row.
struct TriggerPatch {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
  double value = 0.0;

  bool operator==(const TriggerPatch&) const = default;
};

/// The attacker's dataset: samples relabeled (and possibly stamped) to the
/// target class. source_indices point back into the dataset the samples
/// were drawn from.
struct PoisonedDataset {
  Dataset base;
  int target_label = 0;
  PoisonKind kind = PoisonKind::kBaseCase;
  std::optional<TriggerPatch> trigger;
  std::vector<int> source_indices;
};

/// Gaussian clusters, one per class, deterministic per seed. Class means are
/// drawn uniformly from [-2, 2]^dims; samples are mean + spread * N(0, I).
Dataset gen_blobs(int num_classes, int per_class, int dims, double spread, std::uint64_t seed);

/// Label-skew split: for each class, device shares are drawn from
/// Dirichlet(alpha). Every device ends up nonempty; indices are disjoint and
/// cover the dataset.
DevicePartition partition_dirichlet(const Dataset& ds, int n_devices, double alpha,
                                    std::uint64_t seed);

/// n samples of source_class drawn without replacement, relabeled target_class.
PoisonedDataset make_base_case_poison(const Dataset& ds, int source_class, int target_class,
                                      int n, std::uint64_t seed);

/// n random samples with the patch stamped on, labeled target_class.
PoisonedDataset make_pixel_trigger_poison(const Dataset& ds, const TriggerPatch& patch,
                                          int target_class, int n, std::uint64_t seed);

/// Relabels an out-of-distribution dataset to the target class.
PoisonedDataset make_edge_case_poison(const Dataset& ood, int target_class);

/// Raw dataset file: little-endian "FTDS" magic, u32 count/dims/classes,
/// float64 inputs, int32 labels.
Dataset load_ftds(const std::string& path);
void save_ftds(const Dataset& ds, const std::string& path);

}  // namespace fedsim

#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedsim/rng.hpp"

namespace fedsim {

Batch Dataset::batch(const std::vector<int>& indices) const {
  Batch b;
  b.dims = dims;
  b.labels.reserve(indices.size());
  b.inputs.reserve(indices.size() * static_cast<std::size_t>(dims));
  for (int i : indices) {
    const double* r = row(i);
    b.inputs.insert(b.inputs.end(), r, r + dims);
    b.labels.push_back(labels[i]);
  }
  return b;
}

Batch Dataset::full_batch() const {
  Batch b;
  b.dims = dims;
  b.inputs = inputs;
  b.labels = labels;
  return b;
}

Dataset gen_blobs(int num_classes, int per_class, int dims, double spread, std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || dims < 1)
    throw std::invalid_argument("gen_blobs: num_classes, per_class, dims must be positive");
  if (spread < 0.0) throw std::invalid_argument("gen_blobs: spread must be >= 0");

  // Class means are anisotropic: the first half of the dims carry the class
  // signal, the rest are weak channels whose means sit near zero. Benign
  // gradient traffic through the first layer inherits the asymmetry, so the
  // aggregate has a persistent heavy-hitter structure.
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(num_classes) * dims);
  for (int c = 0; c < num_classes; ++c) {
    for (int d = 0; d < dims; ++d) {
      double scale = d < (dims + 1) / 2 ? 2.0 : 0.1;
      means[static_cast<std::size_t>(c) * dims + d] = scale * (2.0 * rng.next_double() - 1.0);
    }
  }

  Dataset ds;
  ds.dims = dims;
  ds.num_classes = num_classes;
  ds.img_w = dims;
  ds.inputs.resize(static_cast<std::size_t>(num_classes) * per_class * dims);
  ds.labels.resize(static_cast<std::size_t>(num_classes) * per_class);

  std::size_t pos = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double* mu = means.data() + static_cast<std::size_t>(c) * dims;
    for (int s = 0; s < per_class; ++s) {
      for (int d = 0; d < dims; ++d) {
        ds.inputs[pos * dims + d] = mu[d] + spread * rng.next_normal();
      }
      ds.labels[pos] = c;
      ++pos;
    }
  }
  return ds;
}

DevicePartition partition_dirichlet(const Dataset& ds, int n_devices, double alpha,
                                    std::uint64_t seed) {
  const int n = ds.size();
  if (n_devices < 1) throw std::invalid_argument("partition_dirichlet: n_devices must be >= 1");
  if (n_devices > n / 2)
    throw std::invalid_argument("partition_dirichlet: n_devices " + std::to_string(n_devices) +
                                " exceeds N/2 = " + std::to_string(n / 2));
  if (alpha <= 0.0) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");

  Rng rng(seed);
  DevicePartition part;
  part.device_indices.assign(n_devices, {});

  // Per class: shuffle its indices, draw device shares ~ Dirichlet(alpha),
  // convert to integer quotas by largest remainder, then deal out.
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i) {
      if (ds.labels[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    rng.shuffle(idx);

    std::vector<double> w(n_devices);
    double wsum = 0.0;
    for (double& x : w) {
      x = rng.next_gamma(alpha);
      wsum += x;
    }
    const int m = static_cast<int>(idx.size());
    std::vector<int> quota(n_devices);
    std::vector<std::pair<double, int>> rem(n_devices);
    int assigned = 0;
    for (int d = 0; d < n_devices; ++d) {
      double exact = m * w[d] / wsum;
      quota[d] = static_cast<int>(exact);
      rem[d] = {exact - quota[d], d};
      assigned += quota[d];
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; assigned < m; ++k, ++assigned) quota[rem[k].second]++;

    int cursor = 0;
    for (int d = 0; d < n_devices; ++d) {
      for (int k = 0; k < quota[d]; ++k) part.device_indices[d].push_back(idx[cursor++]);
    }
  }

  // Dirichlet draws can leave devices empty; steal one index from the fattest.
  for (int d = 0; d < n_devices; ++d) {
    if (!part.device_indices[d].empty()) continue;
    int donor = 0;
    for (int e = 1; e < n_devices; ++e) {
      if (part.device_indices[e].size() > part.device_indices[donor].size()) donor = e;
    }
    if (part.device_indices[donor].size() < 2)
      throw std::runtime_error("partition_dirichlet: cannot make every device nonempty");
    part.device_indices[d].push_back(part.device_indices[donor].back());
    part.device_indices[donor].pop_back();
  }
  return part;
}

namespace {

Dataset gather(const Dataset& ds, const std::vector<int>& indices, int label) {
  Dataset out;
  out.dims = ds.dims;
  out.num_classes = ds.num_classes;
  out.img_h = ds.img_h;
  out.img_w = ds.img_w;
  out.inputs.reserve(indices.size() * static_cast<std::size_t>(ds.dims));
  for (int i : indices) {
    const double* r = ds.row(i);
    out.inputs.insert(out.inputs.end(), r, r + ds.dims);
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace

PoisonedDataset make_base_case_poison(const Dataset& ds, int source_class, int target_class,
                                      int n, std::uint64_t seed) {
  if (source_class == target_class)
    throw std::invalid_argument("base_case_poison: source and target class must differ");
  if (n < 1) throw std::invalid_argument("base_case_poison: n must be >= 1");

  std::vector<int> pool;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == source_class) pool.push_back(i);
  }
  if (static_cast<int>(pool.size()) < n)
    throw std::invalid_argument("base_case_poison: only " + std::to_string(pool.size()) +
                                " samples of class " + std::to_string(source_class) +
                                ", need " + std::to_string(n));
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(n);

  PoisonedDataset p;
  p.base = gather(ds, pool, target_class);
  p.target_label = target_class;
  p.kind = PoisonKind::kBaseCase;
  p.source_indices = std::move(pool);
  return p;
}

PoisonedDataset make_pixel_trigger_poison(const Dataset& ds, const TriggerPatch& patch,
                                          int target_class, int n, std::uint64_t seed) {
  if (n < 1 || n > ds.size())
    throw std::invalid_argument("pixel_trigger_poison: need 1 <= n <= dataset size");
  if (patch.height < 0 || patch.width < 0 || patch.row < 0 || patch.col < 0 ||
      patch.row + patch.height > ds.img_h || patch.col + patch.width > ds.img_w)
    throw std::invalid_argument("pixel_trigger_poison: patch outside the " +
                                std::to_string(ds.img_h) + "x" + std::to_string(ds.img_w) +
                                " input view");

  std::vector<int> pool(ds.size());
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(n);

  PoisonedDataset p;
  p.base = gather(ds, pool, target_class);
  for (int s = 0; s < n; ++s) {
    double* r = p.base.inputs.data() + static_cast<std::size_t>(s) * ds.dims;
    for (int y = patch.row; y < patch.row + patch.height; ++y) {
      for (int x = patch.col; x < patch.col + patch.width; ++x) {
        r[y * ds.img_w + x] = patch.value;
      }
    }
  }
  p.target_label = target_class;
  p.kind = PoisonKind::kPixelTrigger;
  p.trigger = patch;
  p.source_indices = std::move(pool);
  return p;
}

PoisonedDataset make_edge_case_poison(const Dataset& ood, int target_class) {
  if (ood.size() < 1) throw std::invalid_argument("edge_case_poison: ood dataset is empty");
  PoisonedDataset p;
  std::vector<int> all(ood.size());
  std::iota(all.begin(), all.end(), 0);
  p.base = gather(ood, all, target_class);
  p.target_label = target_class;
  p.kind = PoisonKind::kEdgeCase;
  p.source_indices = std::move(all);
  return p;
}

namespace {

template <typename T>
void write_le(std::ofstream& os, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

Dataset load_ftds(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_ftds: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FTDS", 4) != 0)
    throw std::runtime_error("load_ftds: bad magic in " + path);
  auto count = read_le<std::uint32_t>(is);
  auto dims = read_le<std::uint32_t>(is);
  auto classes = read_le<std::uint32_t>(is);
  if (!is || count == 0 || dims == 0 || classes == 0)
    throw std::runtime_error("load_ftds: bad header in " + path);

  Dataset ds;
  ds.dims = static_cast<int>(dims);
  ds.num_classes = static_cast<int>(classes);
  ds.img_w = ds.dims;
  ds.inputs.resize(static_cast<std::size_t>(count) * dims);
  ds.labels.resize(count);
  for (auto& x : ds.inputs) x = read_le<double>(is);
  for (auto& y : ds.labels) y = static_cast<int>(read_le<std::int32_t>(is));
  if (!is) throw std::runtime_error("load_ftds: truncated file " + path);
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.num_classes)
      throw std::runtime_error("load_ftds: label out of range in " + path);
  }
  // Square images get a 2-D view so trigger patches work naturally.
  int side = static_cast<int>(std::round(std::sqrt(static_cast<double>(ds.dims))));
  if (side * side == ds.dims && side > 1) {
    ds.img_h = side;
    ds.img_w = side;
  }
  return ds;
}

void save_ftds(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_ftds: cannot open " + path);
  os.write("FTDS", 4);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.size()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.dims));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes));
  for (double x : ds.inputs) write_le<double>(os, x);
  for (int y : ds.labels) write_le<std::int32_t>(os, static_cast<std::int32_t>(y));
  if (!os) throw std::runtime_error("save_ftds: write failed for " + path);
}

}  // namespace fedsim

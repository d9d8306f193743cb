#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

/// Flat parameter (or gradient/update) vector. Length is always the owning
/// model's total_params; every library operation keeps entries finite.
using ParamVector = std::vector<double>;

/// Raised when a configuration fails validation. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a NaN/Inf is produced mid-run. CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Minibatch of flat inputs (row-major, n x dims) with integer labels.
struct Batch {
  std::vector<double> inputs;
  std::vector<int> labels;
  int dims = 0;

  int size() const { return static_cast<int>(labels.size()); }
  const double* row(int i) const { return inputs.data() + static_cast<std::size_t>(i) * dims; }
};

/// Local SGD settings shared by benign devices and the attacker.
struct TrainConfig {
  double learning_rate = 0.1;
  int batch_size = 32;
  int local_epochs = 2;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

/// FNV-1a over raw bytes; used for instrumentation hashes of vectors.
std::uint64_t hash_bytes(const void* data, std::size_t len);
std::uint64_t hash_vector(const ParamVector& v);

/// True when every entry is finite.
bool all_finite(const ParamVector& v);

double l2_norm(const ParamVector& v);
double linf_norm(const ParamVector& v);

}  // namespace fedsim

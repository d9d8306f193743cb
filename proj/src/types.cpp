#include "fedsim/types.hpp"

#include <cmath>

namespace fedsim {

void validate(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  if (cfg.batch_size <= 0) throw ConfigError("train.batch_size must be > 0");
  if (cfg.local_epochs <= 0) throw ConfigError("train.local_epochs must be > 0");
}

std::uint64_t hash_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_vector(const ParamVector& v) {
  return hash_bytes(v.data(), v.size() * sizeof(double));
}

bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double linf_norm(const ParamVector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace fedsim

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Attack accuracy per post-attack epoch; index 0 is the first round after
/// the attacker leaves for good.
struct AccuracySeries {
  std::vector<double> values;
  double kappa = 0.5;
};

/// Durability of a backdoor: the last post-attack epoch whose attack
/// accuracy still exceeds kappa, or -1 when it never does. Deliberately the
/// max index, so a dip below threshold followed by a recovery still counts.
int lifespan(const AccuracySeries& series);

/// Fraction of the held-out poison set classified as the target label.
double attack_accuracy(const Model& model, const ParamVector& params,
                       const PoisonedDataset& poison_eval);

using HvpFn = std::function<ParamVector(const ParamVector&)>;

struct TraceEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); 0 when n = 1
  int n_samples = 0;
};

/// Hutchinson trace estimator with Rademacher probes. Probe i is drawn from
/// a stream keyed by (seed, i), so sample order never matters.
TraceEstimate hutchinson_trace(const HvpFn& hvp, int d, int n_samples, std::uint64_t seed);

struct TopEigenEstimate {
  double value = 0.0;  // |lambda|_max estimate (magnitude semantics)
  bool converged = false;
  int iters_used = 0;
};

/// Power iteration from a seeded random unit vector; converged when two
/// successive Rayleigh quotients differ by < tol. A collapsed iterate
/// (norm < 1e-12) restarts from a fresh derived seed.
TopEigenEstimate power_iter_top_eig(const HvpFn& hvp, int d, int iters, double tol,
                                    std::uint64_t seed);

struct HessianConfig {
  int hutchinson_samples = 100;
  int power_iters = 200;
  double power_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct HessianReport {
  double trace_estimate = 0.0;
  double trace_stderr = 0.0;
  double top_eigenvalue = 0.0;
  bool power_converged = false;
  int n_hutchinson_samples = 0;
  int power_iters = 0;
};

/// Curvature of the attacker's poisoned-data loss at the backdoored params:
/// Hessian trace (Hutchinson) and top eigenvalue (power iteration).
HessianReport stability_report(const Model& model, const ParamVector& params_after_attack,
                               const PoisonedDataset& poison, const HessianConfig& cfg);

}  // namespace fedsim

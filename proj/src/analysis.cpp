#include "fedsim/analysis.hpp"

#include <cmath>

#include "fedsim/rng.hpp"

namespace fedsim {

int lifespan(const AccuracySeries& series) {
  if (series.values.empty()) throw std::invalid_argument("lifespan: empty accuracy series");
  int last = -1;
  for (int t = 0; t < static_cast<int>(series.values.size()); ++t) {
    if (series.values[t] > series.kappa) last = t;
  }
  return last;
}

double attack_accuracy(const Model& model, const ParamVector& params,
                       const PoisonedDataset& poison_eval) {
  if (poison_eval.base.size() < 1)
    throw std::invalid_argument("attack_accuracy: empty poison eval set");
  std::vector<int> pred = model.predict(params, poison_eval.base.full_batch());
  int hits = 0;
  for (int p : pred) {
    if (p == poison_eval.target_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

TraceEstimate hutchinson_trace(const HvpFn& hvp, int d, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("hutchinson_trace: n_samples must be >= 1");
  if (d < 1) throw std::invalid_argument("hutchinson_trace: d must be >= 1");

  std::vector<double> samples(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    Rng rng(derive_seed(seed, "hutchinson", static_cast<std::uint64_t>(s)));
    ParamVector v(d);
    for (double& x : v) x = (rng.next_u64() & 1ULL) ? 1.0 : -1.0;
    ParamVector hv = hvp(v);
    double quad = 0.0;
    for (int i = 0; i < d; ++i) quad += v[i] * hv[i];
    samples[s] = quad;
  }

  TraceEstimate out;
  out.n_samples = n_samples;
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n_samples;
  out.estimate = mean;
  if (n_samples > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    out.stderr_ = std::sqrt(ss / (n_samples - 1)) / std::sqrt(static_cast<double>(n_samples));
  }
  return out;
}

TopEigenEstimate power_iter_top_eig(const HvpFn& hvp, int d, int iters, double tol,
                                    std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("power_iter_top_eig: iters must be >= 1");
  if (d < 1) throw std::invalid_argument("power_iter_top_eig: d must be >= 1");

  auto random_unit = [&](std::uint64_t s) {
    Rng rng(s);
    ParamVector v(d);
    for (double& x : v) x = rng.next_normal();
    double norm = l2_norm(v);
    for (double& x : v) x /= norm;
    return v;
  };

  ParamVector v = random_unit(derive_seed(seed, "power", 0));
  TopEigenEstimate out;
  double prev = 0.0;
  bool have_prev = false;
  int restarts = 0;
  for (int it = 0; it < iters; ++it) {
    ParamVector w = hvp(v);
    double rayleigh = 0.0;  // v is unit, so v.w is the Rayleigh quotient
    for (int i = 0; i < d; ++i) rayleigh += v[i] * w[i];
    out.value = std::abs(rayleigh);
    out.iters_used = it + 1;
    if (have_prev && std::abs(rayleigh - prev) < tol) {
      out.converged = true;
      return out;
    }
    prev = rayleigh;
    have_prev = true;

    double norm = l2_norm(w);
    if (norm < 1e-12) {
      v = random_unit(derive_seed(seed, "power", static_cast<std::uint64_t>(++restarts)));
      have_prev = false;
      continue;
    }
    for (int i = 0; i < d; ++i) v[i] = w[i] / norm;
  }
  return out;
}

HessianReport stability_report(const Model& model, const ParamVector& params_after_attack,
                               const PoisonedDataset& poison, const HessianConfig& cfg) {
  if (params_after_attack.size() != model.num_params())
    throw std::invalid_argument("stability_report: params length mismatch");
  Batch all = poison.base.full_batch();
  HvpFn hvp = [&model, &params_after_attack, &all](const ParamVector& v) {
    return model.hvp(params_after_attack, all, v);
  };
  const int d = static_cast<int>(model.num_params());

  TraceEstimate trace = hutchinson_trace(hvp, d, cfg.hutchinson_samples,
                                         derive_seed(cfg.seed, "trace"));
  TopEigenEstimate eig = power_iter_top_eig(hvp, d, cfg.power_iters, cfg.power_tol,
                                            derive_seed(cfg.seed, "eig"));

  HessianReport report;
  report.trace_estimate = trace.estimate;
  report.trace_stderr = trace.stderr_;
  report.top_eigenvalue = eig.value;
  report.power_converged = eig.converged;
  report.n_hutchinson_samples = trace.n_samples;
  report.power_iters = eig.iters_used;
  return report;
}

}  // namespace fedsim

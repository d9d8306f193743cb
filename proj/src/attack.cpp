#include "fedsim/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/rng.hpp"
#include "local_sgd.hpp"

namespace fedsim {

ParamVector local_sgd(const Model& model, const ParamVector& start, const Dataset& data,
                      const std::vector<int>& indices, const TrainConfig& cfg,
                      std::uint64_t seed, const MaskSet* mask, double ball_radius) {
  Rng rng(seed);
  ParamVector params = start;
  std::vector<int> order = indices;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      std::size_t end = std::min(pos + cfg.batch_size, order.size());
      std::vector<int> chunk(order.begin() + pos, order.begin() + end);
      Batch batch = data.batch(chunk);
      ParamVector g = model.grad(params, batch);
      if (mask) g = project_out(g, *mask);
      params = sgd_step(params, g, cfg.learning_rate);
      if (ball_radius > 0.0) {
        double dist = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
          double diff = params[i] - start[i];
          dist += diff * diff;
        }
        dist = std::sqrt(dist);
        if (dist > ball_radius) {
          double scale = ball_radius / dist;
          for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] = start[i] + (params[i] - start[i]) * scale;
          }
        }
      }
    }
  }
  return params;
}

bool MaskSet::contains(int i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

void validate(const AttackConfig& cfg) {
  if (cfg.mask_ratio < 0.0 || cfg.mask_ratio >= 1.0)
    throw ConfigError("attack.mask_ratio must be in [0, 1)");
  if (cfg.boost <= 0.0) throw ConfigError("attack.boost must be > 0");
  if (cfg.pgd_norm_bound && *cfg.pgd_norm_bound <= 0.0)
    throw ConfigError("attack.pgd_norm_bound must be > 0 when set");
  validate(cfg.local_train);
}

bool AttackPlan::is_attack_round(int round) const {
  if (attack_num <= 0 || round < start_round) return false;
  int offset = round - start_round;
  return offset % frequency == 0 && offset / frequency < attack_num;
}

int AttackPlan::last_attack_round() const {
  if (attack_num <= 0) return -1;
  return start_round + (attack_num - 1) * frequency;
}

void validate(const AttackPlan& plan) {
  if (plan.start_round < 0) throw ConfigError("plan.start_round must be >= 0");
  if (plan.attack_num < 0) throw ConfigError("plan.attack_num must be >= 0");
  if (plan.frequency < 1) throw ConfigError("plan.frequency must be >= 1");
  if (plan.attackers_per_round < 1) throw ConfigError("plan.attackers_per_round must be >= 1");
}

int mask_size(double k, int d) {
  double x = k * static_cast<double>(d);
  double snapped = std::round(x);
  if (std::abs(x - snapped) <= 1e-9 * std::max(1.0, std::abs(x)))
    return static_cast<int>(snapped);
  return static_cast<int>(std::ceil(x));
}

MaskSet top_k_mask(const ParamVector& g, double k) {
  if (k < 0.0 || k >= 1.0) throw std::invalid_argument("top_k_mask: k must be in [0, 1)");
  const int d = static_cast<int>(g.size());
  const int m = mask_size(k, d);

  MaskSet mask;
  mask.ratio = k;
  if (m == 0) return mask;

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&g](int a, int b) {
    double fa = std::abs(g[a]), fb = std::abs(g[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  mask.indices.assign(order.begin(), order.begin() + m);
  std::sort(mask.indices.begin(), mask.indices.end());
  return mask;
}

ParamVector project_out(const ParamVector& g, const MaskSet& mask) {
  ParamVector out = g;
  for (int i : mask.indices) {
    if (i < 0 || i >= static_cast<int>(g.size()))
      throw std::invalid_argument("project_out: mask index " + std::to_string(i) +
                                  " out of range for d = " + std::to_string(g.size()));
    out[i] = 0.0;
  }
  return out;
}

ParamVector boost(const ParamVector& update, double factor) {
  if (factor <= 0.0) throw std::invalid_argument("boost: factor must be > 0");
  ParamVector out(update.size());
  for (std::size_t i = 0; i < update.size(); ++i) out[i] = update[i] * factor;
  return out;
}

ParamVector norm_preproject(const ParamVector& update, double bound) {
  if (bound <= 0.0) throw std::invalid_argument("norm_preproject: bound must be > 0");
  double norm = l2_norm(update);
  if (norm <= bound) return update;
  double scale = bound / norm;
  ParamVector out(update.size());
  for (std::size_t i = 0; i < update.size(); ++i) out[i] = update[i] * scale;
  return out;
}

ParamVector attacker_local_update(const Model& model, const ParamVector& global_params,
                                  const ParamVector& downloaded_grad,
                                  const PoisonedDataset& poison, const AttackConfig& cfg,
                                  std::uint64_t seed) {
  if (global_params.size() != model.num_params())
    throw std::invalid_argument("attacker_local_update: global_params length mismatch");
  if (downloaded_grad.size() != global_params.size())
    throw std::invalid_argument("attacker_local_update: downloaded_grad length mismatch");
  if (poison.base.size() < 1)
    throw std::invalid_argument("attacker_local_update: empty poisoned dataset");

  std::vector<int> all(poison.base.size());
  std::iota(all.begin(), all.end(), 0);

  const double ball = cfg.pgd_norm_bound ? *cfg.pgd_norm_bound : 0.0;
  ParamVector end;
  if (cfg.method == AttackMethod::kBaseline) {
    end = local_sgd(model, global_params, poison.base, all, cfg.local_train, seed, nullptr, ball);
  } else {
    // Nothing broadcast yet (all-zero download) means no usable signal; run unmasked.
    MaskSet mask;
    if (l2_norm(downloaded_grad) > 0.0) mask = top_k_mask(downloaded_grad, cfg.mask_ratio);
    end = local_sgd(model, global_params, poison.base, all, cfg.local_train, seed, &mask, ball);
  }

  ParamVector delta(global_params.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = global_params[i] - end[i];
  if (cfg.pgd_norm_bound) delta = norm_preproject(delta, *cfg.pgd_norm_bound);
  return boost(delta, cfg.boost);
}

}  // namespace fedsim

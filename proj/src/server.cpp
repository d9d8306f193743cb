#include "fedsim/server.hpp"

#include <algorithm>
#include <future>
#include <numeric>

#include "fedsim/analysis.hpp"
#include "fedsim/rng.hpp"
#include "local_sgd.hpp"

namespace fedsim {

void validate(const DefenseConfig& cfg) {
  if (cfg.clip_norm && *cfg.clip_norm <= 0.0)
    throw ConfigError("defense.clip_norm must be > 0 when set");
  if (cfg.dp_sigma < 0.0) throw ConfigError("defense.dp_sigma must be >= 0");
  if (cfg.server_topk && (*cfg.server_topk <= 0.0 || *cfg.server_topk > 1.0))
    throw ConfigError("defense.server_topk must be in (0, 1] when set");
}

ServerState init_server(const Model& model, std::uint64_t master_seed) {
  ServerState state;
  state.global_params = model.init_params(derive_seed(master_seed, "init"));
  state.round = 0;
  state.last_broadcast_update.assign(model.num_params(), 0.0);
  return state;
}

ParamVector benign_local_update(const Model& model, const ParamVector& global_params,
                                const Dataset& ds, const std::vector<int>& device_indices,
                                const TrainConfig& cfg, std::uint64_t seed) {
  if (device_indices.empty())
    throw std::invalid_argument("benign_local_update: device holds no data");
  ParamVector end = local_sgd(model, global_params, ds, device_indices, cfg, seed, nullptr);
  ParamVector delta(global_params.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = global_params[i] - end[i];
  return delta;
}

ParamVector clip_update(const ParamVector& u, double p) {
  if (p <= 0.0) throw std::invalid_argument("clip_update: p must be > 0");
  double norm = l2_norm(u);
  if (norm <= p) return u;
  double scale = p / norm;
  ParamVector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * scale;
  return out;
}

namespace {

// Pairwise sum of updates[lo, hi) into out.
ParamVector pairwise_sum(const std::vector<ParamVector>& updates, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo == 1) return updates[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  ParamVector left = pairwise_sum(updates, lo, mid);
  ParamVector right = pairwise_sum(updates, mid, hi);
  for (std::size_t i = 0; i < left.size(); ++i) left[i] += right[i];
  return left;
}

}  // namespace

ParamVector fedavg_aggregate(const std::vector<ParamVector>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg_aggregate: empty update list");
  const std::size_t d = updates[0].size();
  for (const auto& u : updates) {
    if (u.size() != d)
      throw std::invalid_argument("fedavg_aggregate: update length mismatch");
  }
  ParamVector sum = pairwise_sum(updates, 0, updates.size());
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (double& x : sum) x *= inv;
  return sum;
}

ParamVector add_gaussian_noise(const ParamVector& u, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  if (sigma == 0.0) return u;
  Rng rng(seed);
  ParamVector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + sigma * rng.next_normal();
  return out;
}

ParamVector server_sparsify(const ParamVector& agg, double topk) {
  if (topk <= 0.0 || topk > 1.0)
    throw std::invalid_argument("server_sparsify: topk must be in (0, 1]");
  const int d = static_cast<int>(agg.size());
  const int m = mask_size(topk, d);
  if (m >= d) return agg;

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&agg](int a, int b) {
    double fa = std::abs(agg[a]), fb = std::abs(agg[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  ParamVector out(agg.size(), 0.0);
  for (int k = 0; k < m; ++k) out[order[k]] = agg[order[k]];
  return out;
}

RoundResult run_round(const ServerState& state, const Model& model, const FedTask& task,
                      const RoundConfig& cfg) {
  const int round = state.round;
  const bool attacked = cfg.plan.is_attack_round(round);
  const int n_participants = cfg.devices_per_round;
  const int n_attackers = attacked ? std::min(cfg.plan.attackers_per_round, n_participants) : 0;

  // Sample participating devices uniformly without replacement from a
  // dedicated (master_seed, round) stream, independent of model state.
  std::vector<int> device_ids(cfg.total_devices);
  std::iota(device_ids.begin(), device_ids.end(), 0);
  Rng sample_rng(derive_seed(cfg.master_seed, "sample", static_cast<std::uint64_t>(round)));
  sample_rng.shuffle(device_ids);
  device_ids.resize(n_participants);

  std::vector<ParamVector> updates(n_participants);

  // Attacker takes over the first sampled slots; benign devices fill the rest.
  if (n_attackers > 0) {
    ParamVector atk = attacker_local_update(
        model, state.global_params, state.last_broadcast_update, task.poison_train, cfg.attack,
        derive_seed(cfg.master_seed, "attacker", static_cast<std::uint64_t>(round)));
    for (int s = 0; s < n_attackers; ++s) updates[s] = atk;
  }

  auto benign_for_slot = [&](int slot) {
    int device = device_ids[slot];
    return benign_local_update(model, state.global_params, task.train,
                               task.partition.device_indices[device], cfg.benign_train,
                               derive_seed(cfg.master_seed, "local",
                                           static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(device)));
  };

  if (cfg.threads > 1) {
    std::vector<std::future<void>> jobs;
    std::atomic<int> next{n_attackers};
    int workers = std::min(cfg.threads, n_participants - n_attackers);
    for (int w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&] {
        for (int slot = next.fetch_add(1); slot < n_participants; slot = next.fetch_add(1)) {
          updates[slot] = benign_for_slot(slot);
        }
      }));
    }
    for (auto& j : jobs) j.get();
  } else {
    for (int slot = n_attackers; slot < n_participants; ++slot) updates[slot] = benign_for_slot(slot);
  }

  // Defense pipeline: clip each update, average, noise, sparsify.
  RoundLog log;
  log.round = round;
  log.attacker_present = n_attackers > 0;
  log.clipped.resize(n_participants, false);
  if (cfg.defense.clip_norm) {
    for (int s = 0; s < n_participants; ++s) {
      double norm = l2_norm(updates[s]);
      if (norm > *cfg.defense.clip_norm) {
        updates[s] = clip_update(updates[s], *cfg.defense.clip_norm);
        log.clipped[s] = true;
      }
    }
  }
  ParamVector agg = fedavg_aggregate(updates);
  if (cfg.defense.dp_sigma > 0.0) {
    agg = add_gaussian_noise(agg, cfg.defense.dp_sigma,
                             derive_seed(cfg.master_seed, "noise",
                                         static_cast<std::uint64_t>(round)));
  }
  if (cfg.defense.server_topk) agg = server_sparsify(agg, *cfg.defense.server_topk);
  if (!all_finite(agg)) throw NumericalError("round " + std::to_string(round) +
                                             ": aggregate contains NaN/Inf");

  RoundResult result;
  result.state.global_params.resize(state.global_params.size());
  for (std::size_t i = 0; i < agg.size(); ++i) {
    result.state.global_params[i] = state.global_params[i] - agg[i];
  }
  if (!all_finite(result.state.global_params))
    throw NumericalError("round " + std::to_string(round) + ": global params contain NaN/Inf");
  result.state.round = round + 1;
  result.state.last_broadcast_update = agg;

  log.aggregate_norm = l2_norm(agg);
  log.aggregate_hash = hash_vector(agg);

  // Mask provenance and support check: the mask must come from the previous
  // broadcast, and the attacker's upload must be exactly zero on it.
  if (attacked && cfg.attack.method == AttackMethod::kMasked &&
      l2_norm(state.last_broadcast_update) > 0.0) {
    log.mask_source_hash = hash_vector(state.last_broadcast_update);
    MaskSet mask = top_k_mask(state.last_broadcast_update, cfg.attack.mask_ratio);
    for (int i : mask.indices) {
      if (updates[0][i] != 0.0) {
        log.mask_support_ok = false;
        break;
      }
    }
  }

  if (cfg.evaluate) {
    log.benign_acc =
        model.forward_loss(result.state.global_params, task.clean_test.full_batch()).accuracy;
    log.attack_acc = attack_accuracy(model, result.state.global_params, task.poison_eval);
  }
  result.log = log;
  return result;
}

}  // namespace fedsim

#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fedsim/experiment.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

// Small fast experiment: 40 devices, 24 rounds, 4-class blobs.
ExperimentConfig micro_config() {
  ExperimentConfig cfg;
  cfg.task.num_classes = 4;
  cfg.task.per_class = 40;
  cfg.task.dims = 8;
  cfg.task.spread = 1.0;
  cfg.task.hidden = {6};
  cfg.task.total_devices = 40;
  cfg.task.poison_kind = "base_case";
  cfg.task.source_class = 1;
  cfg.task.target_class = 2;
  cfg.task.poison_train_n = 12;
  cfg.task.poison_eval_n = 8;
  cfg.total_rounds = 24;
  cfg.devices_per_round = 5;
  cfg.benign_train = TrainConfig{0.1, 8, 1};
  cfg.attack.local_train = TrainConfig{0.2, 8, 2};
  cfg.attack.pgd_norm_bound = 1.0;
  cfg.attack.boost = 2.0;
  cfg.plan = AttackPlan{8, 4, 2, 1};
  cfg.master_seed = 5;
  return cfg;
}

ExperimentConfig random_valid_config(Rng& rng) {
  ExperimentConfig cfg;
  cfg.task.num_classes = static_cast<int>(rng.uniform_int(2, 12));
  cfg.task.per_class = static_cast<int>(rng.uniform_int(20, 400));
  cfg.task.dims = static_cast<int>(rng.uniform_int(2, 64));
  cfg.task.spread = rng.next_double() * 3.0;
  cfg.task.data_seed = rng.next_u64();
  cfg.task.hidden = {static_cast<int>(rng.uniform_int(2, 128))};
  if (rng.uniform_int(0, 1)) cfg.task.hidden.push_back(static_cast<int>(rng.uniform_int(2, 64)));
  cfg.task.total_devices = static_cast<int>(rng.uniform_int(10, 300));
  cfg.task.dirichlet_alpha = rng.next_double() * 2.0 + 0.01;
  cfg.task.test_fraction = 0.1 + rng.next_double() * 0.4;
  const char* kinds[] = {"base_case", "pixel_trigger", "edge_case"};
  cfg.task.poison_kind = kinds[rng.uniform_int(0, 2)];
  cfg.task.source_class = 0;
  cfg.task.target_class = 1;
  cfg.task.poison_train_n = static_cast<int>(rng.uniform_int(1, 8));
  cfg.task.poison_eval_n = static_cast<int>(rng.uniform_int(1, 8));
  cfg.task.trigger = TriggerPatch{0, 0, 1, static_cast<int>(rng.uniform_int(0, 2)),
                                  rng.next_double() * 5.0};
  cfg.task.edge_shift = rng.next_double() * 20.0;
  cfg.total_rounds = static_cast<int>(rng.uniform_int(30, 500));
  cfg.devices_per_round = static_cast<int>(rng.uniform_int(1, 10));
  cfg.benign_train = TrainConfig{rng.next_double() + 0.01,
                                 static_cast<int>(rng.uniform_int(1, 64)),
                                 static_cast<int>(rng.uniform_int(1, 5))};
  if (rng.uniform_int(0, 1)) cfg.defense.clip_norm = rng.next_double() * 4.0 + 0.01;
  else cfg.defense.clip_norm = std::nullopt;
  cfg.defense.dp_sigma = rng.uniform_int(0, 1) ? rng.next_double() * 0.01 : 0.0;
  if (rng.uniform_int(0, 1)) cfg.defense.server_topk = 0.1 + rng.next_double() * 0.9;
  cfg.attack.method = rng.uniform_int(0, 1) ? AttackMethod::kMasked : AttackMethod::kBaseline;
  cfg.attack.mask_ratio = rng.next_double() * 0.9;
  cfg.attack.boost = rng.next_double() * 9.0 + 0.1;
  if (rng.uniform_int(0, 1)) cfg.attack.pgd_norm_bound = rng.next_double() * 3.0 + 0.01;
  else cfg.attack.pgd_norm_bound = std::nullopt;
  cfg.attack.local_train = TrainConfig{rng.next_double() + 0.01,
                                       static_cast<int>(rng.uniform_int(1, 64)),
                                       static_cast<int>(rng.uniform_int(1, 12))};
  cfg.plan.start_round = static_cast<int>(rng.uniform_int(0, 10));
  cfg.plan.attack_num = static_cast<int>(rng.uniform_int(0, 5));
  cfg.plan.frequency = static_cast<int>(rng.uniform_int(1, 3));
  cfg.plan.attackers_per_round = 1;
  cfg.master_seed = rng.next_u64();
  cfg.eval_every = static_cast<int>(rng.uniform_int(1, 5));
  cfg.kappa = 0.1 + rng.next_double() * 0.8;
  cfg.output_dir = "out/run_" + std::to_string(rng.uniform_int(0, 999));
  cfg.threads = static_cast<int>(rng.uniform_int(1, 4));
  return cfg;
}

}  // namespace

TEST_CASE("config serialization round-trips 100 random configs") {
  Rng rng(404);
  for (int t = 0; t < 100; ++t) {
    ExperimentConfig cfg = random_valid_config(rng);
    ExperimentConfig back = parse_config(serialize_config(cfg));
    CHECK(back == cfg);
  }
}

TEST_CASE("config parser reports unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config("no_such_key = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task.dims = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("attack.method = sideways\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task.dims\n"), ConfigError);
  // comments and blank lines are fine
  ExperimentConfig cfg = parse_config("# comment\n\ntask.dims = 16  # trailing\n");
  CHECK(cfg.task.dims == 16);
}

TEST_CASE("config validation names the offending field") {
  ExperimentConfig cfg = micro_config();
  cfg.eval_every = 0;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("eval_every"), ConfigError);
  cfg = micro_config();
  cfg.total_rounds = cfg.plan.start_round + cfg.plan.attack_num * cfg.plan.frequency;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("total_rounds"), ConfigError);
  cfg = micro_config();
  cfg.devices_per_round = 1000;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("devices_per_round"), ConfigError);
  cfg = micro_config();
  cfg.task.poison_train_n = 100000;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = micro_config();
  cfg.kappa = 1.5;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("kappa"), ConfigError);
}

TEST_CASE("no attacker means the poison eval stays at base rate") {
  ExperimentConfig cfg = micro_config();
  cfg.plan.attack_num = 0;
  cfg.total_rounds = 40;
  // plenty of signal dims and low spread, so the trained model is clean
  cfg.task.dims = 16;
  cfg.task.spread = 0.5;
  cfg.task.poison_eval_n = 16;
  cfg.benign_train = TrainConfig{0.2, 8, 1};
  ExperimentLog log = run_experiment(cfg);
  for (std::size_t i = 20; i < log.rounds.size(); ++i) {
    CHECK(log.rounds[i].attack_acc < 0.1);
  }
  CHECK(log.lifespan == -1);
}

TEST_CASE("identical configs produce byte-identical logs across thread counts") {
  ExperimentConfig cfg = micro_config();
  ExperimentLog a = run_experiment(cfg);
  ExperimentLog b = run_experiment(cfg);
  CHECK(rounds_csv(a) == rounds_csv(b));
  CHECK(summary_text(a) == summary_text(b));

  cfg.threads = 3;
  ExperimentLog c = run_experiment(cfg);
  CHECK(rounds_csv(a) == rounds_csv(c));
  // summaries may differ only in the threads line of the config snapshot
  auto strip_threads = [](std::string text) {
    auto pos = text.find("threads = ");
    REQUIRE(pos != std::string::npos);
    return text.substr(0, pos);
  };
  CHECK(strip_threads(summary_text(a)) == strip_threads(summary_text(c)));
}

TEST_CASE("masked attack with ratio 0 reproduces the baseline log exactly") {
  ExperimentConfig cfg = micro_config();
  cfg.attack.method = AttackMethod::kBaseline;
  ExperimentLog base = run_experiment(cfg);
  cfg.attack.method = AttackMethod::kMasked;
  cfg.attack.mask_ratio = 0.0;
  ExperimentLog masked = run_experiment(cfg);
  CHECK(rounds_csv(base) == rounds_csv(masked));
  CHECK(base.final_params == masked.final_params);
}

TEST_CASE("round logs are complete for every eval_every") {
  for (int every : {1, 2, 3, 5}) {
    ExperimentConfig cfg = micro_config();
    cfg.eval_every = every;
    ExperimentLog log = run_experiment(cfg);
    int expected = (cfg.total_rounds + every - 1) / every;
    CHECK(static_cast<int>(log.rounds.size()) == expected);
  }
}

TEST_CASE("csv schema is stable") {
  ExperimentLog log = run_experiment(micro_config());
  std::string csv = rounds_csv(log);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "round,benign_acc,attack_acc,attacker_present,aggregate_norm");
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    ++rows;
  }
  CHECK(rows == static_cast<int>(log.rounds.size()));
}

TEST_CASE("every attacked round keeps the mask support at zero") {
  ExperimentConfig cfg = micro_config();
  cfg.attack.method = AttackMethod::kMasked;
  cfg.attack.mask_ratio = 0.1;
  ExperimentLog log = run_experiment(cfg);
  int attacked = 0;
  for (const RoundLog& r : log.rounds) {
    if (r.attacker_present) {
      CHECK(r.mask_support_ok);
      ++attacked;
    }
  }
  CHECK(attacked == cfg.plan.attack_num);
}

TEST_CASE("mask sweep handles duplicates and the zero ratio") {
  ExperimentConfig cfg = micro_config();
  auto rows = sweep_mask_ratio(cfg, {0.0, 0.1, 0.1}, 2);
  REQUIRE(rows.size() == 6);
  // duplicate ratios give identical lifespans per seed
  CHECK(rows[2].lifespan == rows[4].lifespan);
  CHECK(rows[3].lifespan == rows[5].lifespan);

  // ratio 0 reduces to the baseline lifespan
  ExperimentConfig base = cfg;
  base.attack.method = AttackMethod::kBaseline;
  base.master_seed = cfg.master_seed;
  CHECK(rows[0].lifespan == run_experiment(base).lifespan);

  CHECK_THROWS_AS(sweep_mask_ratio(cfg, {1.0}, 1), ConfigError);
  CHECK_THROWS_AS(sweep_mask_ratio(cfg, {0.1}, 0), ConfigError);
}

TEST_CASE("attack-num sweep emits one row per (num, seed)") {
  ExperimentConfig cfg = micro_config();
  auto rows = sweep_attack_num(cfg, {2}, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].attack_num == 2);
  CHECK(rows[0].seed == cfg.master_seed);
  // deterministic across reruns
  auto again = sweep_attack_num(cfg, {2}, 1);
  CHECK(again[0].baseline_lifespan == rows[0].baseline_lifespan);
  CHECK(again[0].masked_lifespan == rows[0].masked_lifespan);
  CHECK_THROWS_AS(sweep_attack_num(cfg, {0}, 1), ConfigError);
}

TEST_CASE("tune_clip picks the smallest harmless bound") {
  ExperimentConfig cfg = micro_config();
  cfg.total_rounds = 16;
  cfg.plan.attack_num = 0;
  cfg.plan.start_round = 10;

  // a huge candidate never clips, so it ties the unclipped accuracy
  ClipChoice huge = tune_clip(cfg, {1e9});
  CHECK(huge.chosen_p == 1e9);
  CHECK(huge.table.size() == 1);
  CHECK(huge.table[0].final_benign_acc == doctest::Approx(huge.unclipped_acc));

  // a bound far below typical update norms costs accuracy on this task
  ClipChoice mixed = tune_clip(cfg, {1e-6, 1e9});
  double tiny_acc = 0.0;
  for (const auto& c : mixed.table) {
    if (c.p == 1e-6) tiny_acc = c.final_benign_acc;
  }
  CHECK(tiny_acc < mixed.unclipped_acc - 0.01);
  CHECK(mixed.chosen_p == 1e9);

  // deterministic
  ClipChoice again = tune_clip(cfg, {1e-6, 1e9});
  CHECK(again.chosen_p == mixed.chosen_p);
  CHECK(again.unclipped_acc == mixed.unclipped_acc);

  CHECK_THROWS_AS(tune_clip(cfg, {}), ConfigError);
}

TEST_CASE("summary text embeds a parseable config snapshot") {
  ExperimentConfig cfg = micro_config();
  ExperimentLog log = run_experiment(cfg);
  std::string summary = summary_text(log);
  // the snapshot is everything after the config marker
  auto pos = summary.find("# config snapshot\n");
  REQUIRE(pos != std::string::npos);
  ExperimentConfig back = parse_config(summary.substr(pos + 18));
  CHECK(back == cfg);
  CHECK(summary.find("lifespan = ") != std::string::npos);
}

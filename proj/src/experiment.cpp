#include "fedsim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_u64(std::uint64_t x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%" PRIu64, x);
  return buf;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  const TaskConfig& t = cfg.task;
  if (t.generator != "blobs" && t.generator != "file")
    throw ConfigError("task.generator must be 'blobs' or 'file'");
  if (t.generator == "file" && t.file_path.empty())
    throw ConfigError("task.file_path required when task.generator = file");
  if (t.num_classes < 2) throw ConfigError("task.num_classes must be >= 2");
  if (t.per_class < 1) throw ConfigError("task.per_class must be >= 1");
  if (t.dims < 1) throw ConfigError("task.dims must be >= 1");
  if (t.spread < 0.0) throw ConfigError("task.spread must be >= 0");
  if (t.hidden.empty()) throw ConfigError("task.hidden must name at least one layer width");
  for (int h : t.hidden) {
    if (h < 1) throw ConfigError("task.hidden widths must be >= 1");
  }
  if (t.total_devices < 1) throw ConfigError("task.total_devices must be >= 1");
  if (t.dirichlet_alpha <= 0.0) throw ConfigError("task.dirichlet_alpha must be > 0");
  if (t.test_fraction <= 0.0 || t.test_fraction >= 1.0)
    throw ConfigError("task.test_fraction must be in (0, 1)");
  if (t.poison_kind != "base_case" && t.poison_kind != "pixel_trigger" &&
      t.poison_kind != "edge_case")
    throw ConfigError("task.poison_kind must be base_case, pixel_trigger, or edge_case");
  if (t.source_class < 0 || t.source_class >= t.num_classes)
    throw ConfigError("task.source_class out of range");
  if (t.target_class < 0 || t.target_class >= t.num_classes)
    throw ConfigError("task.target_class out of range");
  if (t.poison_kind == "base_case" && t.source_class == t.target_class)
    throw ConfigError("task.source_class must differ from task.target_class");
  if (t.poison_train_n < 1 || t.poison_eval_n < 1)
    throw ConfigError("task.poison_train_n and task.poison_eval_n must be >= 1");
  if (t.generator == "blobs" && t.poison_kind == "base_case") {
    int n_test = std::max(1, static_cast<int>(t.per_class * t.test_fraction));
    int avail = t.per_class - n_test;
    if (t.poison_train_n + t.poison_eval_n > avail)
      throw ConfigError("task: poison pool (" + std::to_string(t.poison_train_n + t.poison_eval_n) +
                        ") exceeds class " + std::to_string(t.source_class) +
                        "'s training samples (" + std::to_string(avail) + ")");
  }

  if (cfg.total_rounds < 1) throw ConfigError("total_rounds must be >= 1");
  if (cfg.devices_per_round < 1 || cfg.devices_per_round > t.total_devices)
    throw ConfigError("devices_per_round must be in [1, task.total_devices]");
  validate(cfg.benign_train);
  validate(cfg.defense);
  validate(cfg.attack);
  validate(cfg.plan);
  if (cfg.plan.attackers_per_round > cfg.devices_per_round)
    throw ConfigError("plan.attackers_per_round cannot exceed devices_per_round");
  if (cfg.total_rounds <= cfg.plan.start_round + cfg.plan.attack_num * cfg.plan.frequency)
    throw ConfigError("total_rounds must exceed plan.start_round + attack_num * frequency");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.kappa <= 0.0 || cfg.kappa >= 1.0) throw ConfigError("kappa must be in (0, 1)");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

Dataset subset(const Dataset& ds, const std::vector<int>& indices) {
  Dataset out;
  out.dims = ds.dims;
  out.num_classes = ds.num_classes;
  out.img_h = ds.img_h;
  out.img_w = ds.img_w;
  out.inputs.reserve(indices.size() * static_cast<std::size_t>(ds.dims));
  for (int i : indices) {
    const double* r = ds.row(i);
    out.inputs.insert(out.inputs.end(), r, r + ds.dims);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

PoisonedDataset poison_slice(const PoisonedDataset& p, int lo, int hi) {
  PoisonedDataset out;
  out.target_label = p.target_label;
  out.kind = p.kind;
  out.trigger = p.trigger;
  out.base.dims = p.base.dims;
  out.base.num_classes = p.base.num_classes;
  out.base.img_h = p.base.img_h;
  out.base.img_w = p.base.img_w;
  for (int i = lo; i < hi; ++i) {
    const double* r = p.base.row(i);
    out.base.inputs.insert(out.base.inputs.end(), r, r + p.base.dims);
    out.base.labels.push_back(p.base.labels[i]);
    out.source_indices.push_back(p.source_indices[i]);
  }
  return out;
}

}  // namespace

BuiltTask build_fed_task(const TaskConfig& cfg) {
  Dataset full;
  if (cfg.generator == "blobs") {
    full = gen_blobs(cfg.num_classes, cfg.per_class, cfg.dims, cfg.spread,
                     derive_seed(cfg.data_seed, "data"));
  } else {
    full = load_ftds(cfg.file_path);
  }

  // Stratified train/test split so every class appears in both.
  Rng split_rng(derive_seed(cfg.data_seed, "split"));
  std::vector<int> train_idx, test_idx;
  for (int c = 0; c < full.num_classes; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < full.size(); ++i) {
      if (full.labels[i] == c) idx.push_back(i);
    }
    split_rng.shuffle(idx);
    int n_test = std::max(1, static_cast<int>(idx.size() * cfg.test_fraction));
    if (n_test >= static_cast<int>(idx.size()))
      throw ConfigError("task.test_fraction leaves no training data for class " +
                        std::to_string(c));
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + n_test);
    train_idx.insert(train_idx.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  BuiltTask built;
  built.train_source = train_idx;
  built.test_source = test_idx;
  built.task.train = subset(full, train_idx);
  built.task.clean_test = subset(full, test_idx);
  built.task.partition = partition_dirichlet(built.task.train, cfg.total_devices,
                                             cfg.dirichlet_alpha,
                                             derive_seed(cfg.data_seed, "partition"));

  // Draw the whole poison pool once, then split into disjoint halves.
  const int pool_n = cfg.poison_train_n + cfg.poison_eval_n;
  PoisonedDataset pool;
  if (cfg.poison_kind == "base_case") {
    pool = make_base_case_poison(built.task.train, cfg.source_class, cfg.target_class, pool_n,
                                 derive_seed(cfg.data_seed, "poison"));
  } else if (cfg.poison_kind == "pixel_trigger") {
    pool = make_pixel_trigger_poison(built.task.train, cfg.trigger, cfg.target_class, pool_n,
                                     derive_seed(cfg.data_seed, "poison"));
  } else {
    Dataset ood = gen_blobs(std::max(2, cfg.num_classes / 2), (pool_n + cfg.num_classes) /
                            std::max(1, cfg.num_classes / 2) + 1,
                            cfg.dims, cfg.spread, derive_seed(cfg.data_seed, "ood"));
    double shift = cfg.edge_shift * std::max(cfg.spread, 1e-3);
    for (double& x : ood.inputs) x += shift;
    ood.num_classes = cfg.num_classes;
    PoisonedDataset all = make_edge_case_poison(ood, cfg.target_class);
    if (all.base.size() < pool_n)
      throw ConfigError("task: edge-case pool smaller than poison_train_n + poison_eval_n");
    pool = poison_slice(all, 0, pool_n);
  }
  built.task.poison_train = poison_slice(pool, 0, cfg.poison_train_n);
  built.task.poison_eval = poison_slice(pool, cfg.poison_train_n, pool_n);

  built.task.model_spec = ModelSpec::mlp(built.task.train.dims, cfg.hidden, cfg.num_classes);
  return built;
}

AccuracySeries post_attack_series(const ExperimentLog& log) {
  AccuracySeries series;
  series.kappa = log.config.kappa;
  for (const RoundLog& r : log.rounds) {
    if (r.round >= log.post_attack_start) series.values.push_back(r.attack_acc);
  }
  return series;
}

ExperimentLog run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();

  BuiltTask built = build_fed_task(cfg.task);
  Model model(built.task.model_spec);

  RoundConfig rc;
  rc.total_devices = cfg.task.total_devices;
  rc.devices_per_round = cfg.devices_per_round;
  rc.benign_train = cfg.benign_train;
  rc.defense = cfg.defense;
  rc.attack = cfg.attack;
  rc.plan = cfg.plan;
  rc.master_seed = cfg.master_seed;
  rc.threads = cfg.threads;

  ExperimentLog log;
  log.config = cfg;
  log.last_attack_round = cfg.plan.attack_num > 0 ? cfg.plan.last_attack_round() : -1;
  log.post_attack_start =
      cfg.plan.attack_num > 0 ? log.last_attack_round + 1 : cfg.plan.start_round;

  ServerState state = init_server(model, cfg.master_seed);
  for (int round = 0; round < cfg.total_rounds; ++round) {
    rc.evaluate = (round % cfg.eval_every == 0);
    RoundResult res = run_round(state, model, built.task, rc);
    state = std::move(res.state);
    if (rc.evaluate) log.rounds.push_back(res.log);
    if (round == log.last_attack_round) {
      log.params_at_attack_stop = state.global_params;
      log.benign_acc_at_stop =
          model.forward_loss(state.global_params, built.task.clean_test.full_batch()).accuracy;
    }
  }
  log.final_params = state.global_params;
  log.lifespan = lifespan(post_attack_series(log));

  auto t1 = std::chrono::steady_clock::now();
  log.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return log;
}

std::vector<MaskSweepRow> sweep_mask_ratio(const ExperimentConfig& base,
                                           const std::vector<double>& ratios, int n_seeds) {
  if (n_seeds < 1) throw ConfigError("sweep: n_seeds must be >= 1");
  for (double r : ratios) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("sweep: mask ratios must be in [0, 1)");
  }
  std::vector<MaskSweepRow> rows;
  for (double r : ratios) {
    for (int s = 0; s < n_seeds; ++s) {
      ExperimentConfig cfg = base;
      cfg.attack.method = AttackMethod::kMasked;
      cfg.attack.mask_ratio = r;
      cfg.master_seed = base.master_seed + static_cast<std::uint64_t>(s);
      rows.push_back(MaskSweepRow{r, cfg.master_seed, run_experiment(cfg).lifespan});
    }
  }
  return rows;
}

std::vector<AttackNumRow> sweep_attack_num(const ExperimentConfig& base,
                                           const std::vector<int>& nums, int n_seeds) {
  if (n_seeds < 1) throw ConfigError("sweep: n_seeds must be >= 1");
  for (int n : nums) {
    if (n < 1) throw ConfigError("sweep: attack_num values must be >= 1");
  }
  std::vector<AttackNumRow> rows;
  for (int n : nums) {
    for (int s = 0; s < n_seeds; ++s) {
      AttackNumRow row;
      row.attack_num = n;
      row.seed = base.master_seed + static_cast<std::uint64_t>(s);

      ExperimentConfig cfg = base;
      cfg.plan.attack_num = n;
      cfg.master_seed = row.seed;
      cfg.attack.method = AttackMethod::kBaseline;
      row.baseline_lifespan = run_experiment(cfg).lifespan;
      cfg.attack.method = AttackMethod::kMasked;
      row.masked_lifespan = run_experiment(cfg).lifespan;
      rows.push_back(row);
    }
  }
  return rows;
}

ClipChoice tune_clip(const ExperimentConfig& base, const std::vector<double>& candidates) {
  if (candidates.empty()) throw ConfigError("tune_clip: no candidates given");
  for (double p : candidates) {
    if (p <= 0.0) throw ConfigError("tune_clip: candidates must be > 0");
  }

  auto final_benign_acc = [&](std::optional<double> clip) {
    ExperimentConfig cfg = base;
    cfg.plan.attack_num = 0;  // attack-free calibration runs
    cfg.defense.clip_norm = clip;
    ExperimentLog log = run_experiment(cfg);
    return log.rounds.back().benign_acc;
  };

  ClipChoice choice;
  choice.unclipped_acc = final_benign_acc(std::nullopt);
  for (double p : candidates) {
    choice.table.push_back(ClipCandidate{p, final_benign_acc(p)});
  }

  std::vector<ClipCandidate> sorted = choice.table;
  std::sort(sorted.begin(), sorted.end(),
            [](const ClipCandidate& a, const ClipCandidate& b) { return a.p < b.p; });
  bool found = false;
  for (const ClipCandidate& c : sorted) {
    if (c.final_benign_acc >= choice.unclipped_acc - 0.01) {
      choice.chosen_p = c.p;
      found = true;
      break;
    }
  }
  if (!found) {
    // No candidate preserves accuracy; fall back to the least damaging one.
    const ClipCandidate* best = &sorted.front();
    for (const ClipCandidate& c : sorted) {
      if (c.final_benign_acc > best->final_benign_acc) best = &c;
    }
    choice.chosen_p = best->p;
  }
  return choice;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string opt_str(const std::optional<double>& v) { return v ? fmt_double(*v) : "none"; }

std::optional<double> parse_opt(const std::string& s) {
  if (s == "none") return std::nullopt;
  return std::stod(s);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "task.generator = " << c.task.generator << "\n";
  os << "task.file_path = " << c.task.file_path << "\n";
  os << "task.data_seed = " << fmt_u64(c.task.data_seed) << "\n";
  os << "task.num_classes = " << c.task.num_classes << "\n";
  os << "task.per_class = " << c.task.per_class << "\n";
  os << "task.dims = " << c.task.dims << "\n";
  os << "task.spread = " << fmt_double(c.task.spread) << "\n";
  os << "task.hidden = " << join_ints(c.task.hidden) << "\n";
  os << "task.total_devices = " << c.task.total_devices << "\n";
  os << "task.dirichlet_alpha = " << fmt_double(c.task.dirichlet_alpha) << "\n";
  os << "task.test_fraction = " << fmt_double(c.task.test_fraction) << "\n";
  os << "task.poison_kind = " << c.task.poison_kind << "\n";
  os << "task.source_class = " << c.task.source_class << "\n";
  os << "task.target_class = " << c.task.target_class << "\n";
  os << "task.poison_train_n = " << c.task.poison_train_n << "\n";
  os << "task.poison_eval_n = " << c.task.poison_eval_n << "\n";
  os << "task.trigger_row = " << c.task.trigger.row << "\n";
  os << "task.trigger_col = " << c.task.trigger.col << "\n";
  os << "task.trigger_height = " << c.task.trigger.height << "\n";
  os << "task.trigger_width = " << c.task.trigger.width << "\n";
  os << "task.trigger_value = " << fmt_double(c.task.trigger.value) << "\n";
  os << "task.edge_shift = " << fmt_double(c.task.edge_shift) << "\n";
  os << "total_rounds = " << c.total_rounds << "\n";
  os << "devices_per_round = " << c.devices_per_round << "\n";
  os << "train.learning_rate = " << fmt_double(c.benign_train.learning_rate) << "\n";
  os << "train.batch_size = " << c.benign_train.batch_size << "\n";
  os << "train.local_epochs = " << c.benign_train.local_epochs << "\n";
  os << "defense.clip_norm = " << opt_str(c.defense.clip_norm) << "\n";
  os << "defense.dp_sigma = " << fmt_double(c.defense.dp_sigma) << "\n";
  os << "defense.server_topk = " << opt_str(c.defense.server_topk) << "\n";
  os << "attack.method = " << (c.attack.method == AttackMethod::kBaseline ? "baseline" : "masked")
     << "\n";
  os << "attack.mask_ratio = " << fmt_double(c.attack.mask_ratio) << "\n";
  os << "attack.boost = " << fmt_double(c.attack.boost) << "\n";
  os << "attack.pgd_norm_bound = " << opt_str(c.attack.pgd_norm_bound) << "\n";
  os << "attack.learning_rate = " << fmt_double(c.attack.local_train.learning_rate) << "\n";
  os << "attack.batch_size = " << c.attack.local_train.batch_size << "\n";
  os << "attack.local_epochs = " << c.attack.local_train.local_epochs << "\n";
  os << "plan.start_round = " << c.plan.start_round << "\n";
  os << "plan.attack_num = " << c.plan.attack_num << "\n";
  os << "plan.frequency = " << c.plan.frequency << "\n";
  os << "plan.attackers_per_round = " << c.plan.attackers_per_round << "\n";
  os << "master_seed = " << fmt_u64(c.master_seed) << "\n";
  os << "eval_every = " << c.eval_every << "\n";
  os << "kappa = " << fmt_double(c.kappa) << "\n";
  os << "output_dir = " << c.output_dir << "\n";
  os << "threads = " << c.threads << "\n";
  return os.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::map<std::string, std::function<void(const std::string&)>> setters;
  auto& t = c.task;
  setters["task.generator"] = [&](const std::string& v) { t.generator = v; };
  setters["task.file_path"] = [&](const std::string& v) { t.file_path = v; };
  setters["task.data_seed"] = [&](const std::string& v) { t.data_seed = std::stoull(v); };
  setters["task.num_classes"] = [&](const std::string& v) { t.num_classes = std::stoi(v); };
  setters["task.per_class"] = [&](const std::string& v) { t.per_class = std::stoi(v); };
  setters["task.dims"] = [&](const std::string& v) { t.dims = std::stoi(v); };
  setters["task.spread"] = [&](const std::string& v) { t.spread = std::stod(v); };
  setters["task.hidden"] = [&](const std::string& v) { t.hidden = split_ints(v); };
  setters["task.total_devices"] = [&](const std::string& v) { t.total_devices = std::stoi(v); };
  setters["task.dirichlet_alpha"] = [&](const std::string& v) { t.dirichlet_alpha = std::stod(v); };
  setters["task.test_fraction"] = [&](const std::string& v) { t.test_fraction = std::stod(v); };
  setters["task.poison_kind"] = [&](const std::string& v) { t.poison_kind = v; };
  setters["task.source_class"] = [&](const std::string& v) { t.source_class = std::stoi(v); };
  setters["task.target_class"] = [&](const std::string& v) { t.target_class = std::stoi(v); };
  setters["task.poison_train_n"] = [&](const std::string& v) { t.poison_train_n = std::stoi(v); };
  setters["task.poison_eval_n"] = [&](const std::string& v) { t.poison_eval_n = std::stoi(v); };
  setters["task.trigger_row"] = [&](const std::string& v) { t.trigger.row = std::stoi(v); };
  setters["task.trigger_col"] = [&](const std::string& v) { t.trigger.col = std::stoi(v); };
  setters["task.trigger_height"] = [&](const std::string& v) { t.trigger.height = std::stoi(v); };
  setters["task.trigger_width"] = [&](const std::string& v) { t.trigger.width = std::stoi(v); };
  setters["task.trigger_value"] = [&](const std::string& v) { t.trigger.value = std::stod(v); };
  setters["task.edge_shift"] = [&](const std::string& v) { t.edge_shift = std::stod(v); };
  setters["total_rounds"] = [&](const std::string& v) { c.total_rounds = std::stoi(v); };
  setters["devices_per_round"] = [&](const std::string& v) { c.devices_per_round = std::stoi(v); };
  setters["train.learning_rate"] = [&](const std::string& v) {
    c.benign_train.learning_rate = std::stod(v);
  };
  setters["train.batch_size"] = [&](const std::string& v) {
    c.benign_train.batch_size = std::stoi(v);
  };
  setters["train.local_epochs"] = [&](const std::string& v) {
    c.benign_train.local_epochs = std::stoi(v);
  };
  setters["defense.clip_norm"] = [&](const std::string& v) {
    c.defense.clip_norm = parse_opt(v);
  };
  setters["defense.dp_sigma"] = [&](const std::string& v) { c.defense.dp_sigma = std::stod(v); };
  setters["defense.server_topk"] = [&](const std::string& v) {
    c.defense.server_topk = parse_opt(v);
  };
  setters["attack.method"] = [&](const std::string& v) {
    if (v == "baseline") {
      c.attack.method = AttackMethod::kBaseline;
    } else if (v == "masked") {
      c.attack.method = AttackMethod::kMasked;
    } else {
      throw ConfigError("attack.method must be 'baseline' or 'masked', got '" + v + "'");
    }
  };
  setters["attack.mask_ratio"] = [&](const std::string& v) {
    c.attack.mask_ratio = std::stod(v);
  };
  setters["attack.boost"] = [&](const std::string& v) { c.attack.boost = std::stod(v); };
  setters["attack.pgd_norm_bound"] = [&](const std::string& v) {
    c.attack.pgd_norm_bound = parse_opt(v);
  };
  setters["attack.learning_rate"] = [&](const std::string& v) {
    c.attack.local_train.learning_rate = std::stod(v);
  };
  setters["attack.batch_size"] = [&](const std::string& v) {
    c.attack.local_train.batch_size = std::stoi(v);
  };
  setters["attack.local_epochs"] = [&](const std::string& v) {
    c.attack.local_train.local_epochs = std::stoi(v);
  };
  setters["plan.start_round"] = [&](const std::string& v) { c.plan.start_round = std::stoi(v); };
  setters["plan.attack_num"] = [&](const std::string& v) { c.plan.attack_num = std::stoi(v); };
  setters["plan.frequency"] = [&](const std::string& v) { c.plan.frequency = std::stoi(v); };
  setters["plan.attackers_per_round"] = [&](const std::string& v) {
    c.plan.attackers_per_round = std::stoi(v);
  };
  setters["master_seed"] = [&](const std::string& v) { c.master_seed = std::stoull(v); };
  setters["eval_every"] = [&](const std::string& v) { c.eval_every = std::stoi(v); };
  setters["kappa"] = [&](const std::string& v) { c.kappa = std::stod(v); };
  setters["output_dir"] = [&](const std::string& v) { c.output_dir = v; };
  setters["threads"] = [&](const std::string& v) { c.threads = std::stoi(v); };

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key +
                        "'");
    }
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string rounds_csv(const ExperimentLog& log) {
  std::ostringstream os;
  os << "round,benign_acc,attack_acc,attacker_present,aggregate_norm\n";
  for (const RoundLog& r : log.rounds) {
    os << r.round << "," << fmt_double(r.benign_acc) << "," << fmt_double(r.attack_acc) << ","
       << (r.attacker_present ? 1 : 0) << "," << fmt_double(r.aggregate_norm) << "\n";
  }
  return os.str();
}

std::string summary_text(const ExperimentLog& log, const HessianReport* hessian) {
  std::ostringstream os;
  os << "# experiment summary\n";
  os << "lifespan = " << log.lifespan << "\n";
  os << "last_attack_round = " << log.last_attack_round << "\n";
  os << "post_attack_start = " << log.post_attack_start << "\n";
  os << "benign_acc_at_stop = " << fmt_double(log.benign_acc_at_stop) << "\n";
  if (!log.rounds.empty()) {
    os << "final_benign_acc = " << fmt_double(log.rounds.back().benign_acc) << "\n";
    os << "final_attack_acc = " << fmt_double(log.rounds.back().attack_acc) << "\n";
  }
  if (hessian) {
    os << "hessian.trace_estimate = " << fmt_double(hessian->trace_estimate) << "\n";
    os << "hessian.trace_stderr = " << fmt_double(hessian->trace_stderr) << "\n";
    os << "hessian.top_eigenvalue = " << fmt_double(hessian->top_eigenvalue) << "\n";
    os << "hessian.power_converged = " << (hessian->power_converged ? 1 : 0) << "\n";
    os << "hessian.n_samples = " << hessian->n_hutchinson_samples << "\n";
    os << "hessian.power_iters = " << hessian->power_iters << "\n";
  }
  os << "# config snapshot\n";
  os << serialize_config(log.config);
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
}

}  // namespace fedsim

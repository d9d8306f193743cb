// Command-line front end: run one experiment, sweep mask ratio or AttackNum,
// calibrate the clip bound, or emit a Hessian stability report.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/experiment.hpp"
#include "fedsim/rng.hpp"

namespace {

using fedsim::ExperimentConfig;

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--set", args.overrides,
                  "override any config field, e.g. --set task.dims=16 (repeatable)");
  cmd->add_option("--out,-o", args.out_dir, "output directory");
  cmd->add_option("--seed,-s", args.seed, "master seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
}

ExperimentConfig build_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  std::string text;
  if (!args.config_path.empty()) {
    cfg = fedsim::load_config_file(args.config_path);
  }
  // Re-serialize, append overrides, and reparse so --set uses the exact
  // grammar of the config file.
  text = fedsim::serialize_config(cfg);
  for (const std::string& kv : args.overrides) text += kv + "\n";
  cfg = fedsim::parse_config(text);
  if (args.seed_set) cfg.master_seed = args.seed;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  fedsim::validate(cfg);
  return cfg;
}

int cmd_run(const ExperimentConfig& cfg) {
  fedsim::ExperimentLog log = fedsim::run_experiment(cfg);
  fedsim::write_file(cfg.output_dir + "/rounds.csv", fedsim::rounds_csv(log));
  fedsim::write_file(cfg.output_dir + "/summary.txt", fedsim::summary_text(log));
  std::printf("rounds=%d lifespan=%d benign_acc_at_stop=%.4f wall=%.1fs\n", cfg.total_rounds,
              log.lifespan, log.benign_acc_at_stop, log.wall_seconds);
  std::printf("wrote %s/rounds.csv and %s/summary.txt\n", cfg.output_dir.c_str(),
              cfg.output_dir.c_str());
  return 0;
}

int cmd_sweep_mask(const ExperimentConfig& cfg, const std::string& ratios_str, int n_seeds) {
  std::vector<double> ratios = parse_double_list(ratios_str);
  auto rows = fedsim::sweep_mask_ratio(cfg, ratios, n_seeds);
  std::ostringstream csv;
  csv << "ratio,seed,lifespan\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", r.ratio);
    csv << buf << "," << r.seed << "," << r.lifespan << "\n";
  }
  fedsim::write_file(cfg.output_dir + "/sweep_mask.csv", csv.str());
  for (double ratio : ratios) {
    std::vector<double> ls;
    for (const auto& r : rows) {
      if (r.ratio == ratio) ls.push_back(r.lifespan);
    }
    std::printf("ratio=%.4g median_lifespan=%.1f\n", ratio, median(ls));
  }
  std::printf("wrote %s/sweep_mask.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_sweep_attacknum(const ExperimentConfig& cfg, const std::string& nums_str, int n_seeds) {
  std::vector<int> nums = parse_int_list(nums_str);
  auto rows = fedsim::sweep_attack_num(cfg, nums, n_seeds);
  std::ostringstream csv;
  csv << "attack_num,seed,baseline_lifespan,masked_lifespan\n";
  for (const auto& r : rows) {
    csv << r.attack_num << "," << r.seed << "," << r.baseline_lifespan << ","
        << r.masked_lifespan << "\n";
  }
  fedsim::write_file(cfg.output_dir + "/sweep_attacknum.csv", csv.str());
  for (int n : nums) {
    std::vector<double> base, masked;
    for (const auto& r : rows) {
      if (r.attack_num == n) {
        base.push_back(r.baseline_lifespan);
        masked.push_back(r.masked_lifespan);
      }
    }
    std::printf("attack_num=%d baseline_median=%.1f masked_median=%.1f\n", n, median(base),
                median(masked));
  }
  std::printf("wrote %s/sweep_attacknum.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_tune_clip(const ExperimentConfig& cfg, const std::string& cands_str) {
  auto choice = fedsim::tune_clip(cfg, parse_double_list(cands_str));
  std::ostringstream csv;
  csv << "p,final_benign_acc\n";
  for (const auto& c : choice.table) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", c.p, c.final_benign_acc);
    csv << buf << "\n";
  }
  fedsim::write_file(cfg.output_dir + "/tune_clip.csv", csv.str());
  std::printf("unclipped_acc=%.4f chosen_p=%.4g\n", choice.unclipped_acc, choice.chosen_p);
  std::printf("wrote %s/tune_clip.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_hessian(const ExperimentConfig& cfg, int samples, int power_iters) {
  fedsim::ExperimentLog log = fedsim::run_experiment(cfg);
  fedsim::BuiltTask built = fedsim::build_fed_task(cfg.task);
  fedsim::Model model(built.task.model_spec);

  const fedsim::ParamVector& params =
      log.params_at_attack_stop.empty() ? log.final_params : log.params_at_attack_stop;
  fedsim::HessianConfig hc;
  hc.hutchinson_samples = samples;
  hc.power_iters = power_iters;
  hc.seed = fedsim::derive_seed(cfg.master_seed, "hessian-report");
  fedsim::HessianReport report =
      fedsim::stability_report(model, params, built.task.poison_train, hc);

  fedsim::write_file(cfg.output_dir + "/rounds.csv", fedsim::rounds_csv(log));
  fedsim::write_file(cfg.output_dir + "/summary.txt", fedsim::summary_text(log, &report));
  std::printf("lifespan=%d trace=%.6g (stderr %.3g) top_eig=%.6g converged=%d\n", log.lifespan,
              report.trace_estimate, report.trace_stderr, report.top_eigenvalue,
              report.power_converged ? 1 : 0);
  std::printf("wrote %s/summary.txt\n", cfg.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning backdoor durability simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, mask_args, num_args, clip_args, hess_args;

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_args);

  CLI::App* sweep_mask = app.add_subcommand("sweep-mask", "lifespan vs. mask ratio");
  add_common(sweep_mask, mask_args);
  std::string ratios = "0,0.01,0.05,0.45";
  int mask_seeds = 5;
  sweep_mask->add_option("--ratios", ratios, "comma-separated mask ratios");
  sweep_mask->add_option("--seeds", mask_seeds, "seeds per ratio");

  CLI::App* sweep_num = app.add_subcommand("sweep-attacknum", "lifespan vs. AttackNum");
  add_common(sweep_num, num_args);
  std::string nums = "10,20,40";
  int num_seeds = 5;
  sweep_num->add_option("--nums", nums, "comma-separated AttackNum values");
  sweep_num->add_option("--seeds", num_seeds, "seeds per value");

  CLI::App* tune = app.add_subcommand("tune-clip", "attack-free clip-bound calibration");
  add_common(tune, clip_args);
  std::string candidates = "0.25,0.5,1,2,4,8";
  tune->add_option("--candidates", candidates, "comma-separated clip bounds");

  CLI::App* hess = app.add_subcommand("hessian-report",
                                      "attack run + Hessian trace / top-eigenvalue report");
  add_common(hess, hess_args);
  int samples = 100, power_iters = 200;
  hess->add_option("--samples", samples, "Hutchinson probe count");
  hess->add_option("--power-iters", power_iters, "power iteration cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(build_config(run_args));
    if (sweep_mask->parsed()) return cmd_sweep_mask(build_config(mask_args), ratios, mask_seeds);
    if (sweep_num->parsed()) return cmd_sweep_attacknum(build_config(num_args), nums, num_seeds);
    if (tune->parsed()) return cmd_tune_clip(build_config(clip_args), candidates);
    if (hess->parsed()) return cmd_hessian(build_config(hess_args), samples, power_iters);
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fedsim::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

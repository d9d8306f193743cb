#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsim/analysis.hpp"
#include "fedsim/attack.hpp"
#include "fedsim/data.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/server.hpp"

namespace py = pybind11;
using namespace fedsim;

PYBIND11_MODULE(_fedsim, m) {
  m.doc() = "Federated-learning backdoor durability simulator";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericalError>(m, "NumericalError");

  // nn core
  py::class_<Batch>(m, "Batch")
      .def(py::init<>())
      .def_readwrite("inputs", &Batch::inputs)
      .def_readwrite("labels", &Batch::labels)
      .def_readwrite("dims", &Batch::dims);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("local_epochs", &TrainConfig::local_epochs);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("mlp", &ModelSpec::mlp, py::arg("input_dim"), py::arg("hidden"),
                  py::arg("num_classes"), py::arg("bias") = true)
      .def_readonly("num_classes", &ModelSpec::num_classes)
      .def_readonly("total_params", &ModelSpec::total_params);

  py::class_<LossAcc>(m, "LossAcc")
      .def_readonly("loss", &LossAcc::loss)
      .def_readonly("accuracy", &LossAcc::accuracy);

  py::class_<Model>(m, "Model")
      .def(py::init<ModelSpec>())
      .def_property_readonly("num_params", &Model::num_params)
      .def("init_params", &Model::init_params)
      .def("forward_loss", &Model::forward_loss)
      .def("grad", &Model::grad)
      .def("predict", &Model::predict)
      .def("hvp", &Model::hvp);

  m.def("sgd_step", &sgd_step);

  // data
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("inputs", &Dataset::inputs)
      .def_readwrite("labels", &Dataset::labels)
      .def_readwrite("dims", &Dataset::dims)
      .def_readwrite("num_classes", &Dataset::num_classes)
      .def_readwrite("img_h", &Dataset::img_h)
      .def_readwrite("img_w", &Dataset::img_w)
      .def("size", &Dataset::size)
      .def("full_batch", &Dataset::full_batch);

  py::class_<DevicePartition>(m, "DevicePartition")
      .def_readonly("device_indices", &DevicePartition::device_indices)
      .def("total_devices", &DevicePartition::total_devices);

  py::class_<TriggerPatch>(m, "TriggerPatch")
      .def(py::init<>())
      .def_readwrite("row", &TriggerPatch::row)
      .def_readwrite("col", &TriggerPatch::col)
      .def_readwrite("height", &TriggerPatch::height)
      .def_readwrite("width", &TriggerPatch::width)
      .def_readwrite("value", &TriggerPatch::value);

  py::class_<PoisonedDataset>(m, "PoisonedDataset")
      .def_readonly("base", &PoisonedDataset::base)
      .def_readonly("target_label", &PoisonedDataset::target_label)
      .def_readonly("source_indices", &PoisonedDataset::source_indices);

  m.def("gen_blobs", &gen_blobs, py::arg("num_classes"), py::arg("per_class"), py::arg("dims"),
        py::arg("spread"), py::arg("seed"));
  m.def("partition_dirichlet", &partition_dirichlet);
  m.def("make_base_case_poison", &make_base_case_poison);
  m.def("make_pixel_trigger_poison", &make_pixel_trigger_poison);
  m.def("make_edge_case_poison", &make_edge_case_poison);
  m.def("load_ftds", &load_ftds);
  m.def("save_ftds", &save_ftds);

  // attack
  py::class_<MaskSet>(m, "MaskSet")
      .def_readonly("indices", &MaskSet::indices)
      .def_readonly("ratio", &MaskSet::ratio);

  py::enum_<AttackMethod>(m, "AttackMethod")
      .value("BASELINE", AttackMethod::kBaseline)
      .value("MASKED", AttackMethod::kMasked);

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("method", &AttackConfig::method)
      .def_readwrite("mask_ratio", &AttackConfig::mask_ratio)
      .def_readwrite("boost", &AttackConfig::boost)
      .def_readwrite("pgd_norm_bound", &AttackConfig::pgd_norm_bound)
      .def_readwrite("local_train", &AttackConfig::local_train);

  py::class_<AttackPlan>(m, "AttackPlan")
      .def(py::init<>())
      .def_readwrite("start_round", &AttackPlan::start_round)
      .def_readwrite("attack_num", &AttackPlan::attack_num)
      .def_readwrite("frequency", &AttackPlan::frequency)
      .def_readwrite("attackers_per_round", &AttackPlan::attackers_per_round)
      .def("is_attack_round", &AttackPlan::is_attack_round)
      .def("last_attack_round", &AttackPlan::last_attack_round);

  m.def("top_k_mask", &top_k_mask);
  m.def("mask_size", &mask_size);
  m.def("project_out", &project_out);
  m.def("boost", &boost);
  m.def("norm_preproject", &norm_preproject);
  m.def("attacker_local_update", &attacker_local_update);

  // server
  py::class_<DefenseConfig>(m, "DefenseConfig")
      .def(py::init<>())
      .def_readwrite("clip_norm", &DefenseConfig::clip_norm)
      .def_readwrite("dp_sigma", &DefenseConfig::dp_sigma)
      .def_readwrite("server_topk", &DefenseConfig::server_topk);

  m.def("clip_update", &clip_update);
  m.def("fedavg_aggregate", &fedavg_aggregate);
  m.def("add_gaussian_noise", &add_gaussian_noise);
  m.def("server_sparsify", &server_sparsify);
  m.def("benign_local_update", &benign_local_update);

  // analysis
  py::class_<AccuracySeries>(m, "AccuracySeries")
      .def(py::init<>())
      .def_readwrite("values", &AccuracySeries::values)
      .def_readwrite("kappa", &AccuracySeries::kappa);

  m.def("lifespan", &lifespan);
  m.def("attack_accuracy", &attack_accuracy);
  m.def("hutchinson_trace", [](const HvpFn& f, int d, int n, std::uint64_t seed) {
    TraceEstimate e = hutchinson_trace(f, d, n, seed);
    return py::make_tuple(e.estimate, e.stderr_);
  });
  m.def("power_iter_top_eig", [](const HvpFn& f, int d, int iters, double tol,
                                 std::uint64_t seed) {
    TopEigenEstimate e = power_iter_top_eig(f, d, iters, tol, seed);
    return py::make_tuple(e.value, e.converged);
  });

  py::class_<HessianReport>(m, "HessianReport")
      .def_readonly("trace_estimate", &HessianReport::trace_estimate)
      .def_readonly("trace_stderr", &HessianReport::trace_stderr)
      .def_readonly("top_eigenvalue", &HessianReport::top_eigenvalue)
      .def_readonly("power_converged", &HessianReport::power_converged);

  py::class_<HessianConfig>(m, "HessianConfig")
      .def(py::init<>())
      .def_readwrite("hutchinson_samples", &HessianConfig::hutchinson_samples)
      .def_readwrite("power_iters", &HessianConfig::power_iters)
      .def_readwrite("power_tol", &HessianConfig::power_tol)
      .def_readwrite("seed", &HessianConfig::seed);

  m.def("stability_report", &stability_report);

  // experiment
  py::class_<TaskConfig>(m, "TaskConfig")
      .def(py::init<>())
      .def_readwrite("generator", &TaskConfig::generator)
      .def_readwrite("data_seed", &TaskConfig::data_seed)
      .def_readwrite("file_path", &TaskConfig::file_path)
      .def_readwrite("num_classes", &TaskConfig::num_classes)
      .def_readwrite("per_class", &TaskConfig::per_class)
      .def_readwrite("dims", &TaskConfig::dims)
      .def_readwrite("spread", &TaskConfig::spread)
      .def_readwrite("hidden", &TaskConfig::hidden)
      .def_readwrite("total_devices", &TaskConfig::total_devices)
      .def_readwrite("dirichlet_alpha", &TaskConfig::dirichlet_alpha)
      .def_readwrite("test_fraction", &TaskConfig::test_fraction)
      .def_readwrite("poison_kind", &TaskConfig::poison_kind)
      .def_readwrite("source_class", &TaskConfig::source_class)
      .def_readwrite("target_class", &TaskConfig::target_class)
      .def_readwrite("poison_train_n", &TaskConfig::poison_train_n)
      .def_readwrite("poison_eval_n", &TaskConfig::poison_eval_n);

  py::class_<RoundLog>(m, "RoundLog")
      .def_readonly("round", &RoundLog::round)
      .def_readonly("benign_acc", &RoundLog::benign_acc)
      .def_readonly("attack_acc", &RoundLog::attack_acc)
      .def_readonly("attacker_present", &RoundLog::attacker_present)
      .def_readonly("aggregate_norm", &RoundLog::aggregate_norm);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("task", &ExperimentConfig::task)
      .def_readwrite("total_rounds", &ExperimentConfig::total_rounds)
      .def_readwrite("devices_per_round", &ExperimentConfig::devices_per_round)
      .def_readwrite("benign_train", &ExperimentConfig::benign_train)
      .def_readwrite("defense", &ExperimentConfig::defense)
      .def_readwrite("attack", &ExperimentConfig::attack)
      .def_readwrite("plan", &ExperimentConfig::plan)
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def_readwrite("eval_every", &ExperimentConfig::eval_every)
      .def_readwrite("kappa", &ExperimentConfig::kappa)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("threads", &ExperimentConfig::threads);

  py::class_<ExperimentLog>(m, "ExperimentLog")
      .def_readonly("rounds", &ExperimentLog::rounds)
      .def_readonly("lifespan", &ExperimentLog::lifespan)
      .def_readonly("last_attack_round", &ExperimentLog::last_attack_round)
      .def_readonly("post_attack_start", &ExperimentLog::post_attack_start)
      .def_readonly("benign_acc_at_stop", &ExperimentLog::benign_acc_at_stop)
      .def_readonly("final_params", &ExperimentLog::final_params)
      .def_readonly("params_at_attack_stop", &ExperimentLog::params_at_attack_stop);

  py::class_<FedTask>(m, "FedTask")
      .def_readonly("train", &FedTask::train)
      .def_readonly("partition", &FedTask::partition)
      .def_readonly("poison_train", &FedTask::poison_train)
      .def_readonly("poison_eval", &FedTask::poison_eval)
      .def_readonly("clean_test", &FedTask::clean_test)
      .def_readonly("model_spec", &FedTask::model_spec);

  py::class_<BuiltTask>(m, "BuiltTask")
      .def_readonly("task", &BuiltTask::task)
      .def_readonly("train_source", &BuiltTask::train_source)
      .def_readonly("test_source", &BuiltTask::test_source);

  m.def("build_fed_task", &build_fed_task);
  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("domain"), py::arg("a") = 0,
        py::arg("b") = 0);
  m.def("run_experiment", &run_experiment, py::call_guard<py::gil_scoped_release>());
  m.def("serialize_config", &serialize_config);
  m.def("parse_config", &parse_config);
  m.def("rounds_csv", &rounds_csv);
  m.def("validate_config", [](const ExperimentConfig& cfg) { validate(cfg); });
}

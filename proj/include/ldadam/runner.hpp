#pragma once

#include "ldadam/config.hpp"
#include "ldadam/optim.hpp"
#include "ldadam/problems.hpp"
#include "ldadam/schedule.hpp"
#include "ldadam/theory.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ldadam {

struct ExperimentConfig {
    std::string label = "run";

    // problem
    std::string problem_kind = "quadratic";
    std::uint64_t problem_seed = 1;
    std::size_t quad_d = 16;
    double quad_kappa = 10.0;
    double quad_sigma = 0.0;
    bool quad_rotate = true;
    double quad_init_offset = 1.0;
    ShapeList quad_shapes; // empty: single d x 1 layer
    std::size_t ros_d = 2;
    std::size_t log_samples = 128;
    std::size_t log_features = 16;
    std::size_t log_batch = 16;
    double log_lambda = 1e-2;
    std::vector<std::size_t> mlp_widths = {8, 4, 8};
    std::size_t mlp_samples = 128;
    std::size_t mlp_batch = 16;
    std::vector<std::size_t> mlp_teacher_ranks;
    double mlp_init_scale = 0.5;

    // optimizer
    std::string optimizer_kind = "ldadam"; // ldadam | adam | amsgrad | galore
    OptimizerConfig ldadam;
    std::size_t galore_frequency = 500;
    double galore_alpha = 1.0;
    AmsgradVariant amsgrad_variant = AmsgradVariant::coordinate_wise;
    double beta1 = 0.908; // shared by the non-ldadam optimizers too
    double beta2 = 0.99;
    double epsilon = 1e-8;

    Schedule schedule;

    std::size_t steps = 100;
    std::size_t micro_batches = 1;
    std::size_t record_every = 0; // 0: auto (1 when steps <= 1e4, else 10)
    std::vector<std::string> monitors;
    std::uint64_t seed = 1;
    std::string output_path;

    // Identifies the data-generating problem; compare() requires all configs
    // to agree on it.
    std::string problem_key() const;

    std::size_t effective_record_every() const {
        if (record_every > 0) return record_every;
        return steps <= 10000 ? 1 : 10;
    }
};

// Reads an experiment config, consuming every key; unknown keys raise.
ExperimentConfig parse_experiment_config(ConfigMap& map);

std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg);

struct MonitorSummary {
    std::string monitor;
    std::string layer;
    bool clean = true;
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::string detail;
};

struct RunResult {
    std::vector<TrajectoryRecord> records; // aggregated across layers
    double final_loss = 0.0;
    std::optional<double> gap_to_f_star;
    std::size_t steps_completed = 0;
    bool diverged = false;
    std::string divergence_message;
    std::vector<MonitorSummary> monitor_summaries;
    double wall_seconds = 0.0;
    ParamSet final_params;
    bool monitors_clean() const {
        for (const auto& m : monitor_summaries)
            if (!m.clean) return false;
        return true;
    }
};

RunResult run_experiment(const ExperimentConfig& cfg);

// step,loss,grad_norm,b_norm,e_norm,q_r,vhat_max,lr with full-precision values.
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRecord>& records);
std::string trajectory_csv_string(const std::vector<TrajectoryRecord>& records);

std::string summary_text(const ExperimentConfig& cfg, const RunResult& result);

// experiment,monitor,layer,clean,checks,violations rows, one per monitor verdict.
std::string monitor_csv(const std::string& experiment_label,
                        const std::vector<MonitorSummary>& summaries);

struct CompareRow {
    std::string label;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    std::size_t runs = 0;
    std::size_t diverged = 0;
};

// Runs every (config, seed) pair, optionally on several threads; outputs are
// assembled in input order regardless of completion order.
std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

std::string compare_table(const std::vector<CompareRow>& rows);
std::string compare_csv(const std::vector<CompareRow>& rows);

} // namespace ldadam

#pragma once

#include "kpde/datagen.hpp"
#include "kpde/pipeline.hpp"
#include "kpde/tuning.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpde {

/// preset: table hyperparameters; cv: lambda_U and the Step (ii) kernel
/// are tuned by cross validation as well.
enum class HyperMode { Preset, Cv };

std::string to_string(HyperMode m);
HyperMode hyper_mode_from_string(const std::string& name);

/// Solver settings used when a config leaves them unset.
SolverSettings default_solver_settings(ProblemId problem);

struct ExperimentConfig {
    ProblemId problem = ProblemId::Pendulum;
    Method method = Method::KernelPolynomial;
    int training_size = 20;
    double noise_ratio = 0.0;
    std::vector<double> betas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    HyperMode mode = HyperMode::Preset;
    std::uint64_t seed = 0;
    int test_count = 50;
    SolverSettings solver = default_solver_settings(ProblemId::Pendulum);
    int smoothing_candidates = 12;
    int smoothing_folds = 5;
    std::vector<double> lambda_u_candidates{1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1};
    KernelSearch kernel_search;
    StlsqOptions stlsq;
    std::string output;  ///< report path; empty means stdout only
    /// Fields that were absent from the parsed document.
    std::vector<std::string> defaults_used;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Throws ConfigError on unknown keys or invalid values.
    static ExperimentConfig from_json(const nlohmann::json& doc);
};

/// FNV-1a of the canonical config dump.
std::string config_hash(const ExperimentConfig& config);

Dataset training_data(const ExperimentConfig& config);
Dataset test_data(const ExperimentConfig& config);

/// Steps (i) and (ii) on a training set.
struct TrainedModel {
    LearnedModel model;
    std::vector<SmoothedSample> smoothed;
    TrainingTable table;
    LearnOptions learn;
    std::vector<CvResult> kernel_cv;  ///< empty in preset mode
    double discovery_error = 0.0;     ///< on the training rows
    nlohmann::json hyperparameters;
};

SmoothingOptions smoothing_options(const ExperimentConfig& config);
TrainedModel train_model(const ExperimentConfig& config, const Dataset& training);

struct ErrorReport {
    nlohmann::json config;
    std::vector<double> per_case;
    double mean = 0.0;
    double std = 0.0;  ///< population standard deviation
    nlohmann::json metadata;
    nlohmann::json paper_reference_values;

    [[nodiscard]] nlohmann::json to_json() const;
    static ErrorReport from_json(const nlohmann::json& doc);
};

/// Mean and population standard deviation; rejects an empty list.
std::pair<double, double> mean_std(const std::vector<double>& values);

/// A pipeline stage failed. Cases finished before the failure are kept.
class StageFailure : public std::runtime_error {
  public:
    StageFailure(std::string stage, const std::string& what, std::vector<double> partial = {})
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)),
          partial_(std::move(partial)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] const std::vector<double>& partial() const noexcept { return partial_; }

  private:
    std::string stage_;
    std::vector<double> partial_;
};

/// Published numbers for the matching table cell and its baselines, each
/// carrying the provenance tag. Null when no such cell was published.
nlohmann::json published_reference(ProblemId problem, Method method, int training_size, double noise_ratio);

/// Steps (i)-(iii) over the test set; case errors are in test order.
ErrorReport run_operator_learning(const ExperimentConfig& config);

struct RobustnessPoint {
    double beta = 0.0;
    std::string method;
    double error = 0.0;
};

/// Trains each method at beta = 0 and evaluates its discovery error on the
/// training sources perturbed by every beta in the grid.
std::vector<RobustnessPoint> run_discovery_robustness(const ExperimentConfig& config, const std::vector<Method>& methods);

enum class ReportFormat { Json, Csv };

/// Writes the report; throws InvalidArgument on an empty case list and
/// std::runtime_error on I/O failure.
void emit_report(const ErrorReport& report, ReportFormat format, const std::string& path);
ErrorReport read_report(const std::string& path);
/// Plot data with columns beta, method, error.
void write_robustness_csv(const std::vector<RobustnessPoint>& points, const std::string& path);

}  // namespace kpde

#pragma once

#include "kpde/collocation.hpp"
#include "kpde/datagen.hpp"
#include "kpde/equation.hpp"
#include "kpde/sindy.hpp"
#include "kpde/smoother.hpp"
#include "kpde/tuning.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kpde {

enum class Method { KernelArd, KernelPolynomial, Sindy };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct SmoothingOptions {
    double lambda_u = 1e-8;
    /// When non-empty, lambda_U is tuned jointly with the length scale.
    std::vector<double> lambda_candidates;
    /// Per component; the length scale is picked by CV inside the range.
    std::vector<std::pair<double, double>> sigma_ranges;
    int candidates = 12;
    int folds = 5;
    std::uint64_t seed = 0;
    /// Skips CV when set.
    std::optional<double> fixed_sigma;
};

struct SmoothedSample {
    std::vector<SmoothedField> fields;
    std::vector<double> sigmas;
    std::vector<double> lambdas;
};

struct SmoothingChoice {
    double sigma = 0.0;
    double lambda_u = 0.0;
};

/// Length scale (and optionally lambda_U) for one field chosen by k-fold CV
/// over a log grid.
SmoothingChoice select_smoothing(const Matrix& points, const Vector& values, const SmoothingOptions& options,
                                 std::pair<double, double> range, std::uint64_t seed);

/// Step (i) for every component of a sample.
SmoothedSample smooth_sample(const BenchmarkProblem& problem, const Sample& sample, const SmoothingOptions& options);

/// Derivative features estimated at each grid row:
///   pendulum  (u1, u2, u1_t, u2_t)
///   diffusion (u, u_t, u_xx)
///   darcy     (x1, x2, u, u_x1, u_x2, lap u)
FeatureLayout feature_layout(ProblemId problem);

/// Columns of the feature layout that are inputs of each learned equation.
std::vector<std::vector<int>> equation_inputs(ProblemId problem);

/// Stacked training rows (interior nodes of every pair).
struct TrainingTable {
    Matrix features;        ///< rows x layout
    Matrix targets;         ///< rows x equations
    std::vector<int> pair;  ///< source pair of each row
};

/// Targets: pendulum (u1_t, u2_t - f); diffusion and darcy f.
TrainingTable training_table(const BenchmarkProblem& problem, std::span<const Sample> samples,
                             std::span<const SmoothedSample> smoothed);

/// Inputs of equation `e` extracted from the table.
Matrix equation_features(ProblemId problem, const TrainingTable& table, int e);

struct LearnOptions {
    Method method = Method::KernelPolynomial;
    std::vector<KernelSpec> kernels;  ///< one per learned equation (kernel methods)
    double lambda_k = 1e-5;
    /// Per-equation override of lambda_k when non-empty.
    std::vector<double> equation_lambda_k;
    StlsqOptions stlsq;
};

struct LearnedModel {
    Method method = Method::KernelPolynomial;
    ProblemId problem = ProblemId::Pendulum;
    std::vector<std::shared_ptr<const LearnedEquation>> equations;

    [[nodiscard]] nlohmann::json to_json() const;
    static LearnedModel from_json(const nlohmann::json& doc);
};

/// Step (ii). SINDy learns only the pendulum's second equation; the first
/// (u1_t = u2) is used exactly.
LearnedModel learn_model(const BenchmarkProblem& problem, const TrainingTable& table, const LearnOptions& options);

/// Grids searched when the Step (ii) kernel is tuned by CV. ARD length
/// scales are multiples of each feature's standard deviation.
struct KernelSearch {
    std::vector<double> ard_scales{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> poly_offsets{0.0, 0.01, 0.1, 0.23, 0.5, 1.0, 2.0, 3.5};
    /// Polynomial degrees to search; empty keeps the given degree per equation.
    std::vector<int> poly_degrees;
    std::vector<double> lambda_k{1e-5, 1e-3, 1e-1};
    int folds = 5;
};

struct KernelTuning {
    LearnOptions options;
    std::vector<CvResult> tables;  ///< one per learned equation
};

/// Chooses Step (ii) kernels and lambda_K by CV with whole training pairs
/// held out. Polynomial degrees come from `degrees` (one per equation)
/// unless the search lists its own.
KernelTuning tune_kernels(const BenchmarkProblem& problem, const TrainingTable& table, Method method,
                          const std::vector<int>& degrees, const KernelSearch& search, std::uint64_t seed);

/// Relative L2 error of the equation that carries the forcing (pendulum:
/// the second one) on the rows of `table`.
double discovery_error(const BenchmarkProblem& problem, const LearnedModel& model, const TrainingTable& table);

struct SolverSettings {
    enum class Backend { GaussNewton, Lbfgs };
    Backend backend = Backend::GaussNewton;
    double sigma = 0.2;  ///< Gaussian kernel of the solution prior
    double lambda_p = 1e-3;
    double lambda_b = 1e-7;
    double nugget = 1e-8;
    int iterations = 50;
    int lbfgs_steps = 4000;
    std::vector<double> step_sizes{0.2, 0.5};
};

std::string to_string(SolverSettings::Backend b);
SolverSettings::Backend backend_from_string(const std::string& name);

/// Pointwise residual models for the interior: the learned relation or the
/// known benchmark equation.
std::shared_ptr<const PointwiseModel> learned_interior_model(const BenchmarkProblem& problem, const LearnedModel& model);
std::shared_ptr<const PointwiseModel> true_interior_model(const BenchmarkProblem& problem);

/// Collocation problem on the sample's grid: source from `sample.f`,
/// boundary data from the sample's boundary nodes.
CollocationProblem collocation_for(const BenchmarkProblem& problem, const Sample& sample,
                                   std::shared_ptr<const PointwiseModel> interior, const SolverSettings& settings);

struct CaseResult {
    double error = 0.0;  ///< relative L2 over the grid, all components stacked
    Matrix prediction;   ///< rows x components
    SolverState state;
    double step_size = 0.0;  ///< L-BFGS step size that was kept
};

/// Step (iii) for one test sample, evaluated against `sample.u`.
CaseResult solve_case(const BenchmarkProblem& problem, const Sample& sample,
                      std::shared_ptr<const PointwiseModel> interior, const SolverSettings& settings);

/// |pred - truth| / |truth| in the Euclidean norm.
double relative_l2(const Vector& pred, const Vector& truth);

}  // namespace kpde

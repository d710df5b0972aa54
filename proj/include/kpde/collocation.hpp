#pragma once

#include "kpde/equation.hpp"
#include "kpde/kernel.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kpde {

/// A derivative functional acting on one unknown component.
struct ComponentOp {
    int component = 0;
    DiffOp op;
    std::string name;
};

/// Pointwise residual map. Given the collocation points (rows) and the
/// values of the per-point functionals (rows of `local`, one column per
/// functional), it returns one residual per equation and its Jacobian with
/// respect to the local functional values.
struct PointwiseEval {
    Matrix residual;                 ///< points x equations
    std::vector<Matrix> jacobian;    ///< per equation: points x local functionals
};

class PointwiseModel {
  public:
    virtual ~PointwiseModel() = default;
    [[nodiscard]] virtual int equations() const = 0;
    [[nodiscard]] virtual PointwiseEval evaluate(const Matrix& points, const Matrix& local) const = 0;
};

/// Residual z_k for each local functional k (Dirichlet-type data on values).
class IdentityModel final : public PointwiseModel {
  public:
    explicit IdentityModel(int functionals) : n_(functionals) {}
    [[nodiscard]] int equations() const override { return n_; }
    [[nodiscard]] PointwiseEval evaluate(const Matrix& points, const Matrix& local) const override;

  private:
    int n_;
};

/// Where an equation's feature comes from: a coordinate of the collocation
/// point or one of the local functional values.
struct FeatureSource {
    enum class Kind { Coordinate, Local };
    Kind kind = Kind::Local;
    int index = 0;

    static FeatureSource coordinate(int axis) { return {Kind::Coordinate, axis}; }
    static FeatureSource local(int k) { return {Kind::Local, k}; }
};

/// residual = sum_k a_k z_k + sign * P(s(x, z)).
struct EquationTerm {
    std::shared_ptr<const LearnedEquation> equation;
    std::vector<FeatureSource> features;
    std::vector<std::pair<int, double>> linear;
    double sign = 1.0;
};

class EquationModel final : public PointwiseModel {
  public:
    explicit EquationModel(std::vector<EquationTerm> terms);
    [[nodiscard]] int equations() const override { return static_cast<int>(terms_.size()); }
    [[nodiscard]] PointwiseEval evaluate(const Matrix& points, const Matrix& local) const override;

  private:
    std::vector<EquationTerm> terms_;
};

/// Pointwise model defined by a closure, used for known reference equations.
class FunctionModel final : public PointwiseModel {
  public:
    /// fn(x, z, residual, jacobian) fills residual (equations) and jacobian
    /// (equations x local functionals) at a single point.
    using Fn = std::function<void(const Point&, const Vector&, Vector&, Matrix&)>;
    FunctionModel(int equations, Fn fn) : n_(equations), fn_(std::move(fn)) {}
    [[nodiscard]] int equations() const override { return n_; }
    [[nodiscard]] PointwiseEval evaluate(const Matrix& points, const Matrix& local) const override;

  private:
    int n_;
    Fn fn_;
};

/// Collocation description of "P(z) = f at interior points, B(z) = g on the
/// boundary" for the unknown fields, with a Gaussian-process prior given by
/// `kernel` on every component.
struct CollocationProblem {
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    int components = 1;

    Matrix interior_points;
    std::vector<ComponentOp> interior_ops;
    std::shared_ptr<const PointwiseModel> interior_model;
    Matrix interior_targets;  ///< points x equations (the source f)

    Matrix boundary_points;
    std::vector<ComponentOp> boundary_ops;
    std::shared_ptr<const PointwiseModel> boundary_model;
    Matrix boundary_targets;  ///< points x equations (the data g)

    double lambda_p = 1e-3;
    double lambda_b = 1e-7;
    /// Nugget relative to each functional's prior variance.
    double nugget = 1e-8;

    void validate() const;
    [[nodiscard]] Eigen::Index functional_count() const;
};

/// Stacked functionals and the factorized, nugget-regularized Gram matrix
/// G_reg = D (D^-1 G D^-1 + nugget I) D with D = diag(G)^(1/2).
struct Assembly {
    std::vector<Functional> functionals;
    Matrix gram;
    Vector scale;  ///< D
    GramFactorization factorization;  ///< of D^-1 G D^-1 + nugget I

    [[nodiscard]] Matrix regularized() const;
    /// G_reg^-1 z
    [[nodiscard]] Vector solve(const Vector& z) const;
};

Assembly assemble(const CollocationProblem& problem);

struct SolverTraceEntry {
    int iteration = 0;
    double objective = 0.0;
    double step = 0.0;
};

struct SolverState {
    Vector z;             ///< stacked functional values
    Vector coefficients;  ///< G_reg^-1 z
    double objective = 0.0;
    int iteration = 0;
    bool converged = false;
    std::vector<SolverTraceEntry> trace;
};

struct GaussNewtonOptions {
    int iterations = 50;
    bool line_search = true;
    int max_halvings = 20;
    double rel_tol = 1e-10;
};

struct LbfgsOptions {
    int steps = 4000;
    double step_size = 0.5;
    int history = 10;
    int max_backtracks = 30;
    double rel_tol = 1e-14;
};

/// Objective z^T G_reg^-1 z + |r_P|^2 / lambda_P^2 + |r_B|^2 / lambda_B^2.
double objective(const CollocationProblem& problem, const Assembly& assembly, const Vector& z);
/// Its gradient with respect to z.
Vector objective_gradient(const CollocationProblem& problem, const Assembly& assembly, const Vector& z);

SolverState gauss_newton_solve(const CollocationProblem& problem, const Assembly& assembly,
                               const std::optional<Vector>& init = std::nullopt, const GaussNewtonOptions& options = {});

SolverState lbfgs_solve(const CollocationProblem& problem, const Assembly& assembly,
                        const std::optional<Vector>& init = std::nullopt, const LbfgsOptions& options = {});

/// u(x) = K(x, phi) G_reg^-1 z, evaluable with derivatives.
class PredictedSolution {
  public:
    PredictedSolution(KernelSpec kernel, std::vector<Functional> functionals, Vector coefficients);

    [[nodiscard]] double eval(int component, const DiffOp& op, const Point& x) const;
    [[nodiscard]] Vector eval_many(int component, const DiffOp& op, const Matrix& points) const;
    [[nodiscard]] const Vector& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] const std::vector<Functional>& functionals() const noexcept { return functionals_; }

  private:
    KernelSpec kernel_;
    std::vector<Functional> functionals_;
    Vector coefficients_;
};

PredictedSolution reconstruct(const CollocationProblem& problem, const Assembly& assembly, const SolverState& state);

void write_trace_csv(const SolverState& state, std::ostream& out);

}  // namespace kpde

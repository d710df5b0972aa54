#pragma once

#include "kpde/kernel.hpp"
#include "kpde/problem.hpp"

#include <json.hpp>

#include <Eigen/SparseCholesky>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace kpde {

/// Static description of one benchmark.
///   pendulum:  (u1)_t = u2, (u2)_t = -k sin(u1) + f(t) on t in [0, 1], u(0) = 0
///   diffusion: u_t = 0.01 u_xx + 0.01 u^2 + f(x) on (0,1) x (0,1], zero boundary/initial data
///   darcy:     -div(a grad u) = f(x2) on (0,1)^2, u = 0 on the boundary
struct BenchmarkProblem {
    ProblemId id = ProblemId::Pendulum;
    double stiffness = 1.0;  ///< pendulum k
    double diffusivity = 0.01;
    double reaction = 0.01;

    static BenchmarkProblem make(ProblemId id);

    [[nodiscard]] int dim() const noexcept { return id == ProblemId::Pendulum ? 1 : 2; }
    [[nodiscard]] int components() const noexcept { return id == ProblemId::Pendulum ? 2 : 1; }
    /// Fine resolution used by the reference solver (steps or nodes per side).
    [[nodiscard]] int fine_resolution() const noexcept;
    /// Nodes per axis of the observation grid (pendulum: 31 including t = 0).
    [[nodiscard]] int coarse_nodes() const noexcept { return id == ProblemId::Pendulum ? 31 : 15; }
};

/// a(x) = exp(sin pi x1 + sin pi x2) + exp(-sin pi x1 - sin pi x2)
double darcy_coefficient(double x1, double x2);
/// (da/dx1, da/dx2)
std::pair<double, double> darcy_coefficient_grad(double x1, double x2);

/// Zero-mean GP draw with covariance K(grid, grid) + 1e-10 I, Gaussian kernel.
Vector sample_gp_source(double lengthscale, const Vector& grid, std::uint64_t seed);

/// A GP draw on a coarse 1D grid extended to all of R by its kernel
/// interpolant (the conditional mean given the drawn grid values).
class GpSource {
  public:
    GpSource(double lengthscale, Vector grid, std::uint64_t seed);

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] const Vector& grid() const noexcept { return grid_; }
    [[nodiscard]] const Vector& values() const noexcept { return values_; }

  private:
    double lengthscale_;
    Vector grid_;
    Vector values_;
    Vector weights_;
};

using Forcing1D = std::function<double(double)>;
using Forcing2D = std::function<double(double, double)>;

/// f_beta(t) = f(t) + beta sin(5 pi t)
Forcing1D perturb_forcing(Forcing1D f, double beta);

/// Fine trajectory: times (n+1) and states (n+1) x 2.
struct Trajectory {
    Vector times;
    Matrix states;
};

/// Classical RK4 with fixed step t_end / fine_steps from u(0) = 0.
Trajectory solve_pendulum_reference(const Forcing1D& f, double k, double t_end, int fine_steps);

/// Space-time field on a uniform grid: values(i, n) = u(x_i, t_n).
struct SpaceTimeField {
    Vector x;
    Vector t;
    Matrix values;
};

/// Crank-Nicolson in the diffusion term with the quadratic reaction
/// extrapolated explicitly (second-order Adams-Bashforth); the source is
/// sampled at half steps. `f` may depend on (x, t).
SpaceTimeField solve_diffusion_reference(const Forcing2D& f, int nx, int nt, double diffusivity = 0.01,
                                         double reaction = 0.01);

/// Field on a uniform n x n node grid of the unit square: values(i, j) = u(x1_i, x2_j).
struct PlanarField {
    Vector x1;
    Vector x2;
    Matrix values;
};

/// Conservative 5-point finite volumes for -div(a grad u) = f with
/// harmonic-mean face coefficients and homogeneous Dirichlet data. The
/// sparse factorization is reused across sources.
class DarcySolver {
  public:
    explicit DarcySolver(int n);
    [[nodiscard]] PlanarField solve(const Forcing2D& f) const;
    [[nodiscard]] int nodes() const noexcept { return n_; }

  private:
    int n_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

PlanarField solve_darcy_reference(const Forcing2D& f, int n);

/// Indices of `coarse` within `fine`; both sorted. Nodes must coincide to
/// 1e-12 (relative to the grid extent); no interpolation.
std::vector<int> coincident_indices(const Vector& fine, const Vector& coarse);

/// Extracts fine(rows[i], cols[j]).
Matrix subsample(const Matrix& fine, const std::vector<int>& rows, const std::vector<int>& cols);

/// values + N(0, (ratio * RMS(values))^2), entries flagged in `skip` untouched.
Vector add_noise(const Vector& values, double ratio, std::uint64_t seed, const std::vector<bool>* skip = nullptr);

/// One solution-source pair restricted to the observation grid.
struct Sample {
    Matrix points;                 ///< rows; pendulum (t), diffusion (x, t), darcy (x1, x2)
    Matrix u;                      ///< rows x components
    Vector f;                      ///< rows
    std::vector<bool> on_boundary; ///< boundary/initial nodes carrying known data
};

struct GenerationOptions {
    int count = 20;
    std::uint64_t seed = 0;
    std::uint64_t stream_offset = 0;  ///< pair i draws from stream (seed, stream_offset + i)
    double noise_ratio = 0.0;
    double beta = 0.0;
    double gp_lengthscale = 0.2;
    int gp_grid = 101;
    int fine = 0;  ///< 0: the problem's default fine resolution
};

/// Stream offset that keeps test pairs disjoint from training pairs.
inline constexpr std::uint64_t test_stream_offset = 1000000;

struct Dataset {
    BenchmarkProblem problem;
    GenerationOptions options;
    std::vector<Sample> pairs;

    [[nodiscard]] nlohmann::json manifest() const;
};

/// Pure function of (problem, options).
Dataset generate_dataset(const BenchmarkProblem& problem, const GenerationOptions& options);

/// Generates one pair; `stream` selects the random source.
Sample generate_pair(const BenchmarkProblem& problem, const GenerationOptions& options, std::uint64_t stream);

/// Writes `<dir>/pair_<i>.csv` (coordinates, u components, f) and `<dir>/manifest.json`.
void write_dataset(const Dataset& data, const std::string& dir);
void write_sample_csv(const BenchmarkProblem& problem, const Sample& s, std::ostream& out);

/// Per-pair seed derived from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0);

}  // namespace kpde

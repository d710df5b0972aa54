#include "kpde/datagen.hpp"

#include "kpde/errors.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

namespace kpde {

namespace {

constexpr double pi = std::numbers::pi;

Vector uniform_nodes(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = static_cast<double>(i) / (n - 1);
    return v;
}

}  // namespace

BenchmarkProblem BenchmarkProblem::make(ProblemId id) {
    BenchmarkProblem p;
    p.id = id;
    return p;
}

int BenchmarkProblem::fine_resolution() const noexcept {
    switch (id) {
    case ProblemId::Pendulum: return 3000;
    case ProblemId::Diffusion: return 155;
    case ProblemId::Darcy: return 155;
    }
    return 0;
}

double darcy_coefficient(double x1, double x2) {
    const double s = std::sin(pi * x1) + std::sin(pi * x2);
    return std::exp(s) + std::exp(-s);
}

std::pair<double, double> darcy_coefficient_grad(double x1, double x2) {
    const double s = std::sin(pi * x1) + std::sin(pi * x2);
    const double da = std::exp(s) - std::exp(-s);
    return {da * pi * std::cos(pi * x1), da * pi * std::cos(pi * x2)};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(salt)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

Eigen::LLT<Matrix> gp_factor(double lengthscale, const Vector& grid) {
    if (!(lengthscale > 0.0)) throw InvalidArgument("GP lengthscale must be positive");
    if (grid.size() == 0) throw InvalidArgument("GP grid is empty");
    Matrix K = gram_values(KernelSpec::gaussian(lengthscale), grid, grid);
    K.diagonal().array() += 1e-10;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) throw NumericalFailure("GP covariance factorization failed", 1e-10);
    return llt;
}

Vector standard_normals(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    Vector xi(n);
    for (auto& v : xi) v = N01(rng);
    return xi;
}

}  // namespace

Vector sample_gp_source(double lengthscale, const Vector& grid, std::uint64_t seed) {
    const Eigen::LLT<Matrix> llt = gp_factor(lengthscale, grid);
    return llt.matrixL() * standard_normals(grid.size(), seed);
}

GpSource::GpSource(double lengthscale, Vector grid, std::uint64_t seed)
    : lengthscale_(lengthscale), grid_(std::move(grid)) {
    const Eigen::LLT<Matrix> llt = gp_factor(lengthscale_, grid_);
    const Vector xi = standard_normals(grid_.size(), seed);
    values_ = llt.matrixL() * xi;
    // (K + jI)^-1 L xi = L^-T xi
    weights_ = llt.matrixU().solve(xi);
}

double GpSource::operator()(double t) const {
    const double c = -0.5 / (lengthscale_ * lengthscale_);
    double v = 0.0;
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
        const double r = t - grid_[i];
        v += weights_[i] * std::exp(c * r * r);
    }
    return v;
}

Forcing1D perturb_forcing(Forcing1D f, double beta) {
    if (beta == 0.0) return f;
    return [f = std::move(f), beta](double t) { return f(t) + beta * std::sin(5.0 * pi * t); };
}

Trajectory solve_pendulum_reference(const Forcing1D& f, double k, double t_end, int fine_steps) {
    if (fine_steps < 1000) throw InvalidArgument("pendulum reference needs at least 1000 steps");
    if (!(t_end > 0.0)) throw InvalidArgument("pendulum horizon must be positive");
    const double h = t_end / fine_steps;
    Trajectory tr;
    tr.times.resize(fine_steps + 1);
    tr.states.resize(fine_steps + 1, 2);
    double u1 = 0.0, u2 = 0.0;
    tr.times[0] = 0.0;
    tr.states.row(0) << u1, u2;
    auto rhs = [&](double t, double a, double b, double& da, double& db) {
        da = b;
        db = -k * std::sin(a) + f(t);
    };
    for (int n = 0; n < fine_steps; ++n) {
        const double t = n * h;
        double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
        rhs(t, u1, u2, k1a, k1b);
        rhs(t + 0.5 * h, u1 + 0.5 * h * k1a, u2 + 0.5 * h * k1b, k2a, k2b);
        rhs(t + 0.5 * h, u1 + 0.5 * h * k2a, u2 + 0.5 * h * k2b, k3a, k3b);
        rhs(t + h, u1 + h * k3a, u2 + h * k3b, k4a, k4b);
        u1 += h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a);
        u2 += h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b);
        if (!std::isfinite(u1) || !std::isfinite(u2)) throw NumericalFailure("pendulum integration diverged");
        tr.times[n + 1] = (n + 1) * h;
        tr.states.row(n + 1) << u1, u2;
    }
    return tr;
}

SpaceTimeField solve_diffusion_reference(const Forcing2D& f, int nx, int nt, double diffusivity, double reaction) {
    if (nx < 100 || nt < 100) throw InvalidArgument("diffusion reference needs at least 100 nodes per axis");
    SpaceTimeField out;
    out.x = uniform_nodes(nx);
    out.t = uniform_nodes(nt);
    out.values = Matrix::Zero(nx, nt);
    const double h = 1.0 / (nx - 1);
    const double dt = 1.0 / (nt - 1);
    const int m = nx - 2;
    const double r = 0.5 * dt * diffusivity / (h * h);

    // (1 + 2r) on the diagonal, -r off it; factor once (Thomas).
    std::vector<double> cprime(static_cast<std::size_t>(m)), denom(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double b = 1.0 + 2.0 * r;
        denom[i] = i == 0 ? b : b - (-r) * cprime[i - 1];
        cprime[i] = -r / denom[i];
    }

    Vector u = Vector::Zero(nx);
    Vector nonlin_prev = Vector::Zero(nx);
    Vector rhs(m), y(m);
    for (int n = 0; n + 1 < nt; ++n) {
        const double th = (n + 0.5) * dt;
        Vector nonlin = reaction * u.array().square();
        const Vector extrap = n == 0 ? nonlin : Vector(1.5 * nonlin - 0.5 * nonlin_prev);
        for (int i = 1; i <= m; ++i) {
            rhs[i - 1] = u[i] + r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + dt * (extrap[i] + f(out.x[i], th));
        }
        for (int i = 0; i < m; ++i) {
            const double prev = i == 0 ? 0.0 : y[i - 1];
            y[i] = (rhs[i] - (-r) * prev) / denom[i];
        }
        for (int i = m - 2; i >= 0; --i) y[i] -= cprime[i] * y[i + 1];
        nonlin_prev = nonlin;
        u.segment(1, m) = y;
        if (!u.allFinite()) throw NumericalFailure("diffusion time stepping became non-finite");
        out.values.col(n + 1) = u;
    }
    return out;
}

DarcySolver::DarcySolver(int n) : n_(n) {
    if (n < 101) throw InvalidArgument("Darcy reference needs at least 101 nodes per side");
    const int m = n - 2;
    const double h = 1.0 / (n - 1);
    const double ih2 = 1.0 / (h * h);
    const Vector x = uniform_nodes(n);
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = darcy_coefficient(x[i], x[j]);
    auto face = [](double p, double q) { return 2.0 * p * q / (p + q); };
    auto idx = [m](int i, int j) { return (i - 1) * m + (j - 1); };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5 * m * m));
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= m; ++j) {
            const double e = face(a(i, j), a(i + 1, j));
            const double w = face(a(i, j), a(i - 1, j));
            const double nn = face(a(i, j), a(i, j + 1));
            const double s = face(a(i, j), a(i, j - 1));
            const int row = idx(i, j);
            trip.emplace_back(row, row, (e + w + nn + s) * ih2);
            if (i < m) trip.emplace_back(row, idx(i + 1, j), -e * ih2);
            if (i > 1) trip.emplace_back(row, idx(i - 1, j), -w * ih2);
            if (j < m) trip.emplace_back(row, idx(i, j + 1), -nn * ih2);
            if (j > 1) trip.emplace_back(row, idx(i, j - 1), -s * ih2);
        }
    }
    Eigen::SparseMatrix<double> A(m * m, m * m);
    A.setFromTriplets(trip.begin(), trip.end());
    solver_.compute(A);
    if (solver_.info() != Eigen::Success) throw NumericalFailure("Darcy system factorization failed");
}

PlanarField DarcySolver::solve(const Forcing2D& f) const {
    const int n = n_;
    const int m = n - 2;
    PlanarField out;
    out.x1 = uniform_nodes(n);
    out.x2 = out.x1;
    Vector rhs(m * m);
    for (int i = 1; i <= m; ++i)
        for (int j = 1; j <= m; ++j) rhs[(i - 1) * m + (j - 1)] = f(out.x1[i], out.x2[j]);
    const Vector sol = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success || !sol.allFinite()) throw NumericalFailure("Darcy solve failed");
    out.values = Matrix::Zero(n, n);
    for (int i = 1; i <= m; ++i)
        for (int j = 1; j <= m; ++j) out.values(i, j) = sol[(i - 1) * m + (j - 1)];
    return out;
}

PlanarField solve_darcy_reference(const Forcing2D& f, int n) { return DarcySolver(n).solve(f); }

std::vector<int> coincident_indices(const Vector& fine, const Vector& coarse) {
    if (fine.size() == 0) throw InvalidArgument("fine grid is empty");
    const double extent = std::max(1.0, std::abs(fine[fine.size() - 1] - fine[0]));
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(coarse.size()));
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < coarse.size(); ++c) {
        while (k < fine.size() && fine[k] < coarse[c] - 1e-12 * extent) ++k;
        if (k == fine.size() || std::abs(fine[k] - coarse[c]) > 1e-12 * extent) {
            throw InvalidArgument("coarse node " + std::to_string(coarse[c]) + " is not a fine grid node");
        }
        out.push_back(static_cast<int>(k));
    }
    return out;
}

Matrix subsample(const Matrix& fine, const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (rows[i] < 0 || rows[i] >= fine.rows() || cols[j] < 0 || cols[j] >= fine.cols()) {
                throw InvalidArgument("subsample index out of range");
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fine(rows[i], cols[j]);
        }
    }
    return out;
}

Vector add_noise(const Vector& values, double ratio, std::uint64_t seed, const std::vector<bool>* skip) {
    if (!(ratio >= 0.0)) throw InvalidArgument("noise ratio must be nonnegative");
    if (ratio == 0.0 || values.size() == 0) return values;
    if (skip && static_cast<Eigen::Index>(skip->size()) != values.size()) {
        throw InvalidArgument("noise mask length mismatch");
    }
    const double rms = std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, ratio * rms);
    Vector out = values;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double e = N(rng);
        if (skip && (*skip)[static_cast<std::size_t>(i)]) continue;
        out[i] += e;
    }
    return out;
}

namespace {

// Darcy pairs share one factorization.
Sample generate_darcy_pair(const BenchmarkProblem& problem, const GenerationOptions& options, std::uint64_t stream,
                           const DarcySolver& solver) {
    const GpSource source(options.gp_lengthscale, uniform_nodes(options.gp_grid),
                          derive_seed(options.seed, stream, 0));
    const Forcing1D f = perturb_forcing([&source](double s) { return source(s); }, options.beta);
    const PlanarField fld = solver.solve([&f](double, double x2) { return f(x2); });
    const Vector coarse = uniform_nodes(problem.coarse_nodes());
    const std::vector<int> ix = coincident_indices(fld.x1, coarse);
    const Matrix U = subsample(fld.values, ix, ix);
    const Eigen::Index n = coarse.size();
    Sample s;
    s.points.resize(n * n, 2);
    s.u.resize(n * n, 1);
    s.f.resize(n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index r = i * n + j;
            s.points.row(r) << coarse[i], coarse[j];
            s.u(r, 0) = U(i, j);
            s.f[r] = f(coarse[j]);
            s.on_boundary.push_back(i == 0 || j == 0 || i == n - 1 || j == n - 1);
        }
    }
    if (options.noise_ratio > 0.0) {
        s.u.col(0) = add_noise(s.u.col(0), options.noise_ratio, derive_seed(options.seed, stream, 1), &s.on_boundary);
        s.f = add_noise(s.f, options.noise_ratio, derive_seed(options.seed, stream, 100), &s.on_boundary);
    }
    return s;
}

}  // namespace

Sample generate_pair(const BenchmarkProblem& problem, const GenerationOptions& options, std::uint64_t stream) {
    const int fine = options.fine > 0 ? options.fine : problem.fine_resolution();
    const GpSource source(options.gp_lengthscale, uniform_nodes(options.gp_grid),
                          derive_seed(options.seed, stream, 0));
    const Forcing1D f = perturb_forcing([&source](double s) { return source(s); }, options.beta);

    Sample s;
    switch (problem.id) {
    case ProblemId::Pendulum: {
        const Trajectory tr = solve_pendulum_reference(f, problem.stiffness, 1.0, fine);
        const Vector coarse = uniform_nodes(problem.coarse_nodes());
        const std::vector<int> idx = coincident_indices(tr.times, coarse);
        const Eigen::Index n = coarse.size();
        s.points = coarse;
        s.u.resize(n, 2);
        s.f.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            s.u.row(j) = tr.states.row(idx[static_cast<std::size_t>(j)]);
            s.f[j] = f(coarse[j]);
            s.on_boundary.push_back(j == 0);
        }
        break;
    }
    case ProblemId::Diffusion: {
        const SpaceTimeField fld = solve_diffusion_reference([&f](double x, double) { return f(x); }, fine, fine,
                                                             problem.diffusivity, problem.reaction);
        const Vector coarse = uniform_nodes(problem.coarse_nodes());
        const std::vector<int> ix = coincident_indices(fld.x, coarse);
        const std::vector<int> it = coincident_indices(fld.t, coarse);
        const Matrix U = subsample(fld.values, ix, it);
        const Eigen::Index n = coarse.size();
        s.points.resize(n * n, 2);
        s.u.resize(n * n, 1);
        s.f.resize(n * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const Eigen::Index r = i * n + j;
                s.points.row(r) << coarse[i], coarse[j];
                s.u(r, 0) = U(i, j);
                s.f[r] = f(coarse[i]);
                s.on_boundary.push_back(i == 0 || i == n - 1 || j == 0);
            }
        }
        break;
    }
    case ProblemId::Darcy: return generate_darcy_pair(problem, options, stream, DarcySolver(fine));
    }

    if (options.noise_ratio > 0.0) {
        for (Eigen::Index c = 0; c < s.u.cols(); ++c) {
            s.u.col(c) = add_noise(s.u.col(c), options.noise_ratio,
                                   derive_seed(options.seed, stream, 1 + static_cast<std::uint64_t>(c)),
                                   &s.on_boundary);
        }
        s.f = add_noise(s.f, options.noise_ratio, derive_seed(options.seed, stream, 100), &s.on_boundary);
    }
    return s;
}

Dataset generate_dataset(const BenchmarkProblem& problem, const GenerationOptions& options) {
    if (options.count < 1) throw InvalidArgument("dataset needs at least one pair");
    Dataset d;
    d.problem = problem;
    d.options = options;
    d.pairs.reserve(static_cast<std::size_t>(options.count));
    if (problem.id == ProblemId::Darcy) {
        const DarcySolver solver(options.fine > 0 ? options.fine : problem.fine_resolution());
        for (int i = 0; i < options.count; ++i) {
            d.pairs.push_back(generate_darcy_pair(problem, options, options.stream_offset + i, solver));
        }
        return d;
    }
    for (int i = 0; i < options.count; ++i) d.pairs.push_back(generate_pair(problem, options, options.stream_offset + i));
    return d;
}

nlohmann::json Dataset::manifest() const {
    nlohmann::json j;
    j["problem"] = to_string(problem.id);
    j["count"] = options.count;
    j["seed"] = options.seed;
    j["stream_offset"] = options.stream_offset;
    j["noise_ratio"] = options.noise_ratio;
    j["beta"] = options.beta;
    j["gp_lengthscale"] = options.gp_lengthscale;
    j["gp_grid"] = options.gp_grid;
    j["fine_resolution"] = options.fine > 0 ? options.fine : problem.fine_resolution();
    j["coarse_nodes"] = problem.coarse_nodes();
    nlohmann::json defaults = nlohmann::json::array();
    if (problem.id == ProblemId::Pendulum) {
        j["stiffness"] = problem.stiffness;
        j["t_end"] = 1.0;
        defaults.push_back("stiffness k = 1");
        defaults.push_back("time horizon [0, 1]");
    }
    if (problem.id == ProblemId::Diffusion) defaults.push_back("GP lengthscale 0.2 for diffusion sources");
    defaults.push_back("fine resolution " + std::to_string(options.fine > 0 ? options.fine : problem.fine_resolution()));
    j["non_paper_defaults"] = defaults;
    return j;
}

void write_sample_csv(const BenchmarkProblem& problem, const Sample& s, std::ostream& out) {
    switch (problem.id) {
    case ProblemId::Pendulum: out << "t,u1,u2,f\n"; break;
    case ProblemId::Diffusion: out << "x,t,u,f\n"; break;
    case ProblemId::Darcy: out << "x1,x2,u,f\n"; break;
    }
    out.precision(17);
    for (Eigen::Index r = 0; r < s.points.rows(); ++r) {
        for (Eigen::Index c = 0; c < s.points.cols(); ++c) out << s.points(r, c) << ',';
        for (Eigen::Index c = 0; c < s.u.cols(); ++c) out << s.u(r, c) << ',';
        out << s.f[r] << '\n';
    }
}

void write_dataset(const Dataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
        const std::string path = dir + "/pair_" + std::to_string(i) + ".csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        write_sample_csv(data.problem, data.pairs[i], out);
    }
    std::ofstream man(dir + "/manifest.json");
    if (!man) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    man << data.manifest().dump(2) << '\n';
}

}  // namespace kpde

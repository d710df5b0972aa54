#include "kpde/collocation.hpp"

#include "kpde/errors.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

namespace kpde {

PointwiseEval IdentityModel::evaluate(const Matrix& points, const Matrix& local) const {
    if (local.cols() != n_) throw InvalidArgument("identity model: local functional count mismatch");
    PointwiseEval out;
    out.residual = local;
    for (int e = 0; e < n_; ++e) {
        Matrix J = Matrix::Zero(points.rows(), n_);
        J.col(e).setOnes();
        out.jacobian.push_back(std::move(J));
    }
    return out;
}

EquationModel::EquationModel(std::vector<EquationTerm> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_) {
        if (!t.equation) throw InvalidArgument("equation term without an equation");
        if (static_cast<int>(t.features.size()) != t.equation->feature_dim()) {
            throw InvalidArgument("equation term feature map does not match the equation's layout");
        }
    }
}

PointwiseEval EquationModel::evaluate(const Matrix& points, const Matrix& local) const {
    PointwiseEval out;
    const Eigen::Index n = points.rows();
    out.residual.resize(n, equations());
    for (std::size_t e = 0; e < terms_.size(); ++e) {
        const EquationTerm& t = terms_[e];
        Matrix S(n, static_cast<Eigen::Index>(t.features.size()));
        for (std::size_t f = 0; f < t.features.size(); ++f) {
            const FeatureSource& src = t.features[f];
            const Matrix& from = src.kind == FeatureSource::Kind::Coordinate ? points : local;
            if (src.index < 0 || src.index >= from.cols()) throw InvalidArgument("feature source index out of range");
            S.col(static_cast<Eigen::Index>(f)) = from.col(src.index);
        }
        Matrix grads;
        const Vector vals = t.equation->eval_rows(S, &grads);
        Vector r = t.sign * vals;
        Matrix J = Matrix::Zero(n, local.cols());
        for (const auto& [k, a] : t.linear) {
            r += a * local.col(k);
            J.col(k).array() += a;
        }
        for (std::size_t f = 0; f < t.features.size(); ++f) {
            if (t.features[f].kind == FeatureSource::Kind::Local) {
                J.col(t.features[f].index) += t.sign * grads.col(static_cast<Eigen::Index>(f));
            }
        }
        out.residual.col(static_cast<Eigen::Index>(e)) = r;
        out.jacobian.push_back(std::move(J));
    }
    return out;
}

PointwiseEval FunctionModel::evaluate(const Matrix& points, const Matrix& local) const {
    PointwiseEval out;
    const Eigen::Index n = points.rows();
    out.residual.resize(n, n_);
    for (int e = 0; e < n_; ++e) out.jacobian.emplace_back(n, local.cols());
    Vector r(n_);
    Matrix J(n_, local.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        J.setZero();
        fn_(points.row(j).transpose(), local.row(j).transpose(), r, J);
        out.residual.row(j) = r.transpose();
        for (int e = 0; e < n_; ++e) out.jacobian[static_cast<std::size_t>(e)].row(j) = J.row(e);
    }
    return out;
}

void CollocationProblem::validate() const {
    if (components < 1) throw InvalidArgument("collocation problem needs at least one component");
    if (!interior_model) throw InvalidArgument("collocation problem has no interior model");
    if (interior_ops.empty()) throw InvalidArgument("collocation problem has no interior functionals");
    if (!(lambda_p > 0.0) || !(lambda_b > 0.0)) throw InvalidArgument("lambda_P and lambda_B must be positive");
    if (!(nugget >= 0.0)) throw InvalidArgument("solver nugget must be nonnegative");
    if (interior_targets.rows() != interior_points.rows() || interior_targets.cols() != interior_model->equations()) {
        throw InvalidArgument("interior targets must be points x equations");
    }
    if (boundary_points.rows() > 0) {
        if (!boundary_model || boundary_ops.empty()) throw InvalidArgument("boundary points need a model and functionals");
        if (boundary_targets.rows() != boundary_points.rows() || boundary_targets.cols() != boundary_model->equations()) {
            throw InvalidArgument("boundary targets must be points x equations");
        }
        if (boundary_points.cols() != interior_points.cols()) throw InvalidArgument("boundary/interior dimension mismatch");
        for (Eigen::Index i = 0; i < interior_points.rows(); ++i) {
            for (Eigen::Index j = 0; j < boundary_points.rows(); ++j) {
                if ((interior_points.row(i) - boundary_points.row(j)).squaredNorm() == 0.0) {
                    throw InvalidArgument("interior and boundary point sets overlap");
                }
            }
        }
    }
    for (const auto* ops : {&interior_ops, &boundary_ops}) {
        for (const auto& op : *ops) {
            if (op.component < 0 || op.component >= components) throw InvalidArgument("functional component out of range");
        }
    }
}

Eigen::Index CollocationProblem::functional_count() const {
    return interior_points.rows() * static_cast<Eigen::Index>(interior_ops.size()) +
           boundary_points.rows() * static_cast<Eigen::Index>(boundary_ops.size());
}

Matrix Assembly::regularized() const {
    return scale.asDiagonal() * factorization.matrix() * scale.asDiagonal();
}

Vector Assembly::solve(const Vector& z) const {
    const Vector scaled = z.cwiseQuotient(scale);
    return factorization.solve(scaled).col(0).cwiseQuotient(scale);
}

Assembly assemble(const CollocationProblem& problem) {
    problem.validate();
    Assembly a;
    a.functionals.reserve(static_cast<std::size_t>(problem.functional_count()));
    for (Eigen::Index j = 0; j < problem.interior_points.rows(); ++j) {
        for (const auto& op : problem.interior_ops) {
            a.functionals.push_back({problem.interior_points.row(j).transpose(), op.op, op.component});
        }
    }
    for (Eigen::Index j = 0; j < problem.boundary_points.rows(); ++j) {
        for (const auto& op : problem.boundary_ops) {
            a.functionals.push_back({problem.boundary_points.row(j).transpose(), op.op, op.component});
        }
    }
    a.gram = gram(problem.kernel, a.functionals, a.functionals);
    a.scale = a.gram.diagonal().cwiseSqrt();
    if ((a.scale.array() <= 0.0).any()) throw NumericalFailure("functional with zero prior variance");
    const Vector inv = a.scale.cwiseInverse();
    const Matrix scaled = inv.asDiagonal() * a.gram * inv.asDiagonal();
    a.factorization = factorize(scaled, problem.nugget);
    return a;
}

namespace {

struct Linearization {
    Vector residual;  ///< model output minus targets
    Vector weight;    ///< 1 / lambda^2 per residual
    Eigen::SparseMatrix<double, Eigen::RowMajor> jacobian;
};

// Residuals and their Jacobian with respect to the stacked z.
Linearization linearize(const CollocationProblem& p, const Vector& z, bool with_jacobian) {
    const Eigen::Index nI = p.interior_points.rows();
    const Eigen::Index P = static_cast<Eigen::Index>(p.interior_ops.size());
    const Eigen::Index nB = p.boundary_points.rows();
    const Eigen::Index B = static_cast<Eigen::Index>(p.boundary_ops.size());
    const Eigen::Index EI = p.interior_model->equations();
    const Eigen::Index EB = nB > 0 ? p.boundary_model->equations() : 0;
    const Eigen::Index m = nI * EI + nB * EB;

    Linearization lin;
    lin.residual.resize(m);
    lin.weight.resize(m);
    std::vector<Eigen::Triplet<double>> trip;

    auto block = [&](const PointwiseModel& model, const Matrix& points, const Matrix& targets, Eigen::Index npts,
                     Eigen::Index nloc, Eigen::Index zoff, Eigen::Index roff, double w) {
        const Matrix local = Eigen::Map<const Matrix>(z.data() + zoff, nloc, npts).transpose();
        const PointwiseEval ev = model.evaluate(points, local);
        const Eigen::Index E = model.equations();
        for (Eigen::Index j = 0; j < npts; ++j) {
            for (Eigen::Index e = 0; e < E; ++e) {
                const Eigen::Index row = roff + j * E + e;
                lin.residual[row] = ev.residual(j, e) - targets(j, e);
                lin.weight[row] = w;
                if (!with_jacobian) continue;
                const Matrix& J = ev.jacobian[static_cast<std::size_t>(e)];
                for (Eigen::Index k = 0; k < nloc; ++k) {
                    if (J(j, k) != 0.0) trip.emplace_back(row, zoff + j * nloc + k, J(j, k));
                }
            }
        }
    };
    block(*p.interior_model, p.interior_points, p.interior_targets, nI, P, 0, 0, 1.0 / (p.lambda_p * p.lambda_p));
    if (nB > 0) {
        block(*p.boundary_model, p.boundary_points, p.boundary_targets, nB, B, nI * P, nI * EI,
              1.0 / (p.lambda_b * p.lambda_b));
    }
    if (with_jacobian) {
        lin.jacobian.resize(m, z.size());
        lin.jacobian.setFromTriplets(trip.begin(), trip.end());
    }
    return lin;
}

double misfit(const Linearization& lin) {
    return (lin.residual.array().square() * lin.weight.array()).sum();
}

}  // namespace

double objective(const CollocationProblem& problem, const Assembly& assembly, const Vector& z) {
    const Linearization lin = linearize(problem, z, false);
    return z.dot(assembly.solve(z)) + misfit(lin);
}

Vector objective_gradient(const CollocationProblem& problem, const Assembly& assembly, const Vector& z) {
    const Linearization lin = linearize(problem, z, true);
    const Vector wr = lin.weight.cwiseProduct(lin.residual);
    return 2.0 * assembly.solve(z) + 2.0 * (lin.jacobian.transpose() * wr);
}

SolverState gauss_newton_solve(const CollocationProblem& problem, const Assembly& assembly,
                               const std::optional<Vector>& init, const GaussNewtonOptions& options) {
    const Eigen::Index N = static_cast<Eigen::Index>(assembly.functionals.size());
    const Matrix G = assembly.regularized();

    SolverState st;
    st.coefficients = init ? assembly.solve(*init) : Vector::Zero(N);
    st.z = G * st.coefficients;

    // Working in coefficient space, z = G c, keeps G^-1 out of every step.
    auto eval = [&](const Vector& c, Vector& z) {
        z = G * c;
        const double prior = c.dot(z);
        return prior + misfit(linearize(problem, z, false));
    };
    st.objective = eval(st.coefficients, st.z);
    if (!std::isfinite(st.objective)) throw NumericalFailure("non-finite objective at the initial state");
    st.trace.push_back({0, st.objective, 0.0});

    for (int it = 1; it <= options.iterations; ++it) {
        const Linearization lin = linearize(problem, st.z, true);
        const auto& J = lin.jacobian;
        // min_w w^T G^-1 w + |r + J (w - z)|_W^2  gives  w = -G J^T (J G J^T + W^-1)^-1 (r - J z)
        const Vector b = lin.residual - J * st.z;
        const Matrix JG = J * G;
        Matrix M = JG * J.transpose();
        M.diagonal() += lin.weight.cwiseInverse();
        Eigen::LLT<Matrix> llt(M);
        if (llt.info() != Eigen::Success) throw NumericalFailure("Gauss-Newton normal matrix is not positive definite");
        const Vector c_new = -(J.transpose() * llt.solve(b));
        const Vector dir = c_new - st.coefficients;

        double step = 1.0;
        Vector z_try;
        double f_try = eval(c_new, z_try);
        if (options.line_search) {
            int halvings = 0;
            while (!(f_try < st.objective) && halvings < options.max_halvings) {
                step *= 0.5;
                ++halvings;
                f_try = eval(st.coefficients + step * dir, z_try);
            }
            if (!(f_try < st.objective)) {
                // line search exhausted: keep the best state
                st.iteration = it;
                st.converged = false;
                return st;
            }
        }
        if (!std::isfinite(f_try)) throw NumericalFailure("non-finite objective during Gauss-Newton");
        const double prev = st.objective;
        st.coefficients += step * dir;
        st.z = z_try;
        st.objective = f_try;
        st.iteration = it;
        st.trace.push_back({it, f_try, step});
        if (std::abs(prev - f_try) <= options.rel_tol * std::abs(prev)) {
            st.converged = true;
            break;
        }
    }
    if (st.iteration == options.iterations) st.converged = true;
    return st;
}

SolverState lbfgs_solve(const CollocationProblem& problem, const Assembly& assembly, const std::optional<Vector>& init,
                        const LbfgsOptions& options) {
    const Eigen::Index N = static_cast<Eigen::Index>(assembly.functionals.size());
    // z = L v with L L^T = G_reg, so the prior term becomes |v|^2.
    const Matrix L = assembly.scale.asDiagonal() * assembly.factorization.factor();

    auto fg = [&](const Vector& v, Vector& z, Vector* g) {
        z = L * v;
        const Linearization lin = linearize(problem, z, g != nullptr);
        const double f = v.squaredNorm() + misfit(lin);
        if (g) {
            const Vector wr = lin.weight.cwiseProduct(lin.residual);
            const Vector gz = lin.jacobian.transpose() * wr;
            *g = 2.0 * v + 2.0 * (L.transpose() * gz);
        }
        return f;
    };

    SolverState st;
    Vector v = Vector::Zero(N);
    if (init) v = L.triangularView<Eigen::Lower>().solve(*init);
    Vector g;
    Vector z;
    double f = fg(v, z, &g);
    if (!std::isfinite(f)) throw NumericalFailure("non-finite objective at the initial state");
    st.trace.push_back({0, f, 0.0});

    std::deque<Vector> S, Y;
    std::deque<double> rho;
    for (int it = 1; it <= options.steps; ++it) {
        // two-loop recursion
        Vector q = g;
        std::vector<double> alpha(S.size());
        for (std::size_t k = S.size(); k-- > 0;) {
            alpha[k] = rho[k] * S[k].dot(q);
            q -= alpha[k] * Y[k];
        }
        double gamma = 1.0;
        if (!S.empty()) {
            gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
        } else {
            gamma = 1.0 / std::max(1.0, g.cwiseAbs().sum());
        }
        q *= gamma;
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double beta = rho[k] * Y[k].dot(q);
            q += (alpha[k] - beta) * S[k];
        }
        Vector d = -q;
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g / std::max(1.0, g.cwiseAbs().sum());
            slope = g.dot(d);
        }
        if (slope == 0.0) {
            st.converged = true;
            break;
        }

        double step = options.step_size;
        Vector v_new, z_new, g_new;
        double f_new = 0.0;
        bool accepted = false;
        for (int bt = 0; bt <= options.max_backtracks; ++bt) {
            v_new = v + step * d;
            f_new = fg(v_new, z_new, &g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            st.converged = false;
            st.iteration = it - 1;
            break;
        }
        const Vector s = v_new - v;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            S.push_back(s);
            Y.push_back(y);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > options.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        const double prev = f;
        v = v_new;
        z = z_new;
        g = g_new;
        f = f_new;
        st.iteration = it;
        st.trace.push_back({it, f, step});
        if (std::abs(prev - f) <= options.rel_tol * std::abs(prev) || f == 0.0) {
            st.converged = true;
            break;
        }
    }
    if (st.iteration == options.steps) st.converged = true;
    st.z = z;
    st.objective = f;
    st.coefficients = assembly.solve(z);
    return st;
}

PredictedSolution::PredictedSolution(KernelSpec kernel, std::vector<Functional> functionals, Vector coefficients)
    : kernel_(std::move(kernel)), functionals_(std::move(functionals)), coefficients_(std::move(coefficients)) {
    if (static_cast<Eigen::Index>(functionals_.size()) != coefficients_.size()) {
        throw InvalidArgument("predicted solution: coefficient count mismatch");
    }
}

double PredictedSolution::eval(int component, const DiffOp& op, const Point& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < functionals_.size(); ++i) {
        const Functional& f = functionals_[i];
        if (f.component != component) continue;
        v += coefficients_[static_cast<Eigen::Index>(i)] * kernel_apply(kernel_, op, f.op, x, f.point);
    }
    return v;
}

Vector PredictedSolution::eval_many(int component, const DiffOp& op, const Matrix& points) const {
    Vector out(points.rows());
    for (Eigen::Index j = 0; j < points.rows(); ++j) out[j] = eval(component, op, points.row(j).transpose());
    return out;
}

PredictedSolution reconstruct(const CollocationProblem& problem, const Assembly& assembly, const SolverState& state) {
    if (state.z.size() != static_cast<Eigen::Index>(assembly.functionals.size())) {
        throw InvalidArgument("solver state does not match the assembled problem");
    }
    Vector c = assembly.solve(state.z);
    if (!c.allFinite()) throw NumericalFailure("non-finite representer coefficients");
    return PredictedSolution(problem.kernel, assembly.functionals, std::move(c));
}

void write_trace_csv(const SolverState& state, std::ostream& out) {
    out << "iteration,objective,step\n";
    out.precision(17);
    for (const auto& e : state.trace) out << e.iteration << ',' << e.objective << ',' << e.step << '\n';
}

}  // namespace kpde

#include "kpde/pipeline.hpp"

#include "kpde/errors.hpp"
#include "kpde/tuning.hpp"

#include <algorithm>
#include <cmath>

namespace kpde {

std::string to_string(Method m) {
    switch (m) {
    case Method::KernelArd: return "kernel-ARD";
    case Method::KernelPolynomial: return "kernel-polynomial";
    case Method::Sindy: return "sindy";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "kernel-ARD" || name == "kernel-ard" || name == "ard") return Method::KernelArd;
    if (name == "kernel-polynomial" || name == "polynomial") return Method::KernelPolynomial;
    if (name == "sindy") return Method::Sindy;
    throw InvalidArgument("unknown method '" + name + "'");
}

std::string to_string(SolverSettings::Backend b) {
    return b == SolverSettings::Backend::GaussNewton ? "gauss-newton" : "lbfgs";
}

SolverSettings::Backend backend_from_string(const std::string& name) {
    if (name == "gauss-newton" || name == "gn") return SolverSettings::Backend::GaussNewton;
    if (name == "lbfgs" || name == "l-bfgs") return SolverSettings::Backend::Lbfgs;
    throw InvalidArgument("unknown solver backend '" + name + "'");
}

double relative_l2(const Vector& pred, const Vector& truth) {
    if (pred.size() != truth.size()) throw InvalidArgument("relative_l2: length mismatch");
    const double n = truth.norm();
    if (!(n > 0.0)) throw InvalidArgument("relative_l2: reference has zero norm");
    return (pred - truth).norm() / n;
}

namespace {

Matrix rows_of(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

Vector entries_of(const Vector& v, const std::vector<int>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

}  // namespace

SmoothingChoice select_smoothing(const Matrix& points, const Vector& values, const SmoothingOptions& options,
                                 std::pair<double, double> range, std::uint64_t seed) {
    SearchSpace space;
    space.add("sigma", log_grid(range.first, range.second, options.candidates), range);
    const bool tune_lambda = !options.lambda_candidates.empty();
    if (tune_lambda) {
        const auto [lo, hi] = std::minmax_element(options.lambda_candidates.begin(), options.lambda_candidates.end());
        space.add("lambda_u", options.lambda_candidates, {*lo, *hi});
    }
    auto scorer = [&](const std::vector<double>& p, const std::vector<int>& train, const std::vector<int>& held) {
        const double lambda = tune_lambda ? p[1] : options.lambda_u;
        const SmoothedField f = fit_smoother(KernelSpec::gaussian(p[0]),
                                             {rows_of(points, train), entries_of(values, train), lambda});
        const Matrix test = rows_of(points, held);
        const Vector truth = entries_of(values, held);
        const Vector pred = f.eval_many(DiffOp::value(static_cast<int>(points.cols())), test);
        const double n = truth.norm();
        // held-out folds of an all-zero field carry no information
        return n > 0.0 ? (pred - truth).norm() / n : (pred - truth).norm();
    };
    const CvResult r = cv_select(scorer, static_cast<int>(points.rows()), space, options.folds, seed);
    return {r.best[0], tune_lambda ? r.best[1] : options.lambda_u};
}

SmoothedSample smooth_sample(const BenchmarkProblem& problem, const Sample& sample, const SmoothingOptions& options) {
    const int comps = problem.components();
    if (sample.u.cols() != comps) throw InvalidArgument("sample has the wrong number of components");
    if (!options.fixed_sigma && static_cast<int>(options.sigma_ranges.size()) != comps) {
        throw InvalidArgument("one smoothing range per component is required");
    }
    SmoothedSample out;
    for (int c = 0; c < comps; ++c) {
        const Vector values = sample.u.col(c);
        SmoothingChoice choice{0.0, options.lambda_u};
        if (options.fixed_sigma) {
            choice.sigma = *options.fixed_sigma;
        } else {
            choice = select_smoothing(sample.points, values, options, options.sigma_ranges[static_cast<std::size_t>(c)],
                                      options.seed + static_cast<std::uint64_t>(c));
        }
        out.sigmas.push_back(choice.sigma);
        out.lambdas.push_back(choice.lambda_u);
        out.fields.push_back(fit_smoother(KernelSpec::gaussian(choice.sigma), {sample.points, values, choice.lambda_u}));
    }
    return out;
}

FeatureLayout feature_layout(ProblemId problem) {
    FeatureLayout l;
    switch (problem) {
    case ProblemId::Pendulum: {
        const DiffOp d = DiffOp::partial(MultiIndex::unit(1, 0));
        l.columns = {FeatureColumn::field(0, DiffOp::value(1), "u1"), FeatureColumn::field(1, DiffOp::value(1), "u2"),
                     FeatureColumn::field(0, d, "u1_t"), FeatureColumn::field(1, d, "u2_t")};
        break;
    }
    case ProblemId::Diffusion:
        l.columns = {FeatureColumn::field(0, DiffOp::value(2), "u"),
                     FeatureColumn::field(0, DiffOp::partial(MultiIndex::unit(2, 1)), "u_t"),
                     FeatureColumn::field(0, DiffOp::partial(MultiIndex::unit(2, 0, 2)), "u_xx")};
        break;
    case ProblemId::Darcy:
        l.columns = {FeatureColumn::coordinate(0, "x1"),
                     FeatureColumn::coordinate(1, "x2"),
                     FeatureColumn::field(0, DiffOp::value(2), "u"),
                     FeatureColumn::field(0, DiffOp::partial(MultiIndex::unit(2, 0)), "u_x1"),
                     FeatureColumn::field(0, DiffOp::partial(MultiIndex::unit(2, 1)), "u_x2"),
                     FeatureColumn::field(0, DiffOp::laplacian(2), "lap_u")};
        break;
    }
    return l;
}

std::vector<std::vector<int>> equation_inputs(ProblemId problem) {
    switch (problem) {
    case ProblemId::Pendulum: return {{0, 1}, {0, 1}};
    case ProblemId::Diffusion: return {{0, 1, 2}};
    case ProblemId::Darcy: return {{0, 1, 2, 3, 4, 5}};
    }
    return {};
}

TrainingTable training_table(const BenchmarkProblem& problem, std::span<const Sample> samples,
                             std::span<const SmoothedSample> smoothed) {
    if (samples.size() != smoothed.size() || samples.empty()) throw InvalidArgument("training table: pair count mismatch");
    const FeatureLayout layout = feature_layout(problem.id);
    const int eqs = static_cast<int>(equation_inputs(problem.id).size());
    TrainingTable t;
    std::vector<Matrix> feats;
    std::vector<Matrix> targs;
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        std::vector<int> interior;
        for (std::size_t r = 0; r < s.on_boundary.size(); ++r) {
            if (!s.on_boundary[r]) interior.push_back(static_cast<int>(r));
        }
        const Matrix pts = rows_of(s.points, interior);
        const Matrix F = build_features(smoothed[i].fields, pts, layout);
        const Vector f = entries_of(s.f, interior);
        Matrix T(F.rows(), eqs);
        if (problem.id == ProblemId::Pendulum) {
            T.col(0) = F.col(2);
            T.col(1) = F.col(3) - f;
        } else {
            T.col(0) = f;
        }
        total += F.rows();
        t.pair.insert(t.pair.end(), static_cast<std::size_t>(F.rows()), static_cast<int>(i));
        feats.push_back(F);
        targs.push_back(T);
    }
    t.features.resize(total, layout.size());
    t.targets.resize(total, eqs);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        t.features.middleRows(r, feats[i].rows()) = feats[i];
        t.targets.middleRows(r, feats[i].rows()) = targs[i];
        r += feats[i].rows();
    }
    return t;
}

Matrix equation_features(ProblemId problem, const TrainingTable& table, int e) {
    const auto inputs = equation_inputs(problem);
    const auto& cols = inputs.at(static_cast<std::size_t>(e));
    Matrix S(table.features.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) S.col(static_cast<Eigen::Index>(k)) = table.features.col(cols[k]);
    return S;
}

namespace {

std::vector<std::string> input_names(ProblemId problem, int e) {
    const FeatureLayout l = feature_layout(problem);
    std::vector<std::string> out;
    const auto inputs = equation_inputs(problem);
    for (int c : inputs[static_cast<std::size_t>(e)]) out.push_back(l.columns[static_cast<std::size_t>(c)].name);
    return out;
}

// The exact first pendulum equation: u1_t = u2.
std::shared_ptr<const LearnedEquation> pendulum_velocity() {
    Dictionary d;
    d.terms = {{"u2", {TermFactor{1, TermFactor::Fn::Power, 1}}}};
    Vector c(1);
    c << 1.0;
    return std::make_shared<LearnedEquation>(LearnedEquation::sparse_dictionary(d, c, {"u1", "u2"}));
}

}  // namespace

LearnedModel learn_model(const BenchmarkProblem& problem, const TrainingTable& table, const LearnOptions& options) {
    LearnedModel m;
    m.method = options.method;
    m.problem = problem.id;
    const int eqs = static_cast<int>(equation_inputs(problem.id).size());
    if (options.method == Method::Sindy) {
        const Dictionary dict = build_dictionary(problem.id);
        const int e = eqs - 1;
        const Matrix S = equation_features(problem.id, table, e);
        const StlsqResult r = stlsq(dict.design(S), table.targets.col(e), options.stlsq);
        if (problem.id == ProblemId::Pendulum) m.equations.push_back(pendulum_velocity());
        m.equations.push_back(std::make_shared<LearnedEquation>(as_equation(dict, r.coefficients, input_names(problem.id, e))));
        return m;
    }
    if (static_cast<int>(options.kernels.size()) != eqs) throw InvalidArgument("one Step (ii) kernel per equation is required");
    for (int e = 0; e < eqs; ++e) {
        const KernelSpec& k = options.kernels[static_cast<std::size_t>(e)];
        const bool want_ard = options.method == Method::KernelArd;
        if (want_ard && k.family() == KernelFamily::Polynomial) throw InvalidArgument("ARD method given a polynomial kernel");
        if (!want_ard && k.family() != KernelFamily::Polynomial) throw InvalidArgument("polynomial method given a Gaussian kernel");
        const double lambda = options.equation_lambda_k.empty() ? options.lambda_k
                                                                : options.equation_lambda_k.at(static_cast<std::size_t>(e));
        const Matrix S = equation_features(problem.id, table, e);
        m.equations.push_back(std::make_shared<LearnedEquation>(
            fit_equation(k, S, table.targets.col(e), lambda, input_names(problem.id, e))));
    }
    return m;
}

nlohmann::json LearnedModel::to_json() const {
    nlohmann::json j;
    j["method"] = to_string(method);
    j["problem"] = to_string(problem);
    j["equations"] = nlohmann::json::array();
    for (const auto& e : equations) j["equations"].push_back(e->to_json());
    return j;
}

LearnedModel LearnedModel::from_json(const nlohmann::json& doc) {
    LearnedModel m;
    m.method = method_from_string(doc.at("method").get<std::string>());
    m.problem = problem_from_string(doc.at("problem").get<std::string>());
    for (const auto& e : doc.at("equations")) m.equations.push_back(std::make_shared<LearnedEquation>(LearnedEquation::from_json(e)));
    if (m.equations.size() != equation_inputs(m.problem).size()) throw InvalidArgument("model has the wrong number of equations");
    return m;
}

KernelTuning tune_kernels(const BenchmarkProblem& problem, const TrainingTable& table, Method method,
                          const std::vector<int>& degrees, const KernelSearch& search, std::uint64_t seed) {
    if (method == Method::Sindy) throw InvalidArgument("SINDy has no kernel to tune");
    const int eqs = static_cast<int>(equation_inputs(problem.id).size());
    if (method == Method::KernelPolynomial && static_cast<int>(degrees.size()) != eqs) {
        throw InvalidArgument("one polynomial degree per equation is required");
    }
    int pairs = 0;
    for (int p : table.pair) pairs = std::max(pairs, p + 1);
    std::vector<std::vector<int>> rows_by_pair(static_cast<std::size_t>(pairs));
    for (std::size_t r = 0; r < table.pair.size(); ++r) rows_by_pair[static_cast<std::size_t>(table.pair[r])].push_back(static_cast<int>(r));
    auto gather = [&](const std::vector<int>& ps) {
        std::vector<int> rows;
        for (int p : ps) rows.insert(rows.end(), rows_by_pair[static_cast<std::size_t>(p)].begin(), rows_by_pair[static_cast<std::size_t>(p)].end());
        return rows;
    };
    const auto [klo, khi] = std::minmax_element(search.lambda_k.begin(), search.lambda_k.end());

    KernelTuning out;
    out.options.method = method;
    for (int e = 0; e < eqs; ++e) {
        const Matrix S = equation_features(problem.id, table, e);
        const Vector y = table.targets.col(e);
        const Vector spread = ((S.rowwise() - S.colwise().mean()).array().square().colwise().mean()).sqrt();
        SearchSpace space;
        if (method == Method::KernelArd) {
            const auto [lo, hi] = std::minmax_element(search.ard_scales.begin(), search.ard_scales.end());
            space.add("scale", search.ard_scales, {*lo, *hi});
        } else {
            const auto [lo, hi] = std::minmax_element(search.poly_offsets.begin(), search.poly_offsets.end());
            space.add("offset", search.poly_offsets, {*lo, *hi});
        }
        space.add("lambda_k", search.lambda_k, {*klo, *khi});
        const bool tune_degree = method == Method::KernelPolynomial && !search.poly_degrees.empty();
        if (tune_degree) {
            const std::vector<double> ds(search.poly_degrees.begin(), search.poly_degrees.end());
            const auto [lo, hi] = std::minmax_element(ds.begin(), ds.end());
            space.add("degree", ds, {*lo, *hi});
        }
        auto make_kernel = [&](const std::vector<double>& p) {
            if (method == Method::KernelPolynomial) {
                const int degree = tune_degree ? static_cast<int>(p[2]) : degrees[static_cast<std::size_t>(e)];
                return KernelSpec::polynomial(degree, p[0], static_cast<int>(S.cols()));
            }
            std::vector<double> ls(static_cast<std::size_t>(S.cols()));
            // constant features get a unit scale
            for (Eigen::Index k = 0; k < S.cols(); ++k) ls[static_cast<std::size_t>(k)] = p[0] * (spread[k] > 0.0 ? spread[k] : 1.0);
            return KernelSpec::ard(ls);
        };
        auto scorer = [&](const std::vector<double>& p, const std::vector<int>& train, const std::vector<int>& held) {
            const std::vector<int> tr = gather(train), te = gather(held);
            const LearnedEquation eq = fit_equation(make_kernel(p), rows_of(S, tr), entries_of(y, tr), p[1], input_names(problem.id, e));
            return equation_discovery_error(eq, rows_of(S, te), entries_of(y, te));
        };
        CvResult r = cv_select(scorer, pairs, space, search.folds, seed + static_cast<std::uint64_t>(e));
        out.options.kernels.push_back(make_kernel(r.best));
        out.options.equation_lambda_k.push_back(r.best[1]);
        out.tables.push_back(std::move(r));
    }
    out.options.lambda_k = out.options.equation_lambda_k.front();
    return out;
}

double discovery_error(const BenchmarkProblem& problem, const LearnedModel& model, const TrainingTable& table) {
    const int e = static_cast<int>(model.equations.size()) - 1;
    const Matrix S = equation_features(problem.id, table, e);
    return equation_discovery_error(*model.equations[static_cast<std::size_t>(e)], S, table.targets.col(e));
}

namespace {

struct OpLayout {
    std::vector<ComponentOp> interior;
    std::vector<ComponentOp> boundary;
};

OpLayout op_layout(ProblemId problem) {
    OpLayout l;
    switch (problem) {
    case ProblemId::Pendulum: {
        const DiffOp d = DiffOp::partial(MultiIndex::unit(1, 0));
        l.interior = {{0, DiffOp::value(1), "u1"}, {0, d, "u1_t"}, {1, DiffOp::value(1), "u2"}, {1, d, "u2_t"}};
        l.boundary = {{0, DiffOp::value(1), "u1"}, {1, DiffOp::value(1), "u2"}};
        break;
    }
    case ProblemId::Diffusion:
        l.interior = {{0, DiffOp::value(2), "u"},
                      {0, DiffOp::partial(MultiIndex::unit(2, 1)), "u_t"},
                      {0, DiffOp::partial(MultiIndex::unit(2, 0, 2)), "u_xx"}};
        l.boundary = {{0, DiffOp::value(2), "u"}};
        break;
    case ProblemId::Darcy:
        l.interior = {{0, DiffOp::value(2), "u"},
                      {0, DiffOp::partial(MultiIndex::unit(2, 0)), "u_x1"},
                      {0, DiffOp::partial(MultiIndex::unit(2, 1)), "u_x2"},
                      {0, DiffOp::laplacian(2), "lap_u"}};
        l.boundary = {{0, DiffOp::value(2), "u"}};
        break;
    }
    return l;
}

}  // namespace

std::shared_ptr<const PointwiseModel> learned_interior_model(const BenchmarkProblem& problem, const LearnedModel& model) {
    if (model.problem != problem.id) throw InvalidArgument("model was learned for a different problem");
    using FS = FeatureSource;
    switch (problem.id) {
    case ProblemId::Pendulum: {
        // locals: u1, u1_t, u2, u2_t; residual_e = d/dt u_e - P_e(u1, u2)
        std::vector<EquationTerm> terms{
            {model.equations.at(0), {FS::local(0), FS::local(2)}, {{1, 1.0}}, -1.0},
            {model.equations.at(1), {FS::local(0), FS::local(2)}, {{3, 1.0}}, -1.0}};
        return std::make_shared<EquationModel>(std::move(terms));
    }
    case ProblemId::Diffusion:
        return std::make_shared<EquationModel>(std::vector<EquationTerm>{
            {model.equations.at(0), {FS::local(0), FS::local(1), FS::local(2)}, {}, 1.0}});
    case ProblemId::Darcy:
        return std::make_shared<EquationModel>(std::vector<EquationTerm>{
            {model.equations.at(0),
             {FS::coordinate(0), FS::coordinate(1), FS::local(0), FS::local(1), FS::local(2), FS::local(3)},
             {},
             1.0}});
    }
    throw InvalidArgument("unknown problem");
}

std::shared_ptr<const PointwiseModel> true_interior_model(const BenchmarkProblem& problem) {
    switch (problem.id) {
    case ProblemId::Pendulum: {
        const double k = problem.stiffness;
        return std::make_shared<FunctionModel>(2, [k](const Point&, const Vector& z, Vector& r, Matrix& J) {
            r[0] = z[1] - z[2];
            r[1] = z[3] + k * std::sin(z[0]);
            J(0, 1) = 1.0;
            J(0, 2) = -1.0;
            J(1, 0) = k * std::cos(z[0]);
            J(1, 3) = 1.0;
        });
    }
    case ProblemId::Diffusion: {
        const double nu = problem.diffusivity, mu = problem.reaction;
        return std::make_shared<FunctionModel>(1, [nu, mu](const Point&, const Vector& z, Vector& r, Matrix& J) {
            r[0] = z[1] - nu * z[2] - mu * z[0] * z[0];
            J(0, 0) = -2.0 * mu * z[0];
            J(0, 1) = 1.0;
            J(0, 2) = -nu;
        });
    }
    case ProblemId::Darcy:
        return std::make_shared<FunctionModel>(1, [](const Point& x, const Vector& z, Vector& r, Matrix& J) {
            const double a = darcy_coefficient(x[0], x[1]);
            const auto [a1, a2] = darcy_coefficient_grad(x[0], x[1]);
            r[0] = -a * z[3] - a1 * z[1] - a2 * z[2];
            J(0, 1) = -a1;
            J(0, 2) = -a2;
            J(0, 3) = -a;
        });
    }
    throw InvalidArgument("unknown problem");
}

CollocationProblem collocation_for(const BenchmarkProblem& problem, const Sample& sample,
                                   std::shared_ptr<const PointwiseModel> interior, const SolverSettings& settings) {
    const OpLayout ops = op_layout(problem.id);
    std::vector<int> in, bd;
    for (std::size_t r = 0; r < sample.on_boundary.size(); ++r) {
        (sample.on_boundary[r] ? bd : in).push_back(static_cast<int>(r));
    }
    CollocationProblem p;
    p.kernel = KernelSpec::gaussian(settings.sigma);
    p.components = problem.components();
    p.interior_points = rows_of(sample.points, in);
    p.interior_ops = ops.interior;
    p.interior_model = std::move(interior);
    p.interior_targets = Matrix::Zero(static_cast<Eigen::Index>(in.size()), p.interior_model->equations());
    const Vector f = entries_of(sample.f, in);
    // the forcing enters the last equation
    p.interior_targets.col(p.interior_targets.cols() - 1) = f;
    p.boundary_points = rows_of(sample.points, bd);
    p.boundary_ops = ops.boundary;
    p.boundary_model = std::make_shared<IdentityModel>(static_cast<int>(ops.boundary.size()));
    p.boundary_targets = rows_of(sample.u, bd);
    p.lambda_p = settings.lambda_p;
    p.lambda_b = settings.lambda_b;
    p.nugget = settings.nugget;
    return p;
}

CaseResult solve_case(const BenchmarkProblem& problem, const Sample& sample,
                      std::shared_ptr<const PointwiseModel> interior, const SolverSettings& settings) {
    const CollocationProblem p = collocation_for(problem, sample, std::move(interior), settings);
    const Assembly a = assemble(p);
    CaseResult out;
    if (settings.backend == SolverSettings::Backend::GaussNewton) {
        GaussNewtonOptions o;
        o.iterations = settings.iterations;
        out.state = gauss_newton_solve(p, a, std::nullopt, o);
    } else {
        if (settings.step_sizes.empty()) throw InvalidArgument("L-BFGS needs at least one step size");
        bool first = true;
        for (double step : settings.step_sizes) {
            LbfgsOptions o;
            o.steps = settings.lbfgs_steps;
            o.step_size = step;
            SolverState st = lbfgs_solve(p, a, std::nullopt, o);
            // keep the run that reached the lower objective
            if (first || st.objective < out.state.objective) {
                out.state = std::move(st);
                out.step_size = step;
                first = false;
            }
        }
    }
    const PredictedSolution sol = reconstruct(p, a, out.state);
    const int comps = problem.components();
    out.prediction.resize(sample.points.rows(), comps);
    for (int c = 0; c < comps; ++c) {
        out.prediction.col(c) = sol.eval_many(c, DiffOp::value(problem.dim()), sample.points);
    }
    const Vector pred = Eigen::Map<const Vector>(out.prediction.data(), out.prediction.size());
    const Vector truth = Eigen::Map<const Vector>(sample.u.data(), sample.u.size());
    out.error = relative_l2(pred, truth);
    return out;
}

}  // namespace kpde

#include "kpde/bench.hpp"

#include "kpde/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace kpde {

using nlohmann::json;

std::string to_string(HyperMode m) { return m == HyperMode::Preset ? "preset" : "cv"; }

HyperMode hyper_mode_from_string(const std::string& name) {
    if (name == "preset") return HyperMode::Preset;
    if (name == "cv") return HyperMode::Cv;
    throw InvalidArgument("unknown hyperparameter mode '" + name + "'");
}

SolverSettings default_solver_settings(ProblemId problem) {
    SolverSettings s;
    s.backend = SolverSettings::Backend::GaussNewton;
    switch (problem) {
    case ProblemId::Pendulum:
        s.sigma = 0.2;
        s.lambda_p = 1e-3;
        s.nugget = 1e-8;
        break;
    case ProblemId::Diffusion:
        s.sigma = 0.3;
        s.lambda_p = 1e-4;
        s.nugget = 1e-12;
        break;
    case ProblemId::Darcy:
        s.sigma = 0.3;
        s.lambda_p = 1e-3;
        s.nugget = 1e-10;
        break;
    }
    s.lambda_b = 1e-4 * s.lambda_p;
    return s;
}

namespace {

// Hyperparameter table column: exact in preset mode, nearest otherwise.
Variant column_for(const ExperimentConfig& c) {
    if (c.mode == HyperMode::Preset) return variant_for(c.training_size, c.noise_ratio);
    if (c.noise_ratio > 0.0) return Variant::Noisy20;
    return c.training_size <= 10 ? Variant::Exact10 : Variant::Exact20;
}

template <class T>
T take(const json& doc, const char* key, T fallback, std::vector<std::string>& defaults, const std::string& prefix = "") {
    if (!doc.contains(key)) {
        defaults.push_back(prefix + key);
        return fallback;
    }
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + prefix + key + "': " + e.what());
    }
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
        if (!known.contains(k)) throw ConfigError("unknown field '" + k + "' in " + where);
    }
}

bool all_positive(const std::vector<double>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x > 0.0; });
}

}  // namespace

void ExperimentConfig::validate() const {
    if (training_size < 2) throw ConfigError("training_size must be at least 2");
    if (!(noise_ratio >= 0.0) || !(noise_ratio < 1.0)) throw ConfigError("noise_ratio must be in [0, 1)");
    if (test_count < 1) throw ConfigError("test_count must be positive");
    if (betas.empty()) throw ConfigError("beta grid is empty");
    for (double b : betas) {
        if (!std::isfinite(b)) throw ConfigError("beta values must be finite");
    }
    if (!(solver.sigma > 0.0) || !(solver.lambda_p > 0.0) || !(solver.lambda_b > 0.0) || !(solver.nugget >= 0.0)) {
        throw ConfigError("solver sigma, lambda_p and lambda_b must be positive and the nugget non-negative");
    }
    if (solver.iterations < 1 || solver.lbfgs_steps < 1) throw ConfigError("solver iteration counts must be positive");
    if (!all_positive(solver.step_sizes)) throw ConfigError("L-BFGS step sizes must be positive");
    if (smoothing_candidates < 1) throw ConfigError("smoothing candidates must be positive");
    if (smoothing_folds < 2) throw ConfigError("smoothing folds must be at least 2");
    if (!all_positive(lambda_u_candidates)) throw ConfigError("lambda_U candidates must be positive");
    if (kernel_search.ard_scales.empty() || !all_positive(kernel_search.ard_scales)) throw ConfigError("ARD scales must be positive");
    if (kernel_search.poly_offsets.empty()) throw ConfigError("polynomial offsets are empty");
    for (double c : kernel_search.poly_offsets) {
        if (!(c >= 0.0)) throw ConfigError("polynomial offsets must be non-negative");
    }
    for (int deg : kernel_search.poly_degrees) {
        if (deg < 1) throw ConfigError("polynomial degrees must be positive");
    }
    if (!(stlsq.threshold > 0.0) || stlsq.max_iters < 1) throw ConfigError("STLSQ threshold and max_iters must be positive");
    if (!all_positive(kernel_search.lambda_k)) throw ConfigError("lambda_K candidates must be positive");
    if (mode == HyperMode::Cv && method != Method::Sindy &&
        (kernel_search.folds < 2 || kernel_search.folds > training_size)) {
        throw ConfigError("kernel CV folds must be in [2, training_size]");
    }
    if (problem == ProblemId::Darcy && method == Method::Sindy) {
        throw ConfigError("no sparse dictionary exists for the Darcy problem");
    }
    if (mode == HyperMode::Preset) {
        Variant v;
        try {
            v = variant_for(training_size, noise_ratio);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("no preset column: ") + e.what());
        }
        if (method == Method::KernelPolynomial && !preset(problem, v).polynomial_available) {
            throw ConfigError("the polynomial kernel preset for " + to_string(problem) + " " + to_string(v) +
                              " is unavailable; use hyperparameter_mode cv");
        }
    }
}

json ExperimentConfig::to_json() const {
    json j;
    j["problem"] = to_string(problem);
    j["method"] = to_string(method);
    j["training_size"] = training_size;
    j["noise_ratio"] = noise_ratio;
    j["betas"] = betas;
    j["hyperparameter_mode"] = to_string(mode);
    j["seed"] = seed;
    j["test_count"] = test_count;
    j["solver"] = {{"backend", to_string(solver.backend)},
                   {"sigma", solver.sigma},
                   {"lambda_p", solver.lambda_p},
                   {"lambda_b", solver.lambda_b},
                   {"nugget", solver.nugget},
                   {"iterations", solver.iterations},
                   {"lbfgs_steps", solver.lbfgs_steps},
                   {"step_sizes", solver.step_sizes}};
    j["smoothing"] = {{"candidates", smoothing_candidates},
                      {"folds", smoothing_folds},
                      {"lambda_u_candidates", lambda_u_candidates}};
    j["kernel_search"] = {{"ard_scales", kernel_search.ard_scales},
                          {"poly_offsets", kernel_search.poly_offsets},
                          {"poly_degrees", kernel_search.poly_degrees},
                          {"lambda_k", kernel_search.lambda_k},
                          {"folds", kernel_search.folds}};
    j["sindy"] = {{"threshold", stlsq.threshold}, {"max_iters", stlsq.max_iters}};
    j["output"] = output;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    reject_unknown(doc,
                   {"problem", "method", "training_size", "noise_ratio", "betas", "hyperparameter_mode", "seed",
                    "test_count", "solver", "smoothing", "kernel_search", "sindy", "output"},
                   "config");
    ExperimentConfig c;
    try {
        if (!doc.contains("problem")) throw ConfigError("field 'problem' is required");
        c.problem = problem_from_string(doc.at("problem").get<std::string>());
        c.solver = default_solver_settings(c.problem);
        auto& d = c.defaults_used;
        c.method = method_from_string(take<std::string>(doc, "method", to_string(c.method), d));
        c.training_size = take<int>(doc, "training_size", c.training_size, d);
        c.noise_ratio = take<double>(doc, "noise_ratio", c.noise_ratio, d);
        c.betas = take<std::vector<double>>(doc, "betas", c.betas, d);
        c.mode = hyper_mode_from_string(take<std::string>(doc, "hyperparameter_mode", to_string(c.mode), d));
        c.seed = take<std::uint64_t>(doc, "seed", c.seed, d);
        c.test_count = take<int>(doc, "test_count", c.test_count, d);
        c.output = take<std::string>(doc, "output", c.output, d);

        const json solver = doc.value("solver", json::object());
        reject_unknown(solver, {"backend", "sigma", "lambda_p", "lambda_b", "nugget", "iterations", "lbfgs_steps", "step_sizes"},
                       "solver");
        SolverSettings& s = c.solver;
        s.backend = backend_from_string(take<std::string>(solver, "backend", to_string(s.backend), d, "solver."));
        s.sigma = take<double>(solver, "sigma", s.sigma, d, "solver.");
        s.lambda_p = take<double>(solver, "lambda_p", s.lambda_p, d, "solver.");
        // lambda_B follows lambda_P unless set
        s.lambda_b = take<double>(solver, "lambda_b", 1e-4 * s.lambda_p, d, "solver.");
        s.nugget = take<double>(solver, "nugget", s.nugget, d, "solver.");
        s.iterations = take<int>(solver, "iterations", s.iterations, d, "solver.");
        s.lbfgs_steps = take<int>(solver, "lbfgs_steps", s.lbfgs_steps, d, "solver.");
        s.step_sizes = take<std::vector<double>>(solver, "step_sizes", s.step_sizes, d, "solver.");

        const json smoothing = doc.value("smoothing", json::object());
        reject_unknown(smoothing, {"candidates", "folds", "lambda_u_candidates"}, "smoothing");
        c.smoothing_candidates = take<int>(smoothing, "candidates", c.smoothing_candidates, d, "smoothing.");
        c.smoothing_folds = take<int>(smoothing, "folds", c.smoothing_folds, d, "smoothing.");
        c.lambda_u_candidates =
            take<std::vector<double>>(smoothing, "lambda_u_candidates", c.lambda_u_candidates, d, "smoothing.");

        const json search = doc.value("kernel_search", json::object());
        reject_unknown(search, {"ard_scales", "poly_offsets", "poly_degrees", "lambda_k", "folds"}, "kernel_search");
        KernelSearch& k = c.kernel_search;
        k.ard_scales = take<std::vector<double>>(search, "ard_scales", k.ard_scales, d, "kernel_search.");
        k.poly_offsets = take<std::vector<double>>(search, "poly_offsets", k.poly_offsets, d, "kernel_search.");
        k.poly_degrees = take<std::vector<int>>(search, "poly_degrees", k.poly_degrees, d, "kernel_search.");
        k.lambda_k = take<std::vector<double>>(search, "lambda_k", k.lambda_k, d, "kernel_search.");
        k.folds = take<int>(search, "folds", k.folds, d, "kernel_search.");

        const json sindy = doc.value("sindy", json::object());
        reject_unknown(sindy, {"threshold", "max_iters"}, "sindy");
        c.stlsq.threshold = take<double>(sindy, "threshold", c.stlsq.threshold, d, "sindy.");
        c.stlsq.max_iters = take<int>(sindy, "max_iters", c.stlsq.max_iters, d, "sindy.");
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
    c.validate();
    return c;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = config.to_json().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

GenerationOptions generation(const ExperimentConfig& config) {
    GenerationOptions o;
    o.count = config.training_size;
    o.seed = config.seed;
    o.noise_ratio = config.noise_ratio;
    return o;
}

// Runs fn(0..n-1) on a worker pool; results are written by index.
template <class Fn>
void parallel_for(int n, Fn fn) {
    const int workers = std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<SmoothedSample> smooth_all(const ExperimentConfig& config, const Dataset& data) {
    const SmoothingOptions base = smoothing_options(config);
    std::vector<SmoothedSample> out(data.pairs.size());
    std::vector<std::exception_ptr> errors(data.pairs.size());
    parallel_for(static_cast<int>(data.pairs.size()), [&](int i) {
        try {
            SmoothingOptions o = base;
            o.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i), 200);
            out[static_cast<std::size_t>(i)] = smooth_sample(data.problem, data.pairs[static_cast<std::size_t>(i)], o);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    });
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

json kernels_json(const LearnOptions& o) {
    json ks = json::array();
    for (const auto& k : o.kernels) ks.push_back(kernel_to_json(k));
    return ks;
}

}  // namespace

Dataset training_data(const ExperimentConfig& config) {
    return generate_dataset(BenchmarkProblem::make(config.problem), generation(config));
}

Dataset test_data(const ExperimentConfig& config) {
    GenerationOptions o = generation(config);
    o.count = config.test_count;
    o.stream_offset = test_stream_offset;
    // test references are always exact
    o.noise_ratio = 0.0;
    return generate_dataset(BenchmarkProblem::make(config.problem), o);
}

SmoothingOptions smoothing_options(const ExperimentConfig& config) {
    const Preset p = preset(config.problem, column_for(config));
    SmoothingOptions o;
    o.lambda_u = p.lambda_u;
    o.sigma_ranges = p.sigma_ranges;
    o.candidates = config.smoothing_candidates;
    o.folds = config.smoothing_folds;
    if (config.mode == HyperMode::Cv) o.lambda_candidates = config.lambda_u_candidates;
    return o;
}

namespace {

TrainedModel train_from(const ExperimentConfig& config, const Dataset& training, std::vector<SmoothedSample> smoothed) {
    const BenchmarkProblem& problem = training.problem;
    TrainedModel t;
    t.smoothed = std::move(smoothed);
    t.table = training_table(problem, training.pairs, t.smoothed);
    const Preset p = preset(config.problem, column_for(config));
    if (config.method == Method::Sindy) {
        t.learn.method = Method::Sindy;
        t.learn.stlsq = config.stlsq;
    } else if (config.mode == HyperMode::Preset) {
        t.learn.method = config.method;
        t.learn.lambda_k = p.lambda_k;
        t.learn.kernels = config.method == Method::KernelArd ? p.ard : p.polynomial;
        if (t.learn.kernels.empty()) throw ConfigError("preset kernel is unavailable");
    } else {
        std::vector<int> degrees;
        for (const auto& k : p.polynomial) degrees.push_back(k.degree());
        if (degrees.empty()) degrees.assign(equation_inputs(config.problem).size(), 2);
        KernelTuning tuned = tune_kernels(problem, t.table, config.method, degrees, config.kernel_search,
                                          derive_seed(config.seed, 0, 300));
        t.learn = std::move(tuned.options);
        t.kernel_cv = std::move(tuned.tables);
    }
    t.model = learn_model(problem, t.table, t.learn);
    t.discovery_error = discovery_error(problem, t.model, t.table);

    json& h = t.hyperparameters;
    h["column"] = to_string(column_for(config));
    json sig = json::array(), lam = json::array();
    for (const auto& s : t.smoothed) {
        sig.push_back(s.sigmas);
        lam.push_back(s.lambdas);
    }
    h["smoothing_sigma"] = sig;
    h["smoothing_lambda_u"] = lam;
    if (config.method != Method::Sindy) {
        h["kernels"] = kernels_json(t.learn);
        h["lambda_k"] = t.learn.equation_lambda_k.empty() ? json(t.learn.lambda_k) : json(t.learn.equation_lambda_k);
    } else {
        h["stlsq"] = {{"threshold", t.learn.stlsq.threshold}, {"max_iters", t.learn.stlsq.max_iters}};
        h["coefficients"] = std::vector<double>(t.model.equations.back()->coefficients().data(),
                                                t.model.equations.back()->coefficients().data() +
                                                    t.model.equations.back()->coefficients().size());
    }
    return t;
}

}  // namespace

TrainedModel train_model(const ExperimentConfig& config, const Dataset& training) {
    config.validate();
    std::vector<SmoothedSample> smoothed;
    try {
        smoothed = smooth_all(config, training);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure("smoothing", e.what());
    }
    try {
        return train_from(config, training, std::move(smoothed));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure("learning", e.what());
    }
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) throw InvalidArgument("no values to aggregate");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

json ErrorReport::to_json() const {
    json j;
    j["config"] = config;
    j["per_case"] = per_case;
    j["mean"] = mean;
    j["std"] = std;
    j["metadata"] = metadata;
    j["paper_reference_values"] = paper_reference_values;
    return j;
}

ErrorReport ErrorReport::from_json(const json& doc) {
    ErrorReport r;
    r.config = doc.at("config");
    r.per_case = doc.at("per_case").get<std::vector<double>>();
    r.mean = doc.at("mean").get<double>();
    r.std = doc.at("std").get<double>();
    r.metadata = doc.at("metadata");
    r.paper_reference_values = doc.at("paper_reference_values");
    return r;
}

namespace {

struct Cell {
    double mean;
    double std;
};

// Table entries indexed [training size 10, 20] or the single noisy column.
struct PublishedRow {
    const char* method;
    Cell exact10;
    Cell exact20;
};

json cell_json(const std::string& method, Cell c) {
    return {{"method", method}, {"mean", c.mean}, {"std", c.std}, {"provenance", "imported from paper"}};
}

std::vector<PublishedRow> exact_rows(ProblemId p) {
    switch (p) {
    case ProblemId::Pendulum:
        return {{"kernel-ARD", {7.5e-3, 1.4e-3}, {2.3e-3, 3.1e-4}},
                {"kernel-polynomial", {6.3e-3, 1.1e-3}, {2.1e-3, 1.7e-4}},
                {"sindy", {7.1e-3, 8.5e-4}, {4.5e-3, 4.5e-3}},
                {"POD-DeepONet", {1.8e-1, 2.7e-2}, {5.7e-2, 7.1e-3}},
                {"POD-DeepONet (L)", {3.7e-2, 5.3e-3}, {1.0e-2, 1.1e-3}},
                {"FNO", {1.2e-1, 1.3e-2}, {4.1e-2, 3.8e-3}},
                {"DeepONet", {2.9e-1, 2.8e-2}, {1.3e-1, 1.2e-2}}};
    case ProblemId::Diffusion:
        return {{"kernel-ARD", {1.3e-2, 2.1e-3}, {7.5e-3, 1.1e-3}},
                {"kernel-polynomial", {7.0e-3, 5.7e-4}, {4.1e-3, 2.4e-4}},
                {"sindy", {9.6e-3, 9.3e-4}, {4.2e-3, 2.3e-4}},
                {"POD-DeepONet", {1.7e-1, 1.5e-2}, {7.8e-2, 6.1e-3}},
                {"POD-DeepONet (L)", {4.4e-2, 3.6e-3}, {1.4e-2, 1.3e-3}},
                {"FNO", {5.8e-2, 4.1e-3}, {1.6e-2, 1.3e-3}},
                {"DeepONet", {3.4e-1, 1.9e-2}, {1.8e-1, 1.5e-2}}};
    case ProblemId::Darcy:
        return {{"kernel-ARD", {1.4e-2, 1.5e-3}, {7.1e-3, 1.0e-3}},
                {"POD-DeepONet", {1.1e-1, 1.2e-2}, {3.6e-2, 3.2e-3}},
                {"POD-DeepONet (L)", {1.7e-2, 1.6e-3}, {1.1e-2, 1.1e-3}},
                {"FNO", {2.3e-1, 2.3e-2}, {4.3e-2, 3.6e-3}},
                {"DeepONet", {3.7e-1, 4.2e-2}, {1.2e-1, 1.4e-2}}};
    }
    return {};
}

std::vector<std::pair<const char*, Cell>> noisy_rows(ProblemId p) {
    const int k = p == ProblemId::Pendulum ? 0 : p == ProblemId::Diffusion ? 1 : 2;
    // best of the two kernels, as published
    const Cell ours[] = {{3.9e-2, 2.3e-3}, {6.3e-2, 4.6e-3}, {7.7e-2, 5.0e-3}};
    const Cell pod[] = {{9.7e-2, 1.3e-2}, {1.4e-1, 1.1e-2}, {9.8e-2, 7.2e-3}};
    const Cell podl[] = {{8.1e-2, 1.0e-2}, {1.0e-1, 8.8e-3}, {7.2e-2, 6.5e-3}};
    const Cell fno[] = {{8.0e-2, 6.8e-3}, {7.7e-2, 5.0e-3}, {8.8e-2, 9.0e-3}};
    const Cell deep[] = {{1.5e-1, 1.9e-2}, {2.3e-1, 1.8e-2}, {1.5e-1, 1.6e-2}};
    const Cell sindy[] = {{4.1e-2, 3.8e-3}, {6.8e-2, 2.3e-3}};
    std::vector<std::pair<const char*, Cell>> rows{{"kernel (best of ARD and polynomial)", ours[k]},
                                                   {"POD-DeepONet", pod[k]},
                                                   {"POD-DeepONet (L)", podl[k]},
                                                   {"FNO", fno[k]},
                                                   {"DeepONet", deep[k]}};
    if (k < 2) rows.emplace_back("sindy", sindy[k]);
    return rows;
}

}  // namespace

json published_reference(ProblemId problem, Method method, int training_size, double noise_ratio) {
    json out;
    out["provenance"] = "imported from paper";
    out["method"] = nullptr;
    out["baselines"] = json::array();
    if (noise_ratio > 0.0) {
        if (training_size != 20) return out;
        for (const auto& [name, cell] : noisy_rows(problem)) {
            const std::string n = name;
            const bool own = (method == Method::Sindy) ? n == "sindy" : n.rfind("kernel", 0) == 0;
            (own ? out["method"] : out["baselines"].emplace_back()) = cell_json(n, cell);
        }
        return out;
    }
    if (training_size != 10 && training_size != 20) return out;
    for (const auto& row : exact_rows(problem)) {
        const Cell c = training_size == 10 ? row.exact10 : row.exact20;
        const std::string n = row.method;
        if (n == to_string(method)) {
            out["method"] = cell_json(n, c);
        } else if (n.find("DeepONet") != std::string::npos || n == "FNO") {
            out["baselines"].push_back(cell_json(n, c));
        }
    }
    return out;
}

namespace {

json unpublished_defaults(const ExperimentConfig& c) {
    json notes = json::array();
    notes.push_back("smoothing length scale: " + std::to_string(c.smoothing_folds) + "-fold CV over " +
                    std::to_string(c.smoothing_candidates) + " log-spaced candidates inside the table range");
    notes.push_back("solver kernel length scale, lambda_P, lambda_B and nugget are not published; defaults per problem");
    notes.push_back("solver starts from z = 0; Gauss-Newton uses step halving");
    notes.push_back("std is the population standard deviation over test cases");
    if (c.mode == HyperMode::Cv) {
        notes.push_back("lambda_U tuned jointly with the smoothing length scale");
        notes.push_back("Step (ii) kernel tuned by " + std::to_string(c.kernel_search.folds) +
                        "-fold CV holding out whole training pairs; ARD length scales are multiples of the feature spread");
    }
    if (c.method == Method::Sindy) {
        notes.push_back("STLSQ threshold " + std::to_string(c.stlsq.threshold) + " and " + std::to_string(c.stlsq.max_iters) +
                        " iterations");
    }
    if (c.solver.backend == SolverSettings::Backend::Lbfgs) {
        notes.push_back("L-BFGS runs every listed step size and keeps the lower objective");
    }
    return notes;
}

json seeds_json(const ExperimentConfig& c) {
    return {{"seed", c.seed},
            {"training_streams", {0, c.training_size - 1}},
            {"test_streams", {test_stream_offset, test_stream_offset + static_cast<std::uint64_t>(c.test_count) - 1}}};
}

}  // namespace

ErrorReport run_operator_learning(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const BenchmarkProblem problem = BenchmarkProblem::make(config.problem);
    Dataset train, test;
    try {
        train = training_data(config);
        test = test_data(config);
    } catch (const std::exception& e) {
        throw StageFailure("data generation", e.what());
    }
    const TrainedModel trained = train_model(config, train);
    const auto interior = learned_interior_model(problem, trained.model);

    const int n = static_cast<int>(test.pairs.size());
    std::vector<double> errors(static_cast<std::size_t>(n), std::nan(""));
    std::vector<double> steps(static_cast<std::size_t>(n), 0.0);
    std::vector<std::string> failures(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            const CaseResult r = solve_case(problem, test.pairs[k], interior, config.solver);
            errors[k] = r.error;
            steps[k] = r.step_size;
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    });
    for (int i = 0; i < n; ++i) {
        if (!failures[static_cast<std::size_t>(i)].empty()) {
            std::vector<double> partial(errors.begin(), errors.begin() + i);
            throw StageFailure("solve", "test case " + std::to_string(i) + ": " + failures[static_cast<std::size_t>(i)],
                               std::move(partial));
        }
    }

    ErrorReport r;
    r.config = config.to_json();
    r.per_case = errors;
    std::tie(r.mean, r.std) = mean_std(errors);
    json& m = r.metadata;
    m["config_hash"] = config_hash(config);
    m["seeds"] = seeds_json(config);
    m["defaults_used"] = config.defaults_used;
    m["non_paper_defaults"] = unpublished_defaults(config);
    m["hyperparameters"] = trained.hyperparameters;
    m["training_discovery_error"] = trained.discovery_error;
    if (config.solver.backend == SolverSettings::Backend::Lbfgs) m["lbfgs_step_size_kept"] = steps;
    m["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.paper_reference_values = published_reference(config.problem, config.method, config.training_size, config.noise_ratio);
    return r;
}

std::vector<RobustnessPoint> run_discovery_robustness(const ExperimentConfig& config, const std::vector<Method>& methods) {
    config.validate();
    if (config.problem == ProblemId::Darcy) throw ConfigError("robustness sweeps cover the pendulum and diffusion problems");
    if (methods.empty()) throw ConfigError("no methods to compare");
    const Dataset base = training_data(config);
    std::vector<SmoothedSample> smoothed;
    try {
        smoothed = smooth_all(config, base);
    } catch (const std::exception& e) {
        throw StageFailure("smoothing", e.what());
    }
    std::vector<TrainedModel> models;
    for (Method m : methods) {
        ExperimentConfig c = config;
        c.method = m;
        c.validate();
        try {
            models.push_back(train_from(c, base, smoothed));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure("learning", e.what());
        }
    }
    std::vector<RobustnessPoint> out;
    for (double beta : config.betas) {
        TrainingTable table;
        try {
            GenerationOptions o = generation(config);
            o.beta = beta;
            const Dataset shifted = beta == 0.0 ? base : generate_dataset(base.problem, o);
            const auto sm = beta == 0.0 ? smoothed : smooth_all(config, shifted);
            table = training_table(base.problem, shifted.pairs, sm);
        } catch (const std::exception& e) {
            throw StageFailure("perturbed data", e.what());
        }
        for (std::size_t k = 0; k < methods.size(); ++k) {
            out.push_back({beta, to_string(methods[k]), discovery_error(base.problem, models[k].model, table)});
        }
    }
    return out;
}

void emit_report(const ErrorReport& report, ReportFormat format, const std::string& path) {
    if (report.per_case.empty()) throw InvalidArgument("a report needs at least one test case");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    if (format == ReportFormat::Json) {
        out << report.to_json().dump(2) << '\n';
    } else {
        out << std::setprecision(17) << "case,error\n";
        for (std::size_t i = 0; i < report.per_case.size(); ++i) out << i << ',' << report.per_case[i] << '\n';
        out << "mean," << report.mean << "\nstd," << report.std << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

ErrorReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return ErrorReport::from_json(json::parse(in));
}

void write_robustness_csv(const std::vector<RobustnessPoint>& points, const std::string& path) {
    if (points.empty()) throw InvalidArgument("no robustness points to write");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << std::setprecision(17) << "beta,method,error\n";
    for (const auto& p : points) out << p.beta << ',' << p.method << ',' << p.error << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace kpde

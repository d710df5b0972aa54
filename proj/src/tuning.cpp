#include "kpde/tuning.hpp"

#include "kpde/equation.hpp"
#include "kpde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace kpde {

void SearchSpace::add(std::string name, std::vector<double> values, std::pair<double, double> bound) {
    names.push_back(std::move(name));
    candidates.push_back(std::move(values));
    bounds.push_back(bound);
}

void SearchSpace::validate() const {
    if (names.size() != candidates.size()) throw InvalidArgument("search space names/candidates mismatch");
    if (!bounds.empty() && bounds.size() != candidates.size()) throw InvalidArgument("search space bounds mismatch");
    if (candidates.empty()) throw InvalidArgument("search space has no parameters");
    for (std::size_t p = 0; p < candidates.size(); ++p) {
        if (candidates[p].empty()) throw InvalidArgument("parameter '" + names[p] + "' has no candidates");
        if (bounds.empty()) continue;
        for (double v : candidates[p]) {
            if (v < bounds[p].first || v > bounds[p].second) {
                throw InvalidArgument("candidate for '" + names[p] + "' outside its bounds");
            }
        }
    }
}

std::size_t SearchSpace::size() const {
    std::size_t n = 1;
    for (const auto& c : candidates) n *= c.size();
    return n;
}

std::vector<double> SearchSpace::combination(std::size_t k) const {
    std::vector<double> out(candidates.size());
    for (std::size_t p = candidates.size(); p-- > 0;) {
        out[p] = candidates[p][k % candidates[p].size()];
        k /= candidates[p].size();
    }
    return out;
}

std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InvalidArgument("invalid log grid");
    if (n == 1) return {std::sqrt(lo * hi)};
    std::vector<double> out(static_cast<std::size_t>(n));
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<std::vector<int>> make_folds(int count, int folds, std::uint64_t seed) {
    if (folds < 2 || folds > count) throw InvalidArgument("fold count must be in [2, data count]");
    std::vector<int> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw keeps the partition identical across standard libraries.
    for (int i = count - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i % folds)].push_back(idx[static_cast<std::size_t>(i)]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

CvResult cv_select(const FoldScorer& scorer, int count, const SearchSpace& space, int folds, std::uint64_t seed) {
    space.validate();
    CvResult res;
    res.names = space.names;
    const std::size_t n = space.size();
    if (n == 1) {
        res.best = space.combination(0);
        res.best_score = std::numeric_limits<double>::quiet_NaN();
        res.table.push_back({res.best, res.best_score, false, "single candidate"});
        return res;
    }
    const auto parts = make_folds(count, folds, seed);
    bool any = false;
    std::string diagnostics;
    for (std::size_t k = 0; k < n; ++k) {
        CandidateScore c;
        c.params = space.combination(k);
        try {
            double total = 0.0;
            for (std::size_t f = 0; f < parts.size(); ++f) {
                std::vector<int> train;
                for (std::size_t g = 0; g < parts.size(); ++g) {
                    if (g != f) train.insert(train.end(), parts[g].begin(), parts[g].end());
                }
                std::sort(train.begin(), train.end());
                const double s = scorer(c.params, train, parts[f]);
                if (!std::isfinite(s)) throw NumericalFailure("non-finite fold score");
                total += s;
            }
            c.score = total / static_cast<double>(parts.size());
        } catch (const std::exception& e) {
            c.failed = true;
            c.score = std::numeric_limits<double>::infinity();
            c.diagnostic = e.what();
            diagnostics += "[" + std::to_string(k) + "] " + e.what() + "; ";
        }
        res.table.push_back(c);
        if (c.failed) continue;
        const bool better = !any || c.score < res.best_score * (1.0 - 1e-12) - 1e-300;
        const bool tie = any && !better && c.score <= res.best_score * (1.0 + 1e-12) + 1e-300;
        if (better || (tie && c.params > res.best)) {
            res.best = c.params;
            res.best_score = c.score;
            any = true;
        }
    }
    if (!any) throw NumericalFailure("every cross-validation candidate failed: " + diagnostics);
    return res;
}

void CvResult::write_csv(std::ostream& out) const {
    for (const auto& n : names) out << n << ',';
    out << "score,failed\n";
    out.precision(17);
    for (const auto& c : table) {
        for (double v : c.params) out << v << ',';
        out << c.score << ',' << (c.failed ? 1 : 0) << '\n';
    }
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::Exact10: return "exact-10";
    case Variant::Exact20: return "exact-20";
    case Variant::Noisy20: return "noisy-20";
    }
    return "unknown";
}

Variant variant_from_string(const std::string& name) {
    if (name == "exact-10") return Variant::Exact10;
    if (name == "exact-20") return Variant::Exact20;
    if (name == "noisy-20") return Variant::Noisy20;
    throw InvalidArgument("unknown preset variant '" + name + "'");
}

Variant variant_for(int training_size, double noise_ratio) {
    if (noise_ratio > 0.0) {
        if (training_size != 20) throw InvalidArgument("noisy presets exist only for 20 training pairs");
        return Variant::Noisy20;
    }
    if (training_size == 10) return Variant::Exact10;
    if (training_size == 20) return Variant::Exact20;
    throw InvalidArgument("presets exist only for 10 or 20 training pairs");
}

Preset preset(ProblemId problem, Variant variant) {
    const int col = variant == Variant::Exact10 ? 0 : variant == Variant::Exact20 ? 1 : 2;
    Preset p;
    switch (problem) {
    case ProblemId::Pendulum: {
        p.lambda_u = 1e-8;
        p.sigma_ranges = col == 2 ? std::vector<std::pair<double, double>>{{0.15, 0.65}, {0.1, 0.8}}
                                  : std::vector<std::pair<double, double>>{{0.15, 0.45}, {0.1, 0.4}};
        p.lambda_k = col == 2 ? 1e-1 : 1e-5;
        const double ard1[] = {0.52, 1.0, 1.0};
        const double ard2[] = {3.0, 2.4, 1.9};
        const int deg1[] = {5, 3, 1};
        const double off1[] = {3.5, 0.015, 0.01};
        const int deg2[] = {5, 3, 1};
        const double off2[] = {2.8, 0.01, 0.01};
        p.ard = {KernelSpec::ard({ard1[col], ard1[col]}), KernelSpec::ard({ard2[col], ard2[col]})};
        p.polynomial = {KernelSpec::polynomial(deg1[col], off1[col], 2), KernelSpec::polynomial(deg2[col], off2[col], 2)};
        return p;
    }
    case ProblemId::Diffusion: {
        p.lambda_u = 1e-3;
        p.sigma_ranges = col == 2 ? std::vector<std::pair<double, double>>{{0.4, 1.0}}
                                  : std::vector<std::pair<double, double>>{{0.15, 0.7}};
        p.lambda_k = 1e-3;
        p.ard = {col == 2 ? KernelSpec::ard({0.50, 2.0, 0.25}) : KernelSpec::ard({0.50, 1.3, 0.13})};
        if (col == 2) {
            p.polynomial_available = false;
        } else {
            p.polynomial = {KernelSpec::polynomial(2, col == 0 ? 0.23 : 0.0, 3)};
        }
        return p;
    }
    case ProblemId::Darcy: {
        p.lambda_u = col == 2 ? 1e-2 : 1e-8;
        p.sigma_ranges = col == 2 ? std::vector<std::pair<double, double>>{{0.05, 0.5}}
                                  : std::vector<std::pair<double, double>>{{0.15, 0.35}};
        p.lambda_k = col == 2 ? 1e-1 : 1e-3;
        const std::vector<std::vector<double>> ls{{1.2, 1.2, 8.0, 8.0, 10.0, 10.0},
                                                  {0.4, 0.4, 3.2, 3.2, 5.0, 5.0},
                                                  {0.64, 0.64, 2.0, 2.0, 3.0, 3.0}};
        p.ard = {KernelSpec::ard(ls[static_cast<std::size_t>(col)])};
        p.polynomial_available = false;
        return p;
    }
    }
    throw InvalidArgument("unknown preset");
}

nlohmann::json Preset::to_json() const {
    nlohmann::json j;
    j["lambda_u"] = lambda_u;
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& [lo, hi] : sigma_ranges) ranges.push_back({lo, hi});
    j["sigma_ranges"] = ranges;
    j["lambda_k"] = lambda_k;
    j["ard"] = nlohmann::json::array();
    for (const auto& k : ard) j["ard"].push_back(kernel_to_json(k));
    j["polynomial_available"] = polynomial_available;
    j["polynomial"] = nlohmann::json::array();
    for (const auto& k : polynomial) j["polynomial"].push_back(kernel_to_json(k));
    return j;
}

}  // namespace kpde

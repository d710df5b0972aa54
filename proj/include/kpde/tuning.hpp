#pragma once

#include "kpde/kernel.hpp"
#include "kpde/problem.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kpde {

/// Candidate grid: the Cartesian product of per-parameter lists.
struct SearchSpace {
    std::vector<std::string> names;
    std::vector<std::vector<double>> candidates;
    std::vector<std::pair<double, double>> bounds;  ///< closed; empty means unbounded

    void add(std::string name, std::vector<double> values, std::pair<double, double> bound);
    void validate() const;
    [[nodiscard]] std::size_t size() const;
    /// The k-th combination (last parameter varies fastest).
    [[nodiscard]] std::vector<double> combination(std::size_t k) const;
};

/// n values log-spaced over [lo, hi], endpoints included.
std::vector<double> log_grid(double lo, double hi, int n);

/// Fits on `train` with `params` and returns the relative L2 error on `held_out`.
using FoldScorer = std::function<double(const std::vector<double>& params, const std::vector<int>& train,
                                        const std::vector<int>& held_out)>;

struct CandidateScore {
    std::vector<double> params;
    double score = 0.0;
    bool failed = false;
    std::string diagnostic;
};

struct CvResult {
    std::vector<double> best;
    double best_score = 0.0;
    std::vector<CandidateScore> table;
    std::vector<std::string> names;

    void write_csv(std::ostream& out) const;
};

/// Shuffled k-fold partition of 0..count-1.
std::vector<std::vector<int>> make_folds(int count, int folds, std::uint64_t seed);

/// k-fold cross validation over `space`. Score = mean held-out relative L2.
/// Ties (within 1e-12 relative) go to the lexicographically larger
/// candidate, i.e. the longer length scale or the larger nugget.
CvResult cv_select(const FoldScorer& scorer, int count, const SearchSpace& space, int folds, std::uint64_t seed);

/// Which column of the hyperparameter tables.
enum class Variant { Exact10, Exact20, Noisy20 };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
/// Maps (training size, noise) to a table column.
Variant variant_for(int training_size, double noise_ratio);

/// Hyperparameters of one table column.
struct Preset {
    double lambda_u = 0.0;
    /// Step (i) smoothing length-scale range per solution component.
    std::vector<std::pair<double, double>> sigma_ranges;
    double lambda_k = 0.0;
    /// Step (ii) kernels per learned equation.
    std::vector<KernelSpec> ard;
    std::vector<KernelSpec> polynomial;  ///< empty when the table marks the entry unavailable
    bool polynomial_available = true;

    [[nodiscard]] nlohmann::json to_json() const;
};

Preset preset(ProblemId problem, Variant variant);

}  // namespace kpde

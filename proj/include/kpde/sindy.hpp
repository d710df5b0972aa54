#pragma once

#include "kpde/dictionary.hpp"
#include "kpde/equation.hpp"
#include "kpde/problem.hpp"

#include <string>
#include <vector>

namespace kpde {

/// Candidate-term library for a benchmark, expressed over the benchmark's
/// feature layout:
///   pendulum  (u1, u2):        {u1, u1^2, u1^3, sin u1, cos u1, 1}
///   diffusion (u, u_t, u_xx):  {u_t, u_xx, u, u^2, u^3, u u_xx, u^2 u_xx,
///                               u^3 u_xx, u u_t, u^2 u_t, u^3 u_t, 1}
/// Darcy has no dictionary.
Dictionary build_dictionary(ProblemId problem);

struct StlsqOptions {
    double threshold = 0.005;
    int max_iters = 20;
    double ridge = 1e-12;
};

struct StlsqResult {
    Vector coefficients;
    int iterations = 0;
    /// Active-set size after each thresholding pass.
    std::vector<int> support_sizes;
};

/// Sequentially thresholded least squares. Coefficients with magnitude below
/// the threshold are zeroed and the remaining columns refit until the active
/// set stops changing. `initial`, when given, replaces the first full solve.
StlsqResult stlsq(const Matrix& design, const Vector& target, const StlsqOptions& options = {},
                  const Vector* initial = nullptr);

/// Wraps recovered coefficients as a learned equation.
LearnedEquation as_equation(const Dictionary& dictionary, const Vector& coefficients,
                            std::vector<std::string> feature_names);

}  // namespace kpde

#include "kpde/sindy.hpp"

#include "kpde/errors.hpp"
#include "kpde/kernel.hpp"

#include <cmath>

namespace kpde {

namespace {

using Fn = TermFactor::Fn;

TermFactor pw(int feature, int p) { return TermFactor{feature, Fn::Power, p}; }

}  // namespace

Dictionary build_dictionary(ProblemId problem) {
    Dictionary d;
    switch (problem) {
    case ProblemId::Pendulum: {
        // features: 0 = u1, 1 = u2
        d.terms = {
            {"u1", {pw(0, 1)}},
            {"u1^2", {pw(0, 2)}},
            {"u1^3", {pw(0, 3)}},
            {"sin(u1)", {TermFactor{0, Fn::Sin, 1}}},
            {"cos(u1)", {TermFactor{0, Fn::Cos, 1}}},
            {"1", {}},
        };
        return d;
    }
    case ProblemId::Diffusion: {
        // features: 0 = u, 1 = u_t, 2 = u_xx
        d.terms = {
            {"u_t", {pw(1, 1)}},
            {"u_xx", {pw(2, 1)}},
            {"u", {pw(0, 1)}},
            {"u^2", {pw(0, 2)}},
            {"u^3", {pw(0, 3)}},
            {"u*u_xx", {pw(0, 1), pw(2, 1)}},
            {"u^2*u_xx", {pw(0, 2), pw(2, 1)}},
            {"u^3*u_xx", {pw(0, 3), pw(2, 1)}},
            {"u*u_t", {pw(0, 1), pw(1, 1)}},
            {"u^2*u_t", {pw(0, 2), pw(1, 1)}},
            {"u^3*u_t", {pw(0, 3), pw(1, 1)}},
            {"1", {}},
        };
        return d;
    }
    case ProblemId::Darcy:
        throw UnsupportedOperation("no sparse dictionary exists for the spatially varying Darcy coefficient");
    }
    throw InvalidArgument("unknown problem");
}

namespace {

Vector least_squares(const Matrix& design, const Vector& target, const std::vector<int>& active, double ridge) {
    Matrix A(design.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = design.col(active[k]);
    const Matrix normal = A.transpose() * A;
    const Vector rhs = A.transpose() * target;
    return regularized_solve(normal, ridge, rhs).solution.col(0);
}

}  // namespace

StlsqResult stlsq(const Matrix& design, const Vector& target, const StlsqOptions& options, const Vector* initial) {
    if (design.rows() != target.size()) throw InvalidArgument("design rows and target length differ");
    if (!(options.threshold > 0.0)) throw InvalidArgument("STLSQ threshold must be positive");
    if (options.max_iters < 1) throw InvalidArgument("STLSQ needs at least one iteration");
    const Eigen::Index n = design.cols();

    std::vector<int> active;
    for (int k = 0; k < n; ++k) active.push_back(k);

    StlsqResult out;
    Vector xi = Vector::Zero(n);
    if (initial) {
        if (initial->size() != n) throw InvalidArgument("initial coefficients have the wrong length");
        xi = *initial;
    } else {
        xi = least_squares(design, target, active, options.ridge);
    }

    for (int it = 0; it < options.max_iters; ++it) {
        std::vector<int> next;
        for (int k : active) {
            if (std::abs(xi[k]) >= options.threshold) next.push_back(k);
        }
        out.iterations = it + 1;
        out.support_sizes.push_back(static_cast<int>(next.size()));
        if (next.empty()) throw DegenerateModel("STLSQ removed every dictionary term");
        const bool stable = next.size() == active.size();
        active = std::move(next);
        const Vector sub = least_squares(design, target, active, options.ridge);
        xi.setZero();
        for (std::size_t k = 0; k < active.size(); ++k) xi[active[k]] = sub[static_cast<Eigen::Index>(k)];
        if (stable) break;
    }
    out.coefficients = xi;
    return out;
}

LearnedEquation as_equation(const Dictionary& dictionary, const Vector& coefficients,
                            std::vector<std::string> feature_names) {
    return LearnedEquation::sparse_dictionary(dictionary, coefficients, std::move(feature_names));
}

}  // namespace kpde

#include "kpde/kernel.hpp"

#include "kpde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace kpde {

std::string to_string(KernelFamily family) {
    switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::ARD: return "ard";
    case KernelFamily::Polynomial: return "polynomial";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "gaussian") return KernelFamily::Gaussian;
    if (name == "ard") return KernelFamily::ARD;
    if (name == "polynomial") return KernelFamily::Polynomial;
    throw InvalidArgument("unknown kernel family '" + name + "'");
}

KernelSpec KernelSpec::gaussian(double sigma, int dim) {
    if (!(sigma > 0.0)) throw InvalidArgument("gaussian kernel requires sigma > 0");
    if (dim < 0) throw InvalidArgument("kernel dimension must be nonnegative");
    KernelSpec k;
    k.family_ = KernelFamily::Gaussian;
    k.sigma_ = sigma;
    k.dim_ = dim;
    return k;
}

KernelSpec KernelSpec::ard(std::vector<double> lengthscales) {
    if (lengthscales.empty()) throw InvalidArgument("ARD kernel requires at least one lengthscale");
    for (double l : lengthscales) {
        if (!(l > 0.0)) throw InvalidArgument("ARD lengthscales must be positive");
    }
    KernelSpec k;
    k.family_ = KernelFamily::ARD;
    k.dim_ = static_cast<int>(lengthscales.size());
    k.lengthscales_ = std::move(lengthscales);
    return k;
}

KernelSpec KernelSpec::polynomial(int degree, double offset, int dim) {
    if (degree < 1 || degree > 5) throw InvalidArgument("polynomial degree must lie in {1,...,5}");
    if (!(offset >= 0.0)) throw InvalidArgument("polynomial offset must be nonnegative");
    if (dim < 0) throw InvalidArgument("kernel dimension must be nonnegative");
    KernelSpec k;
    k.family_ = KernelFamily::Polynomial;
    k.degree_ = degree;
    k.offset_ = offset;
    k.dim_ = dim;
    return k;
}

void KernelSpec::check_dim(Eigen::Index n) const {
    if (dim_ != 0 && n != dim_) {
        throw InvalidArgument("kernel built for dimension " + std::to_string(dim_) +
                              " received a point of dimension " + std::to_string(n));
    }
}

MultiIndex MultiIndex::unit(int dim, int axis, int order) {
    if (axis < 0 || axis >= dim) throw InvalidArgument("multi-index axis out of range");
    MultiIndex m = zero(dim);
    m.orders[static_cast<std::size_t>(axis)] = order;
    return m;
}

int MultiIndex::total() const noexcept {
    int t = 0;
    for (int o : orders) t += o;
    return t;
}

DiffOp DiffOp::laplacian(int dim) {
    DiffOp op;
    for (int j = 0; j < dim; ++j) op.terms.emplace_back(1.0, MultiIndex::unit(dim, j, 2));
    return op;
}

int DiffOp::max_order() const noexcept {
    int m = 0;
    for (const auto& [c, a] : terms) m = std::max(m, a.total());
    return m;
}

namespace {

void check_pair(const KernelSpec& spec, const Point& x, const Point& y) {
    if (x.size() != y.size()) throw InvalidArgument("kernel arguments differ in dimension");
    spec.check_dim(x.size());
}

// Probabilists' Hermite polynomial He_n(u); odd/even symmetry holds bitwise.
double hermite(int n, double u) {
    const double u2 = u * u;
    switch (n) {
    case 0: return 1.0;
    case 1: return u;
    case 2: return u2 - 1.0;
    case 3: return u * (u2 - 3.0);
    case 4: return u2 * (u2 - 6.0) + 3.0;
    default: break;
    }
    double hm = u * (u2 - 3.0);
    double h = u2 * (u2 - 6.0) + 3.0;
    for (int k = 4; k < n; ++k) {
        const double next = u * h - k * hm;
        hm = h;
        h = next;
    }
    return h;
}

double gaussian_family_deriv(const KernelSpec& spec, const MultiIndex& alpha, const MultiIndex& beta,
                             const Point& x, const Point& y) {
    double exponent = 0.0;
    double factor = 1.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double l = spec.lengthscale(static_cast<int>(d));
        const double r = x[d] - y[d];
        exponent += r * r / (l * l);
        const int a = alpha.orders[static_cast<std::size_t>(d)];
        const int b = beta.orders[static_cast<std::size_t>(d)];
        const int n = a + b;
        if (n == 0) continue;
        // d^a_x d^b_y k(x - y) = (-1)^b k^(n)(r),  k^(n)(r) = (-1/l)^n He_n(r/l) k(r)
        double scale = std::pow(1.0 / l, n);
        if ((a % 2) == 1) scale = -scale;
        factor *= scale * hermite(n, r / l);
    }
    return factor * std::exp(-0.5 * exponent);
}

double polynomial_deriv(const KernelSpec& spec, const MultiIndex& alpha, const MultiIndex& beta,
                        const Point& x, const Point& y) {
    const int d = spec.degree();
    const double p = x.dot(y) + spec.offset();
    const int na = alpha.total();
    const int nb = beta.total();
    if (na == 0 && nb == 0) return std::pow(p, d);
    auto axis_of = [](const MultiIndex& m) {
        return static_cast<Eigen::Index>(std::find(m.orders.begin(), m.orders.end(), 1) - m.orders.begin());
    };
    const double dp1 = d * std::pow(p, d - 1);
    if (nb == 0) return dp1 * y[axis_of(alpha)];
    if (na == 0) return dp1 * x[axis_of(beta)];
    const Eigen::Index i = axis_of(alpha);
    const Eigen::Index j = axis_of(beta);
    double v = (i == j) ? dp1 : 0.0;
    if (d >= 2) v += d * (d - 1) * std::pow(p, d - 2) * (x[j] * y[i]);
    return v;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Point& x, const Point& y) {
    check_pair(spec, x, y);
    if (spec.family() == KernelFamily::Polynomial) return std::pow(x.dot(y) + spec.offset(), spec.degree());
    double exponent = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double l = spec.lengthscale(static_cast<int>(d));
        const double r = x[d] - y[d];
        exponent += r * r / (l * l);
    }
    return std::exp(-0.5 * exponent);
}

double kernel_deriv(const KernelSpec& spec, const MultiIndex& alpha, const MultiIndex& beta, const Point& x,
                    const Point& y) {
    check_pair(spec, x, y);
    if (alpha.size() != x.size() || beta.size() != x.size()) {
        throw InvalidArgument("multi-index length does not match point dimension");
    }
    const int na = alpha.total();
    const int nb = beta.total();
    if (spec.family() == KernelFamily::Polynomial) {
        if (na > 1 || nb > 1) {
            throw UnsupportedOperation("polynomial kernel derivatives are limited to first order per argument");
        }
        return polynomial_deriv(spec, alpha, beta, x, y);
    }
    if (na > 2 || nb > 2) {
        throw UnsupportedOperation("gaussian kernel derivatives are limited to second order per argument");
    }
    return gaussian_family_deriv(spec, alpha, beta, x, y);
}

double kernel_apply(const KernelSpec& spec, const DiffOp& row, const DiffOp& col, const Point& x,
                    const Point& y) {
    double v = 0.0;
    for (const auto& [ca, a] : row.terms) {
        for (const auto& [cb, b] : col.terms) v += ca * cb * kernel_deriv(spec, a, b, x, y);
    }
    return v;
}

Matrix gram(const KernelSpec& spec, std::span<const Functional> rows, std::span<const Functional> cols) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(cols.size());
    Matrix G(n, m);
    const bool symmetric = rows.data() == cols.data() && n == m;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Functional& fi = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = symmetric ? i : 0; j < m; ++j) {
            const Functional& fj = cols[static_cast<std::size_t>(j)];
            const double v =
                fi.component == fj.component ? kernel_apply(spec, fi.op, fj.op, fi.point, fj.point) : 0.0;
            G(i, j) = v;
            if (symmetric) G(j, i) = v;
        }
    }
    return G;
}

Matrix gram_values(const KernelSpec& spec, const Matrix& X, const Matrix& Y) {
    if (X.cols() != Y.cols()) throw InvalidArgument("gram_values: point dimensions differ");
    spec.check_dim(X.cols());
    const Eigen::Index n = X.rows();
    const Eigen::Index m = Y.rows();
    const Eigen::Index D = X.cols();
    Matrix G(n, m);
    if (spec.family() == KernelFamily::Polynomial) {
        G = (X * Y.transpose()).array() + spec.offset();
        G = G.array().pow(spec.degree());
        return G;
    }
    Vector inv(D);
    for (Eigen::Index d = 0; d < D; ++d) {
        const double l = spec.lengthscale(static_cast<int>(d));
        inv[d] = 1.0 / (l * l);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double e = 0.0;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r = X(i, d) - Y(j, d);
                e += r * r * inv[d];
            }
            G(i, j) = std::exp(-0.5 * e);
        }
    }
    return G;
}

GramFactorization factorize(const Matrix& G, double nugget) {
    if (G.rows() != G.cols()) throw InvalidArgument("Gram matrix must be square");
    if (!(nugget >= 0.0)) throw InvalidArgument("nugget must be nonnegative");
    const Eigen::Index n = G.rows();
    const double scale = G.cwiseAbs().maxCoeff();
    if (n > 0 && scale > 0.0) {
        const double asym = (G - G.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * scale) throw InvalidArgument("Gram matrix is not symmetric");
    }
    if (!G.allFinite()) throw NumericalFailure("Gram matrix has non-finite entries", nugget);

    auto attempt = [&](double lambda) -> std::optional<GramFactorization> {
        Matrix A = G;
        A.diagonal().array() += lambda;
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success) return std::nullopt;
        // LLT does not flag tiny negative pivots reliably; a non-finite or
        // zero diagonal in L means the factorization is unusable.
        const auto diag = llt.matrixLLT().diagonal();
        if (!diag.allFinite() || (n > 0 && diag.minCoeff() <= 0.0)) return std::nullopt;
        return GramFactorization(std::move(A), std::move(llt), lambda);
    };

    if (auto f = attempt(nugget)) return std::move(*f);
    const double diag_max = n > 0 ? G.diagonal().cwiseAbs().maxCoeff() : 0.0;
    const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * diag_max;
    const double base = std::max(nugget, floor);
    double lambda = base;
    for (int k = base > nugget ? 0 : 1; k <= 6; ++k) {
        lambda = base * std::pow(10.0, k);
        if (auto f = attempt(lambda)) return std::move(*f);
    }
    throw NumericalFailure("Cholesky factorization failed after nugget escalation", lambda);
}

RegularizedSolution regularized_solve(const Matrix& G, double nugget, const Matrix& rhs) {
    if (rhs.rows() != G.rows()) throw InvalidArgument("right-hand side does not match Gram size");
    GramFactorization f = factorize(G, nugget);
    Matrix w = f.solve(rhs);
    return RegularizedSolution{std::move(w), std::move(f)};
}

}  // namespace kpde

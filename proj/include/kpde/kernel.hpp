#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kpde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

enum class KernelFamily { Gaussian, ARD, Polynomial };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Mercer kernel with its hyperparameters.
///
/// Gaussian:   exp(-|x-y|^2 / (2 sigma^2))
/// ARD:        prod_j exp(-(x_j-y_j)^2 / (2 l_j^2))
/// Polynomial: (x.y + c)^d
///
/// Gaussian and polynomial kernels built with `dim == 0` accept inputs of any
/// (matching) dimension.
class KernelSpec {
  public:
    static KernelSpec gaussian(double sigma, int dim = 0);
    static KernelSpec ard(std::vector<double> lengthscales);
    static KernelSpec polynomial(int degree, double offset, int dim = 0);

    [[nodiscard]] KernelFamily family() const noexcept { return family_; }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] const std::vector<double>& lengthscales() const noexcept { return lengthscales_; }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] double offset() const noexcept { return offset_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }

    /// Length scale along coordinate `j` (Gaussian/ARD only).
    [[nodiscard]] double lengthscale(int j) const {
        return family_ == KernelFamily::ARD ? lengthscales_[static_cast<std::size_t>(j)] : sigma_;
    }

    /// Throws InvalidArgument if a point of dimension `n` is not accepted.
    void check_dim(Eigen::Index n) const;

    bool operator==(const KernelSpec&) const = default;

  private:
    KernelSpec() = default;

    KernelFamily family_ = KernelFamily::Gaussian;
    double sigma_ = 1.0;
    std::vector<double> lengthscales_;
    int degree_ = 1;
    double offset_ = 0.0;
    int dim_ = 0;
};

/// Per-coordinate derivative orders.
struct MultiIndex {
    std::vector<int> orders;

    MultiIndex() = default;
    MultiIndex(std::initializer_list<int> o) : orders(o) {}
    explicit MultiIndex(std::vector<int> o) : orders(std::move(o)) {}

    static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }
    /// First derivative along `axis`.
    static MultiIndex unit(int dim, int axis, int order = 1);

    [[nodiscard]] int total() const noexcept;
    [[nodiscard]] int size() const noexcept { return static_cast<int>(orders.size()); }

    bool operator==(const MultiIndex&) const = default;
};

/// Linear differential operator sum_k c_k d^{alpha_k}. Needed for the
/// Laplacian, which is not a single partial derivative.
struct DiffOp {
    std::vector<std::pair<double, MultiIndex>> terms;

    static DiffOp value(int dim) { return DiffOp{{{1.0, MultiIndex::zero(dim)}}}; }
    static DiffOp partial(MultiIndex alpha) { return DiffOp{{{1.0, std::move(alpha)}}}; }
    static DiffOp laplacian(int dim);

    [[nodiscard]] int max_order() const noexcept;
};

/// Point evaluation of a (possibly differentiated) field. `component` selects
/// which unknown function the functional acts on; functionals on different
/// components are uncorrelated.
struct Functional {
    Point point;
    DiffOp op;
    int component = 0;
};

/// Cholesky factorization of G + nugget*I.
class GramFactorization {
  public:
    GramFactorization() = default;
    GramFactorization(Matrix regularized, Eigen::LLT<Matrix> llt, double nugget)
        : matrix_(std::move(regularized)), llt_(std::move(llt)), nugget_(nugget) {}

    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] Matrix factor() const { return llt_.matrixL(); }
    [[nodiscard]] double nugget() const noexcept { return nugget_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return matrix_.rows(); }

    template <typename Rhs>
    [[nodiscard]] Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        return llt_.solve(rhs);
    }
    [[nodiscard]] const Eigen::LLT<Matrix>& llt() const noexcept { return llt_; }

  private:
    Matrix matrix_;
    Eigen::LLT<Matrix> llt_;
    double nugget_ = 0.0;
};

struct RegularizedSolution {
    Matrix solution;
    GramFactorization factorization;
};

/// K(x, y).
double kernel_eval(const KernelSpec& spec, const Point& x, const Point& y);

/// d^alpha_x d^beta_y K(x, y), closed form.
///
/// Gaussian/ARD support |alpha|, |beta| <= 2; polynomial supports
/// |alpha|, |beta| <= 1.
double kernel_deriv(const KernelSpec& spec, const MultiIndex& alpha, const MultiIndex& beta,
                    const Point& x, const Point& y);

/// Applies `row` along the first argument and `col` along the second.
double kernel_apply(const KernelSpec& spec, const DiffOp& row, const DiffOp& col, const Point& x,
                    const Point& y);

/// Entry (i, j) is rows[i] (x) cols[j] applied to K.
Matrix gram(const KernelSpec& spec, std::span<const Functional> rows, std::span<const Functional> cols);

/// Plain value Gram K(X, Y) for points stored as matrix rows.
Matrix gram_values(const KernelSpec& spec, const Matrix& X, const Matrix& Y);

/// Cholesky of G + nugget*I with nugget escalation (x10 per attempt, at most
/// 1e6 times the starting nugget). The starting nugget is never below
/// n * eps * max|diag G|, so a zero request still gets a floating-point floor
/// once the exact factorization has failed.
GramFactorization factorize(const Matrix& G, double nugget);

/// Solves (G + nugget*I) W = rhs through `factorize`.
RegularizedSolution regularized_solve(const Matrix& G, double nugget, const Matrix& rhs);

}  // namespace kpde

#pragma once

#include "kpde/kernel.hpp"

#include <span>
#include <string>
#include <vector>

namespace kpde {

/// Noisy observations of one solution field. Points are matrix rows.
struct FieldSamples {
    Matrix points;
    Vector values;
    double noise_level = 0.0;  ///< lambda_U; the fit uses lambda_U^2 as nugget
};

/// Kernel ridge regressor u(x) = U(x, X) w with w = (U(X,X) + lambda_U^2 I)^-1 u.
class SmoothedField {
  public:
    SmoothedField(KernelSpec kernel, Matrix centers, Vector weights, double applied_nugget);

    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const Matrix& centers() const noexcept { return centers_; }
    [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
    [[nodiscard]] double applied_nugget() const noexcept { return nugget_; }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(centers_.cols()); }

    /// d^alpha u(x); |alpha| <= 2.
    [[nodiscard]] double eval(const MultiIndex& alpha, const Point& x) const;
    /// Applies a linear differential operator at x.
    [[nodiscard]] double eval(const DiffOp& op, const Point& x) const;
    /// `op` applied at every row of `points`.
    [[nodiscard]] Vector eval_many(const DiffOp& op, const Matrix& points) const;

  private:
    KernelSpec kernel_;
    Matrix centers_;
    std::vector<Point> center_points_;
    Vector weights_;
    double nugget_;
};

SmoothedField fit_smoother(const KernelSpec& kernel, const FieldSamples& samples);

/// Convenience overload for a pointwise derivative.
inline double eval_smoothed(const SmoothedField& field, const MultiIndex& alpha, const Point& x) {
    return field.eval(alpha, x);
}

/// One column of a feature matrix: either a coordinate of the evaluation
/// point or a derivative of one of the smoothed fields.
struct FeatureColumn {
    enum class Kind { Coordinate, Field };
    Kind kind = Kind::Field;
    int axis = 0;       ///< Coordinate columns
    int component = 0;  ///< Field columns: index into the field list
    DiffOp op;          ///< Field columns
    std::string name;

    static FeatureColumn coordinate(int axis, std::string name) {
        return FeatureColumn{Kind::Coordinate, axis, 0, {}, std::move(name)};
    }
    static FeatureColumn field(int component, DiffOp op, std::string name) {
        return FeatureColumn{Kind::Field, 0, component, std::move(op), std::move(name)};
    }
};

struct FeatureLayout {
    std::vector<FeatureColumn> columns;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(columns.size()); }
    [[nodiscard]] std::vector<std::string> names() const;
    /// Column index by name, or -1.
    [[nodiscard]] int find(const std::string& name) const;
};

/// Row j holds the layout's columns evaluated at grid row j.
Matrix build_features(std::span<const SmoothedField> fields, const Matrix& grid, const FeatureLayout& layout);

}  // namespace kpde

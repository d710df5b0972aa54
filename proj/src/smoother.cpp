#include "kpde/smoother.hpp"

#include "kpde/errors.hpp"

#include <algorithm>

namespace kpde {

SmoothedField::SmoothedField(KernelSpec kernel, Matrix centers, Vector weights, double applied_nugget)
    : kernel_(std::move(kernel)), centers_(std::move(centers)), weights_(std::move(weights)), nugget_(applied_nugget) {
    if (weights_.size() != centers_.rows()) throw InvalidArgument("smoothed field: weights/centers mismatch");
    center_points_.reserve(static_cast<std::size_t>(centers_.rows()));
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) center_points_.emplace_back(centers_.row(i).transpose());
}

double SmoothedField::eval(const MultiIndex& alpha, const Point& x) const {
    return eval(DiffOp::partial(alpha), x);
}

double SmoothedField::eval(const DiffOp& op, const Point& x) const {
    if (op.max_order() > 2) throw UnsupportedOperation("smoothed fields support derivatives up to order 2");
    const DiffOp value = DiffOp::value(dim());
    double v = 0.0;
    for (std::size_t i = 0; i < center_points_.size(); ++i) {
        v += kernel_apply(kernel_, op, value, x, center_points_[i]) * weights_[static_cast<Eigen::Index>(i)];
    }
    return v;
}

Vector SmoothedField::eval_many(const DiffOp& op, const Matrix& points) const {
    Vector out(points.rows());
    for (Eigen::Index j = 0; j < points.rows(); ++j) out[j] = eval(op, Point(points.row(j).transpose()));
    return out;
}

SmoothedField fit_smoother(const KernelSpec& kernel, const FieldSamples& samples) {
    const Matrix& X = samples.points;
    if (X.rows() != samples.values.size()) throw InvalidArgument("field samples: point and value counts differ");
    if (X.rows() == 0) throw InvalidArgument("field samples are empty");
    if (!(samples.noise_level >= 0.0)) throw InvalidArgument("noise level must be nonnegative");
    kernel.check_dim(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
            if ((X.row(i) - X.row(j)).squaredNorm() == 0.0) throw InvalidArgument("field samples contain duplicate points");
        }
    }
    const Matrix G = gram_values(kernel, X, X);
    const double lambda = samples.noise_level;
    auto solved = regularized_solve(G, lambda * lambda, samples.values);
    return SmoothedField(kernel, X, solved.solution.col(0), solved.factorization.nugget());
}

std::vector<std::string> FeatureLayout::names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

int FeatureLayout::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Matrix build_features(std::span<const SmoothedField> fields, const Matrix& grid, const FeatureLayout& layout) {
    Matrix S(grid.rows(), layout.size());
    for (int c = 0; c < layout.size(); ++c) {
        const FeatureColumn& col = layout.columns[static_cast<std::size_t>(c)];
        if (col.kind == FeatureColumn::Kind::Coordinate) {
            if (col.axis < 0 || col.axis >= grid.cols()) throw InvalidArgument("feature coordinate axis out of range");
            S.col(c) = grid.col(col.axis);
            continue;
        }
        if (col.component < 0 || static_cast<std::size_t>(col.component) >= fields.size()) {
            throw InvalidArgument("feature column refers to a missing field");
        }
        S.col(c) = fields[static_cast<std::size_t>(col.component)].eval_many(col.op, grid);
    }
    return S;
}

}  // namespace kpde

#pragma once

#include "kpde/dictionary.hpp"
#include "kpde/kernel.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace kpde {

enum class EquationKind { KernelRegressor, SparseDictionary };

/// A learned algebraic relation P(s) over feature vectors s.
///
/// KernelRegressor:  P(s) = K(s, S) w,   w = (K(S,S) + lambda_K^2 I)^-1 f
/// SparseDictionary: P(s) = sum_k c_k theta_k(s)
class LearnedEquation {
  public:
    static LearnedEquation kernel_regressor(KernelSpec kernel, Matrix centers, Vector weights,
                                            std::vector<std::string> feature_names);
    static LearnedEquation sparse_dictionary(Dictionary dictionary, Vector coefficients,
                                             std::vector<std::string> feature_names);

    [[nodiscard]] EquationKind kind() const noexcept { return kind_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const Matrix& centers() const noexcept { return centers_; }
    [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
    [[nodiscard]] const Dictionary& dictionary() const noexcept { return dictionary_; }
    [[nodiscard]] const Vector& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    [[nodiscard]] int feature_dim() const noexcept { return static_cast<int>(feature_names_.size()); }

    [[nodiscard]] double eval(const Vector& s) const;
    [[nodiscard]] Vector grad(const Vector& s) const;

    /// Values at every row of `S`; when `grads` is non-null it receives the
    /// gradient rows.
    [[nodiscard]] Vector eval_rows(const Matrix& S, Matrix* grads = nullptr) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static LearnedEquation from_json(const nlohmann::json& doc);

  private:
    LearnedEquation() : kernel_(KernelSpec::gaussian(1.0)) {}
    void check_features(Eigen::Index n) const;

    EquationKind kind_ = EquationKind::KernelRegressor;
    KernelSpec kernel_;
    Matrix centers_;
    Vector weights_;
    Dictionary dictionary_;
    Vector coefficients_;
    std::vector<std::string> feature_names_;
};

/// Fits a kernel regressor on feature rows S with targets f and nugget
/// lambda_K^2. Rows closer than 1e-10 in max-norm are merged first, with
/// their targets averaged.
LearnedEquation fit_equation(const KernelSpec& kernel, const Matrix& S, const Vector& f, double lambda_k,
                             std::vector<std::string> feature_names);

/// Relative L2 error of P over test rows.
double equation_discovery_error(const LearnedEquation& eq, const Matrix& test_features, const Vector& test_targets);

nlohmann::json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);

}  // namespace kpde

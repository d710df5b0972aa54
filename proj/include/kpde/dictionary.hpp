#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace kpde {

/// Elementary function of a single feature.
struct TermFactor {
    enum class Fn { Power, Sin, Cos };
    int feature = 0;
    Fn fn = Fn::Power;
    int power = 1;

    bool operator==(const TermFactor&) const = default;
};

/// Product of elementary factors; an empty product is the constant 1.
struct DictionaryTerm {
    std::string name;
    std::vector<TermFactor> factors;

    [[nodiscard]] double value(const Eigen::Ref<const Eigen::VectorXd>& s) const;
    /// Adds scale * grad(term)(s) into `grad`.
    void accumulate_gradient(const Eigen::Ref<const Eigen::VectorXd>& s, double scale,
                             Eigen::Ref<Eigen::VectorXd> grad) const;

    bool operator==(const DictionaryTerm&) const = default;
};

struct Dictionary {
    std::vector<DictionaryTerm> terms;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(terms.size()); }
    [[nodiscard]] std::vector<std::string> names() const;
    /// Design matrix Theta: one row per feature row, one column per term.
    [[nodiscard]] Eigen::MatrixXd design(const Eigen::MatrixXd& features) const;
    /// Term index by display name, or -1.
    [[nodiscard]] int find(const std::string& name) const;

    bool operator==(const Dictionary&) const = default;
};

}  // namespace kpde

#include "kpde/dictionary.hpp"

#include "kpde/errors.hpp"

#include <cmath>

namespace kpde {

namespace {

double factor_value(const TermFactor& f, double x) {
    switch (f.fn) {
    case TermFactor::Fn::Power: return std::pow(x, f.power);
    case TermFactor::Fn::Sin: return std::sin(x);
    case TermFactor::Fn::Cos: return std::cos(x);
    }
    return 0.0;
}

double factor_derivative(const TermFactor& f, double x) {
    switch (f.fn) {
    case TermFactor::Fn::Power: return f.power == 0 ? 0.0 : f.power * std::pow(x, f.power - 1);
    case TermFactor::Fn::Sin: return std::cos(x);
    case TermFactor::Fn::Cos: return -std::sin(x);
    }
    return 0.0;
}

void check_feature(const TermFactor& f, Eigen::Index n) {
    if (f.feature < 0 || f.feature >= n) throw InvalidArgument("dictionary term refers to a missing feature");
}

}  // namespace

double DictionaryTerm::value(const Eigen::Ref<const Eigen::VectorXd>& s) const {
    double v = 1.0;
    for (const auto& f : factors) {
        check_feature(f, s.size());
        v *= factor_value(f, s[f.feature]);
    }
    return v;
}

void DictionaryTerm::accumulate_gradient(const Eigen::Ref<const Eigen::VectorXd>& s, double scale,
                                         Eigen::Ref<Eigen::VectorXd> grad) const {
    for (std::size_t k = 0; k < factors.size(); ++k) {
        check_feature(factors[k], s.size());
        double d = factor_derivative(factors[k], s[factors[k].feature]);
        for (std::size_t m = 0; m < factors.size(); ++m) {
            if (m != k) d *= factor_value(factors[m], s[factors[m].feature]);
        }
        grad[factors[k].feature] += scale * d;
    }
}

std::vector<std::string> Dictionary::names() const {
    std::vector<std::string> out;
    for (const auto& t : terms) out.push_back(t.name);
    return out;
}

Eigen::MatrixXd Dictionary::design(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd theta(features.rows(), size());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const Eigen::VectorXd s = features.row(i).transpose();
        for (int k = 0; k < size(); ++k) theta(i, k) = terms[static_cast<std::size_t>(k)].value(s);
    }
    return theta;
}

int Dictionary::find(const std::string& name) const {
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace kpde

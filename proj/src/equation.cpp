#include "kpde/equation.hpp"

#include "kpde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kpde {

LearnedEquation LearnedEquation::kernel_regressor(KernelSpec kernel, Matrix centers, Vector weights,
                                                  std::vector<std::string> feature_names) {
    if (weights.size() != centers.rows()) throw InvalidArgument("learned equation: weights/centers mismatch");
    if (static_cast<Eigen::Index>(feature_names.size()) != centers.cols()) {
        throw InvalidArgument("learned equation: feature names do not match center dimension");
    }
    kernel.check_dim(centers.cols());
    LearnedEquation eq;
    eq.kind_ = EquationKind::KernelRegressor;
    eq.kernel_ = std::move(kernel);
    eq.centers_ = std::move(centers);
    eq.weights_ = std::move(weights);
    eq.feature_names_ = std::move(feature_names);
    return eq;
}

LearnedEquation LearnedEquation::sparse_dictionary(Dictionary dictionary, Vector coefficients,
                                                   std::vector<std::string> feature_names) {
    if (coefficients.size() != dictionary.size()) throw InvalidArgument("coefficient count does not match dictionary");
    for (const auto& t : dictionary.terms) {
        for (const auto& f : t.factors) {
            if (f.feature < 0 || f.feature >= static_cast<int>(feature_names.size())) {
                throw InvalidArgument("dictionary term refers to a missing feature");
            }
        }
    }
    LearnedEquation eq;
    eq.kind_ = EquationKind::SparseDictionary;
    eq.dictionary_ = std::move(dictionary);
    eq.coefficients_ = std::move(coefficients);
    eq.feature_names_ = std::move(feature_names);
    return eq;
}

void LearnedEquation::check_features(Eigen::Index n) const {
    if (n != feature_dim()) {
        throw InvalidArgument("feature vector of length " + std::to_string(n) + " does not match layout of " +
                              std::to_string(feature_dim()));
    }
}

double LearnedEquation::eval(const Vector& s) const {
    check_features(s.size());
    if (kind_ == EquationKind::SparseDictionary) {
        double v = 0.0;
        for (int k = 0; k < dictionary_.size(); ++k) {
            if (coefficients_[k] != 0.0) v += coefficients_[k] * dictionary_.terms[static_cast<std::size_t>(k)].value(s);
        }
        return v;
    }
    double v = 0.0;
    for (Eigen::Index j = 0; j < centers_.rows(); ++j) {
        v += weights_[j] * kernel_eval(kernel_, s, centers_.row(j).transpose());
    }
    return v;
}

Vector LearnedEquation::grad(const Vector& s) const {
    check_features(s.size());
    const Eigen::Index D = s.size();
    Vector g = Vector::Zero(D);
    if (kind_ == EquationKind::SparseDictionary) {
        for (int k = 0; k < dictionary_.size(); ++k) {
            if (coefficients_[k] != 0.0) dictionary_.terms[static_cast<std::size_t>(k)].accumulate_gradient(s, coefficients_[k], g);
        }
        return g;
    }
    const MultiIndex zero = MultiIndex::zero(static_cast<int>(D));
    for (Eigen::Index d = 0; d < D; ++d) {
        const MultiIndex e = MultiIndex::unit(static_cast<int>(D), static_cast<int>(d));
        double acc = 0.0;
        for (Eigen::Index j = 0; j < centers_.rows(); ++j) {
            acc += weights_[j] * kernel_deriv(kernel_, e, zero, s, centers_.row(j).transpose());
        }
        g[d] = acc;
    }
    return g;
}

Vector LearnedEquation::eval_rows(const Matrix& S, Matrix* grads) const {
    check_features(S.cols());
    const Eigen::Index m = S.rows();
    const Eigen::Index D = S.cols();
    Vector values(m);
    if (grads) grads->resize(m, D);

    if (kind_ == EquationKind::SparseDictionary) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const Vector s = S.row(i).transpose();
            values[i] = eval(s);
            if (grads) grads->row(i) = grad(s).transpose();
        }
        return values;
    }

    constexpr Eigen::Index block = 256;
    if (kernel_.family() == KernelFamily::Polynomial) {
        const int deg = kernel_.degree();
        const Matrix wc = centers_.array().colwise() * weights_.array();
        for (Eigen::Index r0 = 0; r0 < m; r0 += block) {
            const Eigen::Index rows = std::min(block, m - r0);
            const Matrix base = (S.middleRows(r0, rows) * centers_.transpose()).array() + kernel_.offset();
            values.segment(r0, rows) = base.array().pow(deg).matrix() * weights_;
            if (grads) {
                const Matrix dbase = deg == 1 ? Matrix::Ones(rows, base.cols()).eval()
                                              : Matrix((deg * base.array().pow(deg - 1)).matrix());
                grads->middleRows(r0, rows) = dbase * wc;
            }
        }
        return values;
    }

    Vector inv(D);
    for (Eigen::Index d = 0; d < D; ++d) inv[d] = 1.0 / kernel_.lengthscale(static_cast<int>(d));
    const Matrix C = centers_.array().rowwise() * inv.transpose().array();
    const Vector c2 = C.rowwise().squaredNorm();
    const Matrix wC = C.array().colwise() * weights_.array();
    for (Eigen::Index r0 = 0; r0 < m; r0 += block) {
        const Eigen::Index rows = std::min(block, m - r0);
        const Matrix Q = S.middleRows(r0, rows).array().rowwise() * inv.transpose().array();
        const Vector q2 = Q.rowwise().squaredNorm();
        Matrix K = -2.0 * Q * C.transpose();
        K.colwise() += q2;
        K.rowwise() += c2.transpose();
        K = (-0.5 * K.array().max(0.0)).exp();
        const Vector v = K * weights_;
        values.segment(r0, rows) = v;
        if (grads) {
            const Matrix kw = K * wC;
            // d/ds_d sum_j w_j k(s, c_j) = -(q_d v - sum_j w_j k_j c_jd) / l_d
            const Matrix diff = (Q.array().colwise() * v.array() - kw.array()).matrix();
            grads->middleRows(r0, rows) = -(diff * inv.asDiagonal());
        }
    }
    return values;
}

nlohmann::json kernel_to_json(const KernelSpec& k) {
    nlohmann::json j;
    j["family"] = to_string(k.family());
    switch (k.family()) {
    case KernelFamily::Gaussian: j["sigma"] = k.sigma(); break;
    case KernelFamily::ARD: j["lengthscales"] = k.lengthscales(); break;
    case KernelFamily::Polynomial:
        j["degree"] = k.degree();
        j["offset"] = k.offset();
        break;
    }
    j["dim"] = k.dim();
    return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
    const KernelFamily fam = kernel_family_from_string(j.at("family").get<std::string>());
    const int dim = j.value("dim", 0);
    switch (fam) {
    case KernelFamily::Gaussian: return KernelSpec::gaussian(j.at("sigma").get<double>(), dim);
    case KernelFamily::ARD: return KernelSpec::ard(j.at("lengthscales").get<std::vector<double>>());
    case KernelFamily::Polynomial:
        return KernelSpec::polynomial(j.at("degree").get<int>(), j.at("offset").get<double>(), dim);
    }
    throw InvalidArgument("unknown kernel family");
}

namespace {

std::string fn_name(TermFactor::Fn fn) {
    switch (fn) {
    case TermFactor::Fn::Power: return "pow";
    case TermFactor::Fn::Sin: return "sin";
    case TermFactor::Fn::Cos: return "cos";
    }
    return "pow";
}

TermFactor::Fn fn_from_name(const std::string& s) {
    if (s == "pow") return TermFactor::Fn::Power;
    if (s == "sin") return TermFactor::Fn::Sin;
    if (s == "cos") return TermFactor::Fn::Cos;
    throw InvalidArgument("unknown dictionary factor '" + s + "'");
}

}  // namespace

nlohmann::json LearnedEquation::to_json() const {
    nlohmann::json j;
    j["feature_names"] = feature_names_;
    if (kind_ == EquationKind::KernelRegressor) {
        j["kind"] = "kernel_regressor";
        j["kernel"] = kernel_to_json(kernel_);
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
            rows.push_back(std::vector<double>(centers_.row(i).begin(), centers_.row(i).end()));
        }
        j["centers"] = std::move(rows);
        j["weights"] = std::vector<double>(weights_.begin(), weights_.end());
        return j;
    }
    j["kind"] = "sparse_dictionary";
    nlohmann::json terms = nlohmann::json::array();
    for (int k = 0; k < dictionary_.size(); ++k) {
        const auto& t = dictionary_.terms[static_cast<std::size_t>(k)];
        nlohmann::json factors = nlohmann::json::array();
        for (const auto& f : t.factors) {
            factors.push_back({{"feature", f.feature}, {"fn", fn_name(f.fn)}, {"power", f.power}});
        }
        terms.push_back({{"name", t.name}, {"factors", factors}, {"coefficient", coefficients_[k]}});
    }
    j["terms"] = std::move(terms);
    return j;
}

LearnedEquation LearnedEquation::from_json(const nlohmann::json& doc) {
    auto names = doc.at("feature_names").get<std::vector<std::string>>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "kernel_regressor") {
        const auto& rows = doc.at("centers");
        const auto w = doc.at("weights").get<std::vector<double>>();
        Matrix centers(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = rows[i].get<std::vector<double>>();
            if (r.size() != names.size()) throw InvalidArgument("center row has the wrong length");
            for (std::size_t d = 0; d < r.size(); ++d) centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = r[d];
        }
        Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        return kernel_regressor(kernel_from_json(doc.at("kernel")), std::move(centers), std::move(weights), std::move(names));
    }
    if (kind == "sparse_dictionary") {
        Dictionary dict;
        std::vector<double> coeffs;
        for (const auto& t : doc.at("terms")) {
            DictionaryTerm term;
            term.name = t.at("name").get<std::string>();
            for (const auto& f : t.at("factors")) {
                term.factors.push_back(
                    {f.at("feature").get<int>(), fn_from_name(f.at("fn").get<std::string>()), f.at("power").get<int>()});
            }
            dict.terms.push_back(std::move(term));
            coeffs.push_back(t.at("coefficient").get<double>());
        }
        Vector c = Eigen::Map<const Vector>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
        return sparse_dictionary(std::move(dict), std::move(c), std::move(names));
    }
    throw InvalidArgument("unknown equation kind '" + kind + "'");
}

LearnedEquation fit_equation(const KernelSpec& kernel, const Matrix& S, const Vector& f, double lambda_k,
                             std::vector<std::string> feature_names) {
    if (S.rows() != f.size()) throw InvalidArgument("feature rows and targets differ in length");
    if (S.rows() == 0) throw InvalidArgument("no training features");
    if (!(lambda_k >= 0.0)) throw InvalidArgument("lambda_K must be nonnegative");

    // Merge near-duplicate rows. Sorting on the first column keeps the scan
    // close to linear for well-spread features.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(S.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return S(a, 0) < S(b, 0); });
    constexpr double tol = 1e-10;
    std::vector<Eigen::Index> rep(static_cast<std::size_t>(S.rows()), -1);
    for (std::size_t a = 0; a < order.size(); ++a) {
        const Eigen::Index i = order[a];
        if (rep[static_cast<std::size_t>(i)] >= 0) continue;
        rep[static_cast<std::size_t>(i)] = i;
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const Eigen::Index j = order[b];
            if (S(j, 0) - S(i, 0) > tol) break;
            if (rep[static_cast<std::size_t>(j)] < 0 && (S.row(i) - S.row(j)).cwiseAbs().maxCoeff() <= tol) {
                rep[static_cast<std::size_t>(j)] = i;
            }
        }
    }
    std::vector<Eigen::Index> kept;
    std::vector<double> sum, count;
    std::vector<Eigen::Index> slot(static_cast<std::size_t>(S.rows()), -1);
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const Eigen::Index r = rep[static_cast<std::size_t>(i)];
        if (slot[static_cast<std::size_t>(r)] < 0) {
            slot[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(kept.size());
            kept.push_back(r);
            sum.push_back(0.0);
            count.push_back(0.0);
        }
        const auto k = static_cast<std::size_t>(slot[static_cast<std::size_t>(r)]);
        sum[k] += f[i];
        count[k] += 1.0;
    }
    Matrix centers(static_cast<Eigen::Index>(kept.size()), S.cols());
    Vector targets(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        centers.row(static_cast<Eigen::Index>(k)) = S.row(kept[k]);
        targets[static_cast<Eigen::Index>(k)] = sum[k] / count[k];
    }

    const Matrix G = gram_values(kernel, centers, centers);
    auto solved = regularized_solve(G, lambda_k * lambda_k, targets);
    return LearnedEquation::kernel_regressor(kernel, std::move(centers), solved.solution.col(0), std::move(feature_names));
}

double equation_discovery_error(const LearnedEquation& eq, const Matrix& test_features, const Vector& test_targets) {
    if (test_features.rows() != test_targets.size()) throw InvalidArgument("test features and targets differ in length");
    const double norm = test_targets.norm();
    if (!(norm > 0.0)) throw InvalidArgument("test targets have zero norm");
    return (eq.eval_rows(test_features) - test_targets).norm() / norm;
}

}  // namespace kpde

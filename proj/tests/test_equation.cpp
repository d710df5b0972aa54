#include "kpde/equation.hpp"
#include "kpde/errors.hpp"
#include "kpde/sindy.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace kpde;

namespace {

Matrix random_rows(int n, int d, unsigned seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(lo, hi);
    Matrix S(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) S(i, j) = U(rng);
    return S;
}

std::vector<std::string> names(int d) {
    std::vector<std::string> out;
    for (int i = 0; i < d; ++i) out.push_back("s" + std::to_string(i));
    return out;
}

}  // namespace

TEST_CASE("kernel regressor evaluates K(s, S) w") {
    const KernelSpec k = KernelSpec::gaussian(0.7);
    const Matrix S = random_rows(20, 3, 1);
    Vector f(20);
    for (int i = 0; i < 20; ++i) f[i] = S(i, 0) * S(i, 1) - S(i, 2);
    const LearnedEquation eq = fit_equation(k, S, f, 1e-4, names(3));
    CHECK(eq.kind() == EquationKind::KernelRegressor);
    const Vector s = Vector::Constant(3, 0.1);
    double expect = 0.0;
    for (int i = 0; i < 20; ++i) expect += eq.weights()[i] * kernel_eval(k, s, S.row(i).transpose());
    CHECK(eq.eval(s) == doctest::Approx(expect).epsilon(1e-12));
    // small nugget: training targets are nearly reproduced
    for (int i = 0; i < 20; ++i) CHECK(std::abs(eq.eval(S.row(i).transpose()) - f[i]) < 1e-3);
}

TEST_CASE("batched evaluation and gradients agree with pointwise ones") {
    const std::vector<KernelSpec> kernels{KernelSpec::gaussian(0.8), KernelSpec::ard({0.5, 1.0, 2.0}),
                                          KernelSpec::polynomial(1, 1.0), KernelSpec::polynomial(3, 0.5)};
    const Matrix S = random_rows(30, 3, 2);
    Vector f(30);
    for (int i = 0; i < 30; ++i) f[i] = std::sin(S(i, 0)) + S(i, 1) * S(i, 2);
    const Matrix T = random_rows(300, 3, 3);
    for (const auto& k : kernels) {
        CAPTURE(to_string(k.family()));
        const LearnedEquation eq = fit_equation(k, S, f, 1e-3, names(3));
        Matrix G;
        const Vector v = eq.eval_rows(T, &G);
        for (int r = 0; r < T.rows(); r += 17) {
            const Vector t = T.row(r).transpose();
            CHECK(oracle::rel_err(v[r], eq.eval(t)) < 1e-10);
            const Vector g = eq.grad(t);
            for (int d = 0; d < 3; ++d) {
                CHECK(oracle::rel_err(G(r, d), g[d]) < 1e-9);
                auto fd = [&](double x) {
                    Vector p = t;
                    p[d] = x;
                    return eq.eval(p);
                };
                CHECK(oracle::rel_err(g[d], oracle::central_diff(fd, t[d], 1e-3)) < 1e-5);
            }
        }
    }
}

TEST_CASE("duplicate feature rows are merged with averaged targets") {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    Matrix S(4, 2);
    S << 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.5;
    Vector f(4);
    f << 1.0, 2.0, 3.0, 4.0;
    const LearnedEquation eq = fit_equation(k, S, f, 1e-8, names(2));
    CHECK(eq.centers().rows() == 3);
    CHECK(eq.eval(Vector::Zero(2)) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("equation fitting validates inputs") {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const Matrix S = random_rows(5, 2, 4);
    CHECK_THROWS_AS(fit_equation(k, S, Vector::Zero(4), 1e-3, names(2)), InvalidArgument);
    CHECK_THROWS_AS(fit_equation(k, S, Vector::Zero(5), 1e-3, names(3)), InvalidArgument);
    const LearnedEquation eq = fit_equation(k, S, Vector::Ones(5), 1e-3, names(2));
    CHECK_THROWS_AS((void)eq.eval(Vector::Zero(3)), InvalidArgument);
    CHECK_THROWS_AS(equation_discovery_error(eq, S, Vector::Zero(5)), InvalidArgument);
}

TEST_CASE("discovery error is the relative L2 misfit") {
    Dictionary d;
    d.terms = {{"s0", {TermFactor{0, TermFactor::Fn::Power, 1}}}};
    Vector c(1);
    c << 2.0;
    const LearnedEquation eq = LearnedEquation::sparse_dictionary(d, c, names(1));
    Matrix S(2, 1);
    S << 1.0, 2.0;
    Vector t(2);
    t << 2.0, 5.0;
    // predictions (2, 4): |(0, -1)| / |(2, 5)|
    CHECK(equation_discovery_error(eq, S, t) == doctest::Approx(1.0 / std::sqrt(29.0)));
}

TEST_CASE("json round-trip preserves predictions") {
    const Matrix S = random_rows(12, 2, 5);
    Vector f = S.col(0).array().square() + S.col(1).array();
    for (const auto& k : {KernelSpec::gaussian(0.6, 2), KernelSpec::ard({0.3, 0.9}), KernelSpec::polynomial(2, 1.0)}) {
        const LearnedEquation eq = fit_equation(k, S, f, 1e-4, names(2));
        const LearnedEquation back = LearnedEquation::from_json(nlohmann::json::parse(eq.to_json().dump()));
        CHECK(back.kernel() == k);
        const Vector s = Vector::Constant(2, 0.3);
        CHECK(back.eval(s) == eq.eval(s));
        CHECK(back.feature_names() == eq.feature_names());
    }
    const Dictionary d = build_dictionary(ProblemId::Pendulum);
    Vector c = Vector::Zero(6);
    c[3] = -9.81;
    c[5] = 0.25;
    const LearnedEquation sd = as_equation(d, c, {"u1", "u2"});
    const LearnedEquation back = LearnedEquation::from_json(sd.to_json());
    CHECK(back.kind() == EquationKind::SparseDictionary);
    CHECK(back.dictionary() == d);
    const Vector s = Vector::Constant(2, 0.7);
    CHECK(back.eval(s) == doctest::Approx(-9.81 * std::sin(0.7) + 0.25));
    CHECK_THROWS(LearnedEquation::from_json(nlohmann::json{{"kind", "mystery"}}));
}

TEST_CASE("dictionary terms and their gradients") {
    const Dictionary d = build_dictionary(ProblemId::Diffusion);
    REQUIRE(d.size() == 12);
    CHECK(d.names().front() == "u_t");
    CHECK(d.find("u^2") == 3);
    CHECK(d.find("1") == 11);
    const Matrix S = random_rows(6, 3, 6);
    const Matrix Theta = d.design(S);
    for (int r = 0; r < 6; ++r) {
        const double u = S(r, 0), ut = S(r, 1), uxx = S(r, 2);
        const double expect[12] = {ut,          uxx,        u,      u * u,      u * u * u,      u * uxx,
                                   u * u * uxx, u * u * u * uxx, u * ut, u * u * ut, u * u * u * ut, 1.0};
        for (int c = 0; c < 12; ++c) CHECK(Theta(r, c) == doctest::Approx(expect[c]));
    }
    const Dictionary p = build_dictionary(ProblemId::Pendulum);
    REQUIRE(p.size() == 6);
    const Vector s = Vector::Constant(2, 0.4);
    for (const auto& term : p.terms) {
        Vector g = Vector::Zero(2);
        term.accumulate_gradient(s, 1.0, g);
        auto f = [&](double x) {
            Vector q = s;
            q[0] = x;
            return term.value(q);
        };
        CHECK(oracle::rel_err(g[0], oracle::central_diff(f, 0.4, 1e-3)) < 1e-8);
        CHECK(g[1] == 0.0);
    }
    CHECK_THROWS_AS(build_dictionary(ProblemId::Darcy), UnsupportedOperation);
}

TEST_CASE("STLSQ recovers a sparse relation") {
    const Dictionary d = build_dictionary(ProblemId::Pendulum);
    const Matrix S = random_rows(60, 2, 8, -2.0, 2.0);
    const Matrix Theta = d.design(S);
    Vector truth = Vector::Zero(6);
    truth[3] = -9.81;
    truth[5] = 0.5;
    const Vector y = Theta * truth;
    const StlsqResult r = stlsq(Theta, y);
    CHECK((r.coefficients - truth).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.support_sizes.back() == 2);
    CHECK(r.iterations >= 1);
}

TEST_CASE("STLSQ thresholding and degenerate fits") {
    Matrix A = Matrix::Identity(3, 3);
    Vector y(3);
    y << 1.0, 0.001, -0.5;
    const StlsqResult r = stlsq(A, y, {0.01, 10, 1e-14});
    CHECK(r.coefficients[0] == doctest::Approx(1.0));
    CHECK(r.coefficients[1] == 0.0);
    CHECK(r.coefficients[2] == doctest::Approx(-0.5));
    CHECK_THROWS_AS(stlsq(A, Vector::Constant(3, 1e-5)), DegenerateModel);
    CHECK_THROWS_AS(stlsq(A, Vector::Zero(2)), InvalidArgument);
    Vector init(3);
    init << 1.0, 0.0, 0.0;
    const StlsqResult r2 = stlsq(A, y, {0.01, 10, 1e-14}, &init);
    CHECK(r2.coefficients[2] == 0.0);
}

TEST_CASE("STLSQ examples and invariants") {
    SUBCASE("identity design drops the small entry") {
        Vector y(2);
        y << 1.0, 0.01;
        const StlsqResult r = stlsq(Matrix::Identity(2, 2), y, {0.5, 20, 1e-12});
        CHECK(r.coefficients[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(r.coefficients[1] == 0.0);
    }
    SUBCASE("orthogonal design with large coefficients is plain least squares") {
        const Eigen::HouseholderQR<Matrix> qr(random_rows(8, 3, 21));
        const Matrix Q = qr.householderQ() * Matrix::Identity(8, 3);
        Vector c(3);
        c << 0.7, -1.3, 2.1;
        const StlsqResult r = stlsq(Q, Q * c, {0.1, 20, 1e-14});
        CHECK((r.coefficients - c).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(r.support_sizes.front() == 3);
    }

    const Dictionary d = build_dictionary(ProblemId::Pendulum);
    const Matrix Theta = d.design(random_rows(80, 2, 33, -2.0, 2.0));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1e-3);
    Vector truth = Vector::Zero(6);
    truth[0] = 0.3;
    truth[3] = -1.0;
    truth[5] = 0.2;
    Vector y = Theta * truth;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += N(rng);
    const StlsqOptions opt{0.05, 20, 1e-12};
    const StlsqResult r = stlsq(Theta, y, opt);

    SUBCASE("idempotence") {
        const StlsqResult again = stlsq(Theta, y, opt, &r.coefficients);
        CHECK((again.coefficients - r.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("the active set never grows") {
        for (std::size_t k = 1; k < r.support_sizes.size(); ++k) CHECK(r.support_sizes[k] <= r.support_sizes[k - 1]);
    }
    SUBCASE("scaling the target scales the coefficients") {
        for (Eigen::Index k = 0; k < r.coefficients.size(); ++k) {
            if (r.coefficients[k] != 0.0) REQUIRE(std::abs(r.coefficients[k]) > 2.0 * opt.threshold);
        }
        const StlsqResult s = stlsq(Theta, 2.0 * y, opt);
        CHECK((s.coefficients - 2.0 * r.coefficients).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("dictionary equations evaluate their coefficients") {
    const Dictionary d = build_dictionary(ProblemId::Pendulum);
    Vector s(2);
    s << 0.4, -0.2;
    const LearnedEquation zero = as_equation(d, Vector::Zero(6), {"u1", "u2"});
    CHECK(zero.eval(s) == 0.0);
    Vector one = Vector::Zero(6);
    one[5] = 1.0;
    const LearnedEquation constant = as_equation(d, one, {"u1", "u2"});
    CHECK(constant.eval(s) == doctest::Approx(1.0));
    CHECK(constant.grad(s).cwiseAbs().maxCoeff() == 0.0);
}

#include "oracles.hpp"

#include "kpde/errors.hpp"
#include "kpde/kernel.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace kpde;

namespace {

Point pt(std::initializer_list<double> v) {
    Point p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

// Random pair with |x - y| in [0.1, 3].
std::pair<Point, Point> random_pair(std::mt19937_64& rng, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> dist(0.1, 3.0);
    Point x(dim), dir(dim);
    for (int i = 0; i < dim; ++i) {
        x[i] = u(rng);
        dir[i] = u(rng);
    }
    dir.normalize();
    Point y = x + dist(rng) * dir;
    return {x, y};
}

}  // namespace

TEST_CASE("kernel_eval closed forms") {
    const auto g = KernelSpec::gaussian(1.0);
    CHECK(kernel_eval(g, pt({0.3, -0.2}), pt({0.3, -0.2})) == 1.0);
    CHECK(kernel_eval(g, pt({0.0}), pt({1.0})) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(kernel_eval(g, pt({0.0}), pt({1.0})) == doctest::Approx(0.60653).epsilon(1e-5));

    const auto p = KernelSpec::polynomial(2, 0.0);
    CHECK(kernel_eval(p, pt({1, 1}), pt({1, 1})) == 4.0);

    // product of two 1-D factors: exp(-1/2) * exp(-1/2)
    const auto a = KernelSpec::ard({1.0, 2.0});
    CHECK(kernel_eval(a, pt({0, 0}), pt({1, 2})) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("kernel argument validation") {
    CHECK_THROWS_AS(KernelSpec::gaussian(0.0), InvalidArgument);
    CHECK_THROWS_AS(KernelSpec::ard({1.0, -1.0}), InvalidArgument);
    CHECK_THROWS_AS(KernelSpec::polynomial(0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(KernelSpec::polynomial(6, 1.0), InvalidArgument);
    CHECK_THROWS_AS(KernelSpec::polynomial(2, -0.1), InvalidArgument);

    const auto a = KernelSpec::ard({1.0, 2.0});
    CHECK_THROWS_AS(kernel_eval(a, pt({0, 0, 0}), pt({1, 2, 0})), InvalidArgument);
    CHECK_THROWS_AS(kernel_eval(KernelSpec::gaussian(1.0), pt({0}), pt({1, 2})), InvalidArgument);

    const auto g = KernelSpec::gaussian(1.0);
    CHECK_THROWS_AS(kernel_deriv(g, MultiIndex{3}, MultiIndex{0}, pt({0}), pt({1})), UnsupportedOperation);
    CHECK_THROWS_AS(kernel_deriv(KernelSpec::polynomial(2, 1.0), MultiIndex{2}, MultiIndex{0}, pt({0}), pt({1})),
                    UnsupportedOperation);
}

TEST_CASE("kernel_deriv examples") {
    const auto g = KernelSpec::gaussian(1.0);
    const Point x = pt({0.4, -0.1});
    const Point y = pt({-0.3, 0.7});
    CHECK(kernel_deriv(g, MultiIndex{0, 0}, MultiIndex{0, 0}, x, y) == kernel_eval(g, x, y));
    CHECK(kernel_deriv(g, MultiIndex{1}, MultiIndex{0}, pt({0.2}), pt({0.2})) == 0.0);

    // d^2/dx^2 exp(-(x-y)^2/2) at x=0, y=1 equals (r^2 - 1) e^{-r^2/2} with r = -1, i.e. 0.
    const double v = kernel_deriv(g, MultiIndex{2}, MultiIndex{0}, pt({0.0}), pt({1.0}));
    const double fd = oracle::kernel_deriv_fd(g, MultiIndex{2}, MultiIndex{0}, pt({0.0}), pt({1.0}), 1e-4L);
    CHECK(std::abs(v - fd) < 1e-6);
    // Away from the inflection point the relative comparison is meaningful.
    const double v2 = kernel_deriv(g, MultiIndex{2}, MultiIndex{0}, pt({0.0}), pt({1.7}));
    const double fd2 = oracle::kernel_deriv_fd(g, MultiIndex{2}, MultiIndex{0}, pt({0.0}), pt({1.7}), 1e-4L);
    CHECK(oracle::rel_err(v2, fd2, 0.0) < 1e-6);
}

TEST_CASE("kernel derivatives match nested finite differences") {
    std::mt19937_64 rng(1234);
    const std::vector<std::pair<KernelSpec, int>> specs{
        {KernelSpec::gaussian(1.0), 1},
        {KernelSpec::gaussian(0.7, 2), 2},
        {KernelSpec::ard({0.8, 1.5}), 2},
        {KernelSpec::ard({1.1, 0.9, 2.0}), 3},
    };
    double worst = 0.0;
    for (const auto& [spec, dim] : specs) {
        const auto idx = oracle::multi_indices(dim, 2);
        for (int trial = 0; trial < 4; ++trial) {
            auto [x, y] = random_pair(rng, dim);
            for (const auto& a : idx) {
                for (const auto& b : idx) {
                    const double v = kernel_deriv(spec, a, b, x, y);
                    const double ref = oracle::kernel_deriv_fd(spec, a, b, x, y, 2e-3L);
                    worst = std::max(worst, oracle::rel_err(v, ref));
                }
            }
        }
    }
    CHECK(worst < 1e-6);

    worst = 0.0;
    for (const auto& spec : {KernelSpec::polynomial(3, 0.5), KernelSpec::polynomial(1, 0.0),
                             KernelSpec::polynomial(5, 2.0)}) {
        const auto idx = oracle::multi_indices(2, 1);
        for (int trial = 0; trial < 5; ++trial) {
            auto [x, y] = random_pair(rng, 2);
            for (const auto& a : idx) {
                for (const auto& b : idx) {
                    const double v = kernel_deriv(spec, a, b, x, y);
                    const double ref = oracle::kernel_deriv_fd(spec, a, b, x, y, 1e-3L);
                    worst = std::max(worst, oracle::rel_err(v, ref));
                }
            }
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("kernel symmetry and adjoint symmetry are exact") {
    std::mt19937_64 rng(99);
    for (const auto& spec : {KernelSpec::gaussian(0.4), KernelSpec::ard({0.3, 1.2}), KernelSpec::polynomial(4, 1.0)}) {
        const int max_order = spec.family() == KernelFamily::Polynomial ? 1 : 2;
        const auto idx = oracle::multi_indices(2, max_order);
        for (int trial = 0; trial < 10; ++trial) {
            auto [x, y] = random_pair(rng, 2);
            CHECK(kernel_eval(spec, x, y) == kernel_eval(spec, y, x));
            for (const auto& a : idx) {
                for (const auto& b : idx) CHECK(kernel_deriv(spec, a, b, x, y) == kernel_deriv(spec, b, a, y, x));
            }
        }
    }
}

TEST_CASE("gram examples") {
    const auto g = KernelSpec::gaussian(0.5);
    const Functional f{pt({0.2}), DiffOp::value(1)};
    std::vector<Functional> one{f};
    Matrix G = gram(g, one, one);
    REQUIRE(G.rows() == 1);
    CHECK(G(0, 0) == kernel_eval(g, f.point, f.point));

    std::vector<Functional> two{f, f};
    G = gram(g, two, two);
    CHECK(G(0, 0) == G(0, 1));
    CHECK(G(1, 0) == G(1, 1));
    CHECK(std::abs(G.determinant()) < 1e-14);

    // pendulum observation times, values only
    std::vector<Functional> pend;
    for (int j = 1; j <= 30; ++j) pend.push_back({pt({j / 30.0}), DiffOp::value(1)});
    G = gram(g, pend, pend);
    REQUIRE(G.rows() == 30);
    double diff = 0.0;
    for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 30; ++j) diff = std::max(diff, std::abs(G(i, j) - kernel_eval(g, pend[i].point, pend[j].point)));
    }
    CHECK(diff == 0.0);

    Matrix X(30, 1);
    for (int j = 0; j < 30; ++j) X(j, 0) = (j + 1) / 30.0;
    CHECK((gram_values(g, X, X) - G).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("functionals on different components are uncorrelated") {
    const auto g = KernelSpec::gaussian(0.5);
    std::vector<Functional> fs{{pt({0.1}), DiffOp::value(1), 0}, {pt({0.1}), DiffOp::value(1), 1}};
    const Matrix G = gram(g, fs, fs);
    CHECK(G(0, 1) == 0.0);
    CHECK(G(1, 1) == 1.0);
}

TEST_CASE("gram over derivative functionals is positive semidefinite") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> size(2, 30);
    const std::vector<DiffOp> ops{DiffOp::value(2), DiffOp::partial(MultiIndex{1, 0}), DiffOp::partial(MultiIndex{0, 1}),
                                  DiffOp::laplacian(2), DiffOp::partial(MultiIndex{1, 1})};
    for (int set = 0; set < 20; ++set) {
        const auto spec = set % 2 == 0 ? KernelSpec::gaussian(0.3) : KernelSpec::ard({0.2, 0.5});
        std::vector<Functional> fs;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) fs.push_back({pt({u(rng), u(rng)}), ops[static_cast<std::size_t>(i) % ops.size()]});
        const Matrix G = gram(spec, fs, fs);
        CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(G);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        CHECK(lmin >= -1e-8 * lmax);
    }
}

TEST_CASE("regularized_solve") {
    SUBCASE("identity") {
        Matrix rhs = Vector::Unit(4, 0);
        auto s = regularized_solve(Matrix::Identity(4, 4), 0.0, rhs);
        CHECK((s.solution - rhs).norm() < 1e-15);
        CHECK(s.factorization.nugget() == 0.0);
    }
    SUBCASE("pure nugget") {
        const double lam2 = 0.25;
        Vector b(3);
        b << 1.0, -2.0, 0.5;
        auto s = regularized_solve(Matrix::Zero(3, 3), lam2, b);
        CHECK((s.solution - b / lam2).norm() < 1e-14);
    }
    SUBCASE("random SPD residual") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 1.0);
        Matrix A(10, 10);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) A(i, j) = n(rng);
        const Matrix G = A * A.transpose();
        Vector b(10);
        for (int i = 0; i < 10; ++i) b[i] = n(rng);
        const double lam2 = 1e-3;
        auto s = regularized_solve(G, lam2, b);
        const Matrix reg = G + lam2 * Matrix::Identity(10, 10);
        CHECK((reg * s.solution - b).norm() / b.norm() < 1e-10);
        const Matrix L = s.factorization.factor();
        CHECK((L * L.transpose() - reg).norm() / reg.norm() < 1e-8);
    }
    SUBCASE("escalation records the applied nugget") {
        // rank one, so the exact factorization fails
        Vector v = Vector::Ones(5);
        const Matrix G = v * v.transpose();
        auto s = regularized_solve(G, 0.0, Vector::Ones(5));
        CHECK(s.factorization.nugget() > 0.0);
        CHECK(s.solution.allFinite());
    }
    SUBCASE("failure after escalation") {
        Matrix G = Matrix::Identity(3, 3);
        G(0, 0) = -1.0;
        try {
            (void)regularized_solve(G, 1e-6, Vector::Ones(3));
            FAIL("expected NumericalFailure");
        } catch (const NumericalFailure& e) {
            CHECK(e.nugget() == doctest::Approx(1.0));
        }
    }
    SUBCASE("asymmetric input rejected") {
        Matrix G = Matrix::Identity(2, 2);
        G(0, 1) = 0.1;
        CHECK_THROWS_AS(regularized_solve(G, 0.0, Vector::Ones(2)), InvalidArgument);
    }
}

#include "seclab/compound.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace seclab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RealMatrix random_matrix(int d, std::mt19937_64& rng)
{
    std::normal_distribution<double> N(0.0, 1.0);
    RealMatrix A(d, d);
    for (int i = 0; i < d * d; ++i) A.data()[i] = N(rng);
    return A;
}

// Leibniz determinant, independent of Eigen's LU.
double leibniz_det(const RealMatrix& M)
{
    const int n = static_cast<int>(M.rows());
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    double s = 0.0;
    do {
        int inv = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) inv += p[i] > p[j];
        double t = inv % 2 ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i) t *= M(i, p[i]);
        s += t;
    } while (std::next_permutation(p.begin(), p.end()));
    return s;
}

// Wedge power by explicit minors with a Leibniz determinant.
RealMatrix minors_oracle(const RealMatrix& M, int k)
{
    const auto idx = multi_indices(static_cast<int>(M.rows()), k);
    RealMatrix W(idx.size(), idx.size());
    for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = 0; b < idx.size(); ++b) {
            RealMatrix S(k, k);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) S(i, j) = M(idx[a][i], idx[b][j]);
            W(a, b) = leibniz_det(S);
        }
    return W;
}

// The displayed 3x3 rule in the (e1^e2, e1^e3, e2^e3) basis.
RealMatrix displayed_rule(const RealMatrix& a)
{
    RealMatrix C(3, 3);
    C << a(0, 0) + a(1, 1), a(1, 2), -a(0, 2),
         a(2, 1), a(0, 0) + a(2, 2), a(0, 1),
         -a(2, 0), a(1, 0), a(1, 1) + a(2, 2);
    return C;
}

} // namespace

TEST_CASE("binomial and multi-index basis")
{
    CHECK(binomial(4, 2) == 6);
    CHECK(binomial(5, 0) == 1);
    CHECK(binomial(3, 4) == 0);
    const auto I = multi_indices(3, 2);
    REQUIRE(I.size() == 3);
    CHECK(I[0] == std::vector<int>{0, 1});
    CHECK(I[1] == std::vector<int>{0, 2});
    CHECK(I[2] == std::vector<int>{1, 2});
}

TEST_CASE("additive_compound examples")
{
    CHECK(additive_compound(RealMatrix::Identity(3, 3), 2).isApprox(2.0 * RealMatrix::Identity(3, 3)));
    const RealMatrix D = Eigen::Vector3d(1.5, -0.7, 2.25).asDiagonal();
    const RealMatrix C = additive_compound(D, 2);
    CHECK(C.isApprox(RealMatrix(Eigen::Vector3d(0.8, 3.75, 1.55).asDiagonal())));
    const RealMatrix DY4 = Eigen::Vector3d(-0.2, -0.2, 0.4).asDiagonal();
    const RealMatrix C4 = additive_compound(DY4, 2);
    const RealMatrix want = Eigen::Vector3d(-0.4, 0.2, 0.2).asDiagonal();
    CHECK((C4 - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("additive_compound reproduces the displayed 3x3 rule")
{
    std::mt19937_64 rng(11);
    for (int k = 0; k < 50; ++k) {
        const RealMatrix A = random_matrix(3, rng);
        CHECK((additive_compound(A, 2) - displayed_rule(A)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("additive_compound errors")
{
    CHECK_THROWS_AS(additive_compound(RealMatrix::Zero(2, 3), 1), std::invalid_argument);
    CHECK_THROWS_AS(additive_compound(RealMatrix::Zero(3, 3), 0), std::invalid_argument);
    CHECK_THROWS_AS(additive_compound(RealMatrix::Zero(3, 3), 4), std::invalid_argument);
    CHECK_THROWS_AS(multiplicative_compound(RealMatrix::Zero(3, 3), 4), std::invalid_argument);
}

TEST_CASE("multiplicative_compound examples")
{
    const RealMatrix D = Eigen::Vector2d(2.0, 3.0).asDiagonal();
    const RealMatrix W = multiplicative_compound(D, 2);
    REQUIRE(W.rows() == 1);
    CHECK_THAT(W(0, 0), WithinAbs(6.0, 1e-15));
    for (int d = 2; d <= 5; ++d)
        for (int k = 1; k <= d; ++k)
            CHECK(multiplicative_compound(RealMatrix::Identity(d, d), k)
                      .isApprox(RealMatrix::Identity(binomial(d, k), binomial(d, k))));
    std::mt19937_64 rng(3);
    const RealMatrix M = random_matrix(3, rng);
    const RealMatrix W2 = multiplicative_compound(M, 2);
    CHECK((W2 - minors_oracle(M, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((multiplicative_compound(M * M, 2) - W2 * W2).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + W2.squaredNorm()));
}

TEST_CASE("property: compounds against the minor oracle and multiplicativity")
{
    std::mt19937_64 rng(2024);
    for (int d : {3, 4})
        for (int it = 0; it < 100; ++it) {
            const RealMatrix M = random_matrix(d, rng), N = random_matrix(d, rng);
            for (int k = 1; k <= d; ++k) {
                const RealMatrix W = multiplicative_compound(M, k);
                CHECK((W - minors_oracle(M, k)).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + W.cwiseAbs().maxCoeff()));
                const RealMatrix lhs = multiplicative_compound(M * N, k);
                const RealMatrix rhs = W * multiplicative_compound(N, k);
                CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
            }
        }
}

TEST_CASE("property: additive compound is the derivative of the multiplicative one")
{
    std::mt19937_64 rng(77);
    for (int d : {3, 4})
        for (int it = 0; it < 100; ++it) {
            const RealMatrix A = random_matrix(d, rng);
            const RealMatrix I = RealMatrix::Identity(d, d);
            const double h = 1e-6;
            // exp(tA) = I + tA + O(t^2), so the central difference of the
            // compound of exp(tA) agrees with that of I + tA to O(h^2).
            const RealMatrix Ep = I + h * A + 0.5 * h * h * A * A, Em = I - h * A + 0.5 * h * h * A * A;
            for (int k = 1; k <= d; ++k) {
                const RealMatrix fd = (multiplicative_compound(Ep, k) - multiplicative_compound(Em, k)) / (2.0 * h);
                const RealMatrix ad = additive_compound(A, k);
                CHECK((fd - ad).norm() <= 1e-5 * ad.norm());
            }
            CHECK_THAT(additive_compound(A, 2).trace(), WithinAbs((d - 1) * A.trace(), 1e-12));
        }
}

TEST_CASE("wedge_inv_norm examples")
{
    CHECK_THAT(wedge_inv_norm(Eigen::Vector2d(2.0, 3.0).asDiagonal().toDenseMatrix(), 2), WithinRel(1.0 / 6.0, 1e-14));
    const RealMatrix D = Eigen::Vector3d(std::exp(0.2), std::exp(2.0), std::exp(-0.4)).asDiagonal();
    CHECK_THAT(wedge_inv_norm(D, 2), WithinRel(std::exp(0.2), 1e-12));
    CHECK_THAT(log_wedge_inv_norm(D, 2), WithinAbs(0.2, 1e-12));
    std::mt19937_64 rng(5);
    for (int it = 0; it < 20; ++it) {
        RealMatrix M = random_matrix(3, rng) + 3.0 * RealMatrix::Identity(3, 3);
        const RealMatrix W = multiplicative_compound(M.inverse(), 2);
        const double oracle = Eigen::JacobiSVD<RealMatrix>(W).singularValues()(0);
        CHECK_THAT(wedge_inv_norm(M, 2), WithinRel(oracle, 1e-10));
    }
    CHECK_THROWS_AS(wedge_inv_norm(Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal().toDenseMatrix(), 2), SingularMatrixError);
}

TEST_CASE("property: norm of wedge^p times norm of its inverse is at least one")
{
    std::mt19937_64 rng(8);
    for (int it = 0; it < 50; ++it) {
        const RealMatrix M = random_matrix(4, rng);
        for (int p = 2; p <= 4; ++p) {
            const RealMatrix W = multiplicative_compound(M, p);
            const double nW = Eigen::JacobiSVD<RealMatrix>(W).singularValues()(0);
            CHECK(nW * wedge_inv_norm(M, p) >= 1.0 - 1e-12);
        }
    }
    // Equality when the singular values coincide.
    const RealMatrix R = 2.0 * RealMatrix::Identity(3, 3);
    const double nW = Eigen::JacobiSVD<RealMatrix>(multiplicative_compound(R, 2)).singularValues()(0);
    CHECK_THAT(nW * wedge_inv_norm(R, 2), WithinRel(1.0, 1e-14));
}

TEST_CASE("stable log_wedge_inv_norm overload agrees with the direct one")
{
    std::mt19937_64 rng(9);
    for (int it = 0; it < 20; ++it) {
        const RealMatrix M = random_matrix(4, rng);
        const double ld = std::log(std::abs(M.determinant()));
        for (int p = 1; p <= 4; ++p) CHECK_THAT(log_wedge_inv_norm(M, p, ld), WithinAbs(log_wedge_inv_norm(M, p), 1e-9));
    }
}

TEST_CASE("det_on_subspace examples")
{
    std::mt19937_64 rng(12);
    const RealMatrix B = random_matrix(3, rng).leftCols(2);
    CHECK_THAT(det_on_subspace(RealMatrix::Identity(3, 3), B), WithinRel(1.0, 1e-14));
    RealMatrix E = RealMatrix::Zero(3, 2);
    E(0, 0) = 1.0;
    E(1, 1) = 1.0;
    CHECK_THAT(det_on_subspace(Eigen::Vector3d(2, 3, 5).asDiagonal().toDenseMatrix(), E), WithinRel(6.0, 1e-14));
    for (int it = 0; it < 20; ++it) {
        const RealMatrix Q = Eigen::HouseholderQR<RealMatrix>(random_matrix(3, rng)).householderQ();
        const RealMatrix Bi = random_matrix(3, rng).leftCols(2);
        CHECK_THAT(det_on_subspace(Q, Bi), WithinAbs(1.0, 1e-12));
    }
    RealMatrix deg(3, 2);
    deg << 1, 2, 1, 2, 1, 2;
    CHECK_THROWS_AS(det_on_subspace(RealMatrix::Identity(3, 3), deg), DegenerateBasisError);
}

TEST_CASE("qr_renormalize examples")
{
    const RealMatrix Q0 = Eigen::HouseholderQR<RealMatrix>(RealMatrix::Random(3, 3)).householderQ();
    const QrResult a = qr_renormalize(Q0.leftCols(2));
    CHECK((a.q - Q0.leftCols(2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.log_diag.cwiseAbs().maxCoeff() < 1e-12);
    const QrResult b = qr_renormalize(Eigen::Vector2d(2.0, 3.0).asDiagonal().toDenseMatrix());
    CHECK(b.q.isApprox(RealMatrix::Identity(2, 2)));
    CHECK_THAT(b.log_diag(0), WithinAbs(std::log(2.0), 1e-15));
    CHECK_THAT(b.log_diag(1), WithinAbs(std::log(3.0), 1e-15));
    RealMatrix rank1(2, 2);
    rank1 << 1, 2, 2, 4;
    CHECK_THROWS(qr_renormalize(rank1));
}

TEST_CASE("qr_renormalize tracks a long SL(2) product")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    RealMatrix Q = RealMatrix::Identity(2, 2);
    double log_sum = 0.0, log_first = 0.0;
    // Oracle: the same product in long double without renormalisation.
    Eigen::Matrix<long double, 2, 2> P = Eigen::Matrix<long double, 2, 2>::Identity();
    for (int it = 0; it < 100; ++it) {
        RealMatrix A(2, 2);
        A << 1.0 + 0.5 * U(rng), 0.5 * U(rng), 0.5 * U(rng), 1.0 + 0.5 * U(rng);
        A /= std::sqrt(std::abs(A.determinant()));
        if (A.determinant() < 0) A.col(0) *= -1.0;
        P = A.cast<long double>() * P;
        const QrResult r = qr_renormalize(A * Q);
        Q = r.q;
        log_sum += r.log_diag.sum();
        log_first += r.log_diag(0);
    }
    CHECK_THAT(log_sum, WithinAbs(std::log(std::abs(static_cast<double>(P.determinant()))), 1e-8));
    // The first column's growth is the growth of P e1.
    const long double n1 = P.col(0).norm();
    CHECK_THAT(log_first, WithinAbs(static_cast<double>(std::log(n1)), 1e-8));
}

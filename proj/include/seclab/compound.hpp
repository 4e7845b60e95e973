#pragma once

// Exterior powers of real matrices.
//
// Basis of the k-th exterior power of R^d: e_{i1}^...^e_{ik} with
// i1 < ... < ik, ordered lexicographically. For d = 3, k = 2 this is
// (e1^e2, e1^e3, e2^e3) and the additive compound reads
//
//   [ a11+a22   a23      -a13    ]
//   [ a32       a11+a33   a12    ]
//   [ -a31      a21       a22+a33]

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seclab {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
/// Columns span the subspace.
using SubspaceBasis = Eigen::MatrixXd;

class SingularMatrixError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DegenerateBasisError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Relative threshold on singular values below which a matrix counts as singular.
inline constexpr double kSingularThreshold = 1e-12;

inline std::int64_t binomial(int n, int k)
{
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// All k-subsets of {0..d-1} in lexicographic order.
inline std::vector<std::vector<int>> multi_indices(int d, int k)
{
    std::vector<std::vector<int>> out;
    if (k < 0 || k > d) return out;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == d - k + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

namespace detail {

inline void check_square(const RealMatrix& A, int k, const char* who)
{
    if (A.rows() != A.cols())
        throw std::invalid_argument(std::string(who) + ": matrix is not square");
    if (k < 1 || k > A.rows())
        throw std::invalid_argument(std::string(who) + ": order k out of range");
}

inline double small_det(const RealMatrix& m)
{
    switch (m.rows()) {
    case 0: return 1.0;
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
             - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
             + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: return m.partialPivLu().determinant();
    }
}

} // namespace detail

/// Generator of t -> wedge^k exp(tA) at t = 0.
inline RealMatrix additive_compound(const RealMatrix& A, int k)
{
    detail::check_square(A, k, "additive_compound");
    const int d = static_cast<int>(A.rows());
    const auto idx = multi_indices(d, k);
    const int m = static_cast<int>(idx.size());
    RealMatrix C = RealMatrix::Zero(m, m);
    for (int a = 0; a < m; ++a) {
        const auto& I = idx[a];
        for (int b = 0; b < m; ++b) {
            const auto& J = idx[b];
            if (a == b) {
                double s = 0.0;
                for (int i : I) s += A(i, i);
                C(a, b) = s;
                continue;
            }
            // I and J must differ in exactly one slot.
            int r = -1, s = -1, nr = 0, ns = 0;
            for (int p = 0; p < k; ++p) {
                if (!std::binary_search(J.begin(), J.end(), I[p])) { r = p; ++nr; }
                if (!std::binary_search(I.begin(), I.end(), J[p])) { s = p; ++ns; }
            }
            if (nr != 1 || ns != 1) continue;
            const double sign = ((r + s) % 2 == 0) ? 1.0 : -1.0;
            C(a, b) = sign * A(I[r], J[s]);
        }
    }
    return C;
}

/// Matrix of wedge^k M: entry (I, J) is the minor on rows I, columns J.
inline RealMatrix multiplicative_compound(const RealMatrix& M, int k)
{
    detail::check_square(M, k, "multiplicative_compound");
    const int d = static_cast<int>(M.rows());
    const auto idx = multi_indices(d, k);
    const int m = static_cast<int>(idx.size());
    RealMatrix C(m, m);
    RealMatrix sub(k, k);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            for (int p = 0; p < k; ++p)
                for (int q = 0; q < k; ++q) sub(p, q) = M(idx[a][p], idx[b][q]);
            C(a, b) = detail::small_det(sub);
        }
    return C;
}

/// Singular values in decreasing order.
inline RealVector singular_values(const RealMatrix& M)
{
    Eigen::JacobiSVD<RealMatrix> svd(M);
    return svd.singularValues();
}

/// log ||wedge^p (M^{-1})||, i.e. minus the sum of the logs of the p smallest
/// singular values of M.
inline double log_wedge_inv_norm(const RealMatrix& M, int p)
{
    if (M.rows() != M.cols())
        throw std::invalid_argument("wedge_inv_norm: matrix is not square");
    if (p < 1 || p > M.rows())
        throw std::invalid_argument("wedge_inv_norm: order p out of range");
    const RealVector s = singular_values(M);
    const int d = static_cast<int>(s.size());
    if (!(s(d - 1) > kSingularThreshold * s(0)))
        throw SingularMatrixError("wedge_inv_norm: matrix is numerically singular");
    double acc = 0.0;
    for (int i = d - p; i < d; ++i) acc -= std::log(s(i));
    return acc;
}

/// Same quantity for a badly conditioned but invertible cocycle with known
/// log |det|: only the d - p largest singular values are used, which SVD
/// resolves to full relative accuracy.
inline double log_wedge_inv_norm(const RealMatrix& M, int p, double log_abs_det)
{
    if (M.rows() != M.cols())
        throw std::invalid_argument("wedge_inv_norm: matrix is not square");
    if (p < 1 || p > M.rows())
        throw std::invalid_argument("wedge_inv_norm: order p out of range");
    const RealVector s = singular_values(M);
    double acc = -log_abs_det;
    for (int i = 0; i < static_cast<int>(s.size()) - p; ++i) acc += std::log(s(i));
    return acc;
}

inline double wedge_inv_norm(const RealMatrix& M, int p)
{
    return std::exp(log_wedge_inv_norm(M, p));
}

/// log sqrt(det Gram(B)).
inline double log_volume(const SubspaceBasis& B)
{
    if (B.cols() == 0 || B.cols() > B.rows())
        throw DegenerateBasisError("subspace basis has invalid shape");
    Eigen::HouseholderQR<RealMatrix> qr(B);
    const RealMatrix R = qr.matrixQR().topRows(B.cols()).triangularView<Eigen::Upper>();
    double acc = 0.0, rmax = 0.0;
    for (int i = 0; i < B.cols(); ++i) rmax = std::max(rmax, std::abs(R(i, i)));
    for (int i = 0; i < B.cols(); ++i) {
        const double r = std::abs(R(i, i));
        if (!(r > kSingularThreshold * rmax)) throw DegenerateBasisError("subspace basis is degenerate");
        acc += std::log(r);
    }
    return acc;
}

/// Unsigned volume expansion of M on span(B).
inline double det_on_subspace(const RealMatrix& M, const SubspaceBasis& B)
{
    if (M.rows() != M.cols() || M.cols() != B.rows())
        throw std::invalid_argument("det_on_subspace: dimension mismatch");
    const double lb = log_volume(B);
    const RealMatrix MB = M * B;
    double gram = (MB.transpose() * MB).determinant();
    if (gram <= 0.0) return 0.0;
    return std::exp(0.5 * std::log(gram) - lb);
}

struct QrResult {
    RealMatrix q;        ///< orthonormal columns
    RealMatrix r;        ///< upper triangular, positive diagonal
    RealVector log_diag; ///< log r_ii
};

inline QrResult qr_renormalize(const RealMatrix& F)
{
    const int d = static_cast<int>(F.rows());
    const int c = static_cast<int>(F.cols());
    if (c == 0 || c > d) throw DegenerateBasisError("qr_renormalize: invalid frame shape");
    Eigen::HouseholderQR<RealMatrix> qr(F);
    QrResult out;
    out.q = qr.householderQ() * RealMatrix::Identity(d, c);
    out.r = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
    out.log_diag.resize(c);
    double rmax = 0.0;
    for (int i = 0; i < c; ++i) rmax = std::max(rmax, std::abs(out.r(i, i)));
    for (int i = 0; i < c; ++i) {
        if (out.r(i, i) < 0.0) {
            out.r.row(i) *= -1.0;
            out.q.col(i) *= -1.0;
        }
        if (!(out.r(i, i) > kSingularThreshold * rmax) || !std::isfinite(out.r(i, i)))
            throw DegenerateBasisError("qr_renormalize: frame is rank deficient");
        out.log_diag(i) = std::log(out.r(i, i));
    }
    return out;
}

} // namespace seclab

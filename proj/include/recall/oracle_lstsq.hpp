#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "recall/matrix.hpp"
#include "recall/memory.hpp"

namespace recall {

namespace detail {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: A = Q diag(l) Q^T.
/// Plenty for the K x K Gram matrices the oracle sees.
inline void jacobi_eigen_symmetric(Matrix a, Matrix& q, std::vector<double>& eigvals) {
    const std::size_t n = a.rows();
    q = Matrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) q(i, i) = 1.0;

    const double norm = frobenius_norm(a);
    const double stop = norm > 0.0 ? 1e-14 * norm : 0.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t r = p + 1; r < n; ++r) off += a(p, r) * a(p, r);
        if (std::sqrt(2.0 * off) <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (apr == 0.0) continue;
                const double app = a(p, p);
                const double arr = a(r, r);
                const double tau = (arr - app) / (2.0 * apr);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                a(p, p) = app - t * apr;
                a(r, r) = arr + t * apr;
                a(p, r) = 0.0;
                a(r, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == p || i == r) continue;
                    const double aip = a(i, p);
                    const double air = a(i, r);
                    a(i, p) = c * aip - s * air;
                    a(p, i) = a(i, p);
                    a(i, r) = s * aip + c * air;
                    a(r, i) = a(i, r);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double qip = q(i, p);
                    const double qir = q(i, r);
                    q(i, p) = c * qip - s * qir;
                    q(i, r) = s * qip + c * qir;
                }
            }
        }
    }
    eigvals.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigvals[i] = a(i, i);
}

} // namespace detail

/// Keep a Gram eigenvalue only above this fraction of the largest. Zero
/// singular values of W reappear in W^T W as rounding noise of order
/// eps * lambda_max (~1e-14), far above the squared production threshold
/// (1e-20), so the truncation floor must sit between the two bands. Both
/// routes agree whenever no singular value falls inside [1e-10, 1e-6] of
/// the largest, which holds for exact rank deficiencies and any reasonably
/// conditioned system.
inline constexpr double kGramEigenvalueFloor = 1e-12;

/// Reference minimum-norm least-squares solve, kept deliberately independent
/// of the production path: normal equations W^T W pseudo-inverted through a
/// hand-rolled Jacobi eigendecomposition with threshold-rank truncation
/// (M = (W^T W)^+ W^T Z). Test use only; O(K^3 + N K C).
inline MemoryMatrix oracle_lstsq(const WriteBatch& batch) {
    detail::check_finite(batch);
    const Matrix w = batch.materialize_keys();
    const Matrix& z = batch.encodings();
    const std::size_t n = w.rows();
    const std::size_t k = w.cols();
    const std::size_t c = z.cols();

    // gram = W^T W
    Matrix gram(k, k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double wip = w(i, p);
            if (wip == 0.0) continue;
            for (std::size_t r = 0; r < k; ++r) gram(p, r) += wip * w(i, r);
        }

    Matrix q;
    std::vector<double> lam;
    detail::jacobi_eigen_symmetric(gram, q, lam);

    double lam_max = 0.0;
    for (double l : lam) lam_max = std::max(lam_max, l);
    const double cutoff = kGramEigenvalueFloor * lam_max;
    std::vector<double> inv_lam(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        if (lam[i] > cutoff) inv_lam[i] = 1.0 / lam[i];

    // t = W^T Z
    Matrix t(k, c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double wip = w(i, p);
            if (wip == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) t(p, j) += wip * z(i, j);
        }

    // M = Q diag(1/lambda) Q^T t
    Matrix qt_t(k, c, 0.0); // diag(1/lambda) Q^T t
    for (std::size_t i = 0; i < k; ++i) {
        if (inv_lam[i] == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += q(p, i) * t(p, j);
            qt_t(i, j) = s * inv_lam[i];
        }
    }
    Matrix m(k, c, 0.0);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += q(p, i) * qt_t(i, j);
            m(p, j) = s;
        }
    return MemoryMatrix{std::move(m), MemoryTier::host};
}

} // namespace recall

#pragma once

#include "glmpca/model.hpp"

#include <vector>

namespace glmpca {

/**
 * Orthogonal projection onto the column space of a tall design matrix.
 *
 * The n x n projector is never formed; products go through a pivoted QR of
 * the design. An empty design is the zero projector.
 */
class CovariateProjector {
public:
    /// Throws PostprocessError if the design is rank deficient.
    explicit CovariateProjector(const Matrix& design);

    Index dimension() const noexcept { return n_; }
    bool empty() const noexcept { return k_ == 0; }

    /// (D'D)^-1 D' M
    Matrix coefficients(const Eigen::Ref<const Matrix>& M) const;
    /// P M
    Matrix project(const Eigen::Ref<const Matrix>& M) const;
    /// (I - P) M
    Matrix residual(const Eigen::Ref<const Matrix>& M) const;
    /// Dense n x n projector; for small-scale checks only.
    Matrix dense() const;

private:
    Matrix design_;
    Eigen::ColPivHouseholderQR<Matrix> qr_;
    Index n_;
    Index k_;
};

/**
 * Moves the parts of the latent factors lying in span(X) into A and the parts
 * of the latent loadings lying in span(Z) into Gamma, leaving V U' unchanged:
 *
 *   A        <- A + V~ U~' X (X'X)^-1
 *   Gamma    <- Gamma + (I - Px) U~ V~' Z (Z'Z)^-1
 *   U~       <- (I - Px) U~
 *   V~       <- (I - Pz) V~
 *
 * Operates on the augmented factor matrices only. Throws PostprocessError on
 * rank-deficient X or Z.
 */
void project_out_covariates(Eigen::Ref<Matrix> U, Eigen::Ref<Matrix> V, const IndexSets& dims);
void project_out_covariates(ModelState& state);

struct Orthogonalized {
    Matrix factors;  // N x L
    Matrix loadings; // J x L, orthonormal columns
    Vector singular_values;
    Index zero_dims = 0; // singular values that are exactly or numerically zero
};

/**
 * Rotates (U~, V~) so the loadings have orthonormal columns: with the thin SVD
 * V~ = P D F', returns loadings P and factors U~ F D. Each column pair is
 * sign-normalized so the largest-magnitude loading entry is positive.
 */
Orthogonalized orthogonalize(const Eigen::Ref<const Matrix>& latent_u, const Eigen::Ref<const Matrix>& latent_v);

/// Stable permutation of columns by decreasing L2 norm of `factors`. Returns the
/// original column index of each output column.
std::vector<Index> order_dims(Matrix& factors, Matrix& loadings);

struct Postprocessed {
    Matrix factors;  // U_hat, N x L
    Matrix loadings; // V_hat, J x L
    Matrix A;        // J x K_o
    Matrix Gamma;    // N x K_f
    Vector singular_values;
    Index zero_dims = 0;
};

/// Projection, rotation and ordering applied to copies of U and V.
Postprocessed postprocess(const Eigen::Ref<const Matrix>& U, const Eigen::Ref<const Matrix>& V, const IndexSets& dims);
Postprocessed postprocess(const ModelState& state);

} // namespace glmpca

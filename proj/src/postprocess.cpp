#include "glmpca/postprocess.hpp"

#include "glmpca/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace glmpca {

CovariateProjector::CovariateProjector(const Matrix& design)
    : design_(design), n_(design.rows()), k_(design.cols()) {
    if (k_ == 0) {
        return;
    }
    if (n_ < k_) {
        throw PostprocessError("covariate design has more columns than rows");
    }
    qr_.compute(design_);
    if (qr_.rank() < k_) {
        throw PostprocessError("covariate design is rank deficient; projection step undefined");
    }
}

Matrix CovariateProjector::coefficients(const Eigen::Ref<const Matrix>& M) const {
    if (empty()) {
        return Matrix::Zero(0, M.cols());
    }
    return qr_.solve(M);
}

Matrix CovariateProjector::project(const Eigen::Ref<const Matrix>& M) const {
    if (empty()) {
        return Matrix::Zero(M.rows(), M.cols());
    }
    return design_ * coefficients(M);
}

Matrix CovariateProjector::residual(const Eigen::Ref<const Matrix>& M) const { return M - project(M); }

Matrix CovariateProjector::dense() const { return project(Matrix::Identity(n_, n_)); }

void project_out_covariates(Eigen::Ref<Matrix> U, Eigen::Ref<Matrix> V, const IndexSets& dims) {
    const ColumnRange obs = dims.obs_block();
    const ColumnRange feat = dims.feature_block();
    const ColumnRange lat = dims.latent_block();

    const CovariateProjector px(U.middleCols(obs.begin, obs.size()));
    const CovariateProjector pz(V.middleCols(feat.begin, feat.size()));

    const Matrix u_lat = U.middleCols(lat.begin, lat.size());
    const Matrix v_lat = V.middleCols(lat.begin, lat.size());

    // All right-hand sides are formed before any block is overwritten.
    const Matrix u_resid = px.residual(u_lat);
    Matrix a_shift;
    if (!px.empty()) {
        a_shift = v_lat * px.coefficients(u_lat).transpose();
    }
    Matrix gamma_shift;
    if (!pz.empty()) {
        gamma_shift = u_resid * pz.coefficients(v_lat).transpose();
    }
    const Matrix v_resid = pz.residual(v_lat);

    if (!px.empty()) {
        V.middleCols(obs.begin, obs.size()) += a_shift;
    }
    if (!pz.empty()) {
        U.middleCols(feat.begin, feat.size()) += gamma_shift;
    }
    U.middleCols(lat.begin, lat.size()) = u_resid;
    V.middleCols(lat.begin, lat.size()) = v_resid;
}

void project_out_covariates(ModelState& state) { project_out_covariates(state.U, state.V, state.dims); }

Orthogonalized orthogonalize(const Eigen::Ref<const Matrix>& latent_u, const Eigen::Ref<const Matrix>& latent_v) {
    const Index L = latent_v.cols();
    if (latent_u.cols() != L) {
        throw PostprocessError("latent factor and loading blocks differ in width");
    }
    if (latent_v.rows() < L) {
        throw PostprocessError("rotation needs at least L=" + std::to_string(L) + " features");
    }
    Eigen::JacobiSVD<Matrix> svd(latent_v, Eigen::ComputeThinU | Eigen::ComputeThinV);

    Orthogonalized out;
    out.singular_values = svd.singularValues();
    out.loadings = svd.matrixU();
    out.factors = latent_u * svd.matrixV() * out.singular_values.asDiagonal();

    const double largest = L > 0 ? out.singular_values.maxCoeff() : 0.0;
    const double cutoff = largest * static_cast<double>(std::max(latent_v.rows(), L)) *
                          std::numeric_limits<double>::epsilon();
    for (Index l = 0; l < L; ++l) {
        if (out.singular_values[l] <= cutoff) {
            ++out.zero_dims;
        }
        Index where = 0;
        out.loadings.col(l).cwiseAbs().maxCoeff(&where);
        if (out.loadings(where, l) < 0.0) {
            out.loadings.col(l) *= -1.0;
            out.factors.col(l) *= -1.0;
        }
    }
    return out;
}

std::vector<Index> order_dims(Matrix& factors, Matrix& loadings) {
    const Index L = factors.cols();
    const Vector norms = factors.colwise().norm().transpose();
    std::vector<Index> perm(static_cast<std::size_t>(L));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) { return norms[a] > norms[b]; });

    Matrix f(factors.rows(), L);
    Matrix v(loadings.rows(), L);
    for (Index l = 0; l < L; ++l) {
        f.col(l) = factors.col(perm[static_cast<std::size_t>(l)]);
        v.col(l) = loadings.col(perm[static_cast<std::size_t>(l)]);
    }
    factors = std::move(f);
    loadings = std::move(v);
    return perm;
}

Postprocessed postprocess(const Eigen::Ref<const Matrix>& U, const Eigen::Ref<const Matrix>& V, const IndexSets& dims) {
    Matrix u = U;
    Matrix v = V;
    project_out_covariates(u, v, dims);

    const ColumnRange lat = dims.latent_block();
    Orthogonalized rot = orthogonalize(u.middleCols(lat.begin, lat.size()), v.middleCols(lat.begin, lat.size()));
    const std::vector<Index> perm = order_dims(rot.factors, rot.loadings);

    Postprocessed out;
    out.factors = std::move(rot.factors);
    out.loadings = std::move(rot.loadings);
    out.A = v.middleCols(dims.obs_block().begin, dims.obs_covariates);
    out.Gamma = u.middleCols(dims.feature_block().begin, dims.feature_covariates);
    out.singular_values.resize(lat.size());
    for (Index l = 0; l < lat.size(); ++l) {
        out.singular_values[l] = rot.singular_values[perm[static_cast<std::size_t>(l)]];
    }
    out.zero_dims = rot.zero_dims;
    return out;
}

Postprocessed postprocess(const ModelState& state) { return postprocess(state.U, state.V, state.dims); }

} // namespace glmpca

#pragma once

#include "glmpca/family.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace glmpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Half-open column range [begin, end) in the augmented factor matrices.
struct ColumnRange {
    Index begin = 0;
    Index end = 0;

    Index size() const noexcept { return end - begin; }
    bool contains(Index k) const noexcept { return k >= begin && k < end; }
};

/**
 * Column layout of the augmented matrices U = [X | Gamma | U_latent] and
 * V = [A | Z | V_latent]. Indices are zero-based.
 */
struct IndexSets {
    Index obs_covariates = 0;     // K_o: columns of X (and A)
    Index feature_covariates = 0; // K_f: columns of Z (and Gamma)
    Index latent = 1;             // L

    Index total() const noexcept { return obs_covariates + feature_covariates + latent; }

    ColumnRange obs_block() const noexcept { return {0, obs_covariates}; }
    ColumnRange feature_block() const noexcept {
        return {obs_covariates, obs_covariates + feature_covariates};
    }
    ColumnRange latent_block() const noexcept { return {obs_covariates + feature_covariates, total()}; }

    /// Columns of U that are estimated: Gamma then latent, ascending.
    std::vector<Index> updatable_u() const;
    /// Columns of V that are estimated: A then latent, ascending.
    std::vector<Index> updatable_v() const;
};

/**
 * Data, augmented factors, offset and penalties of one GLM-PCA model.
 *
 * Y is J x N (features by observations). U is N x K and V is J x K with
 * K = K_o + K_f + L. The fixed blocks U[:, obs] = X and V[:, feature] = Z are
 * never written by the optimizer.
 */
struct ModelState {
    Matrix Y;
    Family family = Family::gaussian();
    Matrix U;
    Matrix V;
    Vector offset;
    Vector lambda_u;
    Vector lambda_v;
    IndexSets dims;
    std::uint64_t seed = 0;

    Index features() const noexcept { return Y.rows(); }
    Index observations() const noexcept { return Y.cols(); }

    auto X() const { return U.middleCols(dims.obs_block().begin, dims.obs_covariates); }
    auto Gamma() const { return U.middleCols(dims.feature_block().begin, dims.feature_covariates); }
    auto latent_u() const { return U.middleCols(dims.latent_block().begin, dims.latent); }
    auto A() const { return V.middleCols(dims.obs_block().begin, dims.obs_covariates); }
    auto Z() const { return V.middleCols(dims.feature_block().begin, dims.feature_covariates); }
    auto latent_v() const { return V.middleCols(dims.latent_block().begin, dims.latent); }

    /// Checks shapes, finiteness, data support and penalty invariants. Throws ConfigError / DataError.
    void validate() const;
};

struct OffsetPolicy {
    enum class Kind { none, automatic, given };

    Kind kind = Kind::none;
    Vector values; // used when kind == given

    static OffsetPolicy none() { return {}; }
    static OffsetPolicy automatic() { return {Kind::automatic, {}}; }
    static OffsetPolicy given(Vector v) { return {Kind::given, std::move(v)}; }
};

/// Penalty vectors are either length 1 (broadcast) or length L.
struct Penalties {
    Vector latent_u = Vector::Constant(1, 1e-4);
    Vector latent_v = Vector::Constant(1, 1e-4);
    double coefficients = 0.0; // applied to Gamma (in U) and A (in V)
};

struct ModelOptions {
    std::optional<Matrix> obs_covariates;     // N x K_o
    std::optional<Matrix> feature_covariates; // J x K_f
    Index latent_dims = 1;
    bool intercept = true; // prepend an all-ones column to X
    OffsetPolicy offset = OffsetPolicy::none();
    Penalties penalties;
    std::uint64_t seed = 0;
};

/// Validates Y against the family's support. Throws DataError naming the 1-based entry.
void validate_data(const Matrix& Y, const Family& family);

/// Resolves an offset policy for Y under the given family.
Vector resolve_offset(const Matrix& Y, const Family& family, const OffsetPolicy& policy);

/**
 * Builds a model ready for fitting. X defaults to a column of ones (feature
 * intercepts) unless `intercept` is false; A and Gamma start at zero; the
 * latent blocks are drawn N(0, (0.1 / sqrt(L))^2) from a generator seeded by
 * `options.seed`.
 *
 * Throws ConfigError on dimension mismatch, rank-deficient X or Z, or
 * K_o + K_f + L >= min(J, N).
 */
ModelState build_model(Matrix Y, const Family& family, const ModelOptions& options);

/**
 * Assembles a model from explicit blocks without the size rule of build_model
 * (useful for J = 1 regressions). Empty X or Z means no such covariates.
 */
ModelState assemble_model(Matrix Y, const Family& family, const Matrix& X, const Matrix& Z,
                          const Matrix& latent_u, const Matrix& latent_v, Vector offset,
                          Vector lambda_u, Vector lambda_v, std::uint64_t seed = 0);

/// Draws an initial latent column of length n with the default scale for L dims.
Vector initial_latent_column(std::uint64_t seed, std::uint64_t stream, Index n, Index latent_dims);

/// R = V U' + 1 offset'. J x N.
Matrix linear_predictor(const ModelState& state);

/// Penalized log-likelihood without the data-only term c(y). Throws NumericError when non-finite.
double objective(const ModelState& state);

/// Same, reusing a precomputed linear predictor. Returns non-finite values instead of throwing.
double evaluate_objective(const ModelState& state, const Matrix& predictor);

/// How the working matrices are formed. `canonical` uses h = rho(mu), so
/// G = Y - M and Q = rho(M); it is only valid for canonical links.
enum class Formulation { automatic, generic, canonical };

/**
 * Working matrices of one Fisher-scoring step, J x N:
 *   residual = (Y - M) .* W .* H
 *   info     = W .* H^2
 * with M = g^-1(R), W = 1 / rho(M), H = h(R).
 */
struct Scoring {
    Matrix residual;
    Matrix info;
};

void compute_scoring(const ModelState& state, const Matrix& predictor, Scoring& out,
                     Formulation formulation = Formulation::automatic);
Scoring compute_scoring(const ModelState& state, Formulation formulation = Formulation::automatic);

/// Unpenalized column reductions for U[:, k]: num_i = sum_j G_ji V_jk, den_i = sum_j Q_ji V_jk^2.
void column_sums_u(const Scoring& scoring, const Eigen::Ref<const Vector>& v_col, Vector& num, Vector& den);
/// Unpenalized column reductions for V[:, k]: num_j = sum_i G_ji U_ik, den_j = sum_i Q_ji U_ik^2.
void column_sums_v(const Scoring& scoring, const Eigen::Ref<const Vector>& u_col, Vector& num, Vector& den);

/// dQ/dU[:, k]. k must index a column of Gamma or the latent block.
Vector gradient_u(const ModelState& state, Index k, Formulation formulation = Formulation::automatic);
/// dQ/dV[:, k]. k must index a column of A or the latent block.
Vector gradient_v(const ModelState& state, Index k, Formulation formulation = Formulation::automatic);

/// Diagonal Fisher information for U[:, k]. Throws DegenerateColumnError when it is identically zero.
Vector fisher_info_u(const ModelState& state, Index k, Formulation formulation = Formulation::automatic);
Vector fisher_info_v(const ModelState& state, Index k, Formulation formulation = Formulation::automatic);

} // namespace glmpca

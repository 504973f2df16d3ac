#include "glmpca/model.hpp"

#include "glmpca/errors.hpp"
#include "glmpca/kernels.hpp"

#include <cmath>
#include <random>
#include <string>

namespace glmpca {

std::vector<Index> IndexSets::updatable_u() const {
    std::vector<Index> out;
    for (Index k = feature_block().begin; k < total(); ++k) {
        out.push_back(k);
    }
    return out;
}

std::vector<Index> IndexSets::updatable_v() const {
    std::vector<Index> out;
    for (Index k = 0; k < obs_covariates; ++k) {
        out.push_back(k);
    }
    for (Index k = latent_block().begin; k < total(); ++k) {
        out.push_back(k);
    }
    return out;
}

namespace {

std::string shape(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_full_column_rank(const Matrix& M, const char* what) {
    if (M.cols() == 0) {
        return;
    }
    if (M.rows() < M.cols()) {
        throw ConfigError(std::string(what) + " has more columns than rows");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(M);
    if (qr.rank() < M.cols()) {
        throw ConfigError(std::string(what) + " is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                          std::to_string(M.cols()) + " columns)");
    }
}

bool has_ones_column(const Matrix& X) {
    for (Index k = 0; k < X.cols(); ++k) {
        if ((X.col(k).array() == 1.0).all()) {
            return true;
        }
    }
    return false;
}

Vector expand_penalty(const Vector& given, Index L, const char* what) {
    if (given.size() == 1) {
        return Vector::Constant(L, given[0]);
    }
    if (given.size() != L) {
        throw ConfigError(std::string(what) + " must have length 1 or L=" + std::to_string(L));
    }
    return given;
}

bool uses_log_link(const Family& family) { return family.link() == Link::log; }

} // namespace

void validate_data(const Matrix& Y, const Family& family) {
    for (Index i = 0; i < Y.cols(); ++i) {
        for (Index j = 0; j < Y.rows(); ++j) {
            if (!family.in_support(Y(j, i))) {
                throw DataError("value " + std::to_string(Y(j, i)) + " at row " + std::to_string(j + 1) +
                                ", column " + std::to_string(i + 1) + " is outside the support of " +
                                family.name());
            }
        }
    }
}

void ModelState::validate() const {
    const Index J = features();
    const Index N = observations();
    const Index K = dims.total();
    if (J < 1 || N < 2) {
        throw ConfigError("data must have at least 1 feature and 2 observations, got " + shape(J, N));
    }
    if (dims.latent < 1 || dims.obs_covariates < 0 || dims.feature_covariates < 0) {
        throw ConfigError("invalid dimension counts");
    }
    if (U.rows() != N || U.cols() != K) {
        throw ConfigError("U must be " + shape(N, K) + ", got " + shape(U.rows(), U.cols()));
    }
    if (V.rows() != J || V.cols() != K) {
        throw ConfigError("V must be " + shape(J, K) + ", got " + shape(V.rows(), V.cols()));
    }
    if (offset.size() != N) {
        throw ConfigError("offset must have length " + std::to_string(N));
    }
    if (lambda_u.size() != K || lambda_v.size() != K) {
        throw ConfigError("penalty vectors must have length " + std::to_string(K));
    }
    if (!U.allFinite() || !V.allFinite() || !offset.allFinite()) {
        throw ConfigError("factors and offset must be finite");
    }
    if (!lambda_u.allFinite() || !lambda_v.allFinite() || (lambda_u.array() < 0.0).any() ||
        (lambda_v.array() < 0.0).any()) {
        throw ConfigError("penalties must be finite and non-negative");
    }
    for (Index k = 0; k < dims.obs_covariates; ++k) {
        if (lambda_u[k] != 0.0) {
            throw ConfigError("penalty on fixed covariate column X must be zero");
        }
    }
    for (Index k = dims.feature_block().begin; k < dims.feature_block().end; ++k) {
        if (lambda_v[k] != 0.0) {
            throw ConfigError("penalty on fixed covariate column Z must be zero");
        }
    }
    validate_data(Y, family);
}

Vector resolve_offset(const Matrix& Y, const Family& family, const OffsetPolicy& policy) {
    const Index N = Y.cols();
    switch (policy.kind) {
    case OffsetPolicy::Kind::none:
        return Vector::Zero(N);
    case OffsetPolicy::Kind::given:
        if (policy.values.size() != N) {
            throw ConfigError("offset has length " + std::to_string(policy.values.size()) + ", expected " +
                              std::to_string(N));
        }
        if (!policy.values.allFinite()) {
            throw ConfigError("offset must be finite");
        }
        return policy.values;
    case OffsetPolicy::Kind::automatic:
        break;
    }

    const Vector colsums = Y.colwise().sum().transpose();
    if (uses_log_link(family)) {
        const double mean = colsums.mean();
        Vector out(N);
        for (Index i = 0; i < N; ++i) {
            if (!(colsums[i] > 0.0)) {
                throw DataError("column " + std::to_string(i + 1) +
                                " has a non-positive total; the automatic log offset is undefined");
            }
            out[i] = std::log(colsums[i] / mean);
        }
        return out;
    }
    if (family.link() == Link::identity) {
        return colsums / static_cast<double>(Y.rows());
    }
    // logit: no scale-free offset from column totals
    return Vector::Zero(N);
}

Vector initial_latent_column(std::uint64_t seed, std::uint64_t stream, Index n, Index latent_dims) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 gen(seq);
    std::normal_distribution<double> draw(0.0, 0.1 / std::sqrt(static_cast<double>(latent_dims)));
    Vector out(n);
    for (Index i = 0; i < n; ++i) {
        out[i] = draw(gen);
    }
    return out;
}

ModelState assemble_model(Matrix Y, const Family& family, const Matrix& X, const Matrix& Z,
                          const Matrix& latent_u, const Matrix& latent_v, Vector offset, Vector lambda_u,
                          Vector lambda_v, std::uint64_t seed) {
    const Index J = Y.rows();
    const Index N = Y.cols();
    const Index Ko = X.size() == 0 ? 0 : X.cols();
    const Index Kf = Z.size() == 0 ? 0 : Z.cols();
    const Index L = latent_u.cols();
    if (Ko > 0 && X.rows() != N) {
        throw ConfigError("X must have " + std::to_string(N) + " rows (one per observation)");
    }
    if (Kf > 0 && Z.rows() != J) {
        throw ConfigError("Z must have " + std::to_string(J) + " rows (one per feature)");
    }
    if (latent_u.rows() != N || latent_v.rows() != J || latent_v.cols() != L) {
        throw ConfigError("latent blocks must be " + shape(N, L) + " and " + shape(J, L));
    }

    ModelState state;
    state.dims = IndexSets{Ko, Kf, L};
    const Index K = state.dims.total();
    state.U = Matrix::Zero(N, K);
    state.V = Matrix::Zero(J, K);
    if (Ko > 0) {
        state.U.leftCols(Ko) = X;
    }
    if (Kf > 0) {
        state.V.middleCols(Ko, Kf) = Z;
    }
    state.U.rightCols(L) = latent_u;
    state.V.rightCols(L) = latent_v;
    state.offset = std::move(offset);
    state.lambda_u = std::move(lambda_u);
    state.lambda_v = std::move(lambda_v);
    state.family = family;
    state.seed = seed;
    state.Y = std::move(Y);
    state.validate();
    return state;
}

ModelState build_model(Matrix Y, const Family& family, const ModelOptions& options) {
    const Index J = Y.rows();
    const Index N = Y.cols();
    const Index L = options.latent_dims;
    if (J < 1 || N < 2) {
        throw ConfigError("data must have at least 1 feature and 2 observations, got " + shape(J, N));
    }
    if (L < 1) {
        throw ConfigError("number of latent dimensions must be >= 1");
    }
    validate_data(Y, family);

    Matrix X(N, 0);
    if (options.obs_covariates) {
        X = *options.obs_covariates;
        if (X.rows() != N) {
            throw ConfigError("observation covariates must have " + std::to_string(N) + " rows, got " +
                              std::to_string(X.rows()));
        }
    }
    if (options.intercept && !has_ones_column(X)) {
        Matrix with_ones(N, X.cols() + 1);
        with_ones.col(0).setOnes();
        with_ones.rightCols(X.cols()) = X;
        X = std::move(with_ones);
    }
    Matrix Z(J, 0);
    if (options.feature_covariates) {
        Z = *options.feature_covariates;
        if (Z.rows() != J) {
            throw ConfigError("feature covariates must have " + std::to_string(J) + " rows, got " +
                              std::to_string(Z.rows()));
        }
    }
    if (!X.allFinite() || !Z.allFinite()) {
        throw ConfigError("covariates must be finite");
    }
    require_full_column_rank(X, "observation covariate matrix X");
    require_full_column_rank(Z, "feature covariate matrix Z");

    const Index Ko = X.cols();
    const Index Kf = Z.cols();
    if (Ko + Kf + L >= std::min(N, J)) {
        throw ConfigError("K_o + K_f + L = " + std::to_string(Ko + Kf + L) + " must be smaller than min(J, N) = " +
                          std::to_string(std::min(N, J)));
    }

    const Penalties& pen = options.penalties;
    if (!(pen.coefficients >= 0.0) || !std::isfinite(pen.coefficients)) {
        throw ConfigError("coefficient penalty must be finite and non-negative");
    }
    const Index K = Ko + Kf + L;
    Vector lambda_u = Vector::Zero(K);
    Vector lambda_v = Vector::Zero(K);
    lambda_u.segment(Ko, Kf).setConstant(pen.coefficients);
    lambda_v.head(Ko).setConstant(pen.coefficients);
    lambda_u.tail(L) = expand_penalty(pen.latent_u, L, "latent U penalty");
    lambda_v.tail(L) = expand_penalty(pen.latent_v, L, "latent V penalty");

    Matrix latent_u(N, L);
    Matrix latent_v(J, L);
    for (Index l = 0; l < L; ++l) {
        latent_u.col(l) = initial_latent_column(options.seed, static_cast<std::uint64_t>(l), N, L);
        latent_v.col(l) = initial_latent_column(options.seed, static_cast<std::uint64_t>(L + l), J, L);
    }

    Vector offset = resolve_offset(Y, family, options.offset);
    return assemble_model(std::move(Y), family, X, Z, latent_u, latent_v, std::move(offset), std::move(lambda_u),
                          std::move(lambda_v), options.seed);
}

Matrix linear_predictor(const ModelState& state) {
    Matrix R = state.V * state.U.transpose();
    R.rowwise() += state.offset.transpose();
    return R;
}

double evaluate_objective(const ModelState& state, const Matrix& predictor) {
    const Family& fam = state.family;
    double loglik = 0.0;
    for (Index i = 0; i < predictor.cols(); ++i) {
        for (Index j = 0; j < predictor.rows(); ++j) {
            const double mu = fam.inverse_link_unchecked(predictor(j, i));
            loglik += fam.loglik_term_unchecked(state.Y(j, i), fam.natural_param_unchecked(mu));
        }
    }
    double penalty = 0.0;
    for (Index k : state.dims.updatable_u()) {
        penalty += state.lambda_u[k] * state.U.col(k).squaredNorm();
    }
    for (Index k : state.dims.updatable_v()) {
        penalty += state.lambda_v[k] * state.V.col(k).squaredNorm();
    }
    return loglik - 0.5 * penalty;
}

double objective(const ModelState& state) {
    const double q = evaluate_objective(state, linear_predictor(state));
    if (!std::isfinite(q)) {
        throw NumericError("objective is not finite");
    }
    return q;
}

void compute_scoring(const ModelState& state, const Matrix& predictor, Scoring& out, Formulation formulation) {
    const Family& fam = state.family;
    if (formulation == Formulation::automatic) {
        formulation = fam.is_canonical() ? Formulation::canonical : Formulation::generic;
    } else if (formulation == Formulation::canonical && !fam.is_canonical()) {
        throw ConfigError("canonical formulation requested for non-canonical " + fam.name());
    }
    const Index J = predictor.rows();
    const Index N = predictor.cols();
    out.residual.resize(J, N);
    out.info.resize(J, N);

    if (formulation == Formulation::canonical) {
        for (Index i = 0; i < N; ++i) {
            for (Index j = 0; j < J; ++j) {
                const double mu = fam.inverse_link_unchecked(predictor(j, i));
                out.residual(j, i) = state.Y(j, i) - mu;
                out.info(j, i) = fam.variance_unchecked(mu);
            }
        }
        return;
    }
    for (Index i = 0; i < N; ++i) {
        for (Index j = 0; j < J; ++j) {
            const double r = predictor(j, i);
            const double mu = fam.inverse_link_unchecked(r);
            const double w = 1.0 / fam.variance_unchecked(mu);
            const double h = fam.dinverse_link_unchecked(r);
            out.residual(j, i) = (state.Y(j, i) - mu) * w * h;
            out.info(j, i) = w * h * h;
        }
    }
}

Scoring compute_scoring(const ModelState& state, Formulation formulation) {
    Scoring out;
    compute_scoring(state, linear_predictor(state), out, formulation);
    return out;
}

void column_sums_u(const Scoring& scoring, const Eigen::Ref<const Vector>& v_col, Vector& num, Vector& den) {
    const Index J = scoring.residual.rows();
    const Index N = scoring.residual.cols();
    num.resize(N);
    den.resize(N);
    const auto& k = kernels::active();
    for (Index i = 0; i < N; ++i) {
        k.weighted_dots(scoring.residual.col(i).data(), scoring.info.col(i).data(), v_col.data(),
                        static_cast<std::size_t>(J), &num[i], &den[i]);
    }
}

void column_sums_v(const Scoring& scoring, const Eigen::Ref<const Vector>& u_col, Vector& num, Vector& den) {
    const Index J = scoring.residual.rows();
    const Index N = scoring.residual.cols();
    num.setZero(J);
    den.setZero(J);
    const auto& k = kernels::active();
    for (Index i = 0; i < N; ++i) {
        const double u = u_col[i];
        k.dual_axpy(u, scoring.residual.col(i).data(), u * u, scoring.info.col(i).data(),
                    static_cast<std::size_t>(J), num.data(), den.data());
    }
}

namespace {

void require_updatable_u(const ModelState& state, Index k) {
    if (k < 0 || k >= state.dims.total() || state.dims.obs_block().contains(k)) {
        throw ConfigError("column " + std::to_string(k) + " of U is not an estimated column");
    }
}

void require_updatable_v(const ModelState& state, Index k) {
    if (k < 0 || k >= state.dims.total() || state.dims.feature_block().contains(k)) {
        throw ConfigError("column " + std::to_string(k) + " of V is not an estimated column");
    }
}

Vector finish_info(Vector den, double lambda, const char* block, Index k) {
    den.array() += lambda;
    if ((den.array() <= 0.0).any()) {
        throw DegenerateColumnError(std::string("Fisher information for ") + block + " column " +
                                    std::to_string(k) + " is zero (zero penalty and zero partner column)");
    }
    return den;
}

} // namespace

Vector gradient_u(const ModelState& state, Index k, Formulation formulation) {
    require_updatable_u(state, k);
    const Scoring s = compute_scoring(state, formulation);
    Vector num, den;
    column_sums_u(s, state.V.col(k), num, den);
    return num - state.lambda_u[k] * state.U.col(k);
}

Vector gradient_v(const ModelState& state, Index k, Formulation formulation) {
    require_updatable_v(state, k);
    const Scoring s = compute_scoring(state, formulation);
    Vector num, den;
    column_sums_v(s, state.U.col(k), num, den);
    return num - state.lambda_v[k] * state.V.col(k);
}

Vector fisher_info_u(const ModelState& state, Index k, Formulation formulation) {
    require_updatable_u(state, k);
    const Scoring s = compute_scoring(state, formulation);
    Vector num, den;
    column_sums_u(s, state.V.col(k), num, den);
    return finish_info(std::move(den), state.lambda_u[k], "U", k);
}

Vector fisher_info_v(const ModelState& state, Index k, Formulation formulation) {
    require_updatable_v(state, k);
    const Scoring s = compute_scoring(state, formulation);
    Vector num, den;
    column_sums_v(s, state.U.col(k), num, den);
    return finish_info(std::move(den), state.lambda_v[k], "V", k);
}

} // namespace glmpca

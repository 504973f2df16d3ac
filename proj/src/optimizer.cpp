#include "glmpca/optimizer.hpp"

#include "glmpca/kernels.hpp"

#include <cmath>
#include <string>

namespace glmpca {

void FitConfig::validate() const {
    if (max_iters < 1) {
        throw ConfigError("max_iters must be >= 1");
    }
    if (!(tol > 0.0) || !std::isfinite(tol)) {
        throw ConfigError("tol must be a finite positive number");
    }
    if (max_halvings < 0) {
        throw ConfigError("max_halvings must be >= 0");
    }
    if (trace_every < 1) {
        throw ConfigError("trace_every must be >= 1");
    }
}

namespace {

bool solvable(const Vector& den, double lambda) {
    for (Index i = 0; i < den.size(); ++i) {
        if (!(den[i] + lambda > 0.0)) {
            return false;
        }
    }
    return true;
}

constexpr double kSingularRcond = 1e-12;

// Solves one small Fisher system; false when it is numerically singular.
bool newton_direction(const Matrix& info, const Vector& score, Vector& direction) {
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kSingularRcond)) {
        return false;
    }
    direction = llt.solve(score);
    return direction.allFinite();
}

} // namespace

ColumnUpdate update_u_column(ModelState& state, Index k, const Scoring& scoring, double step, Vector& increment) {
    if (k < 0 || k >= state.dims.total() || state.dims.obs_block().contains(k)) {
        throw ConfigError("column " + std::to_string(k) + " of U is not an estimated column");
    }
    Vector num, den;
    column_sums_u(scoring, state.V.col(k), num, den);
    const double lambda = state.lambda_u[k];
    if (!solvable(den, lambda)) {
        increment.setZero(state.observations());
        return ColumnUpdate::degenerate;
    }
    increment.resize(state.observations());
    kernels::active().scoring_step(num.data(), den.data(), state.U.col(k).data(), lambda, step,
                                   static_cast<std::size_t>(num.size()), increment.data());
    state.U.col(k) += increment;
    return ColumnUpdate::applied;
}

ColumnUpdate update_u_column(ModelState& state, Index k, const Scoring& scoring, double step) {
    Vector increment;
    return update_u_column(state, k, scoring, step, increment);
}

ColumnUpdate update_v_column(ModelState& state, Index k, const Scoring& scoring, double step, Vector& increment) {
    if (k < 0 || k >= state.dims.total() || state.dims.feature_block().contains(k)) {
        throw ConfigError("column " + std::to_string(k) + " of V is not an estimated column");
    }
    Vector num, den;
    column_sums_v(scoring, state.U.col(k), num, den);
    const double lambda = state.lambda_v[k];
    if (!solvable(den, lambda)) {
        increment.setZero(state.features());
        return ColumnUpdate::degenerate;
    }
    increment.resize(state.features());
    kernels::active().scoring_step(num.data(), den.data(), state.V.col(k).data(), lambda, step,
                                   static_cast<std::size_t>(num.size()), increment.data());
    state.V.col(k) += increment;
    return ColumnUpdate::applied;
}

ColumnUpdate update_v_column(ModelState& state, Index k, const Scoring& scoring, double step) {
    Vector increment;
    return update_v_column(state, k, scoring, step, increment);
}

int full_scoring_A(ModelState& state, const Scoring& scoring, double step) {
    const Index Ko = state.dims.obs_covariates;
    if (Ko == 0) {
        return 0;
    }
    const Matrix X = state.X();
    const Vector lambda = state.lambda_v.head(Ko);
    int fallbacks = 0;
    Matrix info(Ko, Ko);
    Vector score(Ko);
    Vector direction(Ko);
    for (Index j = 0; j < state.features(); ++j) {
        const Vector q = scoring.info.row(j).transpose();
        const Vector g = scoring.residual.row(j).transpose();
        const Vector a = state.V.row(j).head(Ko).transpose();
        info.noalias() = X.transpose() * q.asDiagonal() * X;
        info.diagonal() += lambda;
        score.noalias() = X.transpose() * g;
        score -= lambda.cwiseProduct(a);
        if (!newton_direction(info, score, direction)) {
            ++fallbacks;
            for (Index k = 0; k < Ko; ++k) {
                const double den = q.dot(X.col(k).cwiseAbs2()) + lambda[k];
                direction[k] = den > 0.0 ? (X.col(k).dot(g) - lambda[k] * a[k]) / den : 0.0;
            }
        }
        state.V.row(j).head(Ko) += step * direction.transpose();
    }
    return fallbacks;
}

int full_scoring_gamma(ModelState& state, const Scoring& scoring, double step) {
    const Index Kf = state.dims.feature_covariates;
    if (Kf == 0) {
        return 0;
    }
    const Index begin = state.dims.feature_block().begin;
    const Matrix Z = state.Z();
    const Vector lambda = state.lambda_u.segment(begin, Kf);
    int fallbacks = 0;
    Matrix info(Kf, Kf);
    Vector score(Kf);
    Vector direction(Kf);
    for (Index i = 0; i < state.observations(); ++i) {
        const auto q = scoring.info.col(i);
        const auto g = scoring.residual.col(i);
        const Vector gamma = state.U.row(i).segment(begin, Kf).transpose();
        info.noalias() = Z.transpose() * q.asDiagonal() * Z;
        info.diagonal() += lambda;
        score.noalias() = Z.transpose() * g;
        score -= lambda.cwiseProduct(gamma);
        if (!newton_direction(info, score, direction)) {
            ++fallbacks;
            for (Index k = 0; k < Kf; ++k) {
                const double den = q.dot(Z.col(k).cwiseAbs2()) + lambda[k];
                direction[k] = den > 0.0 ? (Z.col(k).dot(g) - lambda[k] * gamma[k]) / den : 0.0;
            }
        }
        state.U.row(i).segment(begin, Kf) += step * direction.transpose();
    }
    return fallbacks;
}

bool balance_latent(ModelState& state) {
    const IndexSets& dims = state.dims;
    const Index L = dims.latent;
    const Index begin = dims.latent_block().begin;
    if (L == 0) {
        return false;
    }
    const Vector lu = state.lambda_u.segment(begin, L);
    const Vector lv = state.lambda_v.segment(begin, L);
    if (!(lu.minCoeff() > 0.0 && lv.minCoeff() > 0.0) || lu.maxCoeff() != lu.minCoeff() ||
        lv.maxCoeff() != lv.minCoeff()) {
        return false;
    }
    const Index N = state.observations();
    const Index J = state.features();
    if (N < L || J < L) {
        return false;
    }

    Eigen::HouseholderQR<Matrix> qu(state.U.middleCols(begin, L));
    Eigen::HouseholderQR<Matrix> qv(state.V.middleCols(begin, L));
    const Matrix Ru = qu.matrixQR().topRows(L).triangularView<Eigen::Upper>();
    const Matrix Rv = qv.matrixQR().topRows(L).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> svd(Rv * Ru.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector root = svd.singularValues().cwiseSqrt();
    const double c = std::pow(lv[0] / lu[0], 0.25);

    const Matrix Qu = qu.householderQ() * Matrix::Identity(N, L);
    const Matrix Qv = qv.householderQ() * Matrix::Identity(J, L);
    state.U.middleCols(begin, L) = Qu * svd.matrixV() * (c * root).asDiagonal();
    state.V.middleCols(begin, L) = Qv * svd.matrixU() * (root / c).asDiagonal();
    return true;
}

namespace {

constexpr std::uint64_t kReinitStreamV = 1'000'000;
constexpr std::uint64_t kReinitStreamU = 2'000'000;

class Sweeper {
public:
    Sweeper(ModelState& state, const FitConfig& config)
        : state_(state), config_(config), reinit_(static_cast<std::size_t>(state.dims.total()), false) {}

    std::vector<bool> reinit_flags() const { return reinit_; }
    void restore_flags(std::vector<bool> flags) { reinit_ = std::move(flags); }

    int fallbacks() const noexcept { return fallbacks_; }
    std::vector<std::string>& warnings() noexcept { return warnings_; }

    void sweep(double step) {
        predictor_ = linear_predictor(state_);
        const IndexSets& dims = state_.dims;

        if (config_.full_scoring_gamma && dims.feature_covariates > 0) {
            refresh();
            fallbacks_ += full_scoring_gamma(state_, scoring_, step);
            predictor_ = linear_predictor(state_);
        }
        for (Index k : dims.updatable_u()) {
            if (config_.full_scoring_gamma && dims.feature_block().contains(k)) {
                continue;
            }
            update_column(k, step, /*u_side=*/true);
        }

        if (config_.full_scoring_A && dims.obs_covariates > 0) {
            refresh();
            fallbacks_ += full_scoring_A(state_, scoring_, step);
            predictor_ = linear_predictor(state_);
        }
        for (Index k : dims.updatable_v()) {
            if (config_.full_scoring_A && dims.obs_block().contains(k)) {
                continue;
            }
            update_column(k, step, /*u_side=*/false);
        }
    }

private:
    void refresh() { compute_scoring(state_, predictor_, scoring_, config_.formulation); }

    void update_column(Index k, double step, bool u_side) {
        refresh();
        ColumnUpdate status = u_side ? update_u_column(state_, k, scoring_, step, increment_)
                                     : update_v_column(state_, k, scoring_, step, increment_);
        if (status == ColumnUpdate::degenerate) {
            const auto slot = static_cast<std::size_t>(k);
            if (!state_.dims.latent_block().contains(k) || reinit_[slot]) {
                warnings_.push_back(std::string("skipped degenerate ") + (u_side ? "U" : "V") + " column " +
                                    std::to_string(k + 1));
                return;
            }
            reinit_[slot] = true;
            // The partner column is the one whose zeros made the information vanish.
            if (u_side) {
                state_.V.col(k) = initial_latent_column(state_.seed, kReinitStreamV + static_cast<std::uint64_t>(k),
                                                        state_.features(), state_.dims.latent);
            } else {
                state_.U.col(k) = initial_latent_column(state_.seed, kReinitStreamU + static_cast<std::uint64_t>(k),
                                                        state_.observations(), state_.dims.latent);
            }
            warnings_.push_back(std::string("reinitialized degenerate latent ") + (u_side ? "V" : "U") +
                                " column " + std::to_string(k + 1));
            predictor_ = linear_predictor(state_);
            refresh();
            status = u_side ? update_u_column(state_, k, scoring_, step, increment_)
                            : update_v_column(state_, k, scoring_, step, increment_);
            if (status == ColumnUpdate::degenerate) {
                warnings_.push_back(std::string("skipped degenerate ") + (u_side ? "U" : "V") + " column " +
                                    std::to_string(k + 1));
                return;
            }
        }

        // Rank-one refresh of the predictor: R += V[:,k] du' or R += dv U[:,k]'.
        const auto& kern = kernels::active();
        const auto J = static_cast<std::size_t>(state_.features());
        for (Index i = 0; i < state_.observations(); ++i) {
            if (u_side) {
                kern.axpy(increment_[i], state_.V.col(k).data(), J, predictor_.col(i).data());
            } else {
                kern.axpy(state_.U(i, k), increment_.data(), J, predictor_.col(i).data());
            }
        }
    }

    ModelState& state_;
    const FitConfig& config_;
    Matrix predictor_;
    Scoring scoring_;
    Vector increment_;
    std::vector<bool> reinit_;
    int fallbacks_ = 0;
    std::vector<std::string> warnings_;
};

bool ascended(double before, double after) { return after >= before - 1e-12 * (1.0 + std::abs(before)); }

} // namespace

FitResult fit(ModelState& state, const FitConfig& config) {
    config.validate();
    state.validate();

    FitResult result;
    double current = evaluate_objective(state, linear_predictor(state));
    if (!std::isfinite(current)) {
        throw OptimizationError("objective is not finite at the initial point", {});
    }
    result.initial_objective = current;

    Sweeper sweeper(state, config);
    const int retries = config.damping ? config.max_halvings : 0;

    for (int t = 1; t <= config.max_iters; ++t) {
        const Matrix u_before = state.U;
        const Matrix v_before = state.V;
        const std::vector<bool> flags_before = sweeper.reinit_flags();
        const std::size_t warnings_before = sweeper.warnings().size();

        double step = 1.0;
        double candidate = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt <= retries; ++attempt) {
            sweeper.sweep(step);
            candidate = evaluate_objective(state, linear_predictor(state));
            if (std::isfinite(candidate) && (!config.damping || ascended(current, candidate))) {
                accepted = true;
                break;
            }
            state.U = u_before;
            state.V = v_before;
            sweeper.restore_flags(flags_before);
            sweeper.warnings().resize(warnings_before);
            step *= 0.5;
        }

        if (!accepted) {
            if (!std::isfinite(candidate)) {
                result.trace.push_back({t, candidate});
                throw OptimizationError("objective not finite after " + std::to_string(retries) +
                                            " step halvings at iteration " + std::to_string(t),
                                        result.trace);
            }
            // No halved sweep ascends: the iterate is stationary to working precision.
            sweeper.warnings().push_back("no ascent after " + std::to_string(retries) +
                                         " step halvings at iteration " + std::to_string(t) +
                                         "; keeping the last accepted iterate");
            result.converged = true;
            break;
        }

        if (config.balance) {
            const Matrix u_sweep = state.U;
            const Matrix v_sweep = state.V;
            if (balance_latent(state)) {
                const double balanced = evaluate_objective(state, linear_predictor(state));
                if (std::isfinite(balanced) && balanced >= candidate) {
                    candidate = balanced;
                } else {
                    state.U = u_sweep;
                    state.V = v_sweep;
                }
            }
        }

        result.iterations_run = t;
        const double change = std::abs(candidate - current) / (std::abs(current) + 1.0);
        current = candidate;
        const bool done = change < config.tol;
        if (t % config.trace_every == 0 || done || t == config.max_iters) {
            result.trace.push_back({t, current});
        }
        if (done) {
            result.converged = true;
            break;
        }
    }

    result.final_objective = current;
    result.full_scoring_fallbacks = sweeper.fallbacks();
    result.warnings = std::move(sweeper.warnings());
    if (result.full_scoring_fallbacks > 0) {
        result.warnings.push_back("full scoring fell back to the diagonal update " +
                                  std::to_string(result.full_scoring_fallbacks) + " times");
    }
    result.offset = state.offset;

    try {
        Postprocessed pp = postprocess(state);
        result.U_hat = std::move(pp.factors);
        result.V_hat = std::move(pp.loadings);
        result.A = std::move(pp.A);
        result.Gamma = std::move(pp.Gamma);
        result.singular_values = std::move(pp.singular_values);
        result.postprocessed = true;
        if (pp.zero_dims > 0) {
            result.warnings.push_back(std::to_string(pp.zero_dims) +
                                      " latent dimension(s) have zero singular value; their factors are zero");
        }
    } catch (const PostprocessError& e) {
        result.U_hat = state.latent_u();
        result.V_hat = state.latent_v();
        result.A = state.A();
        result.Gamma = state.Gamma();
        result.warnings.push_back(std::string("postprocessing skipped: ") + e.what());
    }
    return result;
}

} // namespace glmpca

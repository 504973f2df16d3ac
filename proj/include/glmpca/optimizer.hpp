#pragma once

#include "glmpca/errors.hpp"
#include "glmpca/model.hpp"
#include "glmpca/postprocess.hpp"

#include <string>
#include <vector>

namespace glmpca {

struct FitConfig {
    int max_iters = 1000;
    /// Stop when |Q_t - Q_{t-1}| / (|Q_{t-1}| + 1) < tol.
    double tol = 1e-6;
    /// Halve every increment of a sweep that lowers Q or goes non-finite, up to max_halvings times.
    bool damping = true;
    int max_halvings = 10;
    /// Replace the diagonal update of A by one full Fisher-scoring step per feature.
    bool full_scoring_A = false;
    /// Same for Gamma, one step per observation.
    bool full_scoring_gamma = false;
    int trace_every = 1;
    /// Rebalance the latent pair after each sweep (see balance_latent).
    bool balance = true;
    Formulation formulation = Formulation::automatic;

    /// Throws ConfigError.
    void validate() const;
};

struct TracePoint {
    int iteration;
    double objective;
};

struct FitResult {
    Matrix U_hat; // N x L factors
    Matrix V_hat; // J x L loadings, orthonormal columns
    Matrix A;     // J x K_o
    Matrix Gamma; // N x K_f
    Vector offset;
    Vector singular_values;
    std::vector<TracePoint> trace;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    bool converged = false;
    int iterations_run = 0;
    bool postprocessed = false;
    int full_scoring_fallbacks = 0;
    std::vector<std::string> warnings;
};

/// Raised when the objective stays non-finite after every damping retry.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& what, std::vector<TracePoint> trace)
        : Error(what), trace_(std::move(trace)) {}

    const std::vector<TracePoint>& trace() const noexcept { return trace_; }

private:
    std::vector<TracePoint> trace_;
};

enum class ColumnUpdate { applied, degenerate };

/**
 * One diagonal Fisher-scoring step on U[:, k]:
 *   U[:, k] += step * (G' V[:, k] - lambda U[:, k]) / (Q' V[:, k]^2 + lambda)
 * `scoring` must be computed from the current state. The applied increment is
 * written to `increment`. A zero denominator leaves U untouched and returns
 * ColumnUpdate::degenerate.
 */
ColumnUpdate update_u_column(ModelState& state, Index k, const Scoring& scoring, double step, Vector& increment);
ColumnUpdate update_u_column(ModelState& state, Index k, const Scoring& scoring, double step = 1.0);

/// Transpose of update_u_column, for V[:, k].
ColumnUpdate update_v_column(ModelState& state, Index k, const Scoring& scoring, double step, Vector& increment);
ColumnUpdate update_v_column(ModelState& state, Index k, const Scoring& scoring, double step = 1.0);

/**
 * Full Fisher scoring for the coefficient block A, one K_o-dimensional
 * Newton step per feature j:
 *   A[j,:]' += (X' diag(W_j H_j^2) X + diag(lambda))^-1 (X' diag(W_j H_j)(Y_j - M_j) - lambda A[j,:]')
 * Features whose system is numerically singular fall back to the diagonal
 * update. Returns the number of fallbacks.
 */
int full_scoring_A(ModelState& state, const Scoring& scoring, double step = 1.0);

/// Same for Gamma, one K_f-dimensional step per observation using Z.
int full_scoring_gamma(ModelState& state, const Scoring& scoring, double step = 1.0);

/**
 * Replaces the latent pair by the factorization of the same product V~ U~'
 * with the smallest ridge penalty: U~ = Q S^1/2 c, V~ = P S^1/2 / c where
 * V~ U~' = P S Q' and c = (lambda_v / lambda_u)^1/4. The predictor and the
 * likelihood are unchanged; the penalty cannot grow.
 *
 * Needs one shared positive penalty per side on the latent columns; returns
 * false and leaves the state alone otherwise. Costs O((N + J) L^2).
 */
bool balance_latent(ModelState& state);

/**
 * Alternating diagonal Fisher scoring. Each sweep updates the estimated
 * columns of U in ascending order, then those of V, refreshing the working
 * matrices before every column. Accepted sweeps are followed by
 * balance_latent when `balance` is set, kept only if Q does not drop. On return `state` holds the raw optimized
 * factors; the result carries their post-processed form.
 *
 * Throws OptimizationError when the objective is non-finite after all
 * damping retries. Reaching max_iters is reported via `converged = false`.
 */
FitResult fit(ModelState& state, const FitConfig& config);

} // namespace glmpca

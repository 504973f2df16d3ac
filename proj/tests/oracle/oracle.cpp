#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace glmpca::oracle {

namespace {

constexpr double kLo = 1e-10;
constexpr double kHi = 1e10;

double clamp_mean(double mu, bool unit) {
    if (unit) {
        return std::min(std::max(mu, kLo), 1.0 - kLo);
    }
    return std::min(std::max(mu, kLo), kHi);
}

bool penalized_u(const ModelState& s, Index k) { return k >= s.dims.obs_covariates; }
bool penalized_v(const ModelState& s, Index k) { return !s.dims.feature_block().contains(k); }

} // namespace

OracleReport compare(const Matrix& analytic, const Matrix& reference) {
    if (analytic.rows() != reference.rows() || analytic.cols() != reference.cols()) {
        throw OracleError("compare: shape mismatch");
    }
    OracleReport rep;
    for (Index n = 0; n < analytic.size(); ++n) {
        const double a = analytic.data()[n];
        const double r = reference.data()[n];
        const double abs_err = std::abs(a - r);
        const double rel_err = abs_err / (1.0 + std::abs(a));
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        if (rel_err > rep.max_rel_err || rep.location < 0) {
            rep.max_rel_err = std::max(rep.max_rel_err, rel_err);
            rep.location = n;
        }
    }
    return rep;
}

double ScalarFamily::mean(double r) const {
    switch (link) {
    case Link::log:
        return clamp_mean(std::exp(r), false);
    case Link::logit:
        return clamp_mean(std::exp(r) / (1.0 + std::exp(r)), true);
    default:
        return r;
    }
}

double ScalarFamily::dmean(double r) const {
    switch (link) {
    case Link::log:
        return clamp_mean(std::exp(r), false);
    case Link::logit: {
        const double e = std::exp(-std::abs(r));
        return e / ((1.0 + e) * (1.0 + e));
    }
    default:
        return 1.0;
    }
}

double ScalarFamily::var(double mu) const {
    switch (kind) {
    case FamilyKind::poisson:
        return mu;
    case FamilyKind::bernoulli:
        return mu - mu * mu;
    case FamilyKind::negative_binomial:
        return mu * (1.0 + mu / alpha);
    default:
        return 1.0;
    }
}

double ScalarFamily::theta(double mu) const {
    switch (kind) {
    case FamilyKind::poisson:
        return std::log(mu);
    case FamilyKind::bernoulli:
        return std::log(mu) - std::log1p(-mu);
    case FamilyKind::negative_binomial:
        return std::log(mu) - std::log(mu + alpha);
    default:
        return mu;
    }
}

double ScalarFamily::kappa(double t) const {
    switch (kind) {
    case FamilyKind::poisson:
        return std::exp(t);
    case FamilyKind::bernoulli:
        return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
    case FamilyKind::negative_binomial:
        return -alpha * std::log1p(-std::exp(t));
    default:
        return t * t / 2.0;
    }
}

double brute_predictor(const ModelState& s, Index j, Index i) {
    double r = s.offset[i];
    for (Index k = 0; k < s.dims.total(); ++k) {
        r += s.V(j, k) * s.U(i, k);
    }
    return r;
}

Matrix brute_linear_predictor(const ModelState& s) {
    Matrix R(s.features(), s.observations());
    for (Index j = 0; j < R.rows(); ++j) {
        for (Index i = 0; i < R.cols(); ++i) {
            R(j, i) = brute_predictor(s, j, i);
        }
    }
    return R;
}

double scalar_objective(const ModelState& s) {
    const ScalarFamily fam(s.family);
    double total = 0.0;
    for (Index j = 0; j < s.features(); ++j) {
        for (Index i = 0; i < s.observations(); ++i) {
            const double t = fam.theta(fam.mean(brute_predictor(s, j, i)));
            total += s.Y(j, i) * t - fam.kappa(t);
        }
    }
    for (Index k = 0; k < s.dims.total(); ++k) {
        for (Index i = 0; penalized_u(s, k) && i < s.observations(); ++i) {
            total -= 0.5 * s.lambda_u[k] * s.U(i, k) * s.U(i, k);
        }
        for (Index j = 0; penalized_v(s, k) && j < s.features(); ++j) {
            total -= 0.5 * s.lambda_v[k] * s.V(j, k) * s.V(j, k);
        }
    }
    return total;
}

Vector finite_diff_gradient(const ModelState& s, Block block, Index k, double eps) {
    if (eps < 1e-8 || eps > 1e-4) {
        throw OracleError("finite difference step must lie in [1e-8, 1e-4]");
    }
    ModelState work = s;
    Matrix& target = block == Block::U ? work.U : work.V;
    Vector out(target.rows());
    for (Index n = 0; n < target.rows(); ++n) {
        const double saved = target(n, k);
        target(n, k) = saved + eps;
        const double up = scalar_objective(work);
        target(n, k) = saved - eps;
        const double down = scalar_objective(work);
        target(n, k) = saved;
        out[n] = (up - down) / (2.0 * eps);
    }
    return out;
}

namespace {

// Sums over the partner index of one coordinate: (score, information) without penalty.
std::pair<double, double> coordinate_terms(const ModelState& s, Block block, Index k, Index n) {
    const ScalarFamily fam(s.family);
    double score = 0.0;
    double info = 0.0;
    const Index other = block == Block::U ? s.features() : s.observations();
    for (Index m = 0; m < other; ++m) {
        const Index j = block == Block::U ? m : n;
        const Index i = block == Block::U ? n : m;
        const double r = brute_predictor(s, j, i);
        const double mu = fam.mean(r);
        const double h = fam.dmean(r);
        const double rho = fam.var(mu);
        const double partner = block == Block::U ? s.V(j, k) : s.U(i, k);
        score += (s.Y(j, i) - mu) / rho * h * partner;
        info += h * h * partner * partner / rho;
    }
    return {score, info};
}

} // namespace

Vector scalar_gradient(const ModelState& s, Block block, Index k) {
    const Matrix& own = block == Block::U ? s.U : s.V;
    const double lambda = block == Block::U ? s.lambda_u[k] : s.lambda_v[k];
    Vector out(own.rows());
    for (Index n = 0; n < own.rows(); ++n) {
        out[n] = coordinate_terms(s, block, k, n).first - lambda * own(n, k);
    }
    return out;
}

Vector scalar_fisher_info(const ModelState& s, Block block, Index k) {
    const Matrix& own = block == Block::U ? s.U : s.V;
    const double lambda = block == Block::U ? s.lambda_u[k] : s.lambda_v[k];
    Vector out(own.rows());
    for (Index n = 0; n < own.rows(); ++n) {
        out[n] = coordinate_terms(s, block, k, n).second + lambda;
    }
    return out;
}

Vector scalar_column_update(const ModelState& s, Block block, Index k) {
    const Matrix& own = block == Block::U ? s.U : s.V;
    const double lambda = block == Block::U ? s.lambda_u[k] : s.lambda_v[k];
    Vector out(own.rows());
    for (Index n = 0; n < own.rows(); ++n) {
        const auto [score, info] = coordinate_terms(s, block, k, n);
        out[n] = own(n, k) + (score - lambda * own(n, k)) / (info + lambda);
    }
    return out;
}

Vector irls_glm(const Vector& y, const Matrix& X, const Family& family, const Vector& offset, double tol,
                int max_iter) {
    const Index n = X.rows();
    const Index p = X.cols();
    if (n <= p) {
        throw OracleError("IRLS needs more observations than coefficients");
    }
    const ScalarFamily fam(family);

    Vector eta(n);
    for (Index i = 0; i < n; ++i) {
        switch (family.link()) {
        case Link::log:
            eta[i] = std::log(y[i] + 0.1);
            break;
        case Link::logit: {
            const double mu = (y[i] + 0.5) / 2.0;
            eta[i] = std::log(mu / (1.0 - mu));
            break;
        }
        default:
            eta[i] = y[i];
        }
    }

    Vector beta = Vector::Zero(p);
    for (int iter = 0; iter < max_iter; ++iter) {
        Vector sw(n);
        Vector z(n);
        for (Index i = 0; i < n; ++i) {
            const double mu = fam.mean(eta[i]);
            const double h = fam.dmean(eta[i]);
            sw[i] = std::sqrt(h * h / fam.var(mu));
            z[i] = (eta[i] - offset[i]) + (y[i] - mu) / h;
        }
        const Matrix wx = sw.asDiagonal() * X;
        const Vector wz = sw.cwiseProduct(z);
        const Vector next = wx.householderQr().solve(wz);
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e8) {
            throw OracleError("IRLS diverged (separation?)");
        }
        const double change = ((next - beta).cwiseAbs().array() / (beta.cwiseAbs().array() + 1.0)).maxCoeff();
        beta = next;
        eta = X * beta + offset;
        if (iter > 0 && change < tol) {
            return beta;
        }
    }
    throw OracleError("IRLS did not converge");
}

PcaReference pca_reference(const Matrix& Y, Index L) {
    if (L < 1 || L > std::min(Y.rows(), Y.cols())) {
        throw OracleError("pca_reference needs 1 <= L <= min(J, N)");
    }
    PcaReference out;
    out.row_means = Y.rowwise().mean();
    const Matrix centred = Y.colwise() - out.row_means;
    const Matrix gram = centred * centred.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Index J = Y.rows();
    out.loadings.resize(J, L);
    out.singular_values.resize(L);
    for (Index l = 0; l < L; ++l) {
        out.loadings.col(l) = eig.eigenvectors().col(J - 1 - l);
        out.singular_values[l] = std::sqrt(std::max(eig.eigenvalues()[J - 1 - l], 0.0));
    }
    out.scores = centred.transpose() * out.loadings;
    return out;
}

} // namespace glmpca::oracle

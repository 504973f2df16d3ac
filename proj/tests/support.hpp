#pragma once

// Seeded random model instances shared by the unit and acceptance suites.

#include "glmpca/model.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace glmpca::testing {

inline std::vector<Family> all_families() {
    return {Family::gaussian(), Family::poisson(), Family::bernoulli(), Family::negative_binomial(2.0)};
}

inline Matrix normal_matrix(std::mt19937_64& gen, Index rows, Index cols, double sd = 1.0) {
    std::normal_distribution<double> draw(0.0, sd);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = draw(gen);
        }
    }
    return m;
}

/// Draws one observation with mean mu.
inline double sample(const Family& family, double mu, std::mt19937_64& gen) {
    switch (family.kind()) {
    case FamilyKind::poisson:
        return static_cast<double>(std::poisson_distribution<long long>(mu)(gen));
    case FamilyKind::bernoulli:
        return std::bernoulli_distribution(mu)(gen) ? 1.0 : 0.0;
    case FamilyKind::negative_binomial: {
        const double alpha = family.dispersion();
        const double rate = std::gamma_distribution<double>(alpha, mu / alpha)(gen);
        return static_cast<double>(std::poisson_distribution<long long>(rate)(gen));
    }
    default:
        return std::normal_distribution<double>(mu, 1.0)(gen);
    }
}

inline Matrix sample_data(const Family& family, const Matrix& R, std::mt19937_64& gen) {
    Matrix Y(R.rows(), R.cols());
    for (Index i = 0; i < R.cols(); ++i) {
        for (Index j = 0; j < R.rows(); ++j) {
            Y(j, i) = sample(family, family.inverse_link(R(j, i)), gen);
        }
    }
    return Y;
}

struct InstanceShape {
    Index J = 6;
    Index N = 10;
    Index L = 2;
    Index Ko = 1; // first column of X is the intercept
    Index Kf = 1;
};

/**
 * Random model with data drawn from the model itself. Parameters are kept
 * small so log-link means stay moderate. Latent penalties are nonzero so the
 * penalty terms are exercised.
 */
inline ModelState random_instance(const Family& family, std::uint64_t seed, InstanceShape shape,
                                  double lambda_latent = 0.3, double scale = 0.4) {
    std::mt19937_64 gen(seed);
    Matrix X(shape.N, shape.Ko);
    if (shape.Ko > 0) {
        X = normal_matrix(gen, shape.N, shape.Ko);
        X.col(0).setOnes();
    }
    const Matrix Z = normal_matrix(gen, shape.J, shape.Kf);
    const Matrix lu = normal_matrix(gen, shape.N, shape.L, scale);
    const Matrix lv = normal_matrix(gen, shape.J, shape.L, scale);
    const Index K = shape.Ko + shape.Kf + shape.L;

    Vector lambda_u = Vector::Zero(K);
    Vector lambda_v = Vector::Zero(K);
    lambda_u.tail(shape.L).setConstant(lambda_latent);
    lambda_v.tail(shape.L).setConstant(0.5 * lambda_latent);

    Vector offset = normal_matrix(gen, shape.N, 1, 0.1).col(0);
    ModelState s = assemble_model(Matrix::Zero(shape.J, shape.N), family, X, Z, lu, lv, offset, lambda_u,
                                  lambda_v, seed);
    s.V.leftCols(shape.Ko) = normal_matrix(gen, shape.J, shape.Ko, scale);
    s.U.middleCols(shape.Ko, shape.Kf) = normal_matrix(gen, shape.N, shape.Kf, scale);
    if (shape.Ko > 0 && (family.kind() == FamilyKind::poisson || family.kind() == FamilyKind::negative_binomial)) {
        s.V.col(0).array() += 1.0; // mean counts around e
    }
    s.Y = sample_data(family, linear_predictor(s), gen);
    return s;
}

} // namespace glmpca::testing

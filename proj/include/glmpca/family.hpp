#pragma once

#include <cmath>
#include <string>
#include <string_view>

namespace glmpca {

enum class FamilyKind { gaussian, poisson, bernoulli, negative_binomial };

enum class Link { canonical, identity, log, logit };

/// Means of count families are clamped to [kMeanFloor, kMeanCeiling];
/// bernoulli means to [kMeanFloor, 1 - kMeanFloor].
inline constexpr double kMeanFloor = 1e-10;
inline constexpr double kMeanCeiling = 1e10;

/**
 * Exponential-family noise model with a fixed link.
 *
 * Supported combinations:
 *   gaussian           identity (canonical), log
 *   poisson            log (canonical)
 *   bernoulli          logit (canonical)
 *   negative_binomial  log, with fixed shape `dispersion` > 0
 *
 * `Link::canonical` is resolved at construction; for the negative binomial
 * it resolves to the log link, which is not the natural parameter.
 *
 * The checked members throw DomainError / DataError. The `*_unchecked`
 * members are the hot-loop versions and assume valid input.
 */
class Family {
public:
    explicit Family(FamilyKind kind, Link link = Link::canonical, double dispersion = 1.0);

    static Family gaussian() { return Family(FamilyKind::gaussian); }
    static Family poisson() { return Family(FamilyKind::poisson); }
    static Family bernoulli() { return Family(FamilyKind::bernoulli); }
    static Family negative_binomial(double dispersion) {
        return Family(FamilyKind::negative_binomial, Link::log, dispersion);
    }

    FamilyKind kind() const noexcept { return kind_; }
    Link link() const noexcept { return link_; }
    double dispersion() const noexcept { return dispersion_; }

    /// True when the link coincides with the natural parameter, so h = rho(mu).
    bool is_canonical() const noexcept;

    /// Poisson and negative binomial.
    bool is_count() const noexcept {
        return kind_ == FamilyKind::poisson || kind_ == FamilyKind::negative_binomial;
    }

    std::string name() const;

    double inverse_link(double r) const;
    double dinverse_link(double r) const;
    double variance(double mu) const;
    double natural_param(double mu) const;
    double cumulant(double theta) const;

    /// y * theta - cumulant(theta); the data-only term c(y) is omitted.
    double loglik_term(double y, double theta) const;

    bool in_support(double y) const noexcept;

    double inverse_link_unchecked(double r) const noexcept {
        switch (link_) {
        case Link::log:
            return clamp_positive(std::exp(r));
        case Link::logit:
            return clamp_unit(1.0 / (1.0 + std::exp(-r)));
        default:
            return r;
        }
    }

    double dinverse_link_unchecked(double r) const noexcept {
        switch (link_) {
        case Link::log:
            return clamp_positive(std::exp(r));
        case Link::logit: {
            const double mu = clamp_unit(1.0 / (1.0 + std::exp(-r)));
            return mu * (1.0 - mu);
        }
        default:
            return 1.0;
        }
    }

    double variance_unchecked(double mu) const noexcept {
        switch (kind_) {
        case FamilyKind::poisson:
            return mu;
        case FamilyKind::bernoulli:
            return mu * (1.0 - mu);
        case FamilyKind::negative_binomial:
            return mu + mu * mu / dispersion_;
        default:
            return 1.0;
        }
    }

    double natural_param_unchecked(double mu) const noexcept {
        switch (kind_) {
        case FamilyKind::poisson:
            return std::log(mu);
        case FamilyKind::bernoulli:
            return std::log(mu / (1.0 - mu));
        case FamilyKind::negative_binomial:
            return std::log(mu / (mu + dispersion_));
        default:
            return mu;
        }
    }

    double cumulant_unchecked(double theta) const noexcept {
        switch (kind_) {
        case FamilyKind::poisson:
            return std::exp(theta);
        case FamilyKind::bernoulli:
            return theta > 0.0 ? theta + std::log1p(std::exp(-theta)) : std::log1p(std::exp(theta));
        case FamilyKind::negative_binomial:
            return -dispersion_ * std::log(-std::expm1(theta));
        default:
            return 0.5 * theta * theta;
        }
    }

    double loglik_term_unchecked(double y, double theta) const noexcept {
        return y * theta - cumulant_unchecked(theta);
    }

private:
    static double clamp_positive(double mu) noexcept {
        return mu < kMeanFloor ? kMeanFloor : (mu > kMeanCeiling ? kMeanCeiling : mu);
    }
    static double clamp_unit(double mu) noexcept {
        return mu < kMeanFloor ? kMeanFloor : (mu > 1.0 - kMeanFloor ? 1.0 - kMeanFloor : mu);
    }

    FamilyKind kind_;
    Link link_;
    double dispersion_;
};

FamilyKind parse_family_kind(std::string_view name);
Link parse_link(std::string_view name);
std::string_view to_string(FamilyKind kind);
std::string_view to_string(Link link);

} // namespace glmpca

#include "glmpca/family.hpp"

#include "glmpca/errors.hpp"

#include <string>

namespace glmpca {

namespace {

Link resolve_link(FamilyKind kind, Link link) {
    if (link != Link::canonical) {
        return link;
    }
    switch (kind) {
    case FamilyKind::gaussian:
        return Link::identity;
    case FamilyKind::bernoulli:
        return Link::logit;
    default:
        return Link::log;
    }
}

bool link_allowed(FamilyKind kind, Link link) {
    switch (kind) {
    case FamilyKind::gaussian:
        return link == Link::identity || link == Link::log;
    case FamilyKind::poisson:
    case FamilyKind::negative_binomial:
        return link == Link::log;
    case FamilyKind::bernoulli:
        return link == Link::logit;
    }
    return false;
}

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        throw DomainError(std::string(what) + " must be finite");
    }
}

} // namespace

Family::Family(FamilyKind kind, Link link, double dispersion)
    : kind_(kind), link_(resolve_link(kind, link)), dispersion_(dispersion) {
    if (!link_allowed(kind_, link_)) {
        throw ConfigError("link '" + std::string(to_string(link_)) + "' is not supported for family '" +
                          std::string(to_string(kind_)) + "'");
    }
    if (kind_ == FamilyKind::negative_binomial && !(dispersion_ > 0.0 && std::isfinite(dispersion_))) {
        throw ConfigError("negative_binomial requires a finite dispersion > 0");
    }
}

bool Family::is_canonical() const noexcept {
    switch (kind_) {
    case FamilyKind::gaussian:
        return link_ == Link::identity;
    case FamilyKind::poisson:
        return link_ == Link::log;
    case FamilyKind::bernoulli:
        return link_ == Link::logit;
    default:
        return false;
    }
}

std::string Family::name() const {
    std::string out(to_string(kind_));
    out += '/';
    out += to_string(link_);
    return out;
}

double Family::inverse_link(double r) const {
    require_finite(r, "linear predictor");
    return inverse_link_unchecked(r);
}

double Family::dinverse_link(double r) const {
    require_finite(r, "linear predictor");
    return dinverse_link_unchecked(r);
}

double Family::variance(double mu) const {
    require_finite(mu, "mean");
    const bool positive_mean = kind_ != FamilyKind::gaussian || link_ == Link::log;
    if (positive_mean && mu <= 0.0) {
        throw DomainError("mean must be positive for " + name());
    }
    if (kind_ == FamilyKind::bernoulli && mu >= 1.0) {
        throw DomainError("bernoulli mean must lie in (0, 1)");
    }
    return variance_unchecked(mu);
}

double Family::natural_param(double mu) const {
    require_finite(mu, "mean");
    if ((kind_ == FamilyKind::poisson || kind_ == FamilyKind::negative_binomial) && mu <= 0.0) {
        throw DomainError("natural parameter undefined at mean <= 0 for " + name());
    }
    if (kind_ == FamilyKind::bernoulli && (mu <= 0.0 || mu >= 1.0)) {
        throw DomainError("bernoulli natural parameter undefined outside (0, 1)");
    }
    return natural_param_unchecked(mu);
}

double Family::cumulant(double theta) const {
    require_finite(theta, "natural parameter");
    if (kind_ == FamilyKind::negative_binomial && theta >= 0.0) {
        throw DomainError("negative_binomial natural parameter must be negative");
    }
    return cumulant_unchecked(theta);
}

double Family::loglik_term(double y, double theta) const {
    if (!in_support(y)) {
        throw DataError("observation " + std::to_string(y) + " is outside the support of " + name());
    }
    return y * theta - cumulant(theta);
}

bool Family::in_support(double y) const noexcept {
    if (!std::isfinite(y)) {
        return false;
    }
    switch (kind_) {
    case FamilyKind::poisson:
    case FamilyKind::negative_binomial:
        return y >= 0.0 && y == std::floor(y);
    case FamilyKind::bernoulli:
        return y == 0.0 || y == 1.0;
    default:
        return true;
    }
}

FamilyKind parse_family_kind(std::string_view name) {
    if (name == "gaussian" || name == "normal") {
        return FamilyKind::gaussian;
    }
    if (name == "poisson") {
        return FamilyKind::poisson;
    }
    if (name == "bernoulli" || name == "binomial") {
        return FamilyKind::bernoulli;
    }
    if (name == "negative_binomial" || name == "nb") {
        return FamilyKind::negative_binomial;
    }
    throw ConfigError("unknown family '" + std::string(name) + "'");
}

Link parse_link(std::string_view name) {
    if (name == "canonical") {
        return Link::canonical;
    }
    if (name == "identity") {
        return Link::identity;
    }
    if (name == "log") {
        return Link::log;
    }
    if (name == "logit") {
        return Link::logit;
    }
    throw ConfigError("unknown link '" + std::string(name) + "'");
}

std::string_view to_string(FamilyKind kind) {
    switch (kind) {
    case FamilyKind::gaussian:
        return "gaussian";
    case FamilyKind::poisson:
        return "poisson";
    case FamilyKind::bernoulli:
        return "bernoulli";
    case FamilyKind::negative_binomial:
        return "negative_binomial";
    }
    return "unknown";
}

std::string_view to_string(Link link) {
    switch (link) {
    case Link::canonical:
        return "canonical";
    case Link::identity:
        return "identity";
    case Link::log:
        return "log";
    case Link::logit:
        return "logit";
    }
    return "unknown";
}

} // namespace glmpca

#include "microhmc/model.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace microhmc {

DimensionMismatch::DimensionMismatch(std::string_view what, std::size_t expected, std::size_t actual)
    : std::invalid_argument(fmt::format("{}: expected dimension {}, got {}", what, expected, actual)),
      expected_(expected),
      actual_(actual) {}

Constrained constrain(ConstraintTransform t, double x) {
    switch (t.kind) {
    case TransformKind::lower_bounded_at_zero:
        return {std::exp(x), x};
    case TransformKind::identity:
        break;
    }
    return {x, 0.0};
}

double unconstrain(ConstraintTransform t, double value) {
    if (t.kind == TransformKind::lower_bounded_at_zero) {
        return std::log(value);
    }
    return value;
}

Vector TargetModel::constrain_point(const Vector& q) const {
    const auto& ts = transforms();
    Vector out(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        out[i] = constrain(ts[static_cast<std::size_t>(i)], q[i]).value;
    }
    return out;
}

double potential_energy(const TargetModel& model, const Vector& q) {
    if (static_cast<std::size_t>(q.size()) != model.dim()) {
        throw DimensionMismatch(fmt::format("potential_energy({})", model.name()), model.dim(),
                                static_cast<std::size_t>(q.size()));
    }
    return model.potential_unchecked(q);
}

Vector gradient(const TargetModel& model, const Vector& q) {
    if (static_cast<std::size_t>(q.size()) != model.dim()) {
        throw DimensionMismatch(fmt::format("gradient({})", model.name()), model.dim(),
                                static_cast<std::size_t>(q.size()));
    }
    Vector grad(q.size());
    model.potential_and_gradient_unchecked(q, grad);
    return grad;
}

namespace {

std::vector<std::string> indexed_names(std::string_view stem, std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        names.push_back(fmt::format("{}.{}", stem, i));
    }
    return names;
}

// Shared state for the iid targets.
class IidModel : public TargetModel {
public:
    IidModel(std::string name, std::size_t dim)
        : name_(std::move(name)), dim_(dim), names_(indexed_names("x", dim)), transforms_(dim) {
        if (dim == 0) {
            throw ValidationError(fmt::format("{}: dimension must be at least 1", name_));
        }
    }

    std::string_view name() const override { return name_; }
    std::size_t dim() const override { return dim_; }
    const std::vector<std::string>& parameter_names() const override { return names_; }
    const std::vector<ConstraintTransform>& transforms() const override { return transforms_; }

private:
    std::string name_;
    std::size_t dim_;
    std::vector<std::string> names_;
    std::vector<ConstraintTransform> transforms_;
};

// x ~ normal(0, 1); constant (D/2) log(2 pi) dropped.
class GaussianIidModel final : public IidModel {
public:
    explicit GaussianIidModel(std::size_t dim) : IidModel("gaussian_iid", dim) {}

    double potential_unchecked(const Vector& q) const override { return 0.5 * q.squaredNorm(); }

    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        grad = q;
        return 0.5 * q.squaredNorm();
    }
};

// x ~ cauchy(0, 1); constant D log(pi) dropped.
class CauchyIidModel final : public IidModel {
public:
    explicit CauchyIidModel(std::size_t dim) : IidModel("cauchy_iid", dim) {}

    double potential_unchecked(const Vector& q) const override {
        return q.array().square().log1p().sum();
    }

    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        const auto q2 = q.array().square();
        grad = (2.0 * q.array() / (1.0 + q2)).matrix();
        return q2.log1p().sum();
    }
};

constexpr double kMuScale = 10.0;
constexpr double kTauScale = 10.0;

// Shared pieces of the two eight-schools parameterizations. Coordinates are
// (mu, x, z_1..z_J) with tau = exp(x).
class EightSchoolsBase : public TargetModel {
public:
    EightSchoolsBase(std::string name, EightSchoolsData data, std::string_view theta_stem)
        : name_(std::move(name)), data_(std::move(data)) {
        data_.validate();
        const std::size_t J = data_.J();
        names_ = {"mu", "tau"};
        for (auto& n : indexed_names(theta_stem, J)) {
            names_.push_back(std::move(n));
        }
        transforms_.assign(J + 2, ConstraintTransform{});
        transforms_[1].kind = TransformKind::lower_bounded_at_zero;
        inv_var_.resize(static_cast<Eigen::Index>(J));
        y_.resize(static_cast<Eigen::Index>(J));
        for (std::size_t j = 0; j < J; ++j) {
            inv_var_[static_cast<Eigen::Index>(j)] = 1.0 / (data_.sigma[j] * data_.sigma[j]);
            y_[static_cast<Eigen::Index>(j)] = data_.y[j];
        }
    }

    std::string_view name() const override { return name_; }
    std::size_t dim() const override { return data_.J() + 2; }
    const std::vector<std::string>& parameter_names() const override { return names_; }
    const std::vector<ConstraintTransform>& transforms() const override { return transforms_; }

protected:
    // mu ~ N(0, 10^2), tau ~ Cauchy(0, 10) on tau > 0, minus log-Jacobian x.
    static double prior_potential(double mu, double x) {
        const double tau = std::exp(x);
        const double r = tau / kTauScale;
        return 0.5 * mu * mu / (kMuScale * kMuScale) + std::log1p(r * r) - x;
    }

    static double prior_dmu(double mu) { return mu / (kMuScale * kMuScale); }

    static double prior_dx(double x) {
        const double tau2 = std::exp(2.0 * x);
        return 2.0 * tau2 / (kTauScale * kTauScale + tau2) - 1.0;
    }

    std::string name_;
    EightSchoolsData data_;
    std::vector<std::string> names_;
    std::vector<ConstraintTransform> transforms_;
    Eigen::VectorXd inv_var_;
    Eigen::VectorXd y_;
};

class EightSchoolsCenteredModel final : public EightSchoolsBase {
public:
    explicit EightSchoolsCenteredModel(EightSchoolsData data)
        : EightSchoolsBase("eight_schools_centered", std::move(data), "theta") {}

    double potential_unchecked(const Vector& q) const override {
        const auto J = y_.size();
        const double mu = q[0];
        const double x = q[1];
        const double inv_tau2 = std::exp(-2.0 * x);
        const auto theta = q.tail(J).array();
        const double hier = 0.5 * inv_tau2 * (theta - mu).square().sum() + static_cast<double>(J) * x;
        const double lik = 0.5 * ((y_.array() - theta).square() * inv_var_.array()).sum();
        return prior_potential(mu, x) + hier + lik;
    }

    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        const auto J = y_.size();
        const double mu = q[0];
        const double x = q[1];
        const double inv_tau2 = std::exp(-2.0 * x);
        const Eigen::ArrayXd dev = q.tail(J).array() - mu;
        const Eigen::ArrayXd resid = y_.array() - q.tail(J).array();
        const double ss = dev.square().sum();

        grad[0] = prior_dmu(mu) - inv_tau2 * dev.sum();
        grad[1] = prior_dx(x) + static_cast<double>(J) - inv_tau2 * ss;
        grad.tail(J) = (inv_tau2 * dev - resid * inv_var_.array()).matrix();

        return prior_potential(mu, x) + 0.5 * inv_tau2 * ss + static_cast<double>(J) * x +
               0.5 * (resid.square() * inv_var_.array()).sum();
    }
};

class EightSchoolsNoncenteredModel final : public EightSchoolsBase {
public:
    explicit EightSchoolsNoncenteredModel(EightSchoolsData data)
        : EightSchoolsBase("eight_schools_noncentered", std::move(data), "theta_tilde") {}

    double potential_unchecked(const Vector& q) const override {
        const auto J = y_.size();
        const double mu = q[0];
        const double tau = std::exp(q[1]);
        const auto z = q.tail(J).array();
        const Eigen::ArrayXd resid = y_.array() - mu - tau * z;
        return prior_potential(mu, q[1]) + 0.5 * z.square().sum() +
               0.5 * (resid.square() * inv_var_.array()).sum();
    }

    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        const auto J = y_.size();
        const double mu = q[0];
        const double tau = std::exp(q[1]);
        const auto z = q.tail(J).array();
        const Eigen::ArrayXd resid = y_.array() - mu - tau * z;
        const Eigen::ArrayXd scaled = resid * inv_var_.array();

        grad[0] = prior_dmu(mu) - scaled.sum();
        grad[1] = prior_dx(q[1]) - tau * (scaled * z).sum();
        grad.tail(J) = (z - tau * scaled).matrix();

        return prior_potential(mu, q[1]) + 0.5 * z.square().sum() + 0.5 * (resid * scaled).sum();
    }
};

}  // namespace

ModelPtr make_model(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> ModelPtr {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, spec::GaussianIid>) {
                return std::make_shared<GaussianIidModel>(s.dim);
            } else if constexpr (std::is_same_v<T, spec::CauchyIid>) {
                return std::make_shared<CauchyIidModel>(s.dim);
            } else if constexpr (std::is_same_v<T, spec::EightSchoolsCentered>) {
                return std::make_shared<EightSchoolsCenteredModel>(s.data);
            } else {
                return std::make_shared<EightSchoolsNoncenteredModel>(s.data);
            }
        },
        spec);
}

}  // namespace microhmc

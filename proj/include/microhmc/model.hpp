#ifndef MICROHMC_MODEL_HPP
#define MICROHMC_MODEL_HPP

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace microhmc {

using Vector = Eigen::VectorXd;

/// Raised when a vector handed to a model or metric has the wrong length.
class DimensionMismatch : public std::invalid_argument {
public:
    DimensionMismatch(std::string_view what, std::size_t expected, std::size_t actual);

    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

/// Raised for invalid model data (bad eight-schools file, non-positive sigma, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Unconstrained reparameterization of a single coordinate.
enum class TransformKind { identity, lower_bounded_at_zero };

struct ConstraintTransform {
    TransformKind kind = TransformKind::identity;
};

struct Constrained {
    double value;
    double log_jacobian;
};

/// Maps an unconstrained coordinate to its constrained value and log|d value / dx|.
Constrained constrain(ConstraintTransform t, double x);

/// Inverse of constrain(); the argument must lie in the constrained domain.
double unconstrain(ConstraintTransform t, double value);

/// A target distribution expressed as a potential energy V(q) = -log density
/// on an unconstrained space, with Jacobian terms for constrained parameters
/// folded in and normalization constants dropped.
///
/// Implementations are immutable once constructed and may be evaluated
/// concurrently.
class TargetModel {
public:
    virtual ~TargetModel() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t dim() const = 0;

    /// Labels of the constrained output columns, one per unconstrained coordinate.
    virtual const std::vector<std::string>& parameter_names() const = 0;

    virtual const std::vector<ConstraintTransform>& transforms() const = 0;

    /// V(q) without dimension checks.
    virtual double potential_unchecked(const Vector& q) const = 0;

    /// V(q) and writes grad V(q) into grad (already sized to dim()).
    virtual double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const = 0;

    /// Maps an unconstrained point to the constrained parameter values.
    Vector constrain_point(const Vector& q) const;
};

using ModelPtr = std::shared_ptr<const TargetModel>;

/// V(q); throws DimensionMismatch if q.size() != model.dim().
double potential_energy(const TargetModel& model, const Vector& q);

/// grad V(q); throws DimensionMismatch if q.size() != model.dim().
Vector gradient(const TargetModel& model, const Vector& q);

struct EightSchoolsData {
    std::vector<double> y;
    std::vector<double> sigma;

    std::size_t J() const { return y.size(); }

    /// Throws ValidationError on mismatched lengths, empty data or sigma <= 0.
    void validate() const;
};

/// Parses the R-dump style key/value data file (`J <- 8`, `y <- c(...)`).
EightSchoolsData parse_eight_schools(std::string_view text);

/// Reads and parses a data file; throws ValidationError naming the path when
/// the file cannot be opened.
EightSchoolsData load_eight_schools(const std::filesystem::path& path);

namespace spec {
struct GaussianIid {
    std::size_t dim;
};
struct CauchyIid {
    std::size_t dim;
};
struct EightSchoolsCentered {
    EightSchoolsData data;
};
struct EightSchoolsNoncentered {
    EightSchoolsData data;
};
}  // namespace spec

using ModelSpec =
    std::variant<spec::GaussianIid, spec::CauchyIid, spec::EightSchoolsCentered, spec::EightSchoolsNoncentered>;

/// Builds one of the built-in targets.
///
/// - gaussian_iid: V(q) = 1/2 sum q_i^2.
/// - cauchy_iid: V(q) = sum log(1 + q_i^2).
/// - eight_schools_centered: coordinates (mu, log tau, theta_1..theta_J).
/// - eight_schools_noncentered: coordinates (mu, log tau, theta_tilde_1..theta_tilde_J).
///
/// Both eight-schools variants use mu ~ N(0, 10^2), tau ~ Half-Cauchy(0, 10)
/// (the constant factor 2 dropped) and y_j ~ N(theta_j, sigma_j^2), with
/// tau = exp(x) and the log-Jacobian x subtracted from V.
ModelPtr make_model(const ModelSpec& spec);

}  // namespace microhmc

#endif  // MICROHMC_MODEL_HPP

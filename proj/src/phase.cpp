#include "microhmc/phase.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include <fmt/format.h>

namespace microhmc {

EuclideanMetric EuclideanMetric::unit(std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("metric dimension must be at least 1");
    }
    EuclideanMetric m;
    m.kind_ = MetricKind::unit;
    m.dim_ = dim;
    return m;
}

EuclideanMetric EuclideanMetric::diagonal(Vector mass_diagonal) {
    if (mass_diagonal.size() == 0) {
        throw std::invalid_argument("metric dimension must be at least 1");
    }
    for (Eigen::Index i = 0; i < mass_diagonal.size(); ++i) {
        if (!(mass_diagonal[i] > 0.0) || !std::isfinite(mass_diagonal[i])) {
            throw std::invalid_argument(
                fmt::format("metric diagonal entry {} = {} is not strictly positive", i, mass_diagonal[i]));
        }
    }
    EuclideanMetric m;
    m.kind_ = MetricKind::diagonal;
    m.dim_ = static_cast<std::size_t>(mass_diagonal.size());
    m.inv_mass_diag_ = mass_diagonal.cwiseInverse();
    m.sqrt_mass_diag_ = mass_diagonal.cwiseSqrt();
    m.mass_diag_ = std::move(mass_diagonal);
    return m;
}

EuclideanMetric EuclideanMetric::from_inverse_diagonal(const Vector& inverse_mass_diagonal) {
    for (Eigen::Index i = 0; i < inverse_mass_diagonal.size(); ++i) {
        if (!(inverse_mass_diagonal[i] > 0.0) || !std::isfinite(inverse_mass_diagonal[i])) {
            throw std::invalid_argument(
                fmt::format("inverse metric entry {} = {} is not strictly positive", i, inverse_mass_diagonal[i]));
        }
    }
    EuclideanMetric m = diagonal(inverse_mass_diagonal.cwiseInverse());
    // Keep the caller's values exactly rather than a double reciprocal.
    m.inv_mass_diag_ = inverse_mass_diagonal;
    return m;
}

EuclideanMetric EuclideanMetric::dense(Eigen::MatrixXd mass) {
    if (mass.rows() == 0 || mass.rows() != mass.cols()) {
        throw std::invalid_argument("dense metric must be a non-empty square matrix");
    }
    const double scale = std::max(1.0, mass.cwiseAbs().maxCoeff());
    if ((mass - mass.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("dense metric is not symmetric");
    }
    EuclideanMetric m;
    m.llt_.compute(mass);
    if (m.llt_.info() != Eigen::Success) {
        throw std::invalid_argument("dense metric is not positive definite");
    }
    m.kind_ = MetricKind::dense;
    m.dim_ = static_cast<std::size_t>(mass.rows());
    m.mass_diag_ = mass.diagonal();
    m.inv_mass_diag_ = m.llt_.solve(Eigen::MatrixXd::Identity(mass.rows(), mass.cols())).diagonal();
    m.mass_ = std::move(mass);
    return m;
}

Vector EuclideanMetric::mass_diagonal() const {
    return kind_ == MetricKind::unit ? Vector::Ones(static_cast<Eigen::Index>(dim_)) : mass_diag_;
}

Vector EuclideanMetric::inverse_mass_diagonal() const {
    return kind_ == MetricKind::unit ? Vector::Ones(static_cast<Eigen::Index>(dim_)) : inv_mass_diag_;
}

void EuclideanMetric::check(std::string_view op, const Vector& p) const {
    if (static_cast<std::size_t>(p.size()) != dim_) {
        throw DimensionMismatch(op, dim_, static_cast<std::size_t>(p.size()));
    }
}

double EuclideanMetric::kinetic_energy(const Vector& p) const {
    check("kinetic_energy", p);
    switch (kind_) {
    case MetricKind::unit:
        return 0.5 * p.squaredNorm();
    case MetricKind::diagonal:
        return 0.5 * (p.array().square() * inv_mass_diag_.array()).sum();
    case MetricKind::dense:
        return 0.5 * p.dot(llt_.solve(p));
    }
    return 0.0;
}

Vector EuclideanMetric::grad_kinetic(const Vector& p) const {
    check("grad_kinetic", p);
    switch (kind_) {
    case MetricKind::unit:
        return p;
    case MetricKind::diagonal:
        return p.cwiseProduct(inv_mass_diag_);
    case MetricKind::dense:
        return llt_.solve(p);
    }
    return p;
}

Vector EuclideanMetric::sample_momentum(RandomStream& rng) const {
    Vector z(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = rng.normal();
    }
    switch (kind_) {
    case MetricKind::unit:
        return z;
    case MetricKind::diagonal:
        return z.cwiseProduct(sqrt_mass_diag_);
    case MetricKind::dense:
        // M = L L^T, so L z ~ N(0, M).
        return llt_.matrixL() * z;
    }
    return z;
}

std::string format_metric(const EuclideanMetric& m) {
    if (m.kind() == MetricKind::dense) {
        throw std::invalid_argument("only unit and diagonal metrics can be serialized");
    }
    const Vector diag = m.mass_diagonal();
    std::string out = "# mass matrix diagonal\n";
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        out += fmt::format("{:.17g}\n", diag[i]);
    }
    return out;
}

EuclideanMetric parse_metric(std::string_view text) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char c = text[pos];
        if (c == '#') {
            while (pos < text.size() && text[pos] != '\n') {
                ++pos;
            }
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
            ++pos;
            continue;
        }
        std::size_t end = pos;
        while (end < text.size() && text[end] != ' ' && text[end] != '\t' && text[end] != '\n' &&
               text[end] != '\r' && text[end] != ',' && text[end] != '#') {
            ++end;
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, v);
        if (ec != std::errc{} || ptr != text.data() + end) {
            throw std::invalid_argument(fmt::format("malformed metric value '{}'", text.substr(pos, end - pos)));
        }
        values.push_back(v);
        pos = end;
    }
    if (values.empty()) {
        throw std::invalid_argument("metric file contains no values");
    }
    return EuclideanMetric::diagonal(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

PhaseState make_state(const TargetModel& model, Vector q, Vector p) {
    if (static_cast<std::size_t>(q.size()) != model.dim()) {
        throw DimensionMismatch("make_state position", model.dim(), static_cast<std::size_t>(q.size()));
    }
    if (p.size() != q.size()) {
        throw DimensionMismatch("make_state momentum", model.dim(), static_cast<std::size_t>(p.size()));
    }
    PhaseState s;
    s.gradV.resize(q.size());
    s.V = model.potential_and_gradient_unchecked(q, s.gradV);
    s.q = std::move(q);
    s.p = std::move(p);
    return s;
}

}  // namespace microhmc

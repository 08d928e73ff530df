#include "linssp/wls.hpp"

#include <cmath>
#include <numbers>

namespace linssp {

RegressionLevel::RegressionLevel(int level, std::size_t dim, double lambda)
    : level_(level), lambda_(lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge parameter lambda must be > 0");
    if (dim == 0) throw ConfigError("regression dimension must be positive");
    const auto n = static_cast<Eigen::Index>(dim);
    sigma_ = lambda * Matrix::Identity(n, n);
    sigma_inv_ = Matrix::Identity(n, n) / lambda;
    b_ = Vector::Zero(n);
    theta_ = Vector::Zero(n);
    log_det_ = static_cast<double>(dim) * std::log(lambda);
}

void RegressionLevel::update(const Vector& phi, double weight, double response)
{
    if (!(weight > 0.0) || !std::isfinite(weight)) throw std::invalid_argument("regression weight must be finite and > 0");
    if (!std::isfinite(response) || !phi.allFinite()) throw std::invalid_argument("non-finite regression input");
    if (phi.size() != b_.size()) throw std::invalid_argument("feature dimension mismatch");

    const double w = 1.0 / (weight * weight);
    const Vector u = sigma_inv_ * phi;
    const double quad = phi.dot(u);

    sigma_.noalias() += w * phi * phi.transpose();
    b_ += (w * response) * phi;
    sigma_inv_.noalias() -= (w / (1.0 + w * quad)) * u * u.transpose();
    log_det_ += std::log1p(w * quad);
    ++num_updates_;

    if (++since_refresh_ >= kRefreshPeriod)
        refactorize();
    else
        theta_.noalias() = sigma_inv_ * b_;
}

void RegressionLevel::refactorize()
{
    Eigen::LLT<Matrix> llt(sigma_);
    if (llt.info() != Eigen::Success) throw ModelError("regression covariance lost positive definiteness");
    const auto n = sigma_.rows();
    sigma_inv_ = llt.solve(Matrix::Identity(n, n));
    theta_ = llt.solve(b_);
    const Matrix& L = llt.matrixLLT();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ld += std::log(L(i, i));
    log_det_ = 2.0 * ld;
    since_refresh_ = 0;
}

LevelSnapshot snapshot_of(const RegressionLevel& level)
{
    return LevelSnapshot{level.sigma(), level.sigma_inv(), level.theta(), level.log_det()};
}

IntervalSnapshot IntervalSnapshot::take(std::size_t t_j, const std::vector<RegressionLevel>& live)
{
    IntervalSnapshot snap;
    snap.t_j = t_j;
    snap.levels.reserve(live.size());
    for (const auto& level : live) snap.levels.push_back(snapshot_of(level));
    return snap;
}

double ellipsoid_norm(const Matrix& sigma_inv, const Vector& phi)
{
    return std::sqrt(std::max(0.0, phi.dot(sigma_inv * phi)));
}

double confidence_radius(std::size_t t, std::size_t d, double lambda, double delta, double constant)
{
    if (t == 0) throw std::invalid_argument("confidence radius needs t >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("failure probability must lie in (0,1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    const double tt = static_cast<double>(t);
    const double dd = static_cast<double>(d);
    const double log_ratio = std::max(0.0, std::log(tt / dd));
    const double inner = std::log(constant * (log_ratio + 2.0) * std::pow(tt, 4) / delta);
    return 12.0 * std::sqrt(dd * std::log1p(tt * tt / (dd * lambda)) * inner) + 30.0 * std::sqrt(dd) * inner + 1.0;
}

bool det_doubled(const RegressionLevel& live, const LevelSnapshot& snapshot)
{
    return live.log_det() - snapshot.log_det >= std::numbers::ln2;
}

ConfidenceEllipsoid::ConfidenceEllipsoid(Vector c, Matrix s, double r)
    : center(std::move(c)), shape(std::move(s)), radius(r)
{
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("ellipsoid radius must be finite and >= 0");
    Eigen::LLT<Matrix> llt(shape);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("ellipsoid shape must be positive definite");
    shape_inv = llt.solve(Matrix::Identity(shape.rows(), shape.cols()));
}

double ConfidenceEllipsoid::distance(const Vector& theta) const
{
    const Vector diff = theta - center;
    return std::sqrt(std::max(0.0, diff.dot(shape * diff)));
}

bool ConfidenceEllipsoid::contains(const Vector& theta, double slack) const
{
    return distance(theta) <= radius + slack;
}

double ConfidenceEllipsoid::min_linear(const Vector& phi) const
{
    return center.dot(phi) - radius * ellipsoid_norm(shape_inv, phi);
}

}  // namespace linssp

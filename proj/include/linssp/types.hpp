#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace linssp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using StateId = std::size_t;
using ActionId = std::size_t;

/// State-indexed value estimates.
using ValueTable = std::vector<double>;

/// Dense state-action table, row-major by state.
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : num_states_(num_states), num_actions_(num_actions),
          data_(num_states * num_actions, fill) {}

    double operator()(StateId s, ActionId a) const { return data_[s * num_actions_ + a]; }
    double& operator()(StateId s, ActionId a) { return data_[s * num_actions_ + a]; }

    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }

    /// Lowest-index argmin over actions.
    ActionId argmin(StateId s) const {
        ActionId best = 0;
        for (ActionId a = 1; a < num_actions_; ++a)
            if ((*this)(s, a) < (*this)(s, best)) best = a;
        return best;
    }
    double min(StateId s) const { return (*this)(s, argmin(s)); }

    ValueTable state_values() const {
        ValueTable v(num_states_);
        for (StateId s = 0; s < num_states_; ++s) v[s] = min(s);
        return v;
    }

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> data_;
};

/// Malformed environment or improper instance.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative procedure exhausted its budget.
class ConvergenceError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Bad configuration file or parameter.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double sup_norm_distance(const ValueTable& a, const ValueTable& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace linssp

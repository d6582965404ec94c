#pragma once

#include <Eigen/Dense>

namespace causalab {

template <typename Scalar>
using VecX = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VecX<double>;
using Matrix = MatX<double>;
using Index = Eigen::Index;

// Two-sided 97.5% normal quantile; every confidence interval in the library
// is tau_hat +/- kZ975 * std_error.
inline constexpr double kZ975 = 1.959964;

}  // namespace causalab

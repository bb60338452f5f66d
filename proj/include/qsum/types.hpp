#pragma once

#include <Eigen/Core>

namespace qsum {

using Vec = Eigen::VectorXd;

inline bool all_finite(const Vec& x) { return x.allFinite(); }

}  // namespace qsum

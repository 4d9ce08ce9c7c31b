#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace relrl {

/// Dense row-major matrix; vectors are 1 x n rows, per-node data is n x d.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matf = Mat<float>;
using Matd = Mat<double>;

/// Boolean mask over candidates. `char` instead of `bool` so it can be viewed as a span.
using Mask = std::vector<char>;

inline bool any(const Mask& mask) {
  for (char m : mask) {
    if (m) return true;
  }
  return false;
}

inline int count(const Mask& mask) {
  int n = 0;
  for (char m : mask) n += m ? 1 : 0;
  return n;
}

}  // namespace relrl

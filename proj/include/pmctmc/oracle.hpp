#ifndef PMCTMC_ORACLE_HPP
#define PMCTMC_ORACLE_HPP

#include <cmath>

#include <Eigen/Dense>

#include "pmctmc/errors.hpp"

namespace pmctmc {

/// Reference exponential e^{tQ} for tests and benchmarks: scale by 2^j so
/// that ||tQ / 2^j||_inf <= 1/8, sum 20 Taylor terms, square j times. All
/// arithmetic in long double.
inline Eigen::MatrixXd oracle_expm(const Eigen::MatrixXd& q, double t) {
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  if (q.rows() != q.cols()) throw DomainError("oracle needs a square matrix");
  const Eigen::Index n = q.rows();
  MatL a = q.cast<long double>() * static_cast<long double>(t);
  const long double norm = n > 0 ? a.cwiseAbs().rowwise().sum().maxCoeff() : 0.0L;
  int j = 0;
  if (norm > 0.125L) j = static_cast<int>(std::ceil(std::log2(static_cast<double>(norm / 0.125L))));
  a /= std::ldexp(1.0L, j);
  MatL term = MatL::Identity(n, n);
  MatL sum = MatL::Identity(n, n);
  for (int k = 1; k <= 20; ++k) {
    term = (term * a) / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < j; ++i) sum = (sum * sum).eval();
  return sum.cast<double>();
}

}  // namespace pmctmc

#endif  // PMCTMC_ORACLE_HPP

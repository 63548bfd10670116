#ifndef PMCTMC_DETAIL_SIMPLEX_HPP
#define PMCTMC_DETAIL_SIMPLEX_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace pmctmc::detail {

/// Dense two-phase simplex with Bland's rule for
///   min c^T x  s.t.  A x = b, x >= 0.
/// Returns nullopt when infeasible or unbounded. Written for the tiny
/// systems that appear in seed-path construction (a handful of rows and
/// columns); no attempt is made at sparse or numerically hardened pivoting.
inline std::optional<Eigen::VectorXd> simplex_min(Eigen::MatrixXd a, Eigen::VectorXd b,
                                                  const Eigen::VectorXd& c,
                                                  double tol = 1e-9) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) < 0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
    }
  }
  // Tableau columns: n structural, m artificial, then rhs.
  const Eigen::Index width = n + m + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, width);
  t.leftCols(n) = a;
  t.block(0, n, m, m).setIdentity();
  t.col(width - 1) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;
  std::vector<bool> row_active(static_cast<std::size_t>(m), true);

  auto pivot = [&](Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != row && std::abs(t(i, col)) > 0.0) t.row(i) -= t(i, col) * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
  };

  // Runs simplex iterations for the objective `cost` over allowed columns.
  auto optimize = [&](const Eigen::VectorXd& cost, Eigen::Index allowed_cols) -> bool {
    for (int iter = 0; iter < 10000; ++iter) {
      // Reduced costs.
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        double rc = cost(j);
        for (Eigen::Index i = 0; i < m; ++i) {
          if (!row_active[static_cast<std::size_t>(i)]) continue;
          rc -= cost(basis[static_cast<std::size_t>(i)]) * t(i, j);
        }
        if (rc < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!row_active[static_cast<std::size_t>(i)] || t(i, enter) <= tol) continue;
        const double ratio = t(i, width - 1) / t(i, enter);
        if (leave < 0 || ratio < best - tol ||
            (std::abs(ratio - best) <= tol &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    return false;
  };

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  if (!optimize(phase1, n + m)) return std::nullopt;
  double infeas = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] >= n) infeas += t(i, width - 1);
  }
  if (infeas > 1e-7) return std::nullopt;

  // Drive remaining artificials out of the basis; drop redundant rows.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < n) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(t(i, j)) > tol) {
        col = j;
        break;
      }
    }
    if (col < 0) {
      row_active[static_cast<std::size_t>(i)] = false;
    } else {
      pivot(i, col);
    }
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  if (!optimize(phase2, n)) return std::nullopt;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!row_active[static_cast<std::size_t>(i)]) continue;
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < n) x(j) = t(i, width - 1);
  }
  return x;
}

}  // namespace pmctmc::detail

#endif  // PMCTMC_DETAIL_SIMPLEX_HPP

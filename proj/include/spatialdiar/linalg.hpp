#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace spatialdiar::linalg {

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // column i pairs with values(i)
};

// Every eigendecomposition in the library goes through here so the
// invocation counter below sees it.
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a);
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a);

// Calls to symmetric_eigen / symmetric_eigenvalues made on this thread.
std::uint64_t eigendecomposition_count();

// 1-norm condition number, ||A||_1 * ||A^-1||_1. Returns +inf when A is
// numerically singular. No eigendecomposition involved.
double condition_number_1(const Eigen::MatrixXd& a);

bool is_symmetric(const Eigen::MatrixXd& a, double tol);

}  // namespace spatialdiar::linalg

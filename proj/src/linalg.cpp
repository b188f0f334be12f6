#include "spatialdiar/linalg.hpp"

#include <limits>

namespace spatialdiar::linalg {
namespace {

thread_local std::uint64_t g_evd_count = 0;

}  // namespace

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a) {
  ++g_evd_count;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  // Eigen returns ascending order.
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  ++g_evd_count;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().reverse();
}

std::uint64_t eigendecomposition_count() {
  return g_evd_count;
}

double condition_number_1(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd inv = lu.inverse();
  const double norm_a = a.cwiseAbs().colwise().sum().maxCoeff();
  const double norm_inv = inv.cwiseAbs().colwise().sum().maxCoeff();
  return norm_a * norm_inv;
}

bool is_symmetric(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace spatialdiar::linalg

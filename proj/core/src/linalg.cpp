#include "banditstop/linalg.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>

namespace banditstop {

bool is_singular_gram(const Matrix& gram) {
  if (gram.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return ev.minCoeff() <= kSingularRelTol * std::max(ev.maxCoeff(), 1.0);
}

std::optional<Eigen::LLT<Matrix>> factor_gram(const Matrix& gram) {
  if (is_singular_gram(gram)) return std::nullopt;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace banditstop

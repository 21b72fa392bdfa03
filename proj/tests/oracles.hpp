#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls into the library's closed forms.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

/// exp(M) by its Taylor series.
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& M, int terms = 30) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  Eigen::MatrixXd term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * M / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

/// Drift of the damped IWP: damping on the first super-diagonal.
inline Eigen::MatrixXd drift(const std::vector<double>& damping) {
  const auto q = static_cast<Eigen::Index>(damping.size() + 1);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index i = 0; i + 1 < q; ++i) F(i, i + 1) = damping[static_cast<std::size_t>(i)];
  return F;
}

/// int_0^h exp(Fs) (sigma2 e_q e_q^T) exp(Fs)^T ds by 30-point Gauss-Legendre,
/// with exp(Fs) from the series.
inline Eigen::MatrixXd process_noise_integral(const std::vector<double>& damping, double sigma2, double h) {
  const Eigen::MatrixXd F = drift(damping);
  const auto q = F.rows();
  Eigen::MatrixXd out(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      auto integrand = [&](double s) {
        const Eigen::MatrixXd E = expm_series(F * s);
        return sigma2 * E(i, q - 1) * E(j, q - 1);
      };
      out(i, j) = boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, h);
    }
  }
  return out;
}

/// int g(x) N(x; mu, s2) dx over mu +- 12 sd, adaptive Gauss-Kronrod.
inline double gaussian_expectation(const std::function<double(double)>& g, double mu, double s2) {
  const double sd = std::sqrt(s2);
  auto integrand = [&](double x) {
    const double z = (x - mu) / sd;
    return g(x) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, mu - 12.0 * sd, mu + 12.0 * sd, 15,
                                                                      1e-14);
}

inline double se_kernel(double a, double b, double lambda, double theta2) {
  return theta2 * std::exp(-0.5 * (a - b) * (a - b) / (lambda * lambda));
}

/// Scalar kernel mean by quadrature.
inline double kernel_mean_1d(double node, double mu, double s2, double lambda, double theta2) {
  return gaussian_expectation([&](double x) { return se_kernel(x, node, lambda, theta2); }, mu, s2);
}

/// Scalar double integral by nested quadrature.
inline double double_integral_1d(double s2, double lambda, double theta2) {
  return gaussian_expectation([&](double x) { return kernel_mean_1d(x, 0.0, s2, lambda, theta2); }, 0.0, s2);
}

/// Multivariate SE kernel integrals by rotating into the eigenbasis of Sigma,
/// where both the kernel and the Gaussian factorize into 1-D quadratures.
inline double kernel_mean_nd(const Eigen::VectorXd& node, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                             double lambda, double theta2) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma);
  const Eigen::VectorXd offset = eig.eigenvectors().transpose() * (node - mu);
  double v = theta2;
  for (Eigen::Index k = 0; k < offset.size(); ++k) {
    v *= kernel_mean_1d(offset(k), 0.0, eig.eigenvalues()(k), lambda, 1.0);
  }
  return v;
}

inline double double_integral_nd(const Eigen::MatrixXd& Sigma, double lambda, double theta2) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma);
  double v = theta2;
  for (Eigen::Index k = 0; k < Sigma.rows(); ++k) v *= double_integral_1d(eig.eigenvalues()(k), lambda, 1.0);
  return v;
}

/// Gauss-Hermite (probabilists', N(0,1)) nodes and weights by Golub-Welsch.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> golub_welsch(int N) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
  for (int k = 1; k < N; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  Eigen::VectorXd w = eig.eigenvectors().row(0).transpose().cwiseAbs2();
  return {eig.eigenvalues(), w};
}

/// Naive triple-loop product.
inline Eigen::MatrixXd matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline double max_rel_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.rows(); ++i) {
    for (Eigen::Index j = 0; j < want.cols(); ++j) {
      const double diff = std::abs(got(i, j) - want(i, j));
      if (diff == 0.0) continue;
      worst = std::max(worst, diff / std::abs(want(i, j)));
    }
  }
  return worst;
}

inline double min_eigenvalue(const Eigen::MatrixXd& P) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace oracle

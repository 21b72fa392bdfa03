#pragma once

// Gradient measurements for the Gaussian ODE filter. Each generator turns the
// predicted belief over the solution into an observation (y, R) of the n-th
// derivative: y estimates E[f(t, X)] and R its uncertainty, X ~ N(m-, P-).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "pnode/bayes_quad.hpp"
#include "pnode/errors.hpp"
#include "pnode/problems.hpp"
#include "pnode/random.hpp"
#include "pnode/trajectory.hpp"

namespace pnode {

struct Measurement {
  Eigen::VectorXd y;  // length D
  Eigen::MatrixXd R;  // D x D; the filter uses the diagonal
  std::size_t evals_used = 0;
  std::size_t jacobian_evals = 0;
};

/// Evaluate f at the predicted mean, R = 0.
struct MaxLikelihood {};

/// Sample average over N draws from the predicted belief. Experimental: the
/// filter tends to diverge on oscillatory problems with it.
struct MonteCarloIntegration {
  std::size_t samples = 5;
  std::uint64_t seed = 0;
};

/// First-order Taylor expansion around the mean. Falls back to the problem's
/// analytic Jacobian when `jacobian` is empty.
struct TaylorLinearization {
  Jacobian jacobian;
};

enum class NodeScheme { Grid, Hermite };

/// Bayesian quadrature with a squared exponential kernel.
struct BayesianQuadrature {
  std::size_t nodes = 5;
  SEKernel kernel{};
  NodeScheme scheme = NodeScheme::Grid;
  double spread = 2.0;  // grid half-width in standard deviations (1-D input)
};

using MeasurementGenerator = std::variant<MaxLikelihood, MonteCarloIntegration, TaylorLinearization, BayesianQuadrature>;

[[nodiscard]] inline std::string generator_name(const MeasurementGenerator& g) {
  struct Visitor {
    std::string operator()(const MaxLikelihood&) const { return "ml"; }
    std::string operator()(const MonteCarloIntegration&) const { return "mc-filter"; }
    std::string operator()(const TaylorLinearization&) const { return "taylor"; }
    std::string operator()(const BayesianQuadrature&) const { return "bq"; }
  };
  return std::visit(Visitor{}, g);
}

/// Predicted belief restricted to the dynamics' inputs (derivatives 0..n-1).
struct InputBelief {
  Eigen::VectorXd mean;  // length n*D, layout k*D + d
  Eigen::MatrixXd cov;   // block-diagonal across output dimensions
};

[[nodiscard]] inline InputBelief project_input(const GaussianState& state, std::size_t order) {
  const auto D = static_cast<Eigen::Index>(state.dim());
  const auto n = static_cast<Eigen::Index>(order);
  if (order >= state.order()) throw InvalidArgument("project_input: state order must exceed the ODE order");
  InputBelief b{Eigen::VectorXd(n * D), Eigen::MatrixXd::Zero(n * D, n * D)};
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index k = 0; k < n; ++k) {
      b.mean(k * D + d) = state.mean(k, d);
      for (Eigen::Index l = 0; l < n; ++l) b.cov(k * D + d, l * D + d) = state.cov[static_cast<std::size_t>(d)](k, l);
    }
  }
  return b;
}

namespace detail {

inline Eigen::VectorXd eval_checked(const Dynamics& f, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = f(t, x);
  if (!y.allFinite()) throw DynamicsError("dynamics returned a non-finite value", t);
  return y;
}

}  // namespace detail

[[nodiscard]] inline Measurement measure_ml(const Dynamics& f, double t, const Eigen::VectorXd& mean) {
  if (!mean.allFinite()) throw DynamicsError("non-finite predicted mean", t);
  Measurement m;
  m.y = detail::eval_checked(f, t, mean);
  m.R = Eigen::MatrixXd::Zero(m.y.size(), m.y.size());
  m.evals_used = 1;
  return m;
}

/// y = (1/N) sum f(x_i), R = (1/N) sum (f(x_i) - y)(f(x_i) - y)^T, x_i ~ N(mean, cov).
[[nodiscard]] inline Measurement measure_mc(const Dynamics& f, double t, const Eigen::VectorXd& mean,
                                            const Eigen::MatrixXd& cov, std::size_t N, NormalSampler& normal) {
  if (N < 2) throw InvalidArgument("measure_mc: need at least 2 samples");
  detail::require_psd(cov, "measure_mc");
  const Eigen::MatrixXd L = detail::covariance_factor(cov).L;
  Eigen::MatrixXd values;
  for (std::size_t i = 0; i < N; ++i) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal();
    const Eigen::VectorXd fx = detail::eval_checked(f, t, mean + L * z);
    if (i == 0) values.resize(static_cast<Eigen::Index>(N), fx.size());
    values.row(static_cast<Eigen::Index>(i)) = fx.transpose();
  }
  Measurement m;
  m.y = values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values.rowwise() - m.y.transpose();
  m.R = centered.transpose() * centered / static_cast<double>(N);
  m.R.diagonal() = m.R.diagonal().cwiseMax(0.0);
  m.evals_used = N;
  return m;
}

/// y = f(mean), R = J cov J^T with J the Jacobian at the mean.
[[nodiscard]] inline Measurement measure_taylor(const Dynamics& f, const Jacobian& jac, double t,
                                                const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (!jac) throw InvalidArgument("measure_taylor: no Jacobian available");
  Measurement m;
  m.y = detail::eval_checked(f, t, mean);
  const Eigen::MatrixXd J = jac(t, mean);
  if (!J.allFinite()) throw DynamicsError("Jacobian returned a non-finite value", t);
  if (J.rows() != m.y.size() || J.cols() != mean.size()) {
    throw InvalidArgument("measure_taylor: Jacobian has the wrong shape");
  }
  m.R = J * cov * J.transpose();
  m.R.diagonal() = m.R.diagonal().cwiseMax(0.0);
  m.evals_used = 1;
  m.jacobian_evals = 1;
  return m;
}

/// y = sum W_i f(x_i) over the rule's nodes, R = integral variance (same for every output).
[[nodiscard]] inline Measurement measure_bq(const Dynamics& f, double t, const QuadratureRule& rule) {
  Measurement m;
  Eigen::MatrixXd values;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const Eigen::VectorXd fx = detail::eval_checked(f, t, rule.nodes[i]);
    if (i == 0) values.resize(static_cast<Eigen::Index>(rule.size()), fx.size());
    values.row(static_cast<Eigen::Index>(i)) = fx.transpose();
  }
  m.y = rule.apply(values);
  m.R = Eigen::MatrixXd::Identity(m.y.size(), m.y.size()) * std::max(0.0, rule.variance);
  m.evals_used = rule.size();
  return m;
}

/// Nodes for a BQ generator on the given input belief.
[[nodiscard]] inline NodeVector bq_nodes(const BayesianQuadrature& g, const InputBelief& input) {
  if (g.nodes < 1) throw InvalidArgument("bq: need at least one node");
  if (g.scheme == NodeScheme::Hermite) return hermite_nodes(input.mean, input.cov, g.nodes).nodes;
  return grid_nodes(input.mean, input.cov, g.nodes, g.spread).nodes;
}

/// Runs one generator against the predicted state. `normal` must be provided
/// for MonteCarloIntegration.
[[nodiscard]] inline Measurement generate_measurement(const MeasurementGenerator& generator, const IVProblem& problem,
                                                      const GaussianState& predicted, NormalSampler* normal) {
  const InputBelief input = project_input(predicted, problem.order);
  const double t = predicted.t;
  return std::visit(
      [&](const auto& g) -> Measurement {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, MaxLikelihood>) {
          return measure_ml(problem.f, t, input.mean);
        } else if constexpr (std::is_same_v<G, MonteCarloIntegration>) {
          if (normal == nullptr) throw InvalidArgument("mc-filter: no random stream supplied");
          return measure_mc(problem.f, t, input.mean, input.cov, g.samples, *normal);
        } else if constexpr (std::is_same_v<G, TaylorLinearization>) {
          return measure_taylor(problem.f, g.jacobian ? g.jacobian : problem.jacobian, t, input.mean, input.cov);
        } else {
          const QuadratureRule rule = build_rule(g.kernel, bq_nodes(g, input), input.mean, input.cov);
          return measure_bq(problem.f, t, rule);
        }
      },
      generator);
}

}  // namespace pnode

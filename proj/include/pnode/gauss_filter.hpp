#pragma once

// Gaussian filtering ODE solver: Kalman prediction under the IWP prior,
// a pluggable gradient measurement, and a Kalman update on the component
// that models the n-th derivative.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"
#include "pnode/measurements.hpp"
#include "pnode/problems.hpp"
#include "pnode/random.hpp"
#include "pnode/state_model.hpp"
#include "pnode/trajectory.hpp"

namespace pnode {

/// Selects the state component that models u^(n) (0-based index n).
class ObservationOperator {
 public:
  ObservationOperator(std::size_t n, std::size_t q) : n_(n), q_(q) {
    if (n >= q) {
      throw InvalidArgument("observation: ODE order " + std::to_string(n) + " needs state order > " +
                            std::to_string(n) + ", got " + std::to_string(q));
    }
  }

  [[nodiscard]] std::size_t observed_index() const noexcept { return n_; }
  [[nodiscard]] std::size_t state_order() const noexcept { return q_; }

  [[nodiscard]] Eigen::RowVectorXd H() const {
    Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(q_));
    h(static_cast<Eigen::Index>(n_)) = 1.0;
    return h;
  }

 private:
  std::size_t n_;
  std::size_t q_;
};

namespace detail {

/// (P + P^T)/2, with tiny negative diagonal entries (> -1e-12) set to zero.
inline void symmetrize(Eigen::MatrixXd& P) {
  P = 0.5 * (P + P.transpose()).eval();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (P(i, i) < 0.0 && P(i, i) > -1e-12) P(i, i) = 0.0;
  }
}

}  // namespace detail

/// m- = A m, P- = A P A^T + Q(h), advancing t by h.
[[nodiscard]] inline GaussianState predict(const GaussianState& state, const Eigen::MatrixXd& A,
                                           const Eigen::MatrixXd& Qh, double h = 0.0) {
  const auto q = static_cast<Eigen::Index>(state.order());
  if (A.rows() != q || A.cols() != q || Qh.rows() != q || Qh.cols() != q) {
    throw InvalidArgument("predict: transition matrices do not match the state order");
  }
  if (state.cov.size() != state.dim()) throw InvalidArgument("predict: one covariance per output dimension required");
  GaussianState out;
  out.t = state.t + h;
  out.mean = A * state.mean;
  out.cov.reserve(state.cov.size());
  for (const auto& P : state.cov) {
    if (P.rows() != q || P.cols() != q) throw InvalidArgument("predict: covariance has the wrong size");
    Eigen::MatrixXd Pm = A * P * A.transpose() + Qh;
    detail::symmetrize(Pm);
    out.cov.push_back(std::move(Pm));
  }
  return out;
}

[[nodiscard]] inline GaussianState predict(const GaussianState& state, const TransitionPair& tp) {
  return predict(state, tp.A, tp.Qh, tp.h);
}

/// Kalman update of every output dimension against its measured n-th derivative.
[[nodiscard]] inline GaussianState update(const GaussianState& predicted, const ObservationOperator& obs,
                                          const Measurement& meas) {
  const auto D = static_cast<Eigen::Index>(predicted.dim());
  const auto n = static_cast<Eigen::Index>(obs.observed_index());
  if (predicted.order() != obs.state_order()) throw InvalidArgument("update: observation operator order mismatch");
  if (meas.y.size() != D || meas.R.rows() != D || meas.R.cols() != D) {
    throw InvalidArgument("update: measurement dimension does not match the state");
  }
  GaussianState out = predicted;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double r = meas.R(d, d);
    if (r < 0.0) throw InvalidArgument("update: negative measurement variance");
    const Eigen::MatrixXd& P = predicted.cov[static_cast<std::size_t>(d)];
    const double z = meas.y(d) - predicted.mean(n, d);
    const double S = P(n, n) + r;
    if (!(S > 0.0)) throw SingularInnovation("innovation variance is not positive", predicted.t);
    const Eigen::VectorXd PHt = P.col(n);
    const Eigen::VectorXd K = PHt / S;
    out.mean.col(d) += K * z;
    Eigen::MatrixXd& Pu = out.cov[static_cast<std::size_t>(d)];
    Pu = P - K * PHt.transpose();
    detail::symmetrize(Pu);
  }
  return out;
}

/// Belief at t0: derivatives 0..n-1 at their initial values and u^(n) at
/// f(t0, u0), all with zero variance; higher derivatives N(0, sigma2).
[[nodiscard]] inline GaussianState initial_state(const IVProblem& problem, const IWPModel& model) {
  problem.validate();
  const std::size_t q = model.order();
  const std::size_t n = problem.order;
  if (q < n + 1) {
    throw InvalidArgument("state order q=" + std::to_string(q) + " must be at least ODE order + 1 = " +
                          std::to_string(n + 1));
  }
  const auto D = static_cast<Eigen::Index>(problem.dim);
  const Eigen::VectorXd f0 = detail::eval_checked(problem.f, problem.t0, problem.initial);
  GaussianState s;
  s.t = problem.t0;
  s.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), D);
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) s.mean(k, d) = problem.initial(k * D + d);
    s.mean(static_cast<Eigen::Index>(n), d) = f0(d);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    for (std::size_t k = n + 1; k < q; ++k) P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = model.sigma2();
    s.cov.push_back(std::move(P));
  }
  return s;
}

/// Number of steps of size h covering the problem's span; h must divide it.
[[nodiscard]] inline std::size_t mesh_steps(const IVProblem& problem, double h) {
  detail::require_positive_step(h);
  const double span = problem.t_end - problem.t0;
  const double steps = std::round(span / h);
  if (steps < 1.0 || std::abs(steps * h - span) > 1e-9 * std::max(1.0, span)) {
    throw InvalidArgument("step size " + std::to_string(h) + " does not divide the time span");
  }
  return static_cast<std::size_t>(steps);
}

/// One predict-measure-update cycle. `t_next` is the exact mesh time reached.
[[nodiscard]] inline std::pair<GaussianState, Measurement> filter_step(const GaussianState& state,
                                                                       const TransitionPair& tp,
                                                                       const ObservationOperator& obs,
                                                                       const MeasurementGenerator& generator,
                                                                       const IVProblem& problem, double t_next,
                                                                       NormalSampler* normal) {
  GaussianState predicted = predict(state, tp);
  predicted.t = t_next;
  Measurement meas;
  try {
    meas = generate_measurement(generator, problem, predicted, normal);
  } catch (const QuadratureConditioningError& e) {
    throw QuadratureConditioningError(std::string(e.what()) + " at t=" + std::to_string(t_next));
  }
  return {update(predicted, obs, meas), std::move(meas)};
}

/// Fixed-step filter over the problem's span. Returns the filtered belief at
/// every mesh point t0 + k h, k = 0..K.
[[nodiscard]] inline SolutionTrajectory solve(const IVProblem& problem, const IWPModel& model,
                                              const MeasurementGenerator& generator, double h) {
  const std::size_t steps = mesh_steps(problem, h);
  const TransitionPair tp = discretize_derivatives(model, h);
  const ObservationOperator obs(problem.order, model.order());

  std::optional<NormalSampler> normal;
  if (const auto* mc = std::get_if<MonteCarloIntegration>(&generator)) normal.emplace(CounterStream(mc->seed));

  SolutionTrajectory out;
  out.states.reserve(steps + 1);
  out.states.push_back(initial_state(problem, model));
  out.evaluations = 1;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = problem.t0 + static_cast<double>(k) * h;
    auto [next, meas] = filter_step(out.states.back(), tp, obs, generator, problem, t, normal ? &*normal : nullptr);
    if (!next.all_finite()) throw DivergenceError("filter state became non-finite", t, k);
    out.evaluations += meas.evals_used;
    out.jacobian_evaluations += meas.jacobian_evals;
    out.states.push_back(std::move(next));
  }
  return out;
}

}  // namespace pnode

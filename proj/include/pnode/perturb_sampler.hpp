#pragma once

// Sampling-based solver: a deterministic one-step map (the ML filter step)
// whose state is perturbed by i.i.d. Gaussian noise after every step. The
// solution measure is only available through S sample paths.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"
#include "pnode/gauss_filter.hpp"
#include "pnode/problems.hpp"
#include "pnode/random.hpp"
#include "pnode/state_model.hpp"
#include "pnode/trajectory.hpp"

namespace pnode {

struct PerturbedSolverConfig {
  IWPModel model;
  std::size_t samples = 5;
  std::uint64_t seed = 0;
  /// Per-step noise is noise_scale * Q(h), in derivative coordinates like the
  /// filter state, unless noise_cov overrides it.
  double noise_scale = 1.0;
  std::optional<Eigen::MatrixXd> noise_cov;  // q x q, applied to every output dimension

  [[nodiscard]] Eigen::MatrixXd step_noise(double h) const {
    if (noise_cov) {
      const auto q = static_cast<Eigen::Index>(model.order());
      if (noise_cov->rows() != q || noise_cov->cols() != q) {
        throw InvalidArgument("perturbation noise covariance must be q x q");
      }
      detail::require_psd(*noise_cov, "perturbation noise");
      return *noise_cov;
    }
    if (!(noise_scale >= 0.0)) throw InvalidArgument("perturbation noise scale must be non-negative");
    return noise_scale * discretize_derivatives(model, h).Qh;
  }
};

struct EmpiricalMeasure {
  std::vector<SolutionTrajectory> paths;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> mean_path;  // q x D per mesh point
  std::vector<Eigen::MatrixXd> var_path;   // q x D per mesh point, unbiased sample variance
  std::size_t evaluations = 0;

  /// Summary as a trajectory: empirical mean with diagonal empirical covariance.
  [[nodiscard]] SolutionTrajectory summary() const {
    SolutionTrajectory out;
    out.evaluations = evaluations;
    for (std::size_t k = 0; k < times.size(); ++k) {
      std::vector<Eigen::MatrixXd> cov;
      for (Eigen::Index d = 0; d < var_path[k].cols(); ++d) cov.emplace_back(var_path[k].col(d).asDiagonal());
      out.states.emplace_back(times[k], mean_path[k], std::move(cov));
    }
    return out;
  }
};

/// One sample path U_{k+1} = Psi_h(U_k) + xi_k, xi_k ~ N(0, step_noise(h)).
[[nodiscard]] inline SolutionTrajectory sample_path(const PerturbedSolverConfig& config, const IVProblem& problem,
                                                    double h, CounterStream stream) {
  const std::size_t steps = mesh_steps(problem, h);
  const TransitionPair tp = discretize_derivatives(config.model, h);
  const ObservationOperator obs(problem.order, config.model.order());
  const MeasurementGenerator base = MaxLikelihood{};
  const Eigen::MatrixXd L = detail::covariance_factor(config.step_noise(h)).L;
  const bool noisy = !L.isZero(0.0);
  const auto q = static_cast<Eigen::Index>(config.model.order());
  NormalSampler normal(stream);

  SolutionTrajectory out;
  out.states.reserve(steps + 1);
  out.states.push_back(initial_state(problem, config.model));
  out.evaluations = 1;
  Eigen::VectorXd z(q);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = problem.t0 + static_cast<double>(k) * h;
    auto [next, meas] = filter_step(out.states.back(), tp, obs, base, problem, t, nullptr);
    if (noisy) {
      for (Eigen::Index d = 0; d < next.mean.cols(); ++d) {
        for (Eigen::Index i = 0; i < q; ++i) z(i) = normal();
        next.mean.col(d) += L * z;
      }
    }
    if (!next.all_finite()) throw DivergenceError("perturbed sample path became non-finite", t, k);
    out.evaluations += meas.evals_used;
    out.states.push_back(std::move(next));
  }
  return out;
}

/// S independent paths (stream s of the master seed feeds sample s) and their
/// pointwise mean and variance.
[[nodiscard]] inline EmpiricalMeasure empirical_measure(const PerturbedSolverConfig& config, const IVProblem& problem,
                                                        double h) {
  const std::size_t S = config.samples;
  if (S < 2) throw InvalidArgument("empirical_measure: need at least 2 samples");
  EmpiricalMeasure em;
  em.paths.reserve(S);
  std::vector<std::size_t> diverged;
  std::string first_error;
  for (std::size_t s = 0; s < S; ++s) {
    try {
      em.paths.push_back(sample_path(config, problem, h, CounterStream(config.seed, s)));
    } catch (const DivergenceError& e) {
      diverged.push_back(s);
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!diverged.empty()) {
    std::ostringstream msg;
    msg << "sample paths diverged (indices:";
    for (auto s : diverged) msg << ' ' << s;
    msg << "); first: " << first_error;
    throw DivergenceError(msg.str(), problem.t0, 0);
  }

  const std::size_t K = em.paths.front().size();
  for (std::size_t k = 0; k < K; ++k) {
    em.times.push_back(em.paths.front().states[k].t);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(em.paths.front().states[k].mean.rows(),
                                                em.paths.front().states[k].mean.cols());
    for (const auto& p : em.paths) sum += p.states[k].mean;
    const Eigen::MatrixXd mean = sum / static_cast<double>(S);
    Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
    for (const auto& p : em.paths) ss += (p.states[k].mean - mean).cwiseAbs2();
    em.mean_path.push_back(mean);
    em.var_path.push_back(ss / static_cast<double>(S - 1));
  }
  for (const auto& p : em.paths) em.evaluations += p.evaluations;
  return em;
}

}  // namespace pnode

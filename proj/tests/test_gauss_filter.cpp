#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pnode/gauss_filter.hpp"

using namespace pnode;

namespace {

GaussianState scalar_state(std::initializer_list<double> m, const Eigen::MatrixXd& P) {
  Eigen::VectorXd mean(static_cast<Eigen::Index>(m.size()));
  Eigen::Index i = 0;
  for (double v : m) mean(i++) = v;
  return GaussianState::scalar(0.0, mean, P);
}

Measurement scalar_measurement(double y, double R) {
  return Measurement{Eigen::VectorXd::Constant(1, y), Eigen::MatrixXd::Constant(1, 1, R), 1, 0};
}

IVProblem constant_problem(double c) {
  IVProblem p;
  p.name = "constant";
  p.f = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); };
  p.initial = Eigen::VectorXd::Constant(1, c);
  p.t0 = 0.0;
  p.t_end = 2.0;
  return p;
}

}  // namespace

TEST(Predict, ZeroStateGivesProcessNoise) {
  const IWPModel m = IWPModel::with_default_damping(3, 0.5);
  const auto tp = discretize(m, 0.2);
  const auto s = scalar_state({0, 0, 0}, Eigen::MatrixXd::Zero(3, 3));
  const GaussianState out = predict(s, tp);
  EXPECT_TRUE(out.mean.isZero(0.0));
  EXPECT_TRUE(out.cov[0].isApprox(tp.Qh, 1e-15));
  EXPECT_DOUBLE_EQ(out.t, 0.2);
}

TEST(Predict, HandExample) {
  const double h = 0.5;
  Eigen::Matrix2d A;
  A << 1, 0.5, 0, 1;
  Eigen::Matrix2d Q;
  Q << h * h * h / 3, h * h / 2, h * h / 2, h;
  const auto s = scalar_state({1, 2}, Eigen::Matrix2d::Identity());
  const GaussianState out = predict(s, A, Q, h);
  EXPECT_NEAR(out.mean(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(out.mean(1, 0), 2.0, 1e-15);
  const Eigen::MatrixXd want = oracle::matmul(oracle::matmul(A, Eigen::Matrix2d::Identity()), A.transpose()) + Q;
  EXPECT_TRUE(out.cov[0].isApprox(want, 1e-15));
  EXPECT_NEAR(out.cov[0](0, 0), 1.2916666666666667, 1e-14);
  EXPECT_NEAR(out.cov[0](0, 1), 0.625, 1e-15);
  EXPECT_NEAR(out.cov[0](1, 1), 1.5, 1e-15);
}

TEST(Predict, IdentityTransitionKeepsState) {
  Eigen::Matrix3d P;
  P << 2, 0.1, 0, 0.1, 1, 0.2, 0, 0.2, 3;
  const auto s = scalar_state({1, -2, 3}, P);
  const GaussianState out = predict(s, Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Zero());
  EXPECT_EQ(out.mean, s.mean);
  EXPECT_EQ(out.cov[0], s.cov[0]);
}

TEST(Predict, DimensionMismatch) {
  const auto s = scalar_state({1, 2}, Eigen::Matrix2d::Identity());
  EXPECT_THROW((void)predict(s, Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Zero()), InvalidArgument);
}

TEST(Update, ExactObservationCollapses) {
  const auto s = scalar_state({5}, Eigen::MatrixXd::Constant(1, 1, 2.0));
  const GaussianState out = update(s, ObservationOperator(0, 1), scalar_measurement(3.0, 0.0));
  EXPECT_DOUBLE_EQ(out.mean(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out.cov[0](0, 0), 0.0);
}

TEST(Update, HandExample) {
  Eigen::Matrix2d P = Eigen::Vector2d(0.1, 0.4).asDiagonal();
  const auto s = scalar_state({1, 2}, P);
  const ObservationOperator obs(1, 2);
  EXPECT_EQ(obs.H(), Eigen::RowVector2d(0, 1));
  const GaussianState out = update(s, obs, scalar_measurement(3.0, 0.1));
  EXPECT_NEAR(out.mean(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out.mean(1, 0), 2.8, 1e-15);
  EXPECT_NEAR(out.cov[0](0, 0), 0.1, 1e-15);
  EXPECT_NEAR(out.cov[0](1, 1), 0.08, 1e-15);
  EXPECT_NEAR(out.cov[0](0, 1), 0.0, 1e-15);
}

TEST(Update, UninformativeMeasurement) {
  Eigen::Matrix2d P;
  P << 0.3, 0.1, 0.1, 0.5;
  const auto s = scalar_state({1, 2}, P);
  const GaussianState out = update(s, ObservationOperator(1, 2), scalar_measurement(100.0, 1e12));
  EXPECT_LE((out.mean - s.mean).cwiseAbs().maxCoeff(), 1e-6 * s.mean.cwiseAbs().maxCoeff());
  EXPECT_LE((out.cov[0] - P).cwiseAbs().maxCoeff(), 1e-6 * P.cwiseAbs().maxCoeff());
}

TEST(Update, SingularInnovationCarriesTime) {
  auto s = scalar_state({1, 2}, Eigen::Matrix2d::Zero());
  s.t = 4.25;
  try {
    (void)update(s, ObservationOperator(1, 2), scalar_measurement(3.0, 0.0));
    FAIL() << "expected SingularInnovation";
  } catch (const SingularInnovation& e) {
    EXPECT_DOUBLE_EQ(e.time(), 4.25);
  }
}

TEST(Update, RandomizedInvariants) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int q = 2 + rep % 3;
    const int n = rep % (q - 1) + 1;
    Eigen::MatrixXd B(q, q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) B(i, j) = g(rng);
    const Eigen::MatrixXd P = B * B.transpose() + 1e-3 * Eigen::MatrixXd::Identity(q, q);
    Eigen::VectorXd m(q);
    for (int i = 0; i < q; ++i) m(i) = g(rng);
    const double R = rep % 2 == 0 ? 0.0 : u(rng);
    const double y = 3.0 * g(rng);
    const GaussianState out = update(GaussianState::scalar(0, m, P), ObservationOperator(n, q), scalar_measurement(y, R));
    const Eigen::MatrixXd& Pu = out.cov[0];
    EXPECT_LE(Pu(n, n), P(n, n) + 1e-15);
    EXPECT_LE((Pu - Pu.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(oracle::min_eigenvalue(Pu), -1e-9 * Pu.norm());
    if (R == 0.0) {
      EXPECT_NEAR(out.mean(n, 0), y, 1e-12 * std::max(1.0, std::abs(y)));
      EXPECT_NEAR(Pu(n, n), 0.0, 1e-12);
    }
  }
}

TEST(Solve, ZeroDynamicsStaysConstant) {
  const IVProblem p = constant_problem(1.75);
  const auto tr = solve(p, IWPModel::with_default_damping(2, 1.0), MaxLikelihood{}, 0.1);
  ASSERT_EQ(tr.size(), 21u);
  for (const auto& s : tr.states) EXPECT_NEAR(s.mean(0, 0), 1.75, 1e-12);
  EXPECT_EQ(tr.evaluations, 21u);
}

TEST(Solve, ExponentialDecay) {
  const auto tr = solve(linear_problem(-1.0), IWPModel::with_default_damping(2, 1.0), MaxLikelihood{}, 0.01);
  ASSERT_EQ(tr.size(), 101u);
  EXPECT_NEAR(tr.t_end(), 1.0, 1e-12);
  EXPECT_LE(std::abs(tr.component_at(1.0, 0)(0) - std::exp(-1.0)), 1e-3);
}

TEST(Solve, ConvergenceOrder) {
  std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> lx;
  std::vector<double> ly;
  for (double h : hs) {
    const auto tr = solve(linear_problem(-1.0), IWPModel::with_default_damping(2, 1.0), MaxLikelihood{}, h);
    lx.push_back(std::log(h));
    ly.push_back(std::log(std::abs(tr.component_at(1.0, 0)(0) - std::exp(-1.0))));
  }
  const double mx = (lx[0] + lx[1] + lx[2] + lx[3]) / 4;
  const double my = (ly[0] + ly[1] + ly[2] + ly[3]) / 4;
  double num = 0, den = 0;
  for (int i = 0; i < 4; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  EXPECT_GE(slope, 1.5);
  EXPECT_LE(slope, 3.0);
}

TEST(Solve, IndependentOutputDimensions) {
  IVProblem p;
  p.name = "decoupled";
  p.dim = 2;
  p.f = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(Eigen::Vector2d(-x(0), -2.0 * x(1))); };
  p.initial = Eigen::Vector2d(1.0, 3.0);
  const IWPModel model = IWPModel::with_default_damping(3, 0.5);
  const auto joint = solve(p, model, MaxLikelihood{}, 0.05);

  IVProblem a = linear_problem(-1.0);
  IVProblem b = linear_problem(-2.0);
  b.initial(0) = 3.0;
  const auto ta = solve(a, model, MaxLikelihood{}, 0.05);
  const auto tb = solve(b, model, MaxLikelihood{}, 0.05);
  for (std::size_t k = 0; k < joint.size(); ++k) {
    EXPECT_NEAR((joint.states[k].mean.col(0) - ta.states[k].mean.col(0)).norm(), 0.0, 1e-14);
    EXPECT_NEAR((joint.states[k].mean.col(1) - tb.states[k].mean.col(0)).norm(), 0.0, 1e-14);
    EXPECT_LE((joint.states[k].cov[0] - ta.states[k].cov[0]).norm(), 1e-12 * (1.0 + ta.states[k].cov[0].norm()));
    EXPECT_LE((joint.states[k].cov[1] - tb.states[k].cov[0]).norm(), 1e-12 * (1.0 + tb.states[k].cov[0].norm()));
  }
}

TEST(Solve, InitialStateUsesExactValues) {
  const IVProblem p = vdp_problem();
  const IWPModel m = IWPModel::with_default_damping(4, 0.1);
  const GaussianState s = initial_state(p, m);
  EXPECT_EQ(s.mean(0, 0), 2.0);
  EXPECT_EQ(s.mean(1, 0), 10.0);
  EXPECT_EQ(s.mean(2, 0), -152.0);
  EXPECT_EQ(s.mean(3, 0), 0.0);
  EXPECT_EQ(s.cov[0](3, 3), 0.1);
  EXPECT_EQ(s.cov[0].topLeftCorner(3, 3), Eigen::Matrix3d::Zero());
  EXPECT_THROW((void)initial_state(p, IWPModel::with_default_damping(2, 0.1)), InvalidArgument);
}

TEST(Solve, StepMustDivideSpan) {
  EXPECT_THROW((void)solve(linear_problem(-1.0), IWPModel::with_default_damping(2, 1.0), MaxLikelihood{}, 0.3),
               InvalidArgument);
}

TEST(Solve, NonFiniteDynamicsReportsTime) {
  IVProblem p = linear_problem(-1.0);
  p.f = [](double t, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : -x(0));
  };
  try {
    (void)solve(p, IWPModel::with_default_damping(2, 1.0), MaxLikelihood{}, 0.1);
    FAIL() << "expected DynamicsError";
  } catch (const DynamicsError& e) {
    EXPECT_NEAR(e.time(), 0.6, 1e-12);
  }
}

TEST(Solve, VanDerPolCovarianceStaysPsd) {
  const auto tr = solve(vdp_problem(), IWPModel::with_default_damping(3, 0.1),
                        BayesianQuadrature{5, SEKernel{1.0, 1.0}, NodeScheme::Grid, 2.0}, 0.01);
  ASSERT_EQ(tr.size(), 5001u);
  EXPECT_LE(tr.evaluations, 1u + 5000u * 5u);
  EXPECT_GE(tr.evaluations, 1u + 5000u);
  for (const auto& s : tr.states) {
    const Eigen::MatrixXd& P = s.cov[0];
    EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(oracle::min_eigenvalue(P), -1e-9 * P.norm());
  }
}

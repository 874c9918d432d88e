#include <catch2/catch_amalgamated.hpp>

#include "orbit/catalog.hpp"
#include "orbit/config.hpp"
#include "orbit/oracle.hpp"
#include "test_support.hpp"

using orbit::AgentState;
using orbit::AlgebraVector;
using orbit::BasisPtr;
using orbit::Matrix;
using orbit::Observation;
using orbit::Vector;
using testsupport::seeded_cloud;

TEST_CASE("grid search fits") {
  const BasisPtr se2 = orbit::catalog_basis("se2");
  const Observation cloud = seeded_cloud(10, 2, 101);

  SECTION("a perfect match ties to the origin") {
    const AlgebraVector eta =
        orbit::grid_fit(se2, {0, 1}, cloud, cloud, 0.05, 1e-2);
    CHECK(eta.coeffs.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("a rotation by 0.07 is located within one step") {
    Vector truth = Vector::Zero(3);
    truth[0] = 0.07;
    const Observation target =
        orbit::act(orbit::exp_map(AlgebraVector(se2, truth)), cloud);
    const AlgebraVector eta =
        orbit::grid_fit(se2, {0}, target, cloud, 0.1, 1e-3);
    CHECK(std::abs(eta.coeffs[0] - 0.07) <= 1e-3 + 1e-15);
  }

  SECTION("a planar translation is located within one step per axis") {
    Vector truth = Vector::Zero(3);
    truth[1] = 0.03;
    truth[2] = -0.04;
    const Observation target =
        orbit::act(orbit::exp_map(AlgebraVector(se2, truth)), cloud);
    const AlgebraVector eta =
        orbit::grid_fit(se2, {1, 2}, target, cloud, 0.1, 1e-3);
    CHECK(std::abs(eta.coeffs[1] - 0.03) <= 1e-3 + 1e-15);
    CHECK(std::abs(eta.coeffs[2] + 0.04) <= 1e-3 + 1e-15);
  }

  SECTION("budget guards") {
    CHECK_THROWS_AS(orbit::grid_fit(se2, {0}, cloud, cloud, 1.0, 1e-7),
                    orbit::GridBudgetError);
    CHECK_THROWS_AS(orbit::grid_fit(se2, {0, 1, 2, 0}, cloud, cloud, 0.1,
                                    1e-2),
                    orbit::GridBudgetError);
  }
}

TEST_CASE("finite-difference velocities") {
  const BasisPtr se2 = orbit::catalog_basis("se2");
  const Observation cloud = seeded_cloud(6, 2, 102);

  SECTION("translations have no truncation error") {
    // The action is affine in the step, so only rounding (~1e-16/eps)
    // separates the central difference from the exact velocity.
    for (double eps : {1e-1, 1e-3, 1e-5}) {
      const Vector v = orbit::finite_diff_velocity(se2, 1, cloud, eps);
      Vector expected = Vector::Zero(cloud.flat_dim());
      for (int i = 0; i < cloud.count(); ++i) expected[2 * i] = 1.0;
      CHECK((v - expected).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  SECTION("combinations superpose") {
    const Vector sum = orbit::finite_diff_velocity(se2, 0, cloud, 1e-5) +
                       orbit::finite_diff_velocity(se2, 1, cloud, 1e-5);
    Vector w = Vector::Zero(3);
    w[0] = 1.0;
    w[1] = 1.0;
    const Vector combined =
        orbit::induced_velocity(AlgebraVector(se2, w), cloud);
    CHECK((sum - combined).norm() / combined.norm() <= 1e-6);
  }

  SECTION("step size must be positive") {
    CHECK_THROWS_AS(orbit::finite_diff_velocity(se2, 0, cloud, 0.0),
                    orbit::DomainError);
  }
}

TEST_CASE("reference integration") {
  SECTION("pure decay reaches 1/e after unit time") {
    const auto cfg = orbit::TrackerConfig::unchecked(
        1.0, Matrix::Zero(1, 1), Vector::Zero(1), 0.0, 0.01);
    Matrix one(1, 1);
    one << 0.0;
    const Observation zero_input(one);
    AgentState x0{Matrix::Ones(1, 1), 0.0};
    const AgentState out = orbit::integrate_reference(
        cfg, x0, [&](double) { return zero_input; }, 1.0);
    CHECK(std::abs(out.pops(0, 0) - std::exp(-1.0)) <= 1e-12);
  }

  SECTION("a zero field holds the state constant") {
    const auto cfg = orbit::TrackerConfig::unchecked(
        0.0, Matrix::Zero(1, 1), Vector::Zero(1), 0.0, 0.01);
    Matrix one(1, 1);
    one << 0.0;
    AgentState x0{Matrix::Constant(1, 1, 0.75), 0.0};
    const AgentState out = orbit::integrate_reference(
        cfg, x0, [&](double) { return Observation(one); }, 1.0);
    CHECK(out.pops(0, 0) == 0.75);
  }
}

TEST_CASE("the step integrator is fourth order against the reference") {
  const BasisPtr se2 = orbit::catalog_basis("se2");
  orbit::StreamConfig stream;
  stream.basis = se2;
  stream.template_obs = orbit::rings_template(8);
  stream.theta0 = Vector::Zero(3);
  stream.mode = orbit::StreamMode::kDrift;
  stream.rate = (Vector(3) << 0.4, 0.2, -0.3).finished();
  const auto sampler = [&](double t) { return orbit::sample(stream, t).obs; };

  Matrix w(2, 2);
  w << 0.3, 0.1, 0.1, 0.3;
  const AgentState x0 = AgentState::zeros(2, stream.template_obs.flat_dim());

  auto error_at = [&](double dt) {
    const auto cfg = orbit::TrackerConfig::make(2.0, w, 2.0, dt, se2);
    const AgentState coarse = orbit::flow(cfg, sampler, 1.0, x0);
    const AgentState fine = orbit::integrate_reference(cfg, x0, sampler, 1.0);
    return (coarse.pops - fine.pops).norm();
  };

  const double ratio = error_at(0.02) / error_at(0.01);
  CHECK(ratio >= 14.0);
  CHECK(ratio <= 18.0);
}

#include <catch2/catch_amalgamated.hpp>

#include "orbit/catalog.hpp"
#include "orbit/config.hpp"
#include "orbit/oracle.hpp"
#include "orbit/predictive.hpp"
#include "test_support.hpp"

using orbit::AlgebraVector;
using orbit::BasisPtr;
using orbit::CycleDiagnostics;
using orbit::Flag;
using orbit::Matrix;
using orbit::Observation;
using orbit::ObservationDelta;
using orbit::PoolingSpec;
using orbit::PredictiveStack;
using orbit::ProjectorSemantics;
using orbit::Vector;
using testsupport::seeded_cloud;

namespace {

Flag sim2_flag() {
  return orbit::build_flag(orbit::catalog_basis("sim2"),
                           {{0, 1, 2, 3}, {1, 2, 3}, {2, 3}, {}});
}

std::vector<PoolingSpec> pair_pooling() {
  PoolingSpec to8;
  to8.blocks = {{0, 1}, {2, 3}, {4, 5}, {6, 7},
                {8, 9}, {10, 11}, {12, 13}, {14, 15}};
  PoolingSpec to4;
  to4.blocks = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  return {to8, to4};
}

PredictiveStack sim2_stack() {
  return orbit::build_stack(sim2_flag(), ProjectorSemantics::kCoset,
                            orbit::rings_template(16), pair_pooling());
}

PredictiveStack single_level_stack(const BasisPtr& basis,
                                   const Observation& tmpl) {
  std::vector<int> all(static_cast<std::size_t>(basis->dim()));
  for (int a = 0; a < basis->dim(); ++a) all[static_cast<std::size_t>(a)] = a;
  const Flag flag = orbit::build_flag(basis, {all, {}});
  return orbit::build_stack(flag, ProjectorSemantics::kCoset, tmpl, {});
}

}  // namespace

TEST_CASE("prediction is the hypothesis acting on the template") {
  PredictiveStack stack = sim2_stack();
  orbit::LevelState& level = stack.levels[0];

  SECTION("identity hypothesis returns the template") {
    CHECK((orbit::predict(level).points - level.template_obs.points)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SECTION("a quarter turn moves (1,0) to (0,1)") {
    Matrix single(1, 2);
    single << 1.0, 0.0;
    const BasisPtr sim2 = stack.basis;
    orbit::LevelState point_level(1, sim2, Observation(single),
                                  level.projectors, level.fit_dims, 1e-6,
                                  std::nullopt);
    point_level.delta =
        orbit::exp_map(orbit::algebra(sim2, {0.0, M_PI / 2, 0.0, 0.0}));
    const Observation moved = orbit::predict(point_level);
    CHECK(std::abs(moved.points(0, 0)) <= 1e-15);
    CHECK(std::abs(moved.points(0, 1) - 1.0) <= 1e-15);
  }

  SECTION("realize then predict composes on the right") {
    Vector eta = Vector::Zero(4);
    eta[0] = 0.07;  // the level-1 coset direction (scale)
    const Observation before = orbit::predict(level);
    orbit::realize_update(level, AlgebraVector(stack.basis, eta));
    const Observation expected = orbit::act(
        orbit::exp_map(AlgebraVector(stack.basis,
                                     level.projectors.P * eta)),
        before);
    // Right-composition: act(delta * exp(P eta), T) = act(delta, act(exp(P eta), T)).
    const Observation via_template = orbit::act(
        level.delta, level.template_obs);
    CHECK((orbit::predict(level).points - via_template.points)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    // For the initial identity hypothesis both orders coincide.
    CHECK((orbit::predict(level).points - expected.points)
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
}

TEST_CASE("residual fits") {
  PredictiveStack stack = sim2_stack();
  orbit::LevelState& level = stack.levels[0];

  SECTION("a perfect prediction fits to zero") {
    const AlgebraVector eta = orbit::fit_residual(level, orbit::predict(level));
    CHECK(eta.coeffs.norm() <= 1e-12);
  }

  SECTION("a synthesized rotation is recovered") {
    Vector eta = Vector::Zero(4);
    eta[1] = 0.05;
    const Observation datum = orbit::act(
        orbit::exp_map(AlgebraVector(stack.basis, eta)), orbit::predict(level));
    orbit::LevelState tuned = level;
    tuned.tikhonov_lambda = 1e-6;
    const Vector fitted = orbit::fit_residual(tuned, datum).coeffs;
    // One Gauss-Newton step leaks O(|eta|^2) into the other coordinates.
    CHECK(std::abs(fitted[1] - 0.05) <= 5e-3);
    CHECK(std::abs(fitted[0]) <= 2.5e-3);
    CHECK(std::abs(fitted[2]) <= 2.5e-3);
    CHECK(std::abs(fitted[3]) <= 2.5e-3);
  }

  SECTION("fit error shrinks quadratically in the displacement") {
    Vector direction = (Vector(4) << 0.5, -0.4, 0.6, 0.3).finished();
    direction /= direction.norm();
    std::vector<double> errs;
    for (double scale : {0.2, 0.1, 0.05}) {
      const Vector eta = scale * direction;
      const Observation datum =
          orbit::act(orbit::exp_map(AlgebraVector(stack.basis, eta)),
                     level.template_obs);
      errs.push_back((orbit::fit_residual(level, datum).coeffs - eta).norm());
    }
    const double slope =
        0.5 * (std::log(errs[0] / errs[1]) + std::log(errs[1] / errs[2])) /
        std::log(2.0);
    CHECK(slope >= 1.8);
  }

  SECTION("agreement with the exhaustive grid oracle") {
    Vector eta = Vector::Zero(4);
    eta[2] = 0.03;
    eta[3] = -0.04;
    const Observation datum = orbit::act(
        orbit::exp_map(AlgebraVector(stack.basis, eta)), level.template_obs);
    const AlgebraVector grid = orbit::grid_fit(stack.basis, {2, 3}, datum,
                                               level.template_obs, 0.1, 1e-3);
    const Vector fitted = orbit::fit_residual(level, datum).coeffs;
    CHECK((grid.coeffs - fitted).cwiseAbs().maxCoeff() <= 1e-3 + 1e-12);
  }

  SECTION("rank deficiency without damping is reported") {
    // A single point cannot pin rotation and translation at once.
    Matrix single(1, 2);
    single << 1.0, 0.0;
    orbit::LevelState tiny(1, stack.basis, Observation(single),
                           level.projectors, level.fit_dims, 0.0,
                           std::nullopt);
    CHECK_THROWS_AS(
        orbit::fit_residual(tiny, Observation(single)),
        orbit::SingularFit);
  }
}

TEST_CASE("realize-and-update") {
  PredictiveStack stack = sim2_stack();
  orbit::LevelState& level = stack.levels[0];

  SECTION("a zero step leaves the hypothesis untouched") {
    const Matrix before = level.delta.matrix();
    orbit::realize_update(level, AlgebraVector(stack.basis, Vector::Zero(4)));
    CHECK((level.delta.matrix() - before).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("forwarded directions do not move the hypothesis") {
    Vector eta = Vector::Zero(4);
    eta[1] = 0.3;
    eta[2] = -0.2;  // entirely in the level's Q-span
    const Matrix before = level.delta.matrix();
    orbit::realize_update(level, AlgebraVector(stack.basis, eta));
    CHECK((level.delta.matrix() - before).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("two half steps agree with one full step to first order") {
    Vector eta = Vector::Zero(4);
    eta[0] = 0.01;
    orbit::LevelState once = level;
    orbit::realize_update(once, AlgebraVector(stack.basis, eta));
    orbit::LevelState twice = level;
    orbit::realize_update(twice, AlgebraVector(stack.basis, 0.5 * eta));
    orbit::realize_update(twice, AlgebraVector(stack.basis, 0.5 * eta));
    CHECK((once.delta.matrix() - twice.delta.matrix()).norm() <= 1e-3);
  }

  SECTION("the hypothesis log stays in the realized span") {
    Vector eta = Vector::Zero(4);
    eta[0] = 0.2;
    eta[1] = 0.5;  // forwarded, must not leak into delta
    orbit::realize_update(level, AlgebraVector(stack.basis, eta));
    CHECK(level.span_defect <= 1e-9);
    const Vector lg = orbit::log_map(level.delta).coeffs;
    CHECK(std::abs(lg[0] - 0.2) <= 1e-12);
    CHECK(lg.tail(3).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("canonicalization removes the explained frame") {
  PredictiveStack stack = sim2_stack();
  orbit::LevelState& level = stack.levels[0];
  level.delta = orbit::exp_map(orbit::algebra(stack.basis, {0.1, 0.4, 0.2,
                                                            -0.3}));

  SECTION("with an identity hypothesis it is a plain difference") {
    orbit::LevelState plain = stack.levels[1];
    const Observation datum = seeded_cloud(8, 2, 91);
    const ObservationDelta r = orbit::canonicalize(plain, datum);
    CHECK((r.rows - (datum.points - plain.template_obs.points))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SECTION("a perfect prediction cancels to rounding") {
    const ObservationDelta r =
        orbit::canonicalize(level, orbit::predict(level));
    CHECK(r.norm() <= 1e-12);
  }

  SECTION("small displacements match the induced velocity field") {
    Vector eta = Vector::Zero(4);
    eta[1] = 0.05;
    const Observation datum =
        orbit::act(orbit::compose(orbit::exp_map(AlgebraVector(stack.basis,
                                                               eta)),
                                  level.delta),
                   level.template_obs);
    // r ~ eta acting infinitesimally in the canonical frame after transport.
    const ObservationDelta r = orbit::canonicalize(level, datum);
    const Vector transported =
        orbit::adjoint(orbit::inverse(level.delta)) * eta;
    const Vector field = orbit::induced_velocity(
        AlgebraVector(stack.basis, transported), level.template_obs);
    CHECK(std::abs(r.norm() - field.norm()) <= 0.1 * field.norm());
  }
}

TEST_CASE("messages") {
  PredictiveStack stack = sim2_stack();
  orbit::LevelState& level = stack.levels[0];

  SECTION("zero residuals pool to zero payloads") {
    const ObservationDelta zero(Matrix::Zero(16, 2));
    const orbit::Message m = orbit::emit_message(level, zero);
    CHECK(m.payload.norm() == 0.0);
    CHECK(m.source_level == 1);
    CHECK_FALSE(m.algebra_payload.has_value());
  }

  SECTION("singleton pooling forwards the residual unchanged") {
    orbit::LevelState solo = level;
    PoolingSpec identity_pool;
    for (int i = 0; i < 16; ++i) identity_pool.blocks.push_back({i});
    solo.pooling = identity_pool;
    const ObservationDelta r = seeded_cloud(16, 2, 92) - level.template_obs;
    const orbit::Message m = orbit::emit_message(solo, r);
    CHECK((m.payload.rows - r.rows).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("algebra payloads reduce to Q eta at the identity") {
    Vector eta = Vector::Zero(4);
    eta[0] = 0.2;
    eta[1] = 0.6;
    level.last_eta = eta;
    const ObservationDelta r(Matrix::Zero(16, 2));
    const orbit::Message m = orbit::emit_message(level, r, true);
    REQUIRE(m.algebra_payload.has_value());
    // Transport at the identity is exact up to the adjoint's projection
    // rounding.
    const Vector expected = level.projectors.Q * eta;
    CHECK((m.algebra_payload->coeffs - expected).cwiseAbs().maxCoeff() <=
          1e-14);
  }

  SECTION("missing pooling is a configuration error") {
    orbit::LevelState& top = stack.levels[2];
    const ObservationDelta r(Matrix::Zero(4, 2));
    CHECK_THROWS_AS(orbit::emit_message(top, r), orbit::ConfigError);
  }
}

TEST_CASE("projector split is exact and orthogonal") {
  PredictiveStack stack = sim2_stack();
  for (const auto& level : stack.levels) {
    const Vector eta = testsupport::seeded_coeffs(stack.basis, 93, 1.0);
    const Vector p = level.projectors.P * eta;
    const Vector q = level.projectors.Q * eta;
    CHECK((p + q - eta).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(std::abs(p.dot(q)) <= 1e-12);
  }
}

TEST_CASE("a single-level stack contracts in a handful of cycles") {
  const BasisPtr se2 = orbit::catalog_basis("se2");
  PredictiveStack stack = single_level_stack(se2, orbit::rings_template(16));
  Vector eta = Vector::Zero(3);
  eta[0] = 0.05;
  const Observation datum = orbit::act(
      orbit::exp_map(AlgebraVector(se2, eta)), stack.levels[0].template_obs);
  double residual = 1.0;
  for (int c = 0; c < 5; ++c) residual = orbit::run_cycle(stack, datum).top_residual;
  CHECK(residual <= 1e-8);
}

TEST_CASE("the three-level stack explains an in-group scene") {
  PredictiveStack stack = sim2_stack();
  const Observation datum =
      orbit::act(orbit::exp_map(orbit::algebra(stack.basis,
                                               {0.12, 0.0, 0.0, 0.0})),
                 stack.levels[0].template_obs);

  std::vector<CycleDiagnostics> history;
  for (int c = 0; c < 50; ++c) history.push_back(orbit::run_cycle(stack, datum));

  SECTION("all level residuals vanish within fifty cycles") {
    const auto& last = history.back();
    CHECK(last.r_norm.maxCoeff() <= 1e-6);
    CHECK_FALSE(last.mismatch);
  }

  SECTION("residual norms are monotone after the second cycle") {
    for (std::size_t c = 2; c < history.size(); ++c)
      for (Eigen::Index k = 0; k < 3; ++k)
        CHECK(history[c].r_norm[k] <=
              history[c - 1].r_norm[k] + 1e-12);
  }

  SECTION("cycles are deterministic bit for bit") {
    PredictiveStack a = sim2_stack();
    PredictiveStack b = sim2_stack();
    for (int c = 0; c < 10; ++c) {
      const auto da = orbit::run_cycle(a, datum);
      const auto db = orbit::run_cycle(b, datum);
      CHECK((da.r_norm - db.r_norm).cwiseAbs().maxCoeff() == 0.0);
      CHECK((da.eta_norm - db.eta_norm).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("out-of-group warps raise the mismatch flag") {
  PredictiveStack stack = sim2_stack();
  Observation datum = orbit::act(
      orbit::exp_map(orbit::algebra(stack.basis, {0.05, 0.3, 0.1, -0.2})),
      stack.levels[0].template_obs);
  orbit::Rng rng(2024);
  for (Eigen::Index i = 0; i < datum.points.rows(); ++i)
    for (Eigen::Index j = 0; j < datum.points.cols(); ++j)
      datum.points(i, j) += 0.1 * rng.normal();

  bool flagged = false;
  for (int c = 0; c < 40; ++c) flagged = orbit::run_cycle(stack, datum).mismatch;
  CHECK(flagged);
  CHECK(stack.consecutive_high >= stack.options.mismatch_patience);
}

TEST_CASE("log-branch failures reset the level instead of aborting") {
  // Park the hypothesis essentially on the branch cut; the tiny corrective
  // update it fits cannot be realized there, so the level must reset.
  const BasisPtr so2 = orbit::catalog_basis("so2");
  PredictiveStack stack = single_level_stack(so2, orbit::rings_template(12));
  stack.levels[0].delta = orbit::exp_map(orbit::algebra(so2, {M_PI - 1e-10}));
  const Observation datum =
      orbit::act(orbit::exp_map(orbit::algebra(so2, {M_PI - 5e-11})),
                 stack.levels[0].template_obs);
  const CycleDiagnostics diag = orbit::run_cycle(stack, datum);
  CHECK(diag.resets == 1);
  CHECK(stack.reset_count == 1);
  // The level restarted from the identity and the cycle still completed.
  CHECK((stack.levels[0].delta.matrix() - Matrix::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(diag.levels_completed == 1);
}

TEST_CASE("rotations past the cut wrap to the principal branch") {
  const BasisPtr so2 = orbit::catalog_basis("so2");
  const auto g = orbit::exp_map(orbit::algebra(so2, {3.2}));
  CHECK(orbit::log_map(g).coeffs[0] ==
        Catch::Approx(3.2 - 2.0 * M_PI).epsilon(1e-12));
}

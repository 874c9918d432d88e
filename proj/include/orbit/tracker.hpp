#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "orbit/fit.hpp"
#include "orbit/lie.hpp"
#include "orbit/observation.hpp"
#include "orbit/rng.hpp"
#include "orbit/stream.hpp"

namespace orbit {

// Leaky linear population network.  Population 1 is the readout and receives
// the error feedback -kappa (p(x) - I).  The affine row-sum constraint
// -alpha + sum_j W_ij + b_i = 0 makes the field commute with affine point
// actions applied to every population and to the input.
struct TrackerConfig {
  double alpha = 1.0;
  Matrix W;        // population coupling, scalar per pair
  Vector b;        // input weights, derived from the row-sum constraint
  double kappa = 1.0;
  double dt = 0.01;
  BasisPtr basis;  // needed by equivariance diagnostics and episodes

  int populations() const { return static_cast<int>(W.rows()); }

  // Derives b and insists on open-loop stability: eigenvalues of W - alpha I
  // must have negative real parts.
  static TrackerConfig make(double alpha, Matrix W, double kappa, double dt,
                            BasisPtr basis = nullptr) {
    TrackerConfig cfg;
    cfg.alpha = alpha;
    cfg.W = std::move(W);
    cfg.kappa = kappa;
    cfg.dt = dt;
    cfg.basis = std::move(basis);
    cfg.validate_shapes();
    if (alpha <= 0) throw ConfigError("tracker: alpha must be > 0");
    cfg.b = Vector::Constant(cfg.populations(), alpha) -
            cfg.W.rowwise().sum();
    const Matrix a =
        cfg.W - alpha * Matrix::Identity(cfg.W.rows(), cfg.W.cols());
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i].real() >= 0)
        throw ConfigError(
            "tracker: W - alpha I has a nonnegative eigenvalue; "
            "the open loop is not contracting");
    return cfg;
  }

  // Shape checks only; used by diagnostics that probe constraint violations.
  static TrackerConfig unchecked(double alpha, Matrix W, Vector b,
                                 double kappa, double dt,
                                 BasisPtr basis = nullptr) {
    TrackerConfig cfg;
    cfg.alpha = alpha;
    cfg.W = std::move(W);
    cfg.b = std::move(b);
    cfg.kappa = kappa;
    cfg.dt = dt;
    cfg.basis = std::move(basis);
    cfg.validate_shapes();
    if (cfg.b.size() != cfg.populations())
      throw DimError("tracker: b size != population count");
    return cfg;
  }

  void validate_shapes() const {
    if (W.rows() < 1 || W.rows() != W.cols())
      throw DimError("tracker: W must be square and nonempty");
    if (!W.allFinite()) throw ConfigError("tracker: non-finite W");
    if (dt <= 0) throw ConfigError("tracker: dt must be > 0");
    if (kappa < 0) throw ConfigError("tracker: kappa must be >= 0");
  }
};

struct AgentState {
  Matrix pops;  // populations x flat observation dim
  double t = 0.0;

  static AgentState zeros(int populations, int flat_dim) {
    return {Matrix::Zero(populations, flat_dim), 0.0};
  }
};

// dx_i/dt = -alpha x_i + sum_j W_ij x_j + b_i I, plus -kappa (x_1 - I) on the
// readout row.
inline Matrix vector_field(const TrackerConfig& cfg, const AgentState& state,
                           const Vector& input) {
  const int p = cfg.populations();
  if (state.pops.rows() != p) throw DimError("tracker: population count");
  if (state.pops.cols() != input.size())
    throw DimError("tracker: input size != state width");
  Matrix f = cfg.W * state.pops - cfg.alpha * state.pops;
  f += cfg.b * input.transpose();
  f.row(0) -= cfg.kappa * (state.pops.row(0) - input.transpose());
  return f;
}

// One classical RK4 step with the input held fixed.
inline AgentState step(const TrackerConfig& cfg, const AgentState& state,
                       const Observation& input) {
  const Vector i = input.flat();
  const Matrix k1 = vector_field(cfg, state, i);
  const Matrix k2 =
      vector_field(cfg, {state.pops + 0.5 * cfg.dt * k1, state.t}, i);
  const Matrix k3 =
      vector_field(cfg, {state.pops + 0.5 * cfg.dt * k2, state.t}, i);
  const Matrix k4 = vector_field(cfg, {state.pops + cfg.dt * k3, state.t}, i);
  AgentState out{state.pops + (cfg.dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4),
                 state.t + cfg.dt};
  if (!out.pops.allFinite())
    throw NumericalBlowup("tracker: non-finite state after step");
  return out;
}

struct TrackingError {
  ObservationDelta error;  // p(x) - I
  double V = 0.0;          // 0.5 ||error||^2
};

inline TrackingError error_and_lyapunov(const TrackerConfig& cfg,
                                        const AgentState& state,
                                        const Observation& input) {
  if (state.pops.cols() != input.flat_dim())
    throw DimError("tracker: input size != state width");
  (void)cfg;
  const Vector e = state.pops.row(0).transpose() - input.flat();
  return {ObservationDelta::from_flat(e, input.dim()), 0.5 * e.squaredNorm()};
}

// Affine action applied to every population.
inline AgentState transform_state(const GroupElement& g,
                                  const AgentState& state) {
  const int d = g.basis()->ambient_dim();
  if (state.pops.cols() % d != 0)
    throw DimError("transform_state: width is not a multiple of dim");
  AgentState out = state;
  for (Eigen::Index i = 0; i < state.pops.rows(); ++i) {
    const Observation row =
        act(g, Observation::from_flat(state.pops.row(i).transpose(), d));
    out.pops.row(i) = row.flat().transpose();
  }
  return out;
}

using InputSampler = std::function<Observation(double)>;

// Integrates the non-autonomous system, sampling the input at the RK4 substage
// times t, t + dt/2, t + dt.
inline AgentState flow(const TrackerConfig& cfg, const InputSampler& input,
                       double T, const AgentState& x0,
                       const std::function<void(long, const AgentState&,
                                                const Observation&)>&
                           on_step = nullptr) {
  if (T <= 0) throw DomainError("flow: T must be > 0");
  const long steps = std::lround(T / cfg.dt);
  if (steps < 1) throw DomainError("flow: T shorter than one step");
  AgentState x = x0;
  for (long n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    const Vector i0 = input(t).flat();
    const Observation obs_end = input(t + cfg.dt);
    const Vector i1 = input(t + 0.5 * cfg.dt).flat();
    const Vector i2 = obs_end.flat();
    const Matrix k1 = vector_field(cfg, x, i0);
    const Matrix k2 =
        vector_field(cfg, {x.pops + 0.5 * cfg.dt * k1, x.t}, i1);
    const Matrix k3 =
        vector_field(cfg, {x.pops + 0.5 * cfg.dt * k2, x.t}, i1);
    const Matrix k4 = vector_field(cfg, {x.pops + cfg.dt * k3, x.t}, i2);
    x.pops += (cfg.dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    x.t = static_cast<double>(n + 1) * cfg.dt;
    if (!x.pops.allFinite())
      throw NumericalBlowup("tracker: non-finite state at step " +
                                std::to_string(n),
                            n);
    if (on_step) on_step(n, x, obs_end);
  }
  return x;
}

struct EpisodeDiagnostics {
  Vector t;        // step end times
  Vector V;        // Lyapunov value at each step end
  Vector E_norm;   // ||p(x) - I||
  Vector p_drift;  // ||d/dt p(x)||
  Matrix theta_fit;  // fitted group coordinates of p(x) against I0, per step
  double v_initial = 0.0;
  double final_V = 0.0;
  double noether_drift = 0.0;      // max ||dtheta/dt|| over the final 20%
  double p_drift_final_max = 0.0;  // max ||d/dt p(x)|| over the final 20%
  long leaf_bound = 0;
  AgentState final_state;
};

inline long leaf_dimension_bound(long state_dim, long readout_dim,
                                 long group_dim) {
  if (readout_dim < 1 || state_dim < readout_dim || group_dim < 0)
    throw DomainError("leaf_dimension_bound: need X >= Y >= 1, M >= 0");
  return group_dim + state_dim - readout_dim;
}

inline EpisodeDiagnostics run_episode(const TrackerConfig& cfg,
                                      const StreamConfig& stream, double T,
                                      const AgentState& x0) {
  if (!cfg.basis) throw ConfigError("run_episode: tracker basis not set");
  require_same_basis(cfg.basis, stream.basis, "run_episode");
  StreamConfig st = stream;
  st.step_dt = cfg.dt;  // walk increments aligned with the integrator step

  const long steps = std::lround(T / cfg.dt);
  if (steps < 1) throw DomainError("run_episode: T shorter than one step");
  const int r = cfg.basis->dim();
  const int d = cfg.basis->ambient_dim();

  EpisodeDiagnostics diag;
  diag.t.resize(steps);
  diag.V.resize(steps);
  diag.E_norm.resize(steps);
  diag.p_drift.resize(steps);
  diag.theta_fit.resize(steps, r);
  diag.leaf_bound = leaf_dimension_bound(
      static_cast<long>(cfg.populations()) * st.template_obs.flat_dim(),
      st.template_obs.flat_dim(), r);

  diag.v_initial =
      error_and_lyapunov(cfg, x0, sample(st, 0.0).obs).V;

  GroupElement label = GroupElement::identity(cfg.basis);
  const std::vector<int> dims = all_dims(cfg.basis);
  auto recorder = [&](long n, const AgentState& x, const Observation& inp) {
    const TrackingError te = error_and_lyapunov(cfg, x, inp);
    diag.t[n] = x.t;
    diag.V[n] = te.V;
    diag.E_norm[n] = te.error.norm();
    diag.p_drift[n] =
        vector_field(cfg, x, inp.flat()).row(0).norm();
    const Observation readout =
        Observation::from_flat(x.pops.row(0).transpose(), d);
    label = fit_group_label(st.template_obs, readout, label, dims,
                            /*lambda=*/1e-9, /*max_iters=*/n == 0 ? 16 : 4)
                .g;
    const auto coords = label_coords(label);
    if (coords)
      diag.theta_fit.row(n) = coords->transpose();
    else
      diag.theta_fit.row(n).setConstant(std::nan(""));
  };

  diag.final_state =
      flow(cfg, [&](double t) { return sample(st, t).obs; }, T, x0, recorder);
  diag.final_V = diag.V[steps - 1];

  const long w0 = static_cast<long>(std::floor(0.8 * steps));
  diag.p_drift_final_max = diag.p_drift.tail(steps - w0).maxCoeff();
  double drift = 0.0;
  for (long n = std::max(w0, 1L); n < steps; ++n)
    drift = std::max(drift, (diag.theta_fit.row(n) - diag.theta_fit.row(n - 1))
                                    .norm() /
                                cfg.dt);
  diag.noether_drift = drift;
  return diag;
}

// Infinitesimal commutation defect per generator: transporting the field
// output must equal the field's response to transported state and input.
// The field is affine, so directional derivatives are exact differences.
inline Vector check_commutation(const TrackerConfig& cfg,
                                const BasisPtr& basis, int n_points = 8,
                                int samples = 5, std::uint64_t seed = 99) {
  if (!basis) throw ConfigError("check_commutation: null basis");
  const int d = basis->ambient_dim();
  const int p = cfg.populations();
  const int x_dim = n_points * d;
  Vector defects = Vector::Zero(basis->dim());
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    Matrix pops(p, x_dim);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < x_dim; ++j) pops(i, j) = rng.normal();
    Matrix cloud(n_points, d);
    for (int i = 0; i < n_points; ++i)
      for (int j = 0; j < d; ++j) cloud(i, j) = rng.normal();
    const AgentState x{pops, 0.0};
    const Observation input(cloud);
    const Vector iflat = input.flat();
    const Matrix f = vector_field(cfg, x, iflat);

    for (int a = 0; a < basis->dim(); ++a) {
      const Matrix& gen = basis->generator(a);
      const Matrix lin = gen.topLeftCorner(d, d);
      const Vector tr = gen.topRightCorner(d, 1);

      Matrix lhs(p, x_dim);
      Matrix xi_x(p, x_dim);
      for (int i = 0; i < p; ++i) {
        const Observation fi =
            Observation::from_flat(f.row(i).transpose(), d);
        lhs.row(i) =
            ObservationDelta(fi.points * lin.transpose()).flat().transpose();
        const Observation xi =
            Observation::from_flat(x.pops.row(i).transpose(), d);
        Matrix vel = xi.points * lin.transpose();
        vel.rowwise() += tr.transpose();
        xi_x.row(i) = ObservationDelta(std::move(vel)).flat().transpose();
      }
      Matrix vel_i = input.points * lin.transpose();
      vel_i.rowwise() += tr.transpose();
      const Vector xi_input = ObservationDelta(std::move(vel_i)).flat();

      const Matrix rhs =
          vector_field(cfg, {x.pops + xi_x, 0.0}, iflat + xi_input) - f;
      defects[a] =
          std::max(defects[a], (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  return defects;
}

struct IssEstimate {
  double alpha_hat = 0.0;  // contraction rate from a static companion run
  double beta_hat = 0.0;   // input gain, beta = alpha * mean(V_ss/|I'|^2)
  double v_ss_full = 0.0;
  double v_ss_half = 0.0;
  double ratio = 0.0;  // V_ss(rate) / V_ss(rate/2)
};

namespace detail {

struct DriftRunStats {
  double v_ss = 0.0;
  double idot_sq = 0.0;
};

inline DriftRunStats drift_stats(const TrackerConfig& cfg,
                                 const StreamConfig& stream, double T,
                                 const AgentState& x0) {
  const long steps = std::lround(T / cfg.dt);
  std::vector<double> v(steps), idot2(steps);
  Vector prev = sample(stream, 0.0).obs.flat();
  auto rec = [&](long n, const AgentState& x, const Observation& inp) {
    v[n] = error_and_lyapunov(cfg, x, inp).V;
    const Vector cur = inp.flat();
    idot2[n] = ((cur - prev) / cfg.dt).squaredNorm();
    prev = cur;
  };
  flow(cfg, [&](double t) { return sample(stream, t).obs; }, T, x0, rec);
  DriftRunStats out;
  const long w0 = static_cast<long>(std::floor(0.8 * steps));
  for (long n = w0; n < steps; ++n) {
    out.v_ss += v[n];
    out.idot_sq += idot2[n];
  }
  out.v_ss /= static_cast<double>(steps - w0);
  out.idot_sq /= static_cast<double>(steps - w0);
  return out;
}

}  // namespace detail

// Two drift rates pin the steady-state gain; a static companion run pins the
// contraction rate.  V decays like exp(-2 alpha t) under static input.
inline IssEstimate estimate_iss(const TrackerConfig& cfg,
                                const StreamConfig& drift_stream, double T,
                                const AgentState& x0) {
  if (drift_stream.mode != StreamMode::kDrift)
    throw ConfigError("estimate_iss: stream must be in drift mode");

  StreamConfig stat = drift_stream;
  stat.mode = StreamMode::kStatic;
  const double t_static = std::min(T, 8.0);
  const long steps = std::lround(t_static / cfg.dt);
  std::vector<double> logv(steps);
  auto rec = [&](long n, const AgentState& x, const Observation& inp) {
    logv[n] = std::log(std::max(error_and_lyapunov(cfg, x, inp).V, 1e-280));
  };
  flow(cfg, [&](double t) { return sample(stat, t).obs; }, t_static, x0, rec);
  const long lo = steps / 8, hi = steps / 2;  // past startup, above the floor
  double st = 0, sv = 0, stt = 0, stv = 0;
  for (long n = lo; n < hi; ++n) {
    const double tn = static_cast<double>(n + 1) * cfg.dt;
    st += tn;
    sv += logv[n];
    stt += tn * tn;
    stv += tn * logv[n];
  }
  const double count = static_cast<double>(hi - lo);
  const double slope =
      (count * stv - st * sv) / (count * stt - st * st);

  IssEstimate est;
  est.alpha_hat = -0.5 * slope;

  StreamConfig half = drift_stream;
  half.rate = 0.5 * drift_stream.rate;
  const auto full_stats = detail::drift_stats(cfg, drift_stream, T, x0);
  const auto half_stats = detail::drift_stats(cfg, half, T, x0);
  est.v_ss_full = full_stats.v_ss;
  est.v_ss_half = half_stats.v_ss;
  est.ratio = full_stats.v_ss / half_stats.v_ss;
  const double gain = 0.5 * (full_stats.v_ss / full_stats.idot_sq +
                             half_stats.v_ss / half_stats.idot_sq);
  est.beta_hat = gain * est.alpha_hat;
  return est;
}

}  // namespace orbit

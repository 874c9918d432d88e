// Scenario runner and invariant checker for the orbit library.
//
//   orbit_tracker run <config.json>     run a scenario, write CSV/JSON
//   orbit_tracker check <group|file|all> run the invariant suites
//   orbit_tracker demo <name>            canned scenarios (chain3, stack_sim2)
//
// Exit codes: 0 ok, 1 check failure, 2 bad config/usage, 3 numerical blowup.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orbit/orbit.hpp"

namespace {

using orbit::AgentState;
using orbit::AlgebraVector;
using orbit::BasisPtr;
using orbit::Json;
using orbit::Matrix;
using orbit::Observation;
using orbit::Vector;

std::string output_dir(const std::string& fallback) {
  if (const char* env = std::getenv("ORBIT_TRACKER_OUT");
      env != nullptr && *env != '\0')
    return env;
  return fallback;
}

// ---------------------------------------------------------------------------
// check: invariant suites
// ---------------------------------------------------------------------------

struct CheckReport {
  int failures = 0;

  void pass(const std::string& id) { std::cout << "PASS " << id << "\n"; }
  void skip(const std::string& id, const std::string& why) {
    std::cout << "SKIP " << id << ": " << why << "\n";
  }
  void fail(const std::string& id, const std::string& detail) {
    std::cout << "FAIL " << id << ": " << detail << "\n";
    ++failures;
  }
  void check(const std::string& id, bool ok, const std::string& detail) {
    ok ? pass(id) : fail(id, detail);
  }
};

Vector seeded_coeffs(const BasisPtr& basis, std::uint64_t seed, double scale) {
  orbit::Rng rng(seed);
  Vector v(basis->dim());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  const double n = v.norm();
  if (n > 0) v *= scale * rng.uniform_pos() / n;
  return v;
}

Observation suite_cloud(const BasisPtr& basis, int n_points = 12) {
  const int d = basis->ambient_dim();
  Matrix pts(n_points, d);
  orbit::Rng rng(orbit::derive_seed(404, static_cast<std::uint64_t>(d)));
  for (int i = 0; i < n_points; ++i)
    for (int j = 0; j < d; ++j) pts(i, j) = rng.normal();
  return Observation(std::move(pts));
}

// Nested generator-index chains used by the projector suites and the
// hierarchy demos; every tail is closed under the bracket.
std::vector<std::vector<int>> standard_flag_levels(const std::string& name) {
  if (name == "so2") return {{0}, {}};
  if (name == "se2") return {{0, 1, 2}, {1, 2}, {}};
  if (name == "sim2") return {{0, 1, 2, 3}, {1, 2, 3}, {2, 3}, {}};
  if (name == "scale_trans2") return {{0, 1, 2}, {1, 2}, {}};
  if (name == "se3") return {{0, 1, 2, 3, 4, 5}, {3, 4, 5}, {}};
  throw orbit::ConfigError("no standard flag for basis '" + name + "'");
}

void check_lie(const BasisPtr& basis, CheckReport& report) {
  const std::string prefix = basis->name() + ".";

  double closure = 0.0;
  for (int a = 0; a < basis->dim(); ++a)
    for (int b = 0; b < basis->dim(); ++b) {
      const Matrix comm = basis->generator(a) * basis->generator(b) -
                          basis->generator(b) * basis->generator(a);
      closure = std::max(
          closure,
          (comm - basis->assemble(basis->commutator_coords(a, b))).norm());
    }
  report.check(prefix + "lie.closure", closure <= 1e-10,
               "commutator reconstruction defect " + std::to_string(closure));

  double roundtrip = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Vector v = seeded_coeffs(basis, orbit::derive_seed(7, s), 1.0);
    const AlgebraVector w =
        orbit::log_map(orbit::exp_map(AlgebraVector(basis, v)));
    roundtrip = std::max(roundtrip, (w.coeffs - v).norm());
  }
  report.check(prefix + "lie.exp_log_roundtrip", roundtrip <= 1e-9,
               "max roundtrip error " + std::to_string(roundtrip));

  double hom = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto g = orbit::exp_map(AlgebraVector(
        basis, seeded_coeffs(basis, orbit::derive_seed(8, s), 0.7)));
    const auto h = orbit::exp_map(AlgebraVector(
        basis, seeded_coeffs(basis, orbit::derive_seed(9, s), 0.7)));
    hom = std::max(hom, (orbit::adjoint(orbit::compose(g, h)) -
                         orbit::adjoint(g) * orbit::adjoint(h))
                            .norm());
  }
  report.check(prefix + "lie.adjoint_hom", hom <= 1e-10,
               "Ad homomorphism defect " + std::to_string(hom));
}

void check_action(const BasisPtr& basis, CheckReport& report) {
  const std::string prefix = basis->name() + ".";
  const Observation cloud = suite_cloud(basis);

  const Observation fixed =
      orbit::act(orbit::GroupElement::identity(basis), cloud);
  report.check(prefix + "action.identity",
               (fixed.points - cloud.points).cwiseAbs().maxCoeff() == 0.0,
               "identity action moved a point");

  double compat = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto g = orbit::exp_map(AlgebraVector(
        basis, seeded_coeffs(basis, orbit::derive_seed(10, s), 0.8)));
    const auto h = orbit::exp_map(AlgebraVector(
        basis, seeded_coeffs(basis, orbit::derive_seed(11, s), 0.8)));
    const Observation lhs = orbit::act(g, orbit::act(h, cloud));
    const Observation rhs = orbit::act(orbit::compose(g, h), cloud);
    compat = std::max(compat, (lhs.points - rhs.points).norm());
  }
  report.check(prefix + "action.compatibility", compat <= 1e-10,
               "composition defect " + std::to_string(compat));

  double vel = 0.0;
  for (int a = 0; a < basis->dim(); ++a) {
    const Vector analytic = orbit::induced_velocity(basis, a, cloud);
    const Vector numeric = orbit::finite_diff_velocity(basis, a, cloud, 1e-5);
    vel = std::max(vel,
                   (analytic - numeric).norm() / std::max(1.0, analytic.norm()));
  }
  report.check(prefix + "action.velocity_fd", vel <= 1e-6,
               "relative velocity defect " + std::to_string(vel));
}

void check_projectors(const BasisPtr& basis, CheckReport& report) {
  const std::string prefix = basis->name() + ".";
  const orbit::Flag flag =
      orbit::build_flag(basis, standard_flag_levels(basis->name()));
  double algebra = 0.0;
  double ad_defect = 0.0;
  for (int k = 1; k <= flag.depth(); ++k) {
    for (auto semantics : {orbit::ProjectorSemantics::kCoset,
                           orbit::ProjectorSemantics::kSubgroup}) {
      const orbit::ProjectorPair pp = orbit::projector(flag, k, semantics);
      const Eigen::Index r = pp.P.rows();
      algebra = std::max(
          {algebra, (pp.P * pp.P - pp.P).cwiseAbs().maxCoeff(),
           (pp.P + pp.Q - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(),
           (pp.P * pp.Q).cwiseAbs().maxCoeff()});
    }
    const auto pp = orbit::projector(flag, k, orbit::ProjectorSemantics::kCoset);
    ad_defect = std::max(
        ad_defect, orbit::ad_commutation_defect(flag, pp, flag.ad_check_set(k)));
  }
  report.check(prefix + "projector.algebra", algebra <= 1e-12,
               "projector identity defect " + std::to_string(algebra));
  report.check(prefix + "hierarchy.ad_invariance", ad_defect <= 1e-8,
               "Ad commutation defect " + std::to_string(ad_defect));
}

void check_fit(const BasisPtr& basis, CheckReport& report) {
  const std::string prefix = basis->name() + ".";
  const Observation cloud = suite_cloud(basis, 16);
  const std::vector<int> dims = orbit::all_dims(basis);
  Vector direction = seeded_coeffs(basis, 21, 1.0);
  direction /= direction.norm();

  std::vector<double> errs;
  for (double scale : {0.2, 0.1, 0.05}) {
    const Vector eta = scale * direction;
    const Observation target =
        orbit::act(orbit::exp_map(AlgebraVector(basis, eta)), cloud);
    const Vector fitted = orbit::fit_step(orbit::GroupElement::identity(basis),
                                          cloud, target, dims, 1e-9);
    errs.push_back((fitted - eta).norm());
  }
  const double slope =
      0.5 * (std::log(errs[0] / errs[1]) + std::log(errs[1] / errs[2])) /
      std::log(2.0);
  report.check(prefix + "fit.second_order", slope >= 1.8,
               "log-log error slope " + std::to_string(slope));

  std::vector<int> grid_dims;
  Vector truth = Vector::Zero(basis->dim());
  if (basis->dim() == 1) {
    grid_dims = {0};
    truth[0] = 0.07;
  } else {
    grid_dims = {basis->dim() - 2, basis->dim() - 1};
    truth[grid_dims[0]] = 0.03;
    truth[grid_dims[1]] = -0.04;
  }
  const Observation target =
      orbit::act(orbit::exp_map(AlgebraVector(basis, truth)), cloud);
  const AlgebraVector by_grid =
      orbit::grid_fit(basis, grid_dims, target, cloud, 0.1, 1e-3);
  const Vector by_fit = orbit::fit_step(orbit::GroupElement::identity(basis),
                                        cloud, target, dims, 1e-9);
  const double gap = (by_grid.coeffs - by_fit).cwiseAbs().maxCoeff();
  report.check(prefix + "fit.grid_oracle", gap <= 1e-3 + 1e-12,
               "grid vs least squares gap " + std::to_string(gap));
}

void check_commutation_suite(const BasisPtr& basis, CheckReport& report) {
  const std::string prefix = basis->name() + ".";
  Matrix w(2, 2);
  w << 0.2, 0.05, 0.05, 0.2;
  const auto cfg = orbit::TrackerConfig::make(1.5, w, 1.0, 0.01, basis);
  const Vector defects = orbit::check_commutation(cfg, basis);
  report.check(prefix + "tracker.commutation", defects.maxCoeff() <= 1e-9,
               "generator commutation defect " +
                   std::to_string(defects.maxCoeff()));

  // A row-sum violation only shows up through translation directions; a
  // purely linear basis (so2) cannot see it.
  double max_translation = 0.0;
  for (int a = 0; a < basis->dim(); ++a)
    max_translation =
        std::max(max_translation, basis->generator(a)
                                      .topRightCorner(basis->ambient_dim(), 1)
                                      .norm());
  if (max_translation == 0.0) {
    report.skip(prefix + "tracker.violation_linear",
                "no translation directions in this basis");
    return;
  }

  double previous = 0.0;
  bool linear = true;
  for (double delta : {1e-3, 2e-3}) {
    Vector b = Vector::Constant(2, 1.5) - w.rowwise().sum();
    b[1] += delta;
    const auto bad = orbit::TrackerConfig::unchecked(1.5, w, b, 1.0, 0.01);
    const double defect =
        orbit::check_commutation(bad, basis).maxCoeff();
    if (defect < 0.1 * delta) linear = false;
    if (previous > 0) {
      const double ratio = defect / previous;
      if (ratio < 1.6 || ratio > 2.4) linear = false;
    }
    previous = defect;
  }
  report.check(prefix + "tracker.violation_linear", linear,
               "constraint-violation defect does not scale linearly");
}

int run_checks(const std::vector<std::string>& names) {
  CheckReport report;
  for (const std::string& name : names) {
    // Unknown names propagate as usage errors; only a basis that loads can
    // fail its checks.
    const BasisPtr basis = orbit::catalog_basis(name);
    check_lie(basis, report);
    check_action(basis, report);
    check_projectors(basis, report);
    check_fit(basis, report);
    check_commutation_suite(basis, report);
  }
  std::cout << (report.failures == 0 ? "all checks passed"
                                     : std::to_string(report.failures) +
                                           " check(s) failed")
            << "\n";
  return report.failures == 0 ? 0 : 1;
}

// A basis loaded from JSON: {"name": ..., "ambient_dim": n,
// "generators": [[row-major (n+1)^2 entries], ...]}.
int run_file_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot read basis file: " << path << "\n";
    return 2;
  }
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    std::cerr << "basis file parse error: " << e.what() << "\n";
    return 2;
  }
  CheckReport report;
  BasisPtr basis;
  try {
    const int d = j.at("ambient_dim").get<int>();
    const int m = d + 1;
    std::vector<Matrix> gens;
    for (const auto& g : j.at("generators")) {
      if (static_cast<int>(g.size()) != m * m)
        throw orbit::DimError("generator entry count != (dim+1)^2");
      Matrix mat(m, m);
      for (int i = 0; i < m * m; ++i)
        mat(i / m, i % m) = g[static_cast<std::size_t>(i)].get<double>();
      gens.push_back(std::move(mat));
    }
    std::vector<std::string> labels;
    if (j.contains("labels"))
      for (const auto& l : j.at("labels")) labels.push_back(l.get<std::string>());
    basis = orbit::GeneratorBasis::make(j.value("name", "custom"), d, gens,
                                        labels);
  } catch (const orbit::NotAdClosed& e) {
    report.fail("custom.lie.closure", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "basis file error: " << e.what() << "\n";
    return 2;
  }
  check_lie(basis, report);
  check_action(basis, report);
  std::cout << (report.failures == 0 ? "all checks passed"
                                     : std::to_string(report.failures) +
                                           " check(s) failed")
            << "\n";
  return report.failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// demos
// ---------------------------------------------------------------------------

Observation link_markers(double size) {
  Matrix pts(3, 2);
  pts << 0.0, 0.0, size, 0.0, 0.0, 0.5 * size;
  return Observation(std::move(pts));
}

int demo_chain3() {
  const BasisPtr se2 = orbit::catalog_basis("se2");
  auto translate = [&](double x, double y) {
    Matrix m = Matrix::Identity(3, 3);
    m(0, 2) = x;
    m(1, 2) = y;
    return orbit::GroupElement(se2, m);
  };
  // Three revolute joints on the x axis at 0, 1 and 2; unit-pitch screws.
  std::vector<orbit::PoeJoint> joints;
  joints.push_back({orbit::algebra(se2, {1.0, 0.0, 0.0}), translate(0.5, 0.0),
                    link_markers(0.25)});
  joints.push_back({orbit::algebra(se2, {1.0, 0.0, -1.0}), translate(1.5, 0.0),
                    link_markers(0.25)});
  joints.push_back({orbit::algebra(se2, {1.0, 0.0, -2.0}), translate(2.5, 0.0),
                    link_markers(0.25)});
  Matrix end_pts(4, 2);
  end_pts << 0.0, 0.0, 0.3, 0.0, 0.3, 0.15, 0.0, 0.15;
  const orbit::PoeChain chain = orbit::make_poe_chain(
      std::move(joints), translate(3.0, 0.0), Observation(end_pts));

  const std::string dir = output_dir("out/chain3");
  std::filesystem::create_directories(dir);
  const orbit::PoeResult home = orbit::poe_forward(chain, Vector::Zero(3));

  std::vector<std::string> header = {"t"};
  for (int i = 1; i <= home.markers.count(); ++i) {
    header.push_back("x" + std::to_string(i));
    header.push_back("y" + std::to_string(i));
  }
  orbit::CsvWriter csv(dir + "/markers.csv", header);
  const Vector amp = (Vector(3) << 0.8, 0.6, 0.4).finished();
  const Vector freq = (Vector(3) << 1.0, 1.3, 1.7).finished();
  for (int n = 0; n <= 400; ++n) {
    const double t = 0.01 * n;
    const Vector angles =
        (amp.array() * (freq.array() * t).sin()).matrix();
    const orbit::PoeResult fk = orbit::poe_forward(chain, angles);
    std::vector<std::string> cells = {orbit::format_double(t)};
    const Vector flat = fk.markers.flat();
    for (Eigen::Index i = 0; i < flat.size(); ++i)
      cells.push_back(orbit::format_double(flat[i]));
    csv.row(cells);
  }
  csv.close();

  Json home_json = Json::array();
  for (int i = 0; i < home.markers.count(); ++i)
    home_json.push_back(
        {home.markers.points(i, 0), home.markers.points(i, 1)});
  std::ofstream out(dir + "/home_markers.json", std::ios::binary);
  out << home_json.dump(2) << '\n';
  std::cout << "chain3 demo written to " << dir << "\n";
  return 0;
}

orbit::ScenarioConfig stack_sim2_config() {
  Json j = {
      {"name", "stack_sim2"},
      {"basis", "sim2"},
      {"seed", 3},
      {"stream",
       {{"mode", "static"},
        {"template", {{"kind", "rings"}, {"points", 16}}},
        {"theta0", {0.0, 0.0, 0.0, 0.0}}}},
      {"flag",
       {{"levels", Json::array({{0, 1, 2, 3}, {1, 2, 3}, {2, 3},
                                Json::array()})},
        {"semantics", "coset"}}},
      {"stack",
       {{"cycles", 60},
        {"lambdas", {1e-6, 1e-6, 1e-6}},
        {"pooling",
         Json::array(
             {{{"blocks", Json::array({{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9},
                                       {10, 11}, {12, 13}, {14, 15}})}},
              {{"blocks",
                Json::array({{0, 1}, {2, 3}, {4, 5}, {6, 7}})}}})},
        {"scene_theta", {0.12, 0.0, 0.0, 0.0}}}}};
  return orbit::parse_scenario(j);
}

int demo_stack_sim2() {
  const orbit::ScenarioConfig cfg = stack_sim2_config();
  const Json summary =
      orbit::run_scenario(cfg, output_dir("out/stack_sim2"));
  std::cout << "stack_sim2 demo: mismatch_flag="
            << summary.at("mismatch_flag").dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot read config: " << path << "\n";
    return 2;
  }
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return 2;
  }
  const orbit::ScenarioConfig cfg = orbit::parse_scenario(j);
  orbit::run_scenario(cfg, output_dir(cfg.output_dir));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-structured stream tracking and hierarchical residuals"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config_path, "path to a scenario JSON file")
      ->required();

  std::string check_target;
  auto* check = app.add_subcommand("check", "run invariant suites");
  check
      ->add_option("target", check_target,
                   "catalog basis name, basis JSON file, or 'all'")
      ->required();

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "run a canned demo");
  demo->add_option("name", demo_name, "chain3 or stack_sim2")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (check->parsed()) {
      if (check_target == "all") return run_checks(orbit::catalog_basis_names());
      if (check_target.size() > 5 &&
          check_target.substr(check_target.size() - 5) == ".json")
        return run_file_check(check_target);
      return run_checks({check_target});
    }
    if (demo->parsed()) {
      if (demo_name == "chain3") return demo_chain3();
      if (demo_name == "stack_sim2") return demo_stack_sim2();
      std::cerr << "unknown demo '" << demo_name
                << "'; available: chain3, stack_sim2\n";
      return 2;
    }
  } catch (const orbit::NumericalBlowup& e) {
    std::cerr << "numerical blowup at step " << e.step_index << ": "
              << e.what() << "\n";
    return 3;
  } catch (const orbit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "orbit/lie.hpp"

namespace orbit {

namespace detail {

inline Matrix planar(double a11, double a12, double a21, double a22,
                     double tx, double ty) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = a11;
  m(0, 1) = a12;
  m(1, 0) = a21;
  m(1, 1) = a22;
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

inline BasisPtr build_catalog_basis(const std::string& name) {
  const Matrix rot2 = planar(0, -1, 1, 0, 0, 0);
  const Matrix scl2 = planar(1, 0, 0, 1, 0, 0);
  const Matrix tx2 = planar(0, 0, 0, 0, 1, 0);
  const Matrix ty2 = planar(0, 0, 0, 0, 0, 1);

  if (name == "so2")
    return GeneratorBasis::make("so2", 2, {rot2}, {"rot"});
  if (name == "se2")
    return GeneratorBasis::make("se2", 2, {rot2, tx2, ty2},
                                {"rot", "tx", "ty"});
  if (name == "sim2")
    return GeneratorBasis::make("sim2", 2, {scl2, rot2, tx2, ty2},
                                {"scale", "rot", "tx", "ty"});
  if (name == "scale_trans2")
    return GeneratorBasis::make("scale_trans2", 2, {scl2, tx2, ty2},
                                {"scale", "tx", "ty"});
  if (name == "se3") {
    auto gen = [](int i, int j, double v) {
      Matrix m = Matrix::Zero(4, 4);
      m(i, j) = v;
      return m;
    };
    Matrix rx = gen(1, 2, -1.0);
    rx(2, 1) = 1.0;
    Matrix ry = gen(0, 2, 1.0);
    ry(2, 0) = -1.0;
    Matrix rz = gen(0, 1, -1.0);
    rz(1, 0) = 1.0;
    return GeneratorBasis::make(
        "se3", 3, {rx, ry, rz, gen(0, 3, 1.0), gen(1, 3, 1.0), gen(2, 3, 1.0)},
        {"rx", "ry", "rz", "tx", "ty", "tz"});
  }
  throw ConfigError("unknown catalog basis '" + name + "'");
}

}  // namespace detail

inline const std::vector<std::string>& catalog_basis_names() {
  static const std::vector<std::string> names = {"so2", "se2", "sim2", "se3",
                                                 "scale_trans2"};
  return names;
}

// Catalog bases are cached so repeated lookups share one instance; basis
// identity checks compare pointers.
inline BasisPtr catalog_basis(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, BasisPtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  BasisPtr b = detail::build_catalog_basis(name);
  cache.emplace(name, b);
  return b;
}

}  // namespace orbit

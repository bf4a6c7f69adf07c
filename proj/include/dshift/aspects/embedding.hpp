#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dshift/common/error.hpp"
#include "dshift/common/text.hpp"
#include "dshift/diversity/groups.hpp"

namespace dshift {

using Point2 = std::array<double, 2>;

struct EmbeddedPoint {
  std::string sample_id;
  Point2 xy{};
};

struct EmbeddedSet {
  std::string class_label;
  std::vector<EmbeddedPoint> points;

  std::size_t size() const noexcept { return points.size(); }

  std::vector<Point2> coords() const {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.xy);
    return out;
  }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& p : points) {
      if (!std::isfinite(p.xy[0]) || !std::isfinite(p.xy[1])) {
        throw DataError("non-finite embedding for sample '" + p.sample_id + "'");
      }
      if (!ids.insert(p.sample_id).second) {
        throw DataError("duplicate embedded sample '" + p.sample_id + "'");
      }
    }
  }
};

struct Reduction {
  EmbeddedSet set;
  Warnings warnings;
};

// Projects mean-centred rows onto the top two principal components. Each
// component's sign is fixed so that its largest-magnitude loading is
// positive. Components with negligible variance are zero-filled.
inline Reduction reduce_to_2d(const std::string& class_label, const std::vector<FeatureRow>& rows) {
  if (rows.size() < 2) throw DataError("reduce_to_2d needs at least 2 rows");
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].values.size();
  if (d < 2) throw DataError("reduce_to_2d needs feature dimension >= 2");
  Eigen::MatrixXd X(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].values.size() != d) throw DataError("feature dimensions differ in class " + class_label);
    for (std::size_t k = 0; k < d; ++k) X(Eigen::Index(i), Eigen::Index(k)) = rows[i].values[k];
  }
  const double raw_energy = X.squaredNorm() + 1e-300;
  X.rowwise() -= X.colwise().mean();

  // Loadings from whichever Gram form is smaller.
  Eigen::VectorXd eval;
  Eigen::MatrixXd load(d, 2);
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    eval = es.eigenvalues().reverse();
    const Eigen::MatrixXd vec = es.eigenvectors().rowwise().reverse();
    load = vec.leftCols(2);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
    eval = es.eigenvalues().reverse();
    const Eigen::MatrixXd vec = es.eigenvectors().rowwise().reverse();
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd v = X.transpose() * vec.col(c);
      const double norm = v.norm();
      load.col(c) = norm > 0.0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Zero(Eigen::Index(d));
    }
  }

  Reduction out;
  out.set.class_label = class_label;
  const std::array<bool, 2> live{eval(0) > 1e-18 * raw_energy,
                                 eval(0) > 1e-18 * raw_energy && eval(1) > 1e-12 * eval(0)};
  if (!live[0]) {
    out.warnings.push_back(class_label + ": features have zero variance; embedding collapsed to origin");
  } else if (!live[1]) {
    out.warnings.push_back(class_label + ": feature rank < 2; second coordinate zero-filled");
  }
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    load.col(c).cwiseAbs().maxCoeff(&arg);
    if (load(arg, c) < 0.0) load.col(c) = -load.col(c);
  }
  const Eigen::MatrixXd proj = X * load;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddedPoint p{rows[i].sample_id, {live[0] ? proj(Eigen::Index(i), 0) : 0.0,
                                        live[1] ? proj(Eigen::Index(i), 1) : 0.0}};
    out.set.points.push_back(std::move(p));
  }
  return out;
}

// Embedding CSV: sample_id,x,y
inline EmbeddedSet read_embedding_csv(const std::string& path, const std::string& class_label) {
  const CsvTable t = read_csv_file(path);
  const std::size_t ci = t.column("sample_id"), cx = t.column("x"), cy = t.column("y");
  EmbeddedSet s{class_label, {}};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    s.points.push_back({t.rows[r][ci], {parse_double(t.rows[r][cx], where), parse_double(t.rows[r][cy], where)}});
  }
  s.validate();
  return s;
}

inline void write_embedding_csv(std::ostream& out, const EmbeddedSet& s) {
  out << "sample_id,x,y\n";
  for (const auto& p : s.points) {
    out << csv_escape(p.sample_id) << ',' << format_number(p.xy[0]) << ',' << format_number(p.xy[1]) << '\n';
  }
}

}  // namespace dshift

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"

namespace rbl {

/// G = −½·J·D·J with J = I − (1/n)·11ᵀ.
inline Eigen::MatrixXd double_center(const Eigen::MatrixXd& squared) {
  const Eigen::Index n = squared.rows();
  const Eigen::RowVectorXd col_mean = squared.colwise().mean();
  const Eigen::VectorXd row_mean = squared.rowwise().mean();
  const double mean = squared.mean();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g(i, j) = -0.5 * (squared(i, j) - row_mean(i) - col_mean(j) + mean);
    }
  }
  return 0.5 * (g + g.transpose());
}

inline Eigen::MatrixXd gram_from_edm(const Edm& edm) {
  if (!edm.complete()) throw Error(ErrorCode::incomplete_input, "Gram matrix needs a fully known EDM");
  return double_center(edm.squared());
}

struct Embedding {
  Eigen::MatrixXd points;       // n×dim
  Eigen::VectorXd eigenvalues;  // all eigenvalues, descending
};

/// Coordinates from the top `dim` eigenpairs of a Gram matrix; negative
/// eigenvalues are truncated to zero.
inline Embedding embed_gram(const Eigen::MatrixXd& gram, int dim) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::Index n = gram.rows();
  Embedding out;
  out.eigenvalues = eig.eigenvalues().reverse();
  out.points = Eigen::MatrixXd::Zero(n, dim);
  for (int d = 0; d < dim && d < n; ++d) {
    const double lambda = std::max(out.eigenvalues(d), 0.0);
    out.points.col(d) = eig.eigenvectors().col(n - 1 - d) * std::sqrt(lambda);
  }
  return out;
}

inline Eigen::MatrixXd squared_distances_of(const Eigen::MatrixXd& points) {
  const Eigen::VectorXd norms = points.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * points * points.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return 0.5 * (d + d.transpose());
}

struct CompletionOptions {
  int rank = 3;
  int max_iters = 500;
  double tol = 1e-10;  // m², max change on unknown entries
};

struct CompletionReport {
  Edm completed;
  int iterations = 0;
  double final_mismatch = 0.0;    // max |low-rank − known| in the last iterate, m²
  double initial_mismatch = 0.0;  // same quantity for the first iterate
  bool converged = true;
  std::vector<double> change_history;  // max unknown-entry change per iteration
};

/// Shortest-path (Floyd–Warshall) squared distances over the known entries.
inline Eigen::MatrixXd shortest_path_fill(const Edm& edm) {
  const Eigen::Index n = edm.size();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = edm.known()(i, j) ? std::sqrt(edm.squared()(i, j)) : inf;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    }
  }
  return d.cwiseProduct(d);
}

namespace detail {

// Orthogonal projection onto the affine set of centered symmetric Gram
// matrices whose induced squared distances equal the known entries.
class GramConstraints {
 public:
  explicit GramConstraints(const Edm& edm) : n_(edm.size()) {
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i + 1; j < n_; ++j) {
        if (edm.known()(i, j)) pairs_.emplace_back(i, j);
      }
    }
    const auto m = static_cast<Eigen::Index>(pairs_.size()) + n_;
    target_ = Eigen::VectorXd::Zero(m);
    for (std::size_t r = 0; r < pairs_.size(); ++r) {
      target_(static_cast<Eigen::Index>(r)) = edm.squared()(pairs_[r].first, pairs_[r].second);
    }
    Eigen::MatrixXd normal(m, m);
    for (Eigen::Index c = 0; c < m; ++c) normal.col(c) = apply(adjoint(Eigen::VectorXd::Unit(m, c)));
    solver_.compute(normal);
  }

  Eigen::MatrixXd project(const Eigen::MatrixXd& g) const {
    return g - adjoint(solver_.solve(apply(g) - target_));
  }

 private:
  Eigen::VectorXd apply(const Eigen::MatrixXd& g) const {
    Eigen::VectorXd v(target_.size());
    Eigen::Index r = 0;
    for (const auto& [i, j] : pairs_) v(r++) = g(i, i) + g(j, j) - g(i, j) - g(j, i);
    for (Eigen::Index i = 0; i < n_; ++i) v(r++) = 0.5 * (g.row(i).sum() + g.col(i).sum());
    return v;
  }

  Eigen::MatrixXd adjoint(const Eigen::VectorXd& l) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_, n_);
    Eigen::Index r = 0;
    for (const auto& [i, j] : pairs_) {
      const double x = l(r++);
      g(i, i) += x;
      g(j, j) += x;
      g(i, j) -= x;
      g(j, i) -= x;
    }
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double x = 0.5 * l(r++);
      g.row(i).array() += x;
      g.col(i).array() += x;
    }
    return g;
  }

  Eigen::Index n_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs_;
  Eigen::VectorXd target_;
  Eigen::LDLT<Eigen::MatrixXd> solver_;
};

inline Eigen::MatrixXd truncate_gram(const Eigen::MatrixXd& g, int rank) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  const Eigen::Index n = g.rows();
  const Eigen::Index r = std::min<Eigen::Index>(rank, n);
  const Eigen::MatrixXd v = eig.eigenvectors().rightCols(r);
  const Eigen::VectorXd lambda = eig.eigenvalues().tail(r).cwiseMax(0.0);
  return v * lambda.asDiagonal() * v.transpose();
}

inline Eigen::MatrixXd gram_to_squared(const Eigen::MatrixXd& g) {
  const Eigen::VectorXd d = g.diagonal();
  Eigen::MatrixXd out = (-2.0 * g).colwise() + d;
  out.rowwise() += d.transpose();
  out = out.cwiseMax(0.0);
  out.diagonal().setZero();
  return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// Alternating projections in Gram space: truncation to the top `rank`
/// nonnegative eigenvalues, then the orthogonal projection onto Gram matrices
/// that reproduce every known squared distance. Unknown entries are read from
/// the low-rank iterate; known entries are copied from the input.
inline CompletionReport complete_edm(const Edm& edm, const CompletionOptions& options = {}) {
  if (options.rank < 1 || options.max_iters < 0 || !(options.tol > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "bad completion options");
  }
  if (edm.complete()) return {edm, 0, 0.0, 0.0, true, {}};

  const Eigen::Index na = edm.num_anchors();
  std::vector<Eigen::Index> orphans;
  for (Eigen::Index k = 0; k < edm.num_nodes(); ++k) {
    if (!edm.known().block(0, na + k, na, 1).any()) orphans.push_back(k);
  }
  if (!orphans.empty()) {
    std::ostringstream os;
    os << "nodes without any known cross distance:";
    for (auto k : orphans) os << ' ' << k;
    throw Error(ErrorCode::completion_infeasible, os.str());
  }

  const Mask& known = edm.known();
  const Eigen::MatrixXd& observed = edm.squared();
  Eigen::MatrixXd fill = shortest_path_fill(edm);
  if (!fill.allFinite()) throw Error(ErrorCode::completion_infeasible, "known entries do not connect all points");
  for (Eigen::Index i = 0; i < fill.rows(); ++i) {
    for (Eigen::Index j = 0; j < fill.cols(); ++j) {
      if (known(i, j)) fill(i, j) = observed(i, j);
    }
  }

  const detail::GramConstraints constraints(edm);
  Eigen::MatrixXd gram = constraints.project(double_center(fill));
  Eigen::MatrixXd current = fill;
  CompletionReport report{edm, 0, 0.0, 0.0, false, {}};
  for (int iter = 1; iter <= options.max_iters; ++iter) {
    const Eigen::MatrixXd low_rank = detail::truncate_gram(gram, options.rank);
    const Eigen::MatrixXd projected = detail::gram_to_squared(low_rank);
    double change = 0.0;
    double mismatch = 0.0;
    for (Eigen::Index i = 0; i < current.rows(); ++i) {
      for (Eigen::Index j = 0; j < current.cols(); ++j) {
        if (known(i, j)) {
          mismatch = std::max(mismatch, std::abs(projected(i, j) - observed(i, j)));
        } else {
          change = std::max(change, std::abs(projected(i, j) - current(i, j)));
          current(i, j) = projected(i, j);
        }
      }
    }
    if (iter == 1) report.initial_mismatch = mismatch;
    report.final_mismatch = mismatch;
    report.iterations = iter;
    report.change_history.push_back(change);
    if (change < options.tol) {
      report.converged = true;
      break;
    }
    gram = constraints.project(low_rank);
  }
  report.completed = Edm(current, Mask::Constant(edm.size(), edm.size(), true), na);
  return report;
}

}  // namespace rbl

#include "radsprl/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radsprl/error.hpp"

namespace radsprl::crf {

namespace {

double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

std::size_t label_count(const Matrix& E, const Matrix& T) {
  const auto L = static_cast<std::size_t>(E.cols());
  if (T.rows() != T.cols() || static_cast<std::size_t>(T.rows()) != L + 2) {
    throw ShapeError("crf: transitions must be (L+2) x (L+2) for L emission columns");
  }
  return L;
}

void check_labels(const Matrix& E, const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(E.rows())) {
    throw ShapeError("crf: label sequence length differs from emission rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= E.cols()) throw ShapeError("crf: label index out of range");
  }
}

}  // namespace

Matrix make_transitions(std::size_t num_labels) {
  const auto n = static_cast<Eigen::Index>(num_labels + 2);
  Matrix T = Matrix::Zero(n, n);
  const Eigen::Index start = n - 2, stop = n - 1;
  T.col(start).setConstant(kForbidden);
  T.row(stop).setConstant(kForbidden);
  return T;
}

void apply_mask(Matrix& T, const Matrix& mask) {
  if (mask.size() == 0) return;
  if (mask.rows() != T.rows() || mask.cols() != T.cols()) throw ShapeError("crf: mask shape mismatch");
  T = (mask.array() != 0.0).select(kForbidden, T);
}

std::size_t start_index(const Matrix& T) { return static_cast<std::size_t>(T.rows() - 2); }
std::size_t stop_index(const Matrix& T) { return static_cast<std::size_t>(T.rows() - 1); }

double score_sequence(const Matrix& E, const Matrix& T, const std::vector<int>& labels) {
  label_count(E, T);
  check_labels(E, labels);
  if (labels.empty()) return 0.0;
  const auto start = static_cast<Eigen::Index>(start_index(T));
  const auto stop = static_cast<Eigen::Index>(stop_index(T));
  double s = T(start, labels.front());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    s += E(static_cast<Eigen::Index>(t), labels[t]);
    if (t > 0) s += T(labels[t - 1], labels[t]);
  }
  return s + T(labels.back(), stop);
}

namespace {

// alpha(t, j): log-sum of scores of prefixes ending in label j at t.
Matrix forward_table(const Matrix& E, const Matrix& T, std::size_t L) {
  const Eigen::Index n = E.rows();
  const auto start = static_cast<Eigen::Index>(L);
  Matrix alpha(n, static_cast<Eigen::Index>(L));
  std::vector<double> buf(L);
  for (std::size_t j = 0; j < L; ++j) {
    alpha(0, static_cast<Eigen::Index>(j)) = T(start, static_cast<Eigen::Index>(j)) + E(0, static_cast<Eigen::Index>(j));
  }
  for (Eigen::Index t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i) {
        buf[i] = alpha(t - 1, static_cast<Eigen::Index>(i)) +
                 T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      alpha(t, static_cast<Eigen::Index>(j)) = log_sum_exp(buf.data(), L) + E(t, static_cast<Eigen::Index>(j));
    }
  }
  return alpha;
}

// beta(t, i): log-sum of scores of suffixes after position t given label i at t.
Matrix backward_table(const Matrix& E, const Matrix& T, std::size_t L) {
  const Eigen::Index n = E.rows();
  const auto stop = static_cast<Eigen::Index>(L + 1);
  Matrix beta(n, static_cast<Eigen::Index>(L));
  std::vector<double> buf(L);
  for (std::size_t i = 0; i < L; ++i) beta(n - 1, static_cast<Eigen::Index>(i)) = T(static_cast<Eigen::Index>(i), stop);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        buf[j] = T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                 E(t + 1, static_cast<Eigen::Index>(j)) + beta(t + 1, static_cast<Eigen::Index>(j));
      }
      beta(t, static_cast<Eigen::Index>(i)) = log_sum_exp(buf.data(), L);
    }
  }
  return beta;
}

double finish(const Matrix& alpha, const Matrix& T, std::size_t L) {
  const auto stop = static_cast<Eigen::Index>(L + 1);
  std::vector<double> buf(L);
  for (std::size_t j = 0; j < L; ++j) {
    buf[j] = alpha(alpha.rows() - 1, static_cast<Eigen::Index>(j)) + T(static_cast<Eigen::Index>(j), stop);
  }
  return log_sum_exp(buf.data(), L);
}

}  // namespace

double log_partition(const Matrix& E, const Matrix& T) {
  const std::size_t L = label_count(E, T);
  if (E.rows() == 0) throw ShapeError("crf: empty sequence");
  return finish(forward_table(E, T, L), T, L);
}

Decoded viterbi(const Matrix& E, const Matrix& T) {
  const std::size_t L = label_count(E, T);
  const Eigen::Index n = E.rows();
  if (n == 0) throw ShapeError("crf: empty sequence");
  const auto Li = static_cast<Eigen::Index>(L);
  const auto start = Li, stop = Li + 1;
  Matrix delta(n, Li);
  Eigen::MatrixXi back(n, Li);
  for (Eigen::Index j = 0; j < Li; ++j) delta(0, j) = T(start, j) + E(0, j);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < Li; ++j) {
      Eigen::Index best = 0;
      double best_score = delta(t - 1, 0) + T(0, j);
      for (Eigen::Index i = 1; i < Li; ++i) {
        const double s = delta(t - 1, i) + T(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      delta(t, j) = best_score + E(t, j);
      back(t, j) = static_cast<int>(best);
    }
  }
  Eigen::Index last = 0;
  double best_score = delta(n - 1, 0) + T(0, stop);
  for (Eigen::Index j = 1; j < Li; ++j) {
    const double s = delta(n - 1, j) + T(j, stop);
    if (s > best_score) {
      best_score = s;
      last = j;
    }
  }
  Decoded out;
  out.score = best_score;
  out.labels.resize(static_cast<std::size_t>(n));
  out.labels.back() = static_cast<int>(last);
  for (Eigen::Index t = n - 1; t > 0; --t) {
    out.labels[static_cast<std::size_t>(t - 1)] = back(t, out.labels[static_cast<std::size_t>(t)]);
  }
  return out;
}

double nll_loss(const Matrix& E, const Matrix& T, const std::vector<int>& gold) {
  const double s = score_sequence(E, T, gold);
  return log_partition(E, T) - s;
}

LossAndGrad nll_loss_grad(const Matrix& E, const Matrix& T, const std::vector<int>& gold) {
  const std::size_t L = label_count(E, T);
  check_labels(E, gold);
  const Eigen::Index n = E.rows();
  if (n == 0) throw ShapeError("crf: empty sequence");
  const auto Li = static_cast<Eigen::Index>(L);
  const auto start = Li, stop = Li + 1;
  const Matrix alpha = forward_table(E, T, L);
  const Matrix beta = backward_table(E, T, L);
  const double logZ = finish(alpha, T, L);

  LossAndGrad out;
  out.loss = logZ - score_sequence(E, T, gold);
  out.dE = Matrix::Zero(n, Li);
  out.dT = Matrix::Zero(T.rows(), T.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j < Li; ++j) out.dE(t, j) = std::exp(alpha(t, j) + beta(t, j) - logZ);
  }
  for (Eigen::Index j = 0; j < Li; ++j) {
    out.dT(start, j) = out.dE(0, j);
    out.dT(j, stop) = out.dE(n - 1, j);
  }
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index i = 0; i < Li; ++i) {
      for (Eigen::Index j = 0; j < Li; ++j) {
        out.dT(i, j) += std::exp(alpha(t - 1, i) + T(i, j) + E(t, j) + beta(t, j) - logZ);
      }
    }
  }
  out.dT(start, gold.front()) -= 1.0;
  out.dT(gold.back(), stop) -= 1.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    out.dE(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
    if (t > 0) out.dT(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
  }
  return out;
}

namespace {

template <class Visit>
void enumerate_paths(const Matrix& E, const Matrix& T, Visit&& visit) {
  const std::size_t L = label_count(E, T);
  const auto n = static_cast<std::size_t>(E.rows());
  if (n == 0) throw ShapeError("crf: empty sequence");
  double total = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    total *= static_cast<double>(L);
    if (total > 1e7) throw Error("brute force: L^n exceeds 1e7");
  }
  const auto start = static_cast<Eigen::Index>(L), stop = start + 1;
  std::vector<int> path(n, 0);
  while (true) {
    double s = T(start, path[0]) + T(path[n - 1], stop);
    for (std::size_t t = 0; t < n; ++t) {
      s += E(static_cast<Eigen::Index>(t), path[t]);
      if (t > 0) s += T(path[t - 1], path[t]);
    }
    visit(path, s);
    // Odometer increment, last position fastest.
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++path[pos] < static_cast<int>(L)) break;
      path[pos] = 0;
      if (pos == 0) return;
    }
  }
}

}  // namespace

double brute_force_partition(const Matrix& E, const Matrix& T) {
  std::vector<double> scores;
  enumerate_paths(E, T, [&](const std::vector<int>&, double s) { scores.push_back(s); });
  return log_sum_exp(scores.data(), scores.size());
}

Decoded brute_force_decode(const Matrix& E, const Matrix& T) {
  Decoded best;
  best.score = -std::numeric_limits<double>::infinity();
  // Lexicographic enumeration with strict improvement keeps the lowest-index path on ties.
  enumerate_paths(E, T, [&](const std::vector<int>& path, double s) {
    if (s > best.score) {
      best.score = s;
      best.labels = path;
    }
  });
  return best;
}

}  // namespace radsprl::crf

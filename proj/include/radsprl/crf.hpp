#pragma once

// Linear-chain CRF over L labels with virtual START (index L) and STOP
// (index L+1) states. T(a, b) scores label b following label a.

#include <cstddef>
#include <vector>

#include "radsprl/tensor.hpp"

namespace radsprl::crf {

using nn::Matrix;

// Stand-in for minus infinity in transition constraints.
inline constexpr double kForbidden = -1e4;

// (L+2) x (L+2) transitions with START-as-destination and STOP-as-source
// entries set to kForbidden, everything else zero.
Matrix make_transitions(std::size_t num_labels);

std::size_t start_index(const Matrix& T);
std::size_t stop_index(const Matrix& T);

// Sum of emissions plus transitions including START->first and last->STOP.
// E is n x L.
double score_sequence(const Matrix& E, const Matrix& T, const std::vector<int>& labels);

// Forward algorithm in log space.
double log_partition(const Matrix& E, const Matrix& T);

struct Decoded {
  std::vector<int> labels;
  double score = 0.0;
};

// Ties resolve to the lowest label index at every backtrack step.
Decoded viterbi(const Matrix& E, const Matrix& T);

double nll_loss(const Matrix& E, const Matrix& T, const std::vector<int>& gold);

struct LossAndGrad {
  double loss = 0.0;
  Matrix dE;  // n x L
  Matrix dT;  // (L+2) x (L+2)
};

// NLL with gradients from forward-backward marginals.
LossAndGrad nll_loss_grad(const Matrix& E, const Matrix& T, const std::vector<int>& gold);

// Exhaustive enumeration oracles; refuse when L^n exceeds 1e7.
double brute_force_partition(const Matrix& E, const Matrix& T);
Decoded brute_force_decode(const Matrix& E, const Matrix& T);

// Sets every cell where mask != 0 to kForbidden.
void apply_mask(Matrix& T, const Matrix& mask);

}  // namespace radsprl::crf

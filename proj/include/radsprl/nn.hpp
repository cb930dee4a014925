#pragma once

// Minimal numerical substrate for the tagger: LSTM layers with hand-written
// reverse-mode gradients, inverted dropout, Adam, and a finite-difference
// gradient checker.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "radsprl/rng.hpp"
#include "radsprl/tensor.hpp"

namespace radsprl::nn {

// Uniform in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

void check_finite(const Matrix& m, const std::string& what);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate order in W, U and b: input, forget, cell candidate, output.
struct LstmParams {
  Param W;  // 4h x d
  Param U;  // 4h x h
  Param b;  // 4h x 1

  Eigen::Index input_size() const { return W.value.cols(); }
  Eigen::Index hidden_size() const { return U.value.cols(); }

  static LstmParams init(const std::string& name, Eigen::Index input, Eigen::Index hidden,
                         Rng& rng);
  // Shapes for an all-zero parameter set with forget bias 1.
  static LstmParams zeros(const std::string& name, Eigen::Index input, Eigen::Index hidden);

  std::vector<Param*> params() { return {&W, &U, &b}; }
};

struct LstmState {
  Vector h;
  Vector c;
};

LstmState lstm_cell(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                    const LstmParams& p);

// Activations kept for the backward pass; one column per time step.
struct LstmTrace {
  Matrix X;
  Matrix gates;  // activated i, f, g, o stacked (4h x n)
  Matrix C;
  Matrix tanhC;
  Matrix H;
};

// Runs the LSTM over X (d x n) from zero initial state; returns H (h x n).
const Matrix& lstm_forward(const LstmParams& p, const Matrix& X, LstmTrace& trace);

// Accumulates parameter gradients into p and returns dL/dX given dL/dH.
Matrix lstm_backward(LstmParams& p, const LstmTrace& trace, const Matrix& dH);

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;

  static BiLstmParams init(const std::string& name, Eigen::Index input, Eigen::Index hidden,
                           Rng& rng);
  std::vector<Param*> params();
};

struct BiLstmTrace {
  LstmTrace fwd;
  LstmTrace bwd;
};

// Output column t is [forward h_t ; backward h_t] (2h x n).
Matrix bilstm_forward(const BiLstmParams& p, const Matrix& X, BiLstmTrace& trace);
Matrix bilstm_backward(BiLstmParams& p, const BiLstmTrace& trace, const Matrix& dOut);

std::vector<Vector> bilstm(const std::vector<Vector>& sequence, const LstmParams& fwd,
                           const LstmParams& bwd);

// Inverted dropout. `mask` receives the per-element scale (0 or 1/(1-p)),
// or stays empty when the op is the identity.
Matrix dropout(const Matrix& x, double p, bool training, Rng& rng, Matrix* mask = nullptr);

struct Linear {
  Param W;  // out x in
  Param b;  // out x 1

  static Linear init(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Matrix forward(const Matrix& X) const;                 // (out x n)
  Matrix backward(const Matrix& X, const Matrix& dY);    // returns dX, accumulates grads
  std::vector<Param*> params() { return {&W, &b}; }
};

struct AdamConfig {
  double lr = 0.01;
  double decay = 0.99;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;

  // Effective learning rate for a 0-based epoch index: lr * decay^epoch.
  double learning_rate(int epoch) const;
};

// One bias-corrected Adam update. Throws NumericError naming the first
// parameter with a non-finite gradient; nothing is modified in that case.
void adam_step(const std::vector<Param*>& params, AdamState& state, int epoch);

double global_grad_norm(const std::vector<Param*>& params);
// Rescales gradients so the global norm is at most max_norm; returns the pre-clip norm.
double clip_global_norm(const std::vector<Param*>& params, double max_norm);

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

// Central differences on a random subsample of coordinates per parameter
// (all coordinates when the group is smaller than `samples_per_group`).
// Compares against the analytic gradient already stored in Param::grad.
// Relative error: |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
std::vector<GradCheckResult> grad_check(const std::function<double()>& loss,
                                        const std::vector<Param*>& params, Rng& rng,
                                        double eps = 1e-5, std::size_t samples_per_group = 200);

double max_rel_error(const std::vector<GradCheckResult>& results);

}  // namespace radsprl::nn

#include "radsprl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radsprl/error.hpp"

namespace radsprl::nn {

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(rng, -bound, bound);
  }
  return m;
}

void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

LstmParams LstmParams::init(const std::string& name, Eigen::Index input, Eigen::Index hidden,
                            Rng& rng) {
  LstmParams p;
  p.W = Param(name + ".W", glorot_uniform(4 * hidden, input, rng));
  p.U = Param(name + ".U", glorot_uniform(4 * hidden, hidden, rng));
  Matrix b = Matrix::Zero(4 * hidden, 1);
  b.block(hidden, 0, hidden, 1).setOnes();
  p.b = Param(name + ".b", std::move(b));
  return p;
}

LstmParams LstmParams::zeros(const std::string& name, Eigen::Index input, Eigen::Index hidden) {
  LstmParams p;
  p.W = Param(name + ".W", Matrix::Zero(4 * hidden, input));
  p.U = Param(name + ".U", Matrix::Zero(4 * hidden, hidden));
  Matrix b = Matrix::Zero(4 * hidden, 1);
  b.block(hidden, 0, hidden, 1).setOnes();
  p.b = Param(name + ".b", std::move(b));
  return p;
}

LstmState lstm_cell(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                    const LstmParams& p) {
  const Eigen::Index h = p.hidden_size();
  if (x.size() != p.input_size() || h_prev.size() != h || c_prev.size() != h) {
    throw ShapeError("lstm_cell: input/state shape mismatch");
  }
  const Vector z = p.W.value * x + p.U.value * h_prev + p.b.value.col(0);
  LstmState out{Vector(h), Vector(h)};
  for (Eigen::Index k = 0; k < h; ++k) {
    const double i = sigmoid(z(k));
    const double f = sigmoid(z(h + k));
    const double g = std::tanh(z(2 * h + k));
    const double o = sigmoid(z(3 * h + k));
    out.c(k) = f * c_prev(k) + i * g;
    out.h(k) = o * std::tanh(out.c(k));
  }
  return out;
}

const Matrix& lstm_forward(const LstmParams& p, const Matrix& X, LstmTrace& tr) {
  const Eigen::Index h = p.hidden_size();
  const Eigen::Index n = X.cols();
  if (X.rows() != p.input_size()) throw ShapeError("lstm_forward: input dimension mismatch");
  tr.X = X;
  tr.gates.resize(4 * h, n);
  tr.gates.noalias() = p.W.value * X;
  tr.gates.colwise() += p.b.value.col(0);
  tr.C.resize(h, n);
  tr.tanhC.resize(h, n);
  tr.H.resize(h, n);
  Vector z(4 * h);
  for (Eigen::Index t = 0; t < n; ++t) {
    auto zt = tr.gates.col(t);
    if (t > 0) zt.noalias() += p.U.value * tr.H.col(t - 1);
    for (Eigen::Index k = 0; k < h; ++k) {
      const double i = sigmoid(zt(k));
      const double f = sigmoid(zt(h + k));
      const double g = std::tanh(zt(2 * h + k));
      const double o = sigmoid(zt(3 * h + k));
      zt(k) = i;
      zt(h + k) = f;
      zt(2 * h + k) = g;
      zt(3 * h + k) = o;
      const double c = (t > 0 ? f * tr.C(k, t - 1) : 0.0) + i * g;
      const double tc = std::tanh(c);
      tr.C(k, t) = c;
      tr.tanhC(k, t) = tc;
      tr.H(k, t) = o * tc;
    }
  }
  return tr.H;
}

Matrix lstm_backward(LstmParams& p, const LstmTrace& tr, const Matrix& dH) {
  const Eigen::Index h = p.hidden_size();
  const Eigen::Index n = tr.X.cols();
  if (dH.rows() != h || dH.cols() != n) throw ShapeError("lstm_backward: dH shape mismatch");
  Matrix dA(4 * h, n);
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto g = tr.gates.col(t);
    auto da = dA.col(t);
    for (Eigen::Index k = 0; k < h; ++k) {
      const double i = g(k), f = g(h + k), gc = g(2 * h + k), o = g(3 * h + k);
      const double tc = tr.tanhC(k, t);
      const double dh = dH(k, t) + dh_next(k);
      const double dc = dc_next(k) + dh * o * (1.0 - tc * tc);
      const double c_prev = t > 0 ? tr.C(k, t - 1) : 0.0;
      da(k) = dc * gc * i * (1.0 - i);
      da(h + k) = dc * c_prev * f * (1.0 - f);
      da(2 * h + k) = dc * i * (1.0 - gc * gc);
      da(3 * h + k) = dh * tc * o * (1.0 - o);
      dc_next(k) = dc * f;
    }
    if (t > 0) dh_next.noalias() = p.U.value.transpose() * da;
  }
  p.W.grad.noalias() += dA * tr.X.transpose();
  p.b.grad.col(0) += dA.rowwise().sum();
  if (n > 1) p.U.grad.noalias() += dA.rightCols(n - 1) * tr.H.leftCols(n - 1).transpose();
  Matrix dX(tr.X.rows(), n);
  dX.noalias() = p.W.value.transpose() * dA;
  return dX;
}

BiLstmParams BiLstmParams::init(const std::string& name, Eigen::Index input, Eigen::Index hidden,
                                Rng& rng) {
  BiLstmParams p;
  p.fwd = LstmParams::init(name + ".fwd", input, hidden, rng);
  p.bwd = LstmParams::init(name + ".bwd", input, hidden, rng);
  return p;
}

std::vector<Param*> BiLstmParams::params() {
  return {&fwd.W, &fwd.U, &fwd.b, &bwd.W, &bwd.U, &bwd.b};
}

Matrix bilstm_forward(const BiLstmParams& p, const Matrix& X, BiLstmTrace& tr) {
  if (X.cols() == 0) throw ShapeError("bilstm: empty sequence");
  const Eigen::Index h = p.fwd.hidden_size();
  Matrix out(2 * h, X.cols());
  out.topRows(h) = lstm_forward(p.fwd, X, tr.fwd);
  const Matrix reversed = X.rowwise().reverse();
  out.bottomRows(h) = lstm_forward(p.bwd, reversed, tr.bwd).rowwise().reverse();
  return out;
}

Matrix bilstm_backward(BiLstmParams& p, const BiLstmTrace& tr, const Matrix& dOut) {
  const Eigen::Index h = p.fwd.hidden_size();
  Matrix dX = lstm_backward(p.fwd, tr.fwd, dOut.topRows(h));
  const Matrix dRev = dOut.bottomRows(h).rowwise().reverse();
  dX += lstm_backward(p.bwd, tr.bwd, dRev).rowwise().reverse();
  return dX;
}

std::vector<Vector> bilstm(const std::vector<Vector>& sequence, const LstmParams& fwd,
                           const LstmParams& bwd) {
  if (sequence.empty()) throw ShapeError("bilstm: empty sequence");
  Matrix X(sequence.front().size(), static_cast<Eigen::Index>(sequence.size()));
  for (std::size_t t = 0; t < sequence.size(); ++t) X.col(static_cast<Eigen::Index>(t)) = sequence[t];
  BiLstmParams p{fwd, bwd};
  BiLstmTrace tr;
  const Matrix out = bilstm_forward(p, X, tr);
  std::vector<Vector> result;
  for (Eigen::Index t = 0; t < out.cols(); ++t) result.emplace_back(out.col(t));
  return result;
}

Matrix dropout(const Matrix& x, double p, bool training, Rng& rng, Matrix* mask) {
  if (p < 0.0 || p >= 1.0) throw ShapeError("dropout rate must be in [0, 1)");
  if (mask) mask->resize(0, 0);
  if (!training || p == 0.0) return x;
  const double keep = 1.0 / (1.0 - p);
  Matrix m(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform01(rng) < p ? 0.0 : keep;
  }
  Matrix y = x.cwiseProduct(m);
  if (mask) *mask = std::move(m);
  return y;
}

Linear Linear::init(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
  return Linear{Param(name + ".W", glorot_uniform(out, in, rng)),
                Param(name + ".b", Matrix::Zero(out, 1))};
}

Matrix Linear::forward(const Matrix& X) const {
  if (X.rows() != W.value.cols()) throw ShapeError("linear: input dimension mismatch");
  Matrix Y(W.value.rows(), X.cols());
  Y.noalias() = W.value * X;
  Y.colwise() += b.value.col(0);
  return Y;
}

Matrix Linear::backward(const Matrix& X, const Matrix& dY) {
  W.grad.noalias() += dY * X.transpose();
  b.grad.col(0) += dY.rowwise().sum();
  Matrix dX(W.value.cols(), X.cols());
  dX.noalias() = W.value.transpose() * dY;
  return dX;
}

double AdamState::learning_rate(int epoch) const {
  return config.lr * std::pow(config.decay, epoch);
}

void adam_step(const std::vector<Param*>& params, AdamState& st, int epoch) {
  for (const Param* p : params) {
    if (!p->grad.allFinite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  if (st.m.size() != params.size()) {
    st.m.clear();
    st.v.clear();
    for (const Param* p : params) {
      st.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++st.step;
  const auto& c = st.config;
  const double lr = st.learning_rate(epoch);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    if (st.m[k].rows() != p.value.rows() || st.m[k].cols() != p.value.cols()) {
      throw ShapeError("adam: moment shape mismatch for " + p.name);
    }
    st.m[k] = c.beta1 * st.m[k] + (1.0 - c.beta1) * p.grad;
    st.v[k] = c.beta2 * st.v[k] + (1.0 - c.beta2) * p.grad.cwiseAbs2();
    p.value.array() -=
        lr * (st.m[k].array() / bc1) / ((st.v[k].array() / bc2).sqrt() + c.eps);
  }
}

double global_grad_norm(const std::vector<Param*>& params) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Param* p : params) p->grad *= s;
  }
  return norm;
}

std::vector<GradCheckResult> grad_check(const std::function<double()>& loss,
                                        const std::vector<Param*>& params, Rng& rng, double eps,
                                        std::size_t samples_per_group) {
  std::vector<GradCheckResult> results;
  for (Param* p : params) {
    GradCheckResult res;
    res.name = p->name;
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > samples_per_group) {
      shuffle(coords.begin(), coords.end(), rng);
      coords.resize(samples_per_group);
    }
    double* data = p->value.data();
    const double* grad = p->grad.data();
    for (std::size_t idx : coords) {
      const double orig = data[idx];
      data[idx] = orig + eps;
      const double up = loss();
      data[idx] = orig - eps;
      const double down = loss();
      data[idx] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grad[idx];
      const double rel =
          std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
    results.push_back(res);
  }
  return results;
}

double max_rel_error(const std::vector<GradCheckResult>& results) {
  double m = 0.0;
  for (const auto& r : results) m = std::max(m, r.max_rel_error);
  return m;
}

}  // namespace radsprl::nn

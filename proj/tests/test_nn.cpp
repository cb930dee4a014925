#include <doctest.h>

#include <cmath>

#include "radsprl/error.hpp"
#include "radsprl/nn.hpp"
#include "radsprl/rng.hpp"

using namespace radsprl;
using namespace radsprl::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Element-by-element LSTM step written with plain loops.
void scalar_cell(const LstmParams& p, const std::vector<double>& x, const std::vector<double>& h,
                 const std::vector<double>& c, std::vector<double>& h_out, std::vector<double>& c_out) {
  const int H = static_cast<int>(h.size());
  const int D = static_cast<int>(x.size());
  std::vector<double> z(4 * H);
  for (int r = 0; r < 4 * H; ++r) {
    double s = p.b.value(r, 0);
    for (int j = 0; j < D; ++j) s += p.W.value(r, j) * x[j];
    for (int j = 0; j < H; ++j) s += p.U.value(r, j) * h[j];
    z[r] = s;
  }
  h_out.assign(H, 0.0);
  c_out.assign(H, 0.0);
  for (int k = 0; k < H; ++k) {
    const double i = sig(z[k]), f = sig(z[H + k]), g = std::tanh(z[2 * H + k]), o = sig(z[3 * H + k]);
    c_out[k] = f * c[k] + i * g;
    h_out[k] = o * std::tanh(c_out[k]);
  }
}

Vector to_vec(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST_CASE("lstm cell with zero weights") {
  const auto p = LstmParams::zeros("z", 2, 3);
  auto q = p;
  q.b.value.setZero();
  const auto s = lstm_cell(Vector::Zero(2), Vector::Zero(3), Vector::Zero(3), q);
  CHECK(s.h.isZero());
  const Vector v = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const auto t = lstm_cell(Vector::Zero(2), Vector::Zero(3), v, p);
  for (int k = 0; k < 3; ++k) CHECK(t.c(k) == doctest::Approx(sig(1.0) * v(k)).epsilon(1e-14));
}

TEST_CASE("lstm cell matches a scalar loop") {
  Rng rng(4);
  const auto p = LstmParams::init("l", 3, 3, rng);
  std::vector<double> x(3), h(3), c(3);
  for (int k = 0; k < 3; ++k) {
    x[k] = uniform(rng, -1, 1);
    h[k] = uniform(rng, -1, 1);
    c[k] = uniform(rng, -1, 1);
  }
  std::vector<double> ho, co;
  scalar_cell(p, x, h, c, ho, co);
  const auto s = lstm_cell(to_vec(x), to_vec(h), to_vec(c), p);
  for (int k = 0; k < 3; ++k) {
    CHECK(s.h(k) == doctest::Approx(ho[k]).epsilon(1e-13));
    CHECK(s.c(k) == doctest::Approx(co[k]).epsilon(1e-13));
  }
  CHECK_THROWS_AS(lstm_cell(Vector::Zero(2), to_vec(h), to_vec(c), p), ShapeError);
}

TEST_CASE("init shapes and forget bias") {
  Rng rng(1);
  const auto p = LstmParams::init("l", 5, 4, rng);
  CHECK(p.W.value.rows() == 16);
  CHECK(p.W.value.cols() == 5);
  CHECK(p.U.value.cols() == 4);
  CHECK(p.b.value.block(4, 0, 4, 1).isOnes());
  CHECK(p.b.value.block(0, 0, 4, 1).isZero());
  CHECK(p.W.value.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (16 + 5)));
}

TEST_CASE("sequence forward equals repeated cells") {
  Rng rng(9);
  auto p = LstmParams::init("l", 4, 3, rng);
  Matrix X(4, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = uniform(rng, -1, 1);
  LstmTrace trace;
  const Matrix H = lstm_forward(p, X, trace);
  Vector h = Vector::Zero(3), c = Vector::Zero(3);
  for (int t = 0; t < 5; ++t) {
    const auto s = lstm_cell(X.col(t), h, c, p);
    h = s.h;
    c = s.c;
    CHECK((H.col(t) - h).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("bilstm symmetries") {
  Rng rng(2);
  const auto f = LstmParams::init("f", 3, 2, rng);
  const auto b = LstmParams::init("b", 3, 2, rng);
  const Vector x = (Vector(3) << 0.3, -0.1, 0.7).finished();
  const auto one = bilstm({x}, f, f);
  CHECK((one[0].head(2) - one[0].tail(2)).cwiseAbs().maxCoeff() == 0.0);

  std::vector<Vector> seq;
  for (int t = 0; t < 4; ++t) seq.push_back(Vector::NullaryExpr(3, [&] { return uniform(rng, -1, 1); }));
  const auto out = bilstm(seq, f, b);
  const std::vector<Vector> rev(seq.rbegin(), seq.rend());
  const auto swapped = bilstm(rev, b, f);
  for (int t = 0; t < 4; ++t) {
    CHECK((out[t].head(2) - swapped[3 - t].tail(2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((out[t].tail(2) - swapped[3 - t].head(2)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("dropout") {
  Rng rng(5);
  const Matrix x = Matrix::Constant(200, 200, 2.0);
  CHECK(dropout(x, 0.0, true, rng) == x);
  CHECK(dropout(x, 0.5, false, rng) == x);
  Matrix mask;
  const Matrix y = dropout(x, 0.5, true, rng, &mask);
  const double kept = static_cast<double>((y.array() != 0).count()) / static_cast<double>(y.size());
  CHECK(kept == doctest::Approx(0.5).epsilon(0.04));
  CHECK(y.mean() == doctest::Approx(2.0).epsilon(0.05));
  CHECK(mask.rows() == 200);
}

TEST_CASE("adam") {
  Param p("w", Matrix::Constant(1, 1, 3.0));
  AdamState state;
  state.config.lr = 0.01;
  adam_step({&p}, state, 0);
  CHECK(p.value(0, 0) == 3.0);

  Param q("q", Matrix::Constant(1, 1, 3.0));
  AdamState s2;
  s2.config.lr = 0.01;
  q.grad(0, 0) = 1.0;
  adam_step({&q}, s2, 0);
  CHECK(q.value(0, 0) - 3.0 == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));

  CHECK(s2.learning_rate(0) == doctest::Approx(0.01));
  CHECK(s2.learning_rate(2) == doctest::Approx(0.01 * 0.99 * 0.99));

  Param bad("named_param", Matrix::Constant(1, 1, 1.0));
  bad.grad(0, 0) = std::nan("");
  try {
    adam_step({&bad}, s2, 0);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("named_param") != std::string::npos);
  }
  CHECK(bad.value(0, 0) == 1.0);
}

TEST_CASE("global norm clipping") {
  Param a("a", Matrix::Zero(1, 2)), b("b", Matrix::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  CHECK(global_grad_norm({&a, &b}) == doctest::Approx(5.0));
  CHECK(clip_global_norm({&a, &b}, 1.0) == doctest::Approx(5.0));
  CHECK(global_grad_norm({&a, &b}) == doctest::Approx(1.0));
  CHECK(clip_global_norm({&a, &b}, 5.0) == doctest::Approx(1.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
}

TEST_CASE("grad check on a quadratic") {
  Rng rng(3);
  Param p("theta", Matrix::Zero(4, 3));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = uniform(rng, -2, 2);
  p.grad = p.value;
  const auto res = grad_check([&] { return 0.5 * p.value.squaredNorm(); }, {&p}, rng);
  CHECK(res.at(0).checked == 12);
  CHECK(max_rel_error(res) < 1e-8);
}

TEST_CASE("linear layer gradients") {
  Rng rng(6);
  auto lin = Linear::init("lin", 4, 3, rng);
  Matrix X(4, 5), G(3, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = uniform(rng, -1, 1);
  Param xp("x", X);
  auto loss = [&] { return (lin.forward(xp.value).array() * G.array()).sum(); };
  for (auto* p : lin.params()) p->zero_grad();
  xp.grad = lin.backward(xp.value, G);
  std::vector<Param*> all = lin.params();
  all.push_back(&xp);
  CHECK(max_rel_error(grad_check(loss, all, rng)) < 1e-7);
}

TEST_CASE("bilstm gradients") {
  Rng rng(8);
  BiLstmParams p = BiLstmParams::init("bi", 3, 4, rng);
  Matrix X(3, 5), G(8, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = uniform(rng, -1, 1);
  Param xp("x", X);
  auto loss = [&] {
    BiLstmTrace t;
    return (bilstm_forward(p, xp.value, t).array() * G.array()).sum();
  };
  for (auto* q : p.params()) q->zero_grad();
  BiLstmTrace trace;
  bilstm_forward(p, xp.value, trace);
  xp.grad = bilstm_backward(p, trace, G);
  std::vector<Param*> all = p.params();
  all.push_back(&xp);
  CHECK(max_rel_error(grad_check(loss, all, rng, 1e-5, 1000)) < 1e-6);
}

TEST_CASE("non-finite values are reported") {
  Matrix m = Matrix::Zero(2, 2);
  check_finite(m, "m");
  m(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(check_finite(m, "m"), NumericError);
}

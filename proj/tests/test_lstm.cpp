#include <cmath>
#include <cstring>
#include <limits>

#include <doctest.h>

#include "fluxcast/lstm.hpp"
#include "fluxcast/rng.hpp"

using namespace fluxcast;
using lstm::Mat;
using lstm::Vec;

namespace {

lstm::Params<double> random_params(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                                   std::uint64_t seed, double scale = 0.6) {
  auto p = lstm::Params<double>::zeros(in, hidden, out);
  Rng rng(seed);
  lstm::visit_arrays(p, [&](auto& a) {
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.normal() * scale;
  });
  return p;
}

Vec<double> random_vec(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Vec<double> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal() * scale;
  return v;
}

double scalar_sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// Loss used for finite-difference checks: a fixed linear functional of the
/// final output, so d loss / d theta equals backward() with grad_y = g.
double probe_loss(const lstm::Params<double>& p, const std::vector<Vec<double>>& xs,
                  const Vec<double>& g) {
  std::vector<Mat<double>> cols(xs.begin(), xs.end());
  const Mat<double> y = lstm::forward_batch<double>(p, cols, nullptr);
  return (g.transpose() * y.col(0))(0, 0);
}

bool params_bitwise_equal(const lstm::Params<double>& a, const lstm::Params<double>& b) {
  bool same = a.w_gates == b.w_gates && a.b_gates == b.b_gates && a.w_y == b.w_y && a.b_y == b.b_y;
  return same;
}

}  // namespace

TEST_SUITE("lstm") {
  TEST_CASE("zero parameters fix the origin: c'=0, h'=0, y=0") {
    const auto p = lstm::Params<double>::zeros(3, 4, 2);
    Rng rng(4);
    const auto x = random_vec(3, rng, 10.0);
    const auto out = lstm::step(p, lstm::State<double>::zeros(4), x);
    CHECK(out.state.c.isZero(0.0));
    CHECK(out.state.h.isZero(0.0));
    CHECK(out.y.isZero(0.0));
  }

  TEST_CASE("saturated forget/input gates preserve the cell state exactly") {
    auto p = lstm::Params<double>::zeros(2, 3, 1);
    p.b_f().setConstant(1e9);
    p.b_i().setConstant(-1e9);
    Rng rng(5);
    lstm::State<double> state;
    state.c = random_vec(3, rng);
    state.h = Vec<double>::Zero(3);
    const auto x = random_vec(2, rng);
    const auto out = lstm::step(p, state, x);
    CHECK(out.state.c == state.c);  // bitwise: f == 1, i == 0
  }

  TEST_CASE("step matches a hand-coded scalar implementation") {
    const Eigen::Index in = 2, hd = 2, out_dim = 1;
    const auto p = random_params(in, hd, out_dim, 33);
    Rng rng(77);
    lstm::State<double> state;
    state.c = random_vec(hd, rng);
    state.h = random_vec(hd, rng) * 0.5;
    const auto x = random_vec(in, rng);

    // scalar arithmetic, no Eigen products
    double z[4] = {x[0], x[1], state.h[0], state.h[1]};
    double f[2], i[2], g[2], o[2], c2[2], h2[2];
    for (int r = 0; r < 2; ++r) {
      double pf = 0, pi = 0, pg = 0, po = 0;
      for (int k = 0; k < 4; ++k) {
        pf += p.w_f()(r, k) * z[k];
        pi += p.w_i()(r, k) * z[k];
        pg += p.w_g()(r, k) * z[k];
        po += p.w_o()(r, k) * z[k];
      }
      f[r] = scalar_sigmoid(pf + p.b_f()[r]);
      i[r] = scalar_sigmoid(pi + p.b_i()[r]);
      g[r] = std::tanh(pg + p.b_g()[r]);
      o[r] = scalar_sigmoid(po + p.b_o()[r]);
      c2[r] = f[r] * state.c[r] + i[r] * g[r];
      h2[r] = o[r] * std::tanh(c2[r]);
    }
    double y = p.b_y[0];
    for (int r = 0; r < 2; ++r) y += p.w_y(0, r) * h2[r];

    const auto res = lstm::step(p, state, x);
    for (int r = 0; r < 2; ++r) {
      CHECK(res.state.c[r] == doctest::Approx(c2[r]).epsilon(1e-12));
      CHECK(res.state.h[r] == doctest::Approx(h2[r]).epsilon(1e-12));
    }
    CHECK(res.y[0] == doctest::Approx(y).epsilon(1e-12));
  }

  TEST_CASE("dimension mismatches raise shape errors") {
    const auto p = lstm::Params<double>::zeros(3, 4, 1);
    Rng rng(1);
    CHECK_THROWS_AS(lstm::step(p, lstm::State<double>::zeros(4), random_vec(2, rng)), ShapeError);
    CHECK_THROWS_AS(lstm::step(p, lstm::State<double>::zeros(3), random_vec(3, rng)), ShapeError);
  }

  TEST_CASE("length-one forward equals a single step from zero state") {
    const auto p = random_params(3, 5, 2, 9);
    Rng rng(10);
    const auto x = random_vec(3, rng);
    const auto via_step = lstm::step(p, lstm::State<double>::zeros(5), x);
    const auto via_seq = lstm::forward_sequence(p, {x});
    CHECK(via_seq.y_last == via_step.y);
  }

  TEST_CASE("forward is pure and cache-independent") {
    const auto p = random_params(4, 6, 1, 21);
    Rng rng(22);
    std::vector<Mat<double>> xs;
    for (int t = 0; t < 7; ++t) xs.push_back(random_vec(4, rng));
    lstm::Cache<double> cache;
    const auto with_cache = lstm::forward_batch<double>(p, xs, &cache);
    const auto without = lstm::forward_batch<double>(p, xs, nullptr);
    const auto again = lstm::forward_batch<double>(p, xs, nullptr);
    CHECK(with_cache == without);
    CHECK(without == again);
  }

  TEST_CASE("zero-padding the front changes nothing under zero parameters") {
    const auto p = lstm::Params<double>::zeros(2, 3, 1);
    Rng rng(14);
    std::vector<Vec<double>> xs{random_vec(2, rng), random_vec(2, rng)};
    std::vector<Vec<double>> padded{Vec<double>::Zero(2), Vec<double>::Zero(2), xs[0], xs[1]};
    CHECK(lstm::forward_sequence(p, xs).y_last == lstm::forward_sequence(p, padded).y_last);
  }

  TEST_CASE("empty sequences are rejected") {
    const auto p = lstm::Params<double>::zeros(2, 3, 1);
    CHECK_THROWS_AS(lstm::forward_sequence(p, {}), InputError);
  }

  TEST_CASE("zero output gradient yields zero parameter gradients") {
    const auto p = random_params(3, 4, 2, 55);
    Rng rng(56);
    std::vector<Vec<double>> xs;
    for (int t = 0; t < 5; ++t) xs.push_back(random_vec(3, rng));
    const auto fwd = lstm::forward_sequence(p, xs);
    const Vec<double> zero_grad = Vec<double>::Zero(2);
    const auto grads = lstm::backward(p, fwd.cache, zero_grad);
    CHECK(grads.w_gates.isZero(0.0));
    CHECK(grads.b_gates.isZero(0.0));
    CHECK(grads.w_y.isZero(0.0));
    CHECK(grads.b_y.isZero(0.0));
  }

  TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(314);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Index in = 2 + static_cast<Eigen::Index>(rng.below(3));
      const Eigen::Index hd = 2 + static_cast<Eigen::Index>(rng.below(3));
      const Eigen::Index od = 1 + static_cast<Eigen::Index>(rng.below(2));
      auto p = random_params(in, hd, od, 400 + static_cast<std::uint64_t>(trial));
      std::vector<Vec<double>> xs;
      const int steps = 2 + static_cast<int>(rng.below(5));
      for (int t = 0; t < steps; ++t) xs.push_back(random_vec(in, rng));
      const auto g = random_vec(od, rng);

      const auto fwd = lstm::forward_sequence(p, xs);
      const auto grads = lstm::backward(p, fwd.cache, g);

      const double eps = 1e-5;
      double worst = 0.0;
      auto check_array = [&](auto& param_array, const auto& grad_array) {
        for (Eigen::Index r = 0; r < param_array.rows(); ++r) {
          for (Eigen::Index c = 0; c < param_array.cols(); ++c) {
            const double saved = param_array(r, c);
            param_array(r, c) = saved + eps;
            const double up = probe_loss(p, xs, g);
            param_array(r, c) = saved - eps;
            const double dn = probe_loss(p, xs, g);
            param_array(r, c) = saved;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = grad_array(r, c);
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
          }
        }
      };
      check_array(p.w_gates, grads.w_gates);
      check_array(p.b_gates, grads.b_gates);
      check_array(p.w_y, grads.w_y);
      check_array(p.b_y, grads.b_y);
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("gradient of a duplicated batch is exactly twice the single gradient") {
    const auto p = random_params(3, 4, 1, 71);
    Rng rng(72);
    std::vector<Vec<double>> xs;
    for (int t = 0; t < 6; ++t) xs.push_back(random_vec(3, rng));
    const auto g = random_vec(1, rng);

    const auto fwd1 = lstm::forward_sequence(p, xs);
    const auto g1 = lstm::backward(p, fwd1.cache, g);

    std::vector<Mat<double>> dup;
    for (const auto& x : xs) {
      Mat<double> m(3, 2);
      m.col(0) = x;
      m.col(1) = x;
      dup.push_back(m);
    }
    lstm::Cache<double> cache;
    lstm::forward_batch<double>(p, dup, &cache);
    Mat<double> gy(1, 2);
    gy.col(0) = g;
    gy.col(1) = g;
    const auto g2 = lstm::backward_batch<double>(p, cache, gy);
    CHECK(g2.w_gates.isApprox(2.0 * g1.w_gates, 1e-14));
    CHECK(g2.b_gates.isApprox(2.0 * g1.b_gates, 1e-14));
    CHECK(g2.w_y.isApprox(2.0 * g1.w_y, 1e-14));
    CHECK(g2.b_y.isApprox(2.0 * g1.b_y, 1e-14));
  }

  TEST_CASE("hidden carrier is bounded by one for any parameters") {
    Rng rng(88);
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = random_params(3, 5, 1, 900 + static_cast<std::uint64_t>(trial), 10.0);
      lstm::State<double> state = lstm::State<double>::zeros(5);
      for (int t = 0; t < 50; ++t) {
        const auto out = lstm::step(p, state, random_vec(3, rng, 20.0));
        state = out.state;
        CHECK(state.h.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(state.h.allFinite());
        CHECK(state.c.allFinite());
      }
    }
  }

  TEST_CASE("training is deterministic given the seed") {
    lstm::Dataset<double> data;
    Rng rng(101);
    for (int s = 0; s < 40; ++s) {
      Mat<double> w(2, 4);
      for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < 4; ++c) w(r, c) = rng.normal();
      data.windows.push_back(w);
    }
    data.targets.resize(1, 40);
    for (int s = 0; s < 40; ++s) data.targets(0, s) = std::sin(0.3 * s);

    lstm::HyperParams hp;
    hp.hidden_dim = 6;
    hp.epochs = 8;
    hp.batch_size = 16;
    const auto [p1, c1] = lstm::train(data, hp, 5);
    const auto [p2, c2] = lstm::train(data, hp, 5);
    CHECK(params_bitwise_equal(p1, p2));
    CHECK(c1.train_rmse == c2.train_rmse);
    const auto [p3, c3] = lstm::train(data, hp, 6);
    CHECK(!params_bitwise_equal(p1, p3));
  }

  TEST_CASE("a constant target is learned to well under 1e-3 of its magnitude") {
    lstm::Dataset<double> data;
    Rng rng(202);
    const double target = 0.7;
    for (int s = 0; s < 64; ++s) {
      Mat<double> w(1, 3);
      for (Eigen::Index c = 0; c < 3; ++c) w(0, c) = rng.normal() * 0.1;
      data.windows.push_back(w);
    }
    data.targets = Mat<double>::Constant(1, 64, target);

    lstm::HyperParams hp;
    hp.hidden_dim = 4;
    hp.epochs = 120;
    hp.batch_size = 16;
    hp.learning_rate = 0.02;
    hp.val_fraction = 0.0;
    const auto [params, curve] = lstm::train(data, hp, 7);
    CHECK(curve.train_rmse.back() < 1e-3 * target);
    CHECK(curve.train_rmse.size() == 120);
    CHECK(curve.val_rmse.size() == 120);
  }

  TEST_CASE("non-finite loss aborts with diagnostics") {
    lstm::Dataset<double> data;
    Mat<double> w = Mat<double>::Zero(1, 2);
    w(0, 1) = std::numeric_limits<double>::quiet_NaN();
    data.windows.push_back(w);
    data.windows.push_back(Mat<double>::Zero(1, 2));
    data.targets = Mat<double>::Zero(1, 2);
    lstm::HyperParams hp;
    hp.hidden_dim = 2;
    hp.epochs = 1;
    hp.batch_size = 2;
    hp.val_fraction = 0.0;
    try {
      lstm::train(data, hp, 1);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epoch") != std::string::npos);
      CHECK(msg.find("batch") != std::string::npos);
    }
  }

  TEST_CASE("parameter json round trip is exact") {
    const auto p = random_params(3, 4, 2, 777);
    const auto q = lstm::params_from_json(lstm::params_to_json(p));
    CHECK(params_bitwise_equal(p, q));
    Rng rng(778);
    const auto x = random_vec(3, rng);
    CHECK(lstm::step(p, lstm::State<double>::zeros(4), x).y ==
          lstm::step(q, lstm::State<double>::zeros(4), x).y);
  }
}

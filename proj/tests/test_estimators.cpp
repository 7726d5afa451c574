#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "minee/errors.hpp"
#include "minee/estimators.hpp"
#include "minee/nn_reference.hpp"
#include "support/dv_instance.hpp"
#include "support/oracles.hpp"

using namespace minee;
using minee::testing::random_batch;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

nn::ParameterSet small_net(Index in, nn::Activation act, std::uint64_t seed,
                           std::vector<Index> hidden = {12, 10}) {
  nn::NetworkSpec s;
  s.input_dim = in;
  s.hidden_widths = std::move(hidden);
  s.activation = act;
  return nn::init_params(s, seed);
}

// DV loss evaluated through the reference forward pass only.
double reference_dv_loss(const nn::ParameterSet& p, const SampleBatch& data,
                         const SampleBatch& ref) {
  return -dv_estimate(nn::reference::forward(p, data).col(0), nn::reference::forward(p, ref).col(0))
              .value;
}

}  // namespace

TEST_CASE("log_mean_exp") {
  CHECK(log_mean_exp(vec({0.0, std::log(3.0)})) == doctest::Approx(std::log(2.0)));
  CHECK(log_mean_exp(vec({1e6, 0.0})) == doctest::Approx(1e6 - std::log(2.0)));
  CHECK(log_mean_exp(vec({-1e6, -1e6})) == doctest::Approx(-1e6));
  CHECK(log_weighted_mean_exp(vec({0.0, kNegInf}), vec({1.0, 3.0})) ==
        doctest::Approx(std::log(0.25)));
  CHECK_THROWS_AS(log_mean_exp(Vector()), ContractViolation);
}

TEST_CASE("dv_estimate") {
  SUBCASE("constants cancel") {
    for (double c : {-5.0, 0.0, 2.5, 300.0}) {
      CHECK(dv_estimate(Vector::Constant(4, c), Vector::Constant(7, c)).value ==
            doctest::Approx(0.0).scale(1.0));
    }
  }
  SUBCASE("hand example") {
    const auto e = dv_estimate(vec({0, 0}), vec({0, std::log(3.0)}));
    CHECK(e.value == doctest::Approx(-0.693147).epsilon(1e-6));
    CHECK(e.value == e.mean_f_data - e.log_mean_exp_f_ref);
  }
  SUBCASE("huge reference entry stays finite") {
    const auto e = dv_estimate(vec({1, 2}), vec({1e6, 0, -3}));
    CHECK(std::isfinite(e.value));
    CHECK(e.log_mean_exp_f_ref == doctest::Approx(1e6 - std::log(3.0)));
  }
  SUBCASE("shift invariance") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      Vector fd(20), fr(50);
      for (auto& v : fd) v = normal(rng);
      for (auto& v : fr) v = normal(rng);
      const double c = normal(rng) * 100.0;
      const double base = dv_estimate(fd, fr).value;
      const double shifted = dv_estimate((fd.array() + c).matrix(), (fr.array() + c).matrix()).value;
      CHECK(std::abs(base - shifted) <= 1e-12 * (1.0 + std::abs(c)));
    }
  }
}

TEST_CASE("cross_entropy_estimate") {
  std::mt19937_64 rng(2);
  const UniformBoxReference unit(Vector::Zero(2), Vector::Ones(2));
  CHECK(cross_entropy_estimate(unit, ref_sample(unit, 50, rng)) == 0.0);

  SampleBatch s(2, 2);
  s << 0, 1, 2, -1;
  const auto box = box_from_samples(s);
  CHECK(cross_entropy_estimate(box, ref_sample(box, 30, rng)) == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy_estimate(box, s) == doctest::Approx(1.386294).epsilon(1e-6));

  SampleBatch outside(2, 2);
  outside << 1, 0, 3, 0;
  try {
    cross_entropy_estimate(box, outside);
    FAIL("expected SupportViolation");
  } catch (const SupportViolation& e) {
    CHECK(e.row() == 1);
  }
}

TEST_CASE("entropy_estimate") {
  std::mt19937_64 rng(3);
  const UniformBoxReference unit(Vector::Zero(2), Vector::Ones(2));
  const auto data = ref_sample(unit, 40, rng);
  CHECK(entropy_estimate(unit, data, Vector::Zero(40), Vector::Zero(400)) == 0.0);

  const UniformBoxReference four(Eigen::Vector2d(0, -1), Eigen::Vector2d(2, 1));
  const auto d4 = ref_sample(four, 40, rng);
  CHECK(entropy_estimate(four, d4, Vector::Zero(40), Vector::Zero(400)) ==
        doctest::Approx(std::log(4.0)));

  // Z uniform on the box: the optimal f is constant, and the estimate is the
  // true entropy ln Vol for every constant.
  for (double c : {-3.0, 0.0, 7.5}) {
    CHECK(entropy_estimate(four, d4, Vector::Constant(40, c), Vector::Constant(400, c)) ==
          doctest::Approx(std::log(4.0)));
  }
}

TEST_CASE("log-volumes of independent boxes add") {
  std::mt19937_64 rng(4);
  const auto data = random_batch(100, 5, rng);
  const auto joint = box_from_samples(data);
  const auto x = box_from_samples(data.leftCols(2));
  const auto y = box_from_samples(data.rightCols(3));
  CHECK(joint.log_volume() == doctest::Approx(x.log_volume() + y.log_volume()).epsilon(1e-14));
  CHECK(cross_entropy_estimate(joint, data) ==
        doctest::Approx(cross_entropy_estimate(x, data.leftCols(2)) +
                        cross_entropy_estimate(y, data.rightCols(3))));
}

TEST_CASE("DV objective on a quadrature instance") {
  const minee::testing::DVQuadratureInstance inst;
  const double divergence = inst.divergence();
  CHECK(std::abs(divergence - inst.analytic_divergence()) <= 1e-9);

  SUBCASE("random test functions never exceed the divergence") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      CHECK(inst.objective(inst.random_piecewise(rng)).value <= divergence + 1e-9);
    }
  }
  SUBCASE("log density ratio attains it for every additive constant") {
    for (double c : {-10.0, -1.0, 0.0, 2.0, 40.0}) {
      const Vector f = (inst.log_ratio.array() + c).matrix();
      CHECK(std::abs(inst.objective(f).value - divergence) <= 1e-6);
    }
  }
  SUBCASE("tilted reference density integrates to one") {
    // p_hat = p_Z' e^f / E[e^f(Z')], with the normalizer from the Simpson grid
    // and the integral from a finer midpoint rule.
    std::mt19937_64 rng(6);
    std::normal_distribution<double> coef(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const double a1 = coef(rng), a2 = coef(rng), a3 = coef(rng);
      const auto f = [&](double z) { return a1 * std::sin(z) + a2 * std::cos(2 * z) + a3 * z; };
      Vector fv(inst.nodes.size());
      for (Index i = 0; i < fv.size(); ++i) fv[i] = f(inst.nodes[i]);
      const double log_norm = log_weighted_mean_exp(fv, inst.ref_weights);
      const int m = 30000;
      const double h = 6.0 / m;
      double integral = 0.0;
      for (int i = 0; i < m; ++i) {
        const double z = -3.0 + (i + 0.5) * h;
        integral += h * (1.0 / 6.0) * std::exp(f(z) - log_norm);
      }
      CHECK(std::abs(integral - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("mi_estimate") {
  SUBCASE("all heads zero") {
    MIHeads zero{Vector::Zero(5), Vector::Zero(5), Vector::Zero(5)};
    MIHeads zero_ref{Vector::Zero(9), Vector::Zero(9), Vector::Zero(9)};
    CHECK(mi_estimate(zero, zero_ref) == 0.0);
  }
  SUBCASE("zero marginal heads reduce to the single DV term") {
    std::mt19937_64 rng(7);
    const auto f0 = random_batch(6, 1, rng).col(0).eval();
    const auto g0 = random_batch(11, 1, rng).col(0).eval();
    MIHeads d{f0, Vector::Zero(6), Vector::Zero(6)};
    MIHeads r{g0, Vector::Zero(11), Vector::Zero(11)};
    CHECK(mi_estimate(d, r) == dv_estimate(f0, g0).value);
  }
  SUBCASE("plug-in optimum on a discrete toy recovers its exact MI") {
    // X, Y in {0, 1} with joint P, each atom smeared over a w x w cell.
    // Reference boxes: [-w/2, 1 + w/2] per coordinate.
    const double P[2][2] = {{0.4, 0.1}, {0.15, 0.35}};
    const double px[2] = {P[0][0] + P[0][1], P[1][0] + P[1][1]};
    const double py[2] = {P[0][0] + P[1][0], P[0][1] + P[1][1]};
    const double w = 0.1;
    const double vx = 1 + w;
    const double vy = 1 + w;

    double exact = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) exact += P[a][b] * std::log(P[a][b] / (px[a] * py[b]));
    }

    // Data: the four cells weighted by P. Optimal heads are log density ratios.
    MIHeads data{Vector(4), Vector(4), Vector(4)};
    MIHeads data_w{Vector(4), Vector(4), Vector(4)};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const int k = 2 * a + b;
        data.f0[k] = std::log(P[a][b] / (w * w) * (vx * vy));
        data.f1[k] = std::log(px[a] / w * vx);
        data.f2[k] = std::log(py[b] / w * vy);
        data_w.f0[k] = data_w.f1[k] = data_w.f2[k] = P[a][b];
      }
    }
    // Reference: cells carry their uniform mass, the rest of the box has
    // density zero under the data, hence f = -inf there.
    MIHeads ref{Vector(5), Vector(3), Vector(3)};
    MIHeads ref_w{Vector(5), Vector(3), Vector(3)};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        ref.f0[2 * a + b] = data.f0[2 * a + b];
        ref_w.f0[2 * a + b] = w * w / (vx * vy);
      }
      ref.f1[a] = std::log(px[a] / w * vx);
      ref_w.f1[a] = w / vx;
      ref.f2[a] = std::log(py[a] / w * vy);
      ref_w.f2[a] = w / vy;
    }
    ref.f0[4] = kNegInf;
    ref_w.f0[4] = 1 - 4 * w * w / (vx * vy);
    ref.f1[2] = ref.f2[2] = kNegInf;
    ref_w.f1[2] = 1 - 2 * w / vx;
    ref_w.f2[2] = 1 - 2 * w / vy;

    CHECK(mi_estimate(data, data_w, ref, ref_w) == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("sample estimate with the plug-in optimal heads approaches the true MI") {
  // MG(0.9) against its uniform bounding box; f0 = ln p_XY, f1 = ln p_X,
  // f2 = ln p_Y (box volumes cancel between heads).
  const double rho = 0.9;
  const auto data = sample_mg(MixedGaussianModel{rho}, 100000, 8);
  const auto box = box_from_samples(data);
  std::mt19937_64 rng(9);
  const auto ref = ref_sample(box, 1000000, rng);
  auto heads = [&](const SampleBatch& rows) {
    MIHeads h{Vector(rows.rows()), Vector(rows.rows()), Vector(rows.rows())};
    for (Index i = 0; i < rows.rows(); ++i) {
      h.f0[i] = std::log(mg_joint_density(rho, rows(i, 0), rows(i, 1)));
      h.f1[i] = std::log(standard_normal_density(rows(i, 0)));
      h.f2[i] = std::log(standard_normal_density(rows(i, 1)));
    }
    return h;
  };
  const double est = mi_estimate(heads(data), heads(ref));
  CHECK(std::abs(est - ground_truth_mi_mg(MixedGaussianModel{rho}).value) <= 0.01);
}

TEST_CASE("dv_loss_and_gradient") {
  std::mt19937_64 rng(10);

  SUBCASE("all-zero network") {
    auto p = small_net(2, nn::Activation::ELU, 1);
    p.values.setZero();
    const auto data = random_batch(8, 2, rng);
    const auto ref = random_batch(30, 2, rng);
    const DVLoss r = dv_loss_and_gradient(p, 0, data, ref);
    CHECK(r.loss == 0.0);
    // Data term -mean dphi/dtheta plus the reference softmax term (uniform here).
    const Vector expected = nn::reference::backward(p, data, Matrix::Constant(8, 1, -1.0 / 8)) +
                            nn::reference::backward(p, ref, Matrix::Constant(30, 1, 1.0 / 30));
    CHECK((r.grad - expected).cwiseAbs().maxCoeff() <= 1e-15);
    const Vector data_term = nn::reference::backward(p, data, Matrix::Constant(8, 1, -1.0 / 8));
    CHECK(data_term[p.values.size() - 1] == doctest::Approx(-1.0));
  }

  SUBCASE("gradient against finite differences") {
    for (auto act : {nn::Activation::ELU, nn::Activation::Tanh}) {
      const auto p = small_net(3, act, 2);
      const auto data = random_batch(16, 3, rng);
      const auto ref = random_batch(64, 3, rng, 2.0);
      const DVLoss r = dv_loss_and_gradient(p, 0, data, ref);
      CHECK(r.loss == doctest::Approx(reference_dv_loss(p, data, ref)).epsilon(1e-12));
      auto loss = [&](const Vector& theta) {
        return reference_dv_loss(nn::ParameterSet{p.spec, theta}, data, ref);
      };
      CHECK(minee::testing::worst_fd_error(loss, p.values, r.grad, 50, rng) <= 1e-4);
      CHECK_FALSE(r.ema.has_value());
    }
  }

  SUBCASE("EMA rate 1 reproduces the plain gradient") {
    const auto p = small_net(2, nn::Activation::ELU, 3);
    const auto data = random_batch(10, 2, rng);
    const auto ref = random_batch(10, 2, rng);
    const DVLoss plain = dv_loss_and_gradient(p, 0, data, ref);
    GradientEma ema{1.0, 0.7};
    const DVLoss with = dv_loss_and_gradient(p, 0, data, ref, ema);
    CHECK(with.grad == plain.grad);
    CHECK(with.loss == plain.loss);
  }

  SUBCASE("EMA initialization and update") {
    const auto p = small_net(2, nn::Activation::ELU, 4);
    const auto data = random_batch(10, 2, rng);
    const auto ref1 = random_batch(10, 2, rng);
    const auto ref2 = random_batch(10, 2, rng);
    const double r = 0.01;
    const DVLoss first = dv_loss_and_gradient(p, 0, data, ref1, GradientEma{r, std::nullopt});
    const double m1 = nn::reference::forward(p, ref1).array().exp().mean();
    REQUIRE(first.ema->log_value.has_value());
    CHECK(*first.ema->log_value == doctest::Approx(std::log(m1)));
    CHECK(first.grad == dv_loss_and_gradient(p, 0, data, ref1).grad);

    const DVLoss second = dv_loss_and_gradient(p, 0, data, ref2, first.ema);
    const double m2 = nn::reference::forward(p, ref2).array().exp().mean();
    const double ema2 = (1 - r) * m1 + r * m2;
    CHECK(*second.ema->log_value == doctest::Approx(std::log(ema2)));
    // Reference weights become e^phi / (N' * ema) instead of the batch softmax.
    const Matrix phi = nn::reference::forward(p, ref2);
    const Matrix cot_ref = (phi.array().exp() / (10.0 * ema2)).matrix();
    const Vector expected = nn::reference::backward(p, data, Matrix::Constant(10, 1, -0.1)) +
                            nn::reference::backward(p, ref2, cot_ref);
    CHECK((second.grad - expected).cwiseAbs().maxCoeff() <=
          1e-10 * (1 + expected.cwiseAbs().maxCoeff()));
  }

  SUBCASE("overflowing outputs diverge") {
    auto p = small_net(2, nn::Activation::ELU, 5);
    p.values *= 1e200;
    CHECK_THROWS_AS(dv_loss_and_gradient(p, 0, random_batch(4, 2, rng, 10.0), random_batch(4, 2, rng, 10.0)),
                    DivergenceError);
  }

  SUBCASE("contract checks") {
    const auto p = small_net(2, nn::Activation::ELU, 6);
    CHECK_THROWS_AS(dv_loss_and_gradient(p, 0, SampleBatch(0, 2), random_batch(4, 2, rng)),
                    ContractViolation);
    CHECK_THROWS_AS(dv_loss_and_gradient(p, 1, random_batch(4, 2, rng), random_batch(4, 2, rng)),
                    ContractViolation);
  }
}

TEST_CASE("three-headed network") {
  std::mt19937_64 rng(11);
  MINetworkSpec spec;
  spec.split = ColumnSplit{2, 3};
  spec.hidden_widths = {9, 7};
  const MIParams params = init_mi_params(spec, 12);
  const auto data = random_batch(20, 5, rng);
  const auto ref = random_batch(60, 5, rng, 1.5);

  SUBCASE("f1 sees only x, f2 sees only y") {
    SampleBatch moved_y = data;
    moved_y.rightCols(3).array() += 1.0;
    SampleBatch moved_x = data;
    moved_x.leftCols(2).array() -= 2.0;
    const MIHeads base = evaluate_heads(params, data);
    CHECK(evaluate_heads(params, moved_y).f1 == base.f1);
    CHECK(evaluate_heads(params, moved_x).f2 == base.f2);
    CHECK(evaluate_heads(params, moved_y).f0 != base.f0);
  }

  SUBCASE("all-zero network has zero loss") {
    MIParams zero = params;
    zero.assign_flat(Vector::Zero(zero.parameter_count()));
    CHECK(mi_loss_and_gradient(zero, data, ref).loss == 0.0);
  }

  SUBCASE("loss is the sum of the three DV losses, gradient matches finite differences") {
    const MILoss r = mi_loss_and_gradient(params, data, ref);
    double sum = 0.0;
    for (Head h : kAllHeads) {
      sum += reference_dv_loss(params.head(h), head_inputs(data, spec.split, h),
                               head_inputs(ref, spec.split, h));
    }
    CHECK(r.loss == doctest::Approx(sum).epsilon(1e-12));
    auto loss = [&](const Vector& theta) {
      MIParams q = params;
      q.assign_flat(theta);
      double total = 0.0;
      for (Head h : kAllHeads) {
        total += reference_dv_loss(q.head(h), head_inputs(data, spec.split, h),
                                   head_inputs(ref, spec.split, h));
      }
      return total;
    };
    CHECK(minee::testing::worst_fd_error(loss, params.flatten(), r.flat_grad(), 50, rng) <= 1e-4);
  }

  SUBCASE("joint-only mode is the head-0 DV loss") {
    MILossOptions opts;
    opts.joint_only = true;
    const MILoss r = mi_loss_and_gradient(params, data, ref, opts);
    const DVLoss d = dv_loss_and_gradient(params.head(Head::Joint), 0, data, ref);
    CHECK(r.loss == d.loss);
    CHECK(r.grads[0] == d.grad);
    CHECK(r.grads[1].isZero(0.0));
    CHECK(r.grads[2].isZero(0.0));
  }

  SUBCASE("flatten and assign_flat are inverse") {
    MIParams q = params;
    const Vector flat = params.flatten();
    q.assign_flat((flat.array() + 1.0).matrix());
    q.assign_flat(flat);
    for (Head h : kAllHeads) CHECK(q.head(h).values == params.head(h).values);
  }
}

#include "doctest.h"
#include "fd_oracle.hpp"

#include "imface/diffcore/adam.hpp"
#include "imface/diffcore/checkpoint.hpp"
#include "imface/diffcore/mlp.hpp"
#include "imface/diffcore/var.hpp"
#include "imface/error.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace imface::diff;
using imface::testing::central_difference;
using imface::testing::relative_error;

namespace {

MLPParams identity_net() {
  MLPParams p;
  p.push_back({parameter(Tensor::from_rows({{1.0}})), parameter(Tensor(1, 1))});
  p.push_back({parameter(Tensor::from_rows({{1.0}})), parameter(Tensor(1, 1))});
  return p;
}

// Plain loops over the raw storage: y = W_n^T ... sin(w0 (W_1^T x + b_1)).
std::vector<double> dense_oracle(const MLPSpec& spec, const MLPParams& params, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const Tensor& w = params[l].weight.value();
    const Tensor& b = params[l].bias.value();
    std::vector<double> next(w.cols(), 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < w.rows(); ++i) acc += h[i] * w(i, j);
      next[j] = l + 1 < params.size() ? std::sin(spec.w0 * acc) : acc;
    }
    h = next;
  }
  return h;
}

}  // namespace

TEST_CASE("mlp_forward on a unit sine net") {
  MLPSpec spec{{1, 1, 1}, Activation::sine, 30.0};
  auto params = identity_net();
  CHECK(mlp_forward(spec, params, constant(Tensor::scalar(0.0))).item() == 0.0);
  const double y = mlp_forward(spec, params, constant(Tensor::scalar(std::numbers::pi / 60.0))).item();
  CHECK(y == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mlp_forward matches a dense matmul oracle") {
  Rng rng(7);
  MLPSpec spec{{2, 16, 16, 1}, Activation::sine, 30.0};
  auto params = init_mlp(spec, rng);
  // Non-zero biases make the check meaningful.
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& l : params) {
    for (auto& v : l.bias.mutable_value().values()) v = u(rng);
  }
  Tensor x(5, 2);
  for (auto& v : x.values()) v = u(rng);
  Tensor y = mlp_forward(spec, params, constant(x)).value();
  for (std::size_t r = 0; r < 5; ++r) {
    auto expect = dense_oracle(spec, params, {x(r, 0), x(r, 1)});
    CHECK(std::fabs(y(r, 0) - expect[0]) < 1e-12);
  }
}

TEST_CASE("mlp_forward rejects a width mismatch") {
  Rng rng(1);
  MLPSpec spec{{3, 8, 1}, Activation::sine, 30.0};
  auto params = init_mlp(spec, rng);
  CHECK_THROWS_AS(mlp_forward(spec, params, constant(Tensor(4, 2))), imface::Error);
}

TEST_CASE("siren_init bounds") {
  Rng rng(3);
  Tensor first = siren_init(1, 1000, 30.0, true, rng);
  for (double v : first.values()) CHECK(std::fabs(v) <= 1.0);
  CHECK(siren_bound(6, 1.0, false) == doctest::Approx(1.0));

  const std::size_t n = 100000;
  Tensor hidden = siren_init(128, n / 128 + 1, 30.0, false, rng);
  const double bound = std::sqrt(6.0 / 128.0) / 30.0;
  double lo = 1e9, hi = -1e9, mean = 0.0;
  for (double v : hidden.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= static_cast<double>(hidden.size());
  CHECK(lo >= -bound);
  CHECK(hi <= bound);
  const double sigma_of_mean = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(hidden.size()));
  CHECK(std::fabs(mean) < 3.0 * sigma_of_mean);
}

TEST_CASE("positional_encoding") {
  Tensor zero = positional_encoding(constant(Tensor::scalar(0.0)), 2).value();
  REQUIRE(zero.cols() == 5);
  const double expect0[] = {0, 0, 1, 0, 1};
  for (int i = 0; i < 5; ++i) CHECK(zero[i] == doctest::Approx(expect0[i]));

  Tensor one = positional_encoding(constant(Tensor::scalar(1.0)), 1).value();
  CHECK(one[0] == 1.0);
  CHECK(std::fabs(one[1]) < 1e-15);
  CHECK(one[2] == doctest::Approx(-1.0));

  Tensor x = Tensor::from_rows({{0.1, -0.2, 0.3}});
  Tensor same = positional_encoding(constant(x), 0).value();
  CHECK(same.values() == x.values());
  CHECK(positional_encoding(constant(x), 4).value().cols() == encoded_width(3, 4));
}

TEST_CASE("input_gradient of analytic fields") {
  Var p = parameter(Tensor::from_rows({{1.0, 2.0, 3.0}}));
  Var f = sum_cols(square(p));
  Tensor g = input_gradient(f, p).value();
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);
  CHECK(g[2] == 6.0);

  // f = theta x^2, loss = |df/dx|^2 = 4 theta^2 x^2, dloss/dtheta = 8 theta x^2.
  Var theta = parameter(Tensor::scalar(1.0));
  Var x = parameter(Tensor::scalar(2.0));
  Var fx = mul(theta, square(x));
  Var gx = input_gradient(fx, x);
  Var loss = sum(square(gx));
  CHECK(loss.item() == doctest::Approx(16.0));
  CHECK(grad(loss, {theta})[0].item() == doctest::Approx(32.0));
}

TEST_CASE("input_gradient of a sine MLP matches central differences") {
  Rng rng(11);
  MLPSpec spec{{3, 32, 32, 1}, Activation::sine, 30.0};
  auto params = init_mlp(spec, rng);
  Tensor pts(6, 3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (auto& v : pts.values()) v = u(rng);
  Var p = parameter(pts);
  Tensor g = input_gradient(mlp_forward(spec, params, p), p).value();
  for (std::size_t r = 0; r < pts.rows(); ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      Tensor probe = pts;
      auto eval = [&] {
        NoGradGuard ng;
        return mlp_forward(spec, params, constant(probe)).value()(r, 0);
      };
      const double fd = central_difference(probe(r, c), eval, 1e-5);
      CHECK(relative_error(g(r, c), fd) < 1e-4);
    }
  }
}

TEST_CASE("input_gradient reports non-finite values") {
  Var p = parameter(Tensor::from_rows({{0.0}}));
  Var f = sqrt(p);  // d/dp sqrt at 0 is infinite
  CHECK_THROWS_AS(input_gradient(f, p), imface::Error);
}

TEST_CASE("backward basics") {
  Var w = parameter(Tensor::from_rows({{1.0, -2.0}}));
  Tensor g = grad(sum(square(w)), {w})[0].value();
  CHECK(g[0] == 2.0);
  CHECK(g[1] == -4.0);

  // y = a*a + 3a: two consumers of a -> 2a + 3
  Var a = parameter(Tensor::scalar(1.5));
  Var y = add(mul(a, a), scale(a, 3.0));
  CHECK(grad(y, {a})[0].item() == doctest::Approx(6.0));

  Var unused = parameter(Tensor::scalar(4.0));
  CHECK(grad(y, {unused})[0].item() == 0.0);
}

TEST_CASE("gradients of every op match central differences") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.3, 1.2);
  Tensor at(3, 4), bt(3, 4), ct(1, 4), dt(4, 2);
  for (auto* t : {&at, &bt, &ct, &dt}) {
    for (auto& v : t->values()) v = u(rng);
  }
  Var a = parameter(at), b = parameter(bt), c = parameter(ct), d = parameter(dt);
  Tensor mask(3, 2);
  mask(0, 0) = 1;
  mask(2, 1) = 1;
  auto build = [&](const Var& A, const Var& B, const Var& C, const Var& D) {
    Var e1 = div(mul(A, B), add(C, B));
    Var e2 = sub(exp(scale(A, 0.3)), sqrt(B));
    Var e3 = mul(sin(e1, 2.0), cos(e2, 0.5));
    Var m = matmul(e3, D);                     // 3x2
    Var mt = matmul(D, e3, true, true);        // 2x3
    Var s = softmax_rows(m);
    Var n = row_norm(concat_cols({m, slice_cols(e3, 1, 3)}));
    Var w = where(mask, s, square(m));
    Var r = reshape(mt, 3, 2);
    Var q = abs(sub(m, r));
    return sum(add(add(mul(w, q), broadcast_to(n, 3, 2)), concat_rows({slice_rows(m, 0, 1), slice_rows(r, 1, 3)})));
  };
  Var loss = build(a, b, c, d);
  auto grads = grad(loss, {a, b, c, d});
  Tensor* tensors[] = {&at, &bt, &ct, &dt};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < tensors[k]->size(); ++i) {
      auto eval = [&] {
        NoGradGuard ng;
        return build(constant(at), constant(bt), constant(ct), constant(dt)).item();
      };
      const double fd = central_difference((*tensors[k])[i], eval, 1e-6);
      CHECK(relative_error(grads[k].value()[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("second-order gradients match finite differences of first-order gradients") {
  Rng rng(9);
  MLPSpec spec{{3, 16, 16, 1}, Activation::sine, 30.0};
  auto params = init_mlp(spec, rng);
  Tensor pts(4, 3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& v : pts.values()) v = u(rng);
  auto eikonal = [&](const MLPParams& ps) {
    Var p = parameter(pts);
    Var g = input_gradient(mlp_forward(spec, ps, p), p);
    return sum(square(sub(row_norm(g), constant(Tensor(4, 1, 1.0)))));
  };
  auto flat = flatten(params);
  auto grads = grad(eikonal(params), flat);
  std::mt19937_64 pick(1);
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t k = pick() % flat.size();
    Tensor& t = flat[k].mutable_value();
    const std::size_t i = pick() % t.size();
    const double fd = central_difference(t[i], [&] { return eikonal(params).item(); }, 1e-5);
    CHECK(relative_error(grads[k].value()[i], fd) < 1e-4);
  }
}

TEST_CASE("cross_rows: values, broadcasting, first and second order") {
  Var x = parameter(Tensor::from_rows({{1, 0, 0}, {0, 2, 0}}));
  Var y = constant(Tensor::from_rows({{0, 1, 0}}));
  const Tensor c = cross_rows(x, y).value();
  CHECK(c(0, 2) == 1.0);
  CHECK(c(1, 0) == 0.0);
  CHECK(c(1, 2) == 0.0);

  Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor at(5, 3), bt(1, 3);
  for (auto* t : {&at, &bt}) {
    for (auto& v : t->values()) v = u(rng);
  }
  // loss = sum |grad_a (sum (a x b)^3)|^2 exercises the backward of the backward
  auto loss_of = [&](const Var& A, const Var& B) {
    Var cr = cross_rows(A, B);
    Var inner = sum(mul(square(cr), cr));
    Var g = grad(inner, {A}, Var(), true)[0];
    return sum(square(g));
  };
  Var a = parameter(at), b = parameter(bt);
  auto grads = grad(loss_of(a, b), {a, b});
  Tensor* tensors[] = {&at, &bt};
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < tensors[k]->size(); ++i) {
      const double fd = central_difference((*tensors[k])[i], [&] {
        Var A = parameter(at), B = parameter(bt);
        return loss_of(A, B).item();
      });
      CHECK(relative_error(grads[k].value()[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("softmax") {
  Tensor s = softmax_rows(constant(Tensor(1, 5))).value();
  for (double v : s.values()) CHECK(v == doctest::Approx(0.2));

  Tensor logs = Tensor::from_rows({{std::log(1.0), std::log(2.0), std::log(3.0)}});
  Tensor t = softmax_rows(constant(logs)).value();
  CHECK(t[0] == doctest::Approx(1.0 / 6.0));
  CHECK(t[1] == doctest::Approx(2.0 / 6.0));
  CHECK(t[2] == doctest::Approx(3.0 / 6.0));

  Tensor shifted = logs;
  for (auto& v : shifted.values()) v += 17.25;
  Tensor t2 = softmax_rows(constant(shifted)).value();
  for (int i = 0; i < 3; ++i) CHECK(t2[i] == doctest::Approx(t[i]).epsilon(1e-14));

  Rng rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  Tensor wide(200, 7);
  for (auto& v : wide.values()) v = u(rng);
  Tensor w = softmax_rows(constant(wide)).value();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      CHECK(w(r, c) > 0.0);
      total += w(r, c);
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Adam opt;
    auto g = opt.add_group("net", 0.1);
    Var w = parameter(Tensor::from_rows({{1.0, -3.0}}));
    opt.add_param(g, "w", w);
    opt.step({Tensor(1, 2)});
    CHECK(w.value()[0] == 1.0);
    CHECK(w.value()[1] == -3.0);
  }
  SUBCASE("first step moves by lr regardless of gradient scale") {
    for (double scale : {1e-6, 1.0, 1e6}) {
      Adam opt;
      auto g = opt.add_group("net", 0.01);
      Var w = parameter(Tensor::scalar(0.0));
      opt.add_param(g, "w", w);
      opt.step({Tensor::scalar(scale)});
      // eps = 1e-8 shaves about 1% off the step for the smallest gradient.
      CHECK(std::fabs(w.item() + 0.01) < 2e-4);
    }
  }
  SUBCASE("converges on a scalar quadratic") {
    Adam opt;
    auto g = opt.add_group("net", 0.1);
    Var w = parameter(Tensor::scalar(0.0));
    opt.add_param(g, "w", w);
    for (int i = 0; i < 500; ++i) {
      Var loss = square(add_scalar(w, -3.0));
      opt.step({grad(loss, {w})[0].value()});
    }
    CHECK(std::fabs(w.item() - 3.0) < 1e-2);
  }
  SUBCASE("skipped parameters keep their own step count") {
    Adam opt;
    auto g = opt.add_group("net", 0.01);
    Var a = parameter(Tensor::scalar(0.0));
    Var b = parameter(Tensor::scalar(0.0));
    opt.add_param(g, "a", a);
    opt.add_param(g, "b", b);
    for (int i = 0; i < 5; ++i) opt.step({Tensor::scalar(1.0), Tensor()});
    CHECK(b.item() == 0.0);
    opt.step({Tensor::scalar(1.0), Tensor::scalar(1.0)});
    // b's first update is a full bias-corrected first step
    CHECK(std::fabs(b.item() + 0.01) < 1e-9);
    CHECK(opt.slots()[0].steps == 6);
    CHECK(opt.slots()[1].steps == 1);
    CHECK(opt.step_count() == 6);
  }
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    Rng rng(42);
    MLPSpec spec{{3, 32, 32, 1}, Activation::sine, 30.0};
    auto params = init_mlp(spec, rng);
    Tensor pts(16, 3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : pts.values()) v = u(rng);
    Var p = parameter(pts);
    Var f = mlp_forward(spec, params, p);
    Var loss = add(sum(abs(f)), sum(row_norm(input_gradient(f, p))));
    auto g = grad(loss, flatten(params));
    return std::make_pair(loss.item(), g[0].value().values());
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("checkpoint round trip and failure modes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "imface_diffcore_test";
  fs::create_directories(dir);
  NamedTensors tensors{{"a/weight", Tensor::from_rows({{1.0, 2.5}, {-0.125, 1e-300}})},
                       {"b", Tensor({3}, {1.0, 2.0, 3.0})},
                       {"empty", Tensor(0, 4)}};
  write_tensors(dir / "x.imfpp", tensors);
  auto back = read_tensors(dir / "x.imfpp");
  REQUIRE(back.size() == 3);
  CHECK(back[0].first == "a/weight");
  CHECK(back[0].second.values() == tensors[0].second.values());
  CHECK(back[1].second.shape() == std::vector<std::size_t>{3});
  write_tensors(dir / "y.imfpp", back);
  CHECK(read_file_bytes(dir / "x.imfpp") == read_file_bytes(dir / "y.imfpp"));

  auto bytes = read_file_bytes(dir / "x.imfpp");
  bytes.resize(bytes.size() - 5);
  CHECK_THROWS_AS(decode_tensors(bytes), imface::Error);

  auto wrong_version = read_file_bytes(dir / "x.imfpp");
  wrong_version[6] = 99;
  CHECK_THROWS_WITH_AS(decode_tensors(wrong_version), doctest::Contains("version"), imface::Error);
  fs::remove_all(dir);
}

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "spikefold/conv.hpp"

using namespace spikefold;

TEST_CASE("conv2d 2x2 worked example") {
  Tensor input({2, 2, 1}, {1, 0, 0, 1});
  ConvKernel k{Tensor({2, 2, 1, 1}, {1, 2, 3, 4}), 1, 0};
  Tensor out = conv2d_forward(input, k);
  CHECK(out.shape() == std::vector<int>{1, 1, 1});
  CHECK(out[0] == 5.0f);
}

TEST_CASE("zero kernel gives zero output") {
  uint64_t s = 11;
  Tensor input = oracles::random_tensor({5, 5, 2}, s);
  ConvKernel k{Tensor({3, 3, 2, 3}), 1, 1};
  Tensor out = conv2d_forward(input, k);
  for (int i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("conv2d matches the sliding-window oracle") {
  uint64_t s = 42;
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      Tensor input = oracles::random_tensor({6, 6, 3}, s);
      Tensor w = oracles::random_tensor({3, 3, 3, 4}, s);
      ConvKernel k{w, stride, pad};
      Tensor got = conv2d_forward(input, k);
      Tensor want = oracles::naive_conv2d(input, w, stride, pad);
      REQUIRE(got.same_shape(want));
      CHECK(oracles::max_abs_diff(got, want) <= 1e-6);
      CHECK(got.all_finite());
    }
}

TEST_CASE("channel mismatch is a dimension error naming both shapes") {
  Tensor input({4, 4, 2});
  ConvKernel k{Tensor({3, 3, 3, 4}), 1, 0};
  try {
    conv2d_forward(input, k);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[4,4,2]") != std::string::npos);
    CHECK(msg.find("[3,3,3,4]") != std::string::npos);
  }
}

TEST_CASE("conv2d_backward zero upstream gradient") {
  uint64_t s = 7;
  Tensor input = oracles::random_tensor({4, 4, 2}, s);
  ConvKernel k{oracles::random_tensor({3, 3, 2, 2}, s), 1, 1};
  ConvGrads g = conv2d_backward(input, k, Tensor({4, 4, 2}));
  for (int i = 0; i < g.grad_input.size(); ++i) CHECK(g.grad_input[i] == 0.0f);
  for (int i = 0; i < g.grad_weights.size(); ++i) CHECK(g.grad_weights[i] == 0.0f);
}

TEST_CASE("1x1 kernel weight gradient reduces to an outer product") {
  uint64_t s = 13;
  Tensor input = oracles::random_tensor({3, 3, 2}, s);
  ConvKernel k{oracles::random_tensor({1, 1, 2, 2}, s), 1, 0};
  Tensor go = oracles::random_tensor({3, 3, 2}, s);
  ConvGrads g = conv2d_backward(input, k, go);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) {
      double want = 0.0;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
          want += static_cast<double>(input.at({y, x, m})) * static_cast<double>(go.at({y, x, n}));
      CHECK(std::abs(g.grad_weights.at({0, 0, m, n}) - want) <= 1e-6);
    }
}

TEST_CASE("conv2d_backward matches finite differences") {
  uint64_t s = 99;
  Tensor input = oracles::random_tensor({5, 5, 2}, s);
  ConvKernel k{oracles::random_tensor({3, 3, 2, 2}, s), 2, 1};
  const Tensor coeffs = oracles::random_tensor({3, 3, 2}, s);  // fixed projection -> scalar loss

  auto loss = [&]() { return oracles::conv_proj_loss(input, k.weights, k.stride, k.padding, coeffs); };

  Tensor go(coeffs.shape());
  for (int i = 0; i < go.size(); ++i) go[i] = coeffs[i];
  ConvGrads g = conv2d_backward(input, k, go);

  for (int i = 0; i < k.weights.size(); i += 3) {
    const double fd = oracles::central_diff(k.weights[i], loss);
    CHECK(oracles::rel_err(g.grad_weights[i], fd) <= 1e-4);
  }
  for (int i = 0; i < input.size(); i += 5) {
    const double fd = oracles::central_diff(input[i], loss);
    CHECK(oracles::rel_err(g.grad_input[i], fd) <= 1e-4);
  }
}

TEST_CASE("adjoint identity <conv(F,K),G'> == <F, grad_input>") {
  uint64_t s = 2024;
  for (int rep = 0; rep < 5; ++rep) {
    Tensor input = oracles::random_tensor({6, 6, 2}, s);
    ConvKernel k{oracles::random_tensor({3, 3, 2, 3}, s), rep % 2 + 1, rep % 2};
    Tensor out = conv2d_forward(input, k);
    Tensor gprime = oracles::random_tensor(out.shape(), s);
    ConvGrads g = conv2d_backward(input, k, gprime);

    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < out.size(); ++i) lhs += static_cast<double>(out[i]) * static_cast<double>(gprime[i]);
    for (int i = 0; i < input.size(); ++i) rhs += static_cast<double>(input[i]) * static_cast<double>(g.grad_input[i]);
    CHECK(oracles::rel_err(lhs, rhs) <= 1e-4);
  }
}

TEST_CASE("broadcast local kernel reproduces the shared convolution") {
  uint64_t s = 5;
  Tensor input = oracles::random_tensor({6, 6, 2}, s);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      ConvKernel k{oracles::random_tensor({3, 3, 2, 3}, s), stride, pad};
      LocalKernel local = broadcast_kernel(k, 6);
      Tensor a = conv2d_forward(input, k);
      Tensor b = local_conv_forward(input, local);
      REQUIRE(a.same_shape(b));
      CHECK(oracles::max_abs_diff(a, b) <= 1e-6);
    }
}

TEST_CASE("local conv matches its oracle and rejects bad leading dims") {
  uint64_t s = 3;
  Tensor input = oracles::random_tensor({5, 5, 2}, s);
  Tensor w = oracles::random_tensor({3, 3, 2, 2, 2, 2}, s);  // Dg=3 for stride 2, pad 1
  LocalKernel local{w, 2, 1};
  Tensor got = local_conv_forward(input, local);
  Tensor want = oracles::naive_local_conv(input, w, 2, 1);
  CHECK(oracles::max_abs_diff(got, want) <= 1e-6);

  LocalKernel wrong{oracles::random_tensor({4, 4, 2, 2, 2, 2}, s), 2, 1};
  CHECK_THROWS_AS(local_conv_forward(input, wrong), DimensionError);

  LocalKernel zero{Tensor({3, 3, 2, 2, 2, 2}), 2, 1};
  Tensor z = local_conv_forward(input, zero);
  for (int i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0f);
}

TEST_CASE("linear identity and zero-input cases") {
  Tensor w({3, 3});
  w.at({0, 0}) = w.at({1, 1}) = w.at({2, 2}) = 1.0f;
  Tensor bias({3});
  Tensor in({3}, {0.5f, -1.0f, 2.0f});
  Tensor out = linear_forward(in, w, bias);
  CHECK(out.bitwise_equal(in));

  Tensor bias2({3}, {1.0f, 2.0f, 3.0f});
  Tensor out2 = linear_forward(Tensor({3}), w, bias2);
  CHECK(out2.bitwise_equal(bias2));

  CHECK_THROWS_AS(linear_forward(Tensor({4}), w, bias), DimensionError);
}

TEST_CASE("linear backward matches finite differences") {
  uint64_t s = 77;
  Tensor in = oracles::random_tensor({4}, s);
  Tensor w = oracles::random_tensor({4, 3}, s);
  Tensor bias = oracles::random_tensor({3}, s);
  Tensor proj = oracles::random_tensor({3}, s);

  auto loss = [&]() { return oracles::linear_proj_loss(in, w, bias, proj); };
  LinearGrads g = linear_backward(in, w, proj);
  for (int i = 0; i < w.size(); ++i) CHECK(oracles::rel_err(g.grad_weights[i], oracles::central_diff(w[i], loss)) <= 1e-4);
  for (int i = 0; i < in.size(); ++i) CHECK(oracles::rel_err(g.grad_input[i], oracles::central_diff(in[i], loss)) <= 1e-4);
  for (int i = 0; i < bias.size(); ++i) CHECK(oracles::rel_err(g.grad_bias[i], oracles::central_diff(bias[i], loss)) <= 1e-4);
}

TEST_CASE("operations are deterministic run to run") {
  uint64_t s = 555;
  Tensor input = oracles::random_tensor({6, 6, 3}, s);
  ConvKernel k{oracles::random_tensor({3, 3, 3, 4}, s), 1, 1};
  Tensor a = conv2d_forward(input, k);
  Tensor b = conv2d_forward(input, k);
  CHECK(a.bitwise_equal(b));
}

TEST_CASE("impossible geometry is rejected") {
  CHECK_THROWS_AS(conv_output_size(2, 5, 1, 0), DimensionError);
  CHECK(conv_output_size(28, 5, 2, 2) == 14);
  CHECK(conv_output_size(14, 5, 2, 2) == 7);
}

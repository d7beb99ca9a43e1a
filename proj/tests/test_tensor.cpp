#include <limits>

#include "doctest.h"
#include "spikefold/tensor.hpp"

using namespace spikefold;

TEST_CASE("tensor shape and storage agree") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  for (int i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0f);

  t.at({1, 2, 3}) = 7.0f;
  CHECK(t[23] == 7.0f);
  CHECK(t.flat_index({0, 1, 2}) == 6);
}

TEST_CASE("rank-0 tensor holds one value") {
  Tensor t = Tensor::scalar(2.5f);
  CHECK(t.size() == 1);
  CHECK(t.rank() == 0);
  CHECK(t[0] == 2.5f);
}

TEST_CASE("mismatched data length is rejected") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), DimensionError);
  CHECK_THROWS_AS(Tensor({-1, 2}), DimensionError);
}

TEST_CASE("require_same_shape names both shapes") {
  Tensor a({2, 2}), b({2, 3});
  try {
    require_same_shape(a, b, "op");
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,2]") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("finiteness check") {
  Tensor t({2});
  CHECK(t.all_finite());
  t[0] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("bitwise equality") {
  Tensor a({3}, {1.0f, -0.0f, 2.0f});
  Tensor b({3}, {1.0f, -0.0f, 2.0f});
  Tensor c({3}, {1.0f, 0.0f, 2.0f});
  CHECK(a.bitwise_equal(b));
  CHECK_FALSE(a.bitwise_equal(c));  // -0.0 and 0.0 differ bitwise
}

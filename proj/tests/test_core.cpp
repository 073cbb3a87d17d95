#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "voxsam/gradcheck.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"
#include "voxsam/param.hpp"
#include "voxsam/rng.hpp"

using namespace voxsam;

TEST_CASE("ndarray shape and indexing round-trips") {
  NdArray a({2, 3, 4});
  REQUIRE(a.size() == 24);
  a(1, 2, 3) = 7.5;
  REQUIRE(a(1, 2, 3) == 7.5);
  REQUIRE(a[1 * 12 + 2 * 4 + 3] == 7.5);

  a.reshape({4, 6});
  REQUIRE(a(1, 5) == a[11]);
  a.reshape({2, 3, 4});
  REQUIRE(a(1, 2, 3) == 7.5);

  REQUIRE_THROWS_AS(a.reshape({5, 5}), Error);
  REQUIRE_THROWS_AS(NdArray({0, 3}), Error);
}

TEST_CASE("ndarray binary dump round-trips") {
  const auto path = std::filesystem::temp_directory_path() / "voxsam_test_array.vxg";
  RngStream rng(42);
  NdArray a({3, 5, 2});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  a.save(path);
  const NdArray b = NdArray::load(path);
  REQUIRE(b.shape() == a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(b[i] == a[i]);
  std::filesystem::remove(path);
}

TEST_CASE("rng streams are deterministic and splittable") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RngStream base(7);
  RngStream s1 = base.split(1), s2 = base.split(2);
  REQUIRE(s1.next_u64() != s2.next_u64());

  RngStream u(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("parameter init is bit-identical across runs with equal seeds") {
  ParameterStore s1, s2;
  Parameter& p1 = s1.add("w", {16, 8});
  Parameter& p2 = s2.add("w", {16, 8});
  RngStream r1(99), r2(99);
  init_normal(p1, r1);
  init_normal(p2, r2);
  for (std::size_t i = 0; i < p1.value.size(); ++i) REQUIRE(p1.value[i] == p2.value[i]);
  REQUIRE(p1.grad.all_finite());
  REQUIRE(p1.grad[0] == 0.0);
}

TEST_CASE("parameter store rejects duplicate names") {
  ParameterStore s;
  s.add("w", {2});
  REQUIRE_THROWS_AS(s.add("w", {2}), Error);
}

TEST_CASE("softmax matches closed forms") {
  SECTION("uniform logits") {
    const double logits[4] = {0, 0, 0, 0};
    double p[4];
    softmax_forward(logits, p);
    for (double v : p) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
  }
  SECTION("ln 2 vs 0") {
    const double logits[2] = {std::log(2.0), 0.0};
    double p[2];
    softmax_forward(logits, p);
    REQUIRE(p[0] == Catch::Approx(2.0 / 3.0).margin(1e-14));
    REQUIRE(p[1] == Catch::Approx(1.0 / 3.0).margin(1e-14));
  }
  SECTION("huge logits do not overflow") {
    const double logits[2] = {1000.0, 0.0};
    double p[2];
    softmax_forward(logits, p);
    REQUIRE(p[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(p[1] == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("outputs nonnegative, sum 1, shift invariant") {
    RngStream rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      double logits[6], shifted[6], p[6], q[6];
      const double c = rng.normal() * 10.0;
      for (int i = 0; i < 6; ++i) {
        logits[i] = rng.normal() * 3.0;
        shifted[i] = logits[i] + c;
      }
      softmax_forward(logits, p);
      softmax_forward(shifted, q);
      double sum = 0;
      for (int i = 0; i < 6; ++i) {
        REQUIRE(p[i] >= 0.0);
        sum += p[i];
        REQUIRE(p[i] == Catch::Approx(q[i]).margin(1e-12));
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }
  SECTION("empty vector is rejected") {
    double out[1];
    REQUIRE_THROWS_AS(softmax_forward({static_cast<const double*>(nullptr), 0},
                                      {out, 0}),
                      Error);
  }
}

TEST_CASE("vjp harness basics") {
  SECTION("unknown op") {
    REQUIRE_THROWS_AS(vjp_check("no_such_op", 1), Error);
  }
  SECTION("linear map is exact up to rounding") {
    NdArray x({4}), gx({4});
    RngStream rng(3);
    for (std::size_t i = 0; i < 4; ++i) x[i] = rng.normal();
    LambdaCase c(
        [&] {
          NdArray y(x.shape());
          for (std::size_t i = 0; i < 4; ++i) y[i] = 3.0 * x[i];
          return y;
        },
        [&](const NdArray& ct) {
          for (std::size_t i = 0; i < 4; ++i) gx[i] += 3.0 * ct[i];
        },
        {{"x", &x, &gx}});
    RngStream probe(5);
    REQUIRE(vjp_check_case(c, probe) < 1e-9);
  }
  SECTION("sigmoid derivative at zero is 0.25") {
    NdArray x({1}), gx({1});
    x[0] = 0.0;
    LambdaCase c(
        [&] {
          NdArray y({1});
          y[0] = sigmoid(x[0]);
          return y;
        },
        [&](const NdArray& ct) {
          const double s = sigmoid(x[0]);
          gx[0] += ct[0] * s * (1.0 - s);
        },
        {{"x", &x, &gx}});
    RngStream probe(5);
    REQUIRE(vjp_check_case(c, probe) < 1e-8);
    REQUIRE(gx[0] != 0.0);
    // analytic derivative recorded during the check is ct * 0.25
  }
  SECTION("non-finite forward raises NumericalFailure") {
    NdArray x({1}), gx({1});
    x[0] = 1.0;
    LambdaCase c(
        [&] {
          NdArray y({1});
          y[0] = std::numeric_limits<double>::quiet_NaN();
          return y;
        },
        [](const NdArray&) {}, {{"x", &x, &gx}});
    RngStream probe(5);
    REQUIRE_THROWS_AS(vjp_check_case(c, probe), Error);
  }
}

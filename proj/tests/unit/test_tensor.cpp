#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "cloudlstm/errors.hpp"
#include "cloudlstm/tensor.hpp"
#include "cloudlstm/tensor_io.hpp"
#include "oracles.hpp"

using namespace cloudlstm;

TEST_SUITE("tensor") {
  TEST_CASE("shape invariants") {
    CHECK(element_count({}) == 1);
    CHECK(element_count({2, 0, 3}) == 0);
    CHECK(Tensor().size() == 1);
    CHECK(Tensor({2, 3}).size() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    Tensor t({2, 3, 4});
    t.at({1, 2, 3}) = 5.0;
    CHECK(t[23] == 5.0);
    CHECK_THROWS_AS(t.at({2, 0, 0}), ShapeError);
    CHECK_THROWS_AS(t.at({0, 0}), ShapeError);
  }

  TEST_CASE("elementwise_mul") {
    const Tensor a({2}, {2, 3});
    const Tensor b({2}, {4, 5});
    CHECK(elementwise_mul(a, b) == Tensor({2}, {8, 15}));

    const Tensor r = oracle::random_tensor({3, 4}, 1);
    CHECK(elementwise_mul(r, Tensor::ones({3, 4})) == r);
    CHECK(elementwise_mul(r, Tensor::zeros({3, 4})) == Tensor::zeros({3, 4}));

    try {
      (void)elementwise_mul(Tensor({2, 3}), Tensor({3, 2}));
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2, 3]") != std::string::npos);
      CHECK(msg.find("[3, 2]") != std::string::npos);
    }
  }

  TEST_CASE("elementwise_add") {
    CHECK(elementwise_add(Tensor({2}, {1, 2}), Tensor({2}, {3, 4})) == Tensor({2}, {4, 6}));
    const Tensor r = oracle::random_tensor({5}, 2);
    CHECK(elementwise_add(r, Tensor::zeros({5})) == r);
    CHECK(elementwise_add(r, scaled(r, -1.0)) == Tensor::zeros({5}));
    CHECK_THROWS_AS(elementwise_add(Tensor({2}), Tensor({3})), ShapeError);
  }

  TEST_CASE("sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(std::abs(sigmoid(1.0) - 0.7310585786300049) <= 1e-12);
    const Tensor x = oracle::random_tensor({64}, 3, -20.0, 20.0);
    const Tensor pos = sigmoid(x);
    const Tensor neg = sigmoid(scaled(x, -1.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(neg[i] - (1.0 - pos[i])) <= 1e-12);
      CHECK(pos[i] > 0.0);
      CHECK(pos[i] < 1.0);
    }
    for (double big : {-700.0, -50.0, 50.0, 700.0, -1e308, 1e308}) {
      const double s = sigmoid(big);
      CHECK(std::isfinite(s));
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }

  TEST_CASE("tanh") {
    CHECK(cloudlstm::tanh(Tensor::scalar(0.0))[0] == 0.0);
    const Tensor x = oracle::random_tensor({64}, 4, -5.0, 5.0);
    const Tensor pos = cloudlstm::tanh(x);
    const Tensor neg = cloudlstm::tanh(scaled(x, -1.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(neg[i] == -pos[i]);
      CHECK(std::abs(pos[i]) < 1.0);
    }
    CHECK(std::abs(cloudlstm::tanh(Tensor::scalar(40.0))[0] - 1.0) <= 1e-12);
  }

  TEST_CASE("conv2d_same absorbing and identity kernels") {
    const Tensor x = oracle::random_tensor({5, 4, 3}, 5);
    CHECK(conv2d_same(x, Tensor({3, 3, 3, 2})) == Tensor({5, 4, 2}));
    Tensor identity({1, 1, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) identity.at({0, 0, c, c}) = 1.0;
    CHECK(conv2d_same(x, identity) == x);
  }

  TEST_CASE("conv2d_same matches the nested-loop oracle") {
    const Tensor x = oracle::random_tensor({5, 5, 2}, 6);
    const Tensor k = oracle::random_tensor({3, 3, 2, 3}, 7);
    CHECK(oracle::max_abs_diff(conv2d_same(x, k), oracle::conv2d_loops(x, k)) <= 1e-12);

    const Tensor x2 = oracle::random_tensor({6, 7, 3}, 8);
    const Tensor k5 = oracle::random_tensor({5, 5, 3, 2}, 9);
    CHECK(oracle::max_abs_diff(conv2d_same(x2, k5), oracle::conv2d_loops(x2, k5)) <= 1e-12);
  }

  TEST_CASE("conv2d_same rejects bad kernels") {
    CHECK_THROWS_AS(conv2d_same(Tensor({4, 4, 2}), Tensor({2, 2, 2, 1})), ShapeError);
    CHECK_THROWS_AS(conv2d_same(Tensor({4, 4, 2}), Tensor({3, 3, 3, 1})), ShapeError);
    CHECK_THROWS_AS(conv2d_same(Tensor({4, 4}), Tensor({3, 3, 1, 1})), ShapeError);
  }

  TEST_CASE("conv2d_same is linear") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
      const Tensor x = oracle::random_tensor({6, 5, 3}, seed);
      const Tensor y = oracle::random_tensor({6, 5, 3}, seed + 100);
      const Tensor k = oracle::random_tensor({3, 3, 3, 4}, seed + 200);
      const double a = 1.7, b = -0.6;
      const Tensor lhs = conv2d_same(elementwise_add(scaled(x, a), scaled(y, b)), k);
      const Tensor rhs = elementwise_add(scaled(conv2d_same(x, k), a), scaled(conv2d_same(y, k), b));
      CHECK(oracle::max_abs_diff(lhs, rhs) <= 1e-10);
    }
  }

  TEST_CASE("conv2d gradients are adjoint to the forward map") {
    // <conv(x, K), g> = <x, grad_input(g, K)> = <K, grad_kernel(x, g)>
    const Tensor x = oracle::random_tensor({5, 6, 3}, 20);
    const Tensor k = oracle::random_tensor({3, 3, 3, 4}, 21);
    const Tensor g = oracle::random_tensor({5, 6, 4}, 22);
    const Tensor y = conv2d_same(x, k);
    double lhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * g[i];
    const Tensor dx = conv2d_same_grad_input(g, k);
    double via_input = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) via_input += x[i] * dx[i];
    Tensor dk(k.shape());
    conv2d_same_grad_kernel(x, g, dk);
    double via_kernel = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) via_kernel += k[i] * dk[i];
    CHECK(std::abs(lhs - via_input) <= 1e-10);
    CHECK(std::abs(lhs - via_kernel) <= 1e-10);
  }

  TEST_CASE("operations are bit-deterministic") {
    const Tensor x = oracle::random_tensor({8, 8, 4}, 30);
    const Tensor k = oracle::random_tensor({3, 3, 4, 16}, 31);
    CHECK(bit_equal(conv2d_same(x, k), conv2d_same(x, k)));
    CHECK(bit_equal(sigmoid(x), sigmoid(x)));
  }

  TEST_CASE("channel helpers") {
    const Tensor a = oracle::random_tensor({2, 3, 2}, 40);
    const Tensor b = oracle::random_tensor({2, 3, 3}, 41);
    const Tensor ab = concat_channels(a, b);
    CHECK(ab.shape() == Shape{2, 3, 5});
    CHECK(slice_channels(ab, 0, 2) == a);
    CHECK(slice_channels(ab, 2, 5) == b);
    CHECK_THROWS_AS(concat_channels(a, Tensor({3, 3, 1})), ShapeError);
    const Tensor seq = oracle::random_tensor({3, 2, 2, 1}, 42);
    CHECK(leading_slice(seq, 2).shape() == Shape{2, 2, 1});
    CHECK(leading_slice(seq, 2)[3] == seq[11]);
  }
}

TEST_SUITE("tensor_io") {
  TEST_CASE("CLT1 byte layout") {
    std::ostringstream out;
    write_tensor(out, Tensor({1, 2}, {1.0, -2.5}));
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 4 + 4 + 2 * 4 + 2 * 8);
    CHECK(bytes.substr(0, 4) == "CLT1");
    CHECK(bytes[4] == 2);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 1);
    CHECK(bytes[12] == 2);
    // 1.0 = 0x3FF0000000000000, little-endian
    CHECK(static_cast<unsigned char>(bytes[16 + 7]) == 0x3F);
    CHECK(static_cast<unsigned char>(bytes[16 + 6]) == 0xF0);
  }

  TEST_CASE("round trip is bit exact") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Tensor t = oracle::random_tensor({2, 3, static_cast<std::size_t>(seed + 1)}, seed, -1e300, 1e300);
      t[0] = -0.0;
      std::stringstream io;
      write_tensor(io, t);
      CHECK(bit_equal(read_tensor(io, "memory"), t));
    }
    std::stringstream scalar;
    write_tensor(scalar, Tensor::scalar(3.5));
    CHECK(read_tensor(scalar, "memory") == Tensor::scalar(3.5));
  }

  TEST_CASE("truncated and corrupt files name the path") {
    const auto dir = std::filesystem::temp_directory_path() / "cloudlstm_tensor_io";
    std::filesystem::create_directories(dir);
    const auto path = dir / "t.clt";
    save_tensor(path, oracle::random_tensor({4, 4}, 1));
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    try {
      (void)load_tensor(path);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    {
      std::ofstream bad(path, std::ios::binary | std::ios::trunc);
      bad << "NOPE";
    }
    CHECK_THROWS_AS((void)load_tensor(path), FormatError);
    std::filesystem::remove_all(dir);
  }
}

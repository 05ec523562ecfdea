#include <doctest.h>

#include "fairpfn/rng.hpp"
#include "fairpfn/tensor.hpp"

using fairpfn::Rng;
using fairpfn::Tensor;

TEST_CASE("tensor construction and invariants") {
  Tensor t = Tensor::zeros({3, 4});
  CHECK(t.size() == 12);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  CHECK(t.all_finite());

  CHECK_THROWS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}));

  Tensor r = Tensor::row({1, 2, 3});
  CHECK(r.rows() == 1);
  CHECK(r.cols() == 3);
  Tensor c = Tensor::column({1, 2});
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
}

TEST_CASE("matmul_into agrees with a straight triple loop") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const fairpfn::i64 m = rng.uniform_int(1, 7);
    const fairpfn::i64 k = rng.uniform_int(1, 7);
    const fairpfn::i64 n = rng.uniform_int(1, 7);
    Tensor a = Tensor::zeros({m, k}), b = Tensor::zeros({k, n});
    for (fairpfn::i64 i = 0; i < a.size(); ++i) a[i] = rng.normal();
    for (fairpfn::i64 i = 0; i < b.size(); ++i) b[i] = rng.normal();
    Tensor c = Tensor::zeros({m, n});
    matmul_into(a, false, b, false, c);
    for (fairpfn::i64 i = 0; i < m; ++i)
      for (fairpfn::i64 j = 0; j < n; ++j) {
        double s = 0;
        for (fairpfn::i64 l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
        CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-12));
      }

    // transposed variants against explicit transposition
    Tensor at = Tensor::zeros({k, m});
    for (fairpfn::i64 i = 0; i < m; ++i)
      for (fairpfn::i64 l = 0; l < k; ++l) at.at(l, i) = a.at(i, l);
    Tensor c2 = Tensor::zeros({m, n});
    matmul_into(at, true, b, false, c2);
    for (fairpfn::i64 i = 0; i < c.size(); ++i) CHECK(c2[i] == doctest::Approx(c[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul_into rejects mismatched shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  Tensor c = Tensor::zeros({2, 2});
  CHECK_THROWS(matmul_into(a, false, b, false, c));
}

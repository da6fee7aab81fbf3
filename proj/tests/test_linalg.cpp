#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dmd/linalg.hpp"
#include "dmd/rng.hpp"

using namespace dmd;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.v) v = 2.0 * rng.uniform() - 1.0;
  return m;
}

Matrix random_symmetric(int n, Rng& rng) {
  Matrix m = random_matrix(n, n, rng);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(j, i) = m(i, j);
  return m;
}

Matrix random_spd(int n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  Matrix m = matmul(a, transpose(a));
  for (int i = 0; i < n; ++i) m(i, i) += n * 0.5;
  return m;
}

// Independent oracle for generalized symmetric eigenvalues: counts
// eigenvalues below lambda via the inertia (negative pivots) of the LDL^T
// factorization of A - lambda*B, then bisects each root. Shares no code with
// the Jacobi solver path.
int eigenvalues_below(const Matrix& a, const Matrix& b, double lambda) {
  const int n = a.rows;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = a(i, j) - lambda * b(i, j);
  // LDL^T without pivoting; fall back to a tiny shift when a pivot vanishes
  std::vector<double> d(n, 0.0);
  Matrix l = Matrix::identity(n);
  for (int j = 0; j < n; ++j) {
    double dj = m(j, j);
    for (int k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
    if (dj == 0.0) dj = 1e-300;
    d[j] = dj;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k) * d[k];
      l(i, j) = s / dj;
    }
  }
  int below = 0;
  for (double x : d) below += x < 0.0 ? 1 : 0;
  return below;
}

std::vector<double> oracle_generalized_eigenvalues(const Matrix& a, const Matrix& b, int k,
                                                   double lo = -1e4, double hi = 1e4) {
  std::vector<double> out;
  for (int idx = 0; idx < k; ++idx) {
    double a0 = lo, b0 = hi;
    // find lambda with exactly idx eigenvalues strictly below it, converging
    // onto the (idx+1)-th smallest eigenvalue
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a0 + b0);
      if (eigenvalues_below(a, b, mid) <= idx)
        a0 = mid;
      else
        b0 = mid;
    }
    out.push_back(0.5 * (a0 + b0));
  }
  return out;
}

}  // namespace

TEST_CASE("generalized eigensolver on diagonal case") {
  Matrix a(3, 3);
  a(0, 0) = 3;
  a(1, 1) = 1;
  a(2, 2) = 2;
  auto pairs = sym_eig_smallest(a, Matrix::identity(3), 2);
  CHECK(pairs[0].value == Catch::Approx(1.0).margin(1e-9));
  CHECK(pairs[1].value == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("classic 2x2 symmetric eigenpairs") {
  Matrix a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 2;
  auto pairs = sym_eig_smallest(a, Matrix::identity(2), 2);
  REQUIRE(pairs[0].value == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(pairs[1].value == Catch::Approx(3.0).margin(1e-9));
  // eigenvector of lambda=1 is (1,-1)/sqrt(2) up to sign
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(pairs[0].vector[0]) - inv_sqrt2) < 1e-8);
  CHECK(pairs[0].vector[0] * pairs[0].vector[1] < 0.0);
  CHECK(pairs[1].vector[0] * pairs[1].vector[1] > 0.0);
}

TEST_CASE("random symmetric pairs: residuals and bisection oracle") {
  Rng rng(42, "eig-test");
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 6;
    Matrix a = random_symmetric(n, rng);
    Matrix b = random_spd(n, rng);
    auto pairs = sym_eig_smallest(a, b, n);
    for (const auto& p : pairs) {
      auto av = matvec(a, p.vector);
      auto bv = matvec(b, p.vector);
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = av[i] - p.value * bv[i];
        res += r * r;
      }
      CHECK(std::sqrt(res) < 1e-8);
    }
    auto oracle = oracle_generalized_eigenvalues(a, b, n);
    for (int i = 0; i < n; ++i) CHECK(pairs[i].value == Catch::Approx(oracle[i]).margin(1e-8));
  }
}

TEST_CASE("eigenvectors come back B-orthonormal") {
  Rng rng(7, "bortho");
  const int n = 8;
  Matrix a = random_symmetric(n, rng);
  Matrix b = random_spd(n, rng);
  auto pairs = sym_eig_smallest(a, b, n);
  for (int i = 0; i < n; ++i) {
    auto bv = matvec(b, pairs[i].vector);
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int r = 0; r < n; ++r) dot += pairs[j].vector[r] * bv[r];
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-7);
    }
  }
}

TEST_CASE("asymmetric input is rejected") {
  Matrix a(2, 2);
  a(0, 1) = 1.0;  // a(1,0) stays 0
  CHECK_THROWS_AS(sym_eig_smallest(a, Matrix::identity(2), 1), std::invalid_argument);
}

TEST_CASE("svd of diagonal and orthogonal matrices") {
  Matrix d(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  auto s = svd(d);
  CHECK(s.sigma[0] == Catch::Approx(3.0).margin(1e-10));
  CHECK(s.sigma[1] == Catch::Approx(1.0).margin(1e-10));

  // rotation by 0.3 rad
  Matrix q(2, 2);
  q(0, 0) = std::cos(0.3);
  q(0, 1) = -std::sin(0.3);
  q(1, 0) = std::sin(0.3);
  q(1, 1) = std::cos(0.3);
  auto sq = svd(q);
  CHECK(sq.sigma[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(sq.sigma[1] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("svd reconstruction and Gram-matrix oracle") {
  Rng rng(99, "svd-test");
  for (auto [rows, cols] : std::vector<std::pair<int, int>>{{4, 6}, {6, 4}, {5, 5}}) {
    Matrix a = random_matrix(rows, cols, rng);
    auto s = svd(a);
    // reconstruction
    Matrix sigma(static_cast<int>(s.sigma.size()), static_cast<int>(s.sigma.size()));
    for (size_t i = 0; i < s.sigma.size(); ++i)
      sigma(static_cast<int>(i), static_cast<int>(i)) = s.sigma[i];
    Matrix rec = matmul(matmul(s.u, sigma), transpose(s.v));
    CHECK(max_abs_diff(rec, a) < 1e-8);
    // singular values vs. eigenvalues of A^T A computed by the Jacobi path on
    // the Gram matrix (different route than the one-sided sweep)
    Matrix gram = matmul(transpose(a), a);
    auto eig = jacobi_eigen(gram);
    for (size_t i = 0; i < s.sigma.size(); ++i) {
      const double lam = eig[eig.size() - 1 - i].value;
      CHECK(s.sigma[i] == Catch::Approx(std::sqrt(std::max(0.0, lam))).margin(1e-8));
    }
    // descending order
    for (size_t i = 1; i < s.sigma.size(); ++i) CHECK(s.sigma[i - 1] >= s.sigma[i] - 1e-12);
  }
}

TEST_CASE("pinv basics") {
  CHECK(max_abs_diff(pinv(Matrix::identity(3)), Matrix::identity(3)) < 1e-10);

  Matrix d(2, 2);
  d(0, 0) = 2.0;  // diag(2, 0)
  Matrix p = pinv(d);
  CHECK(p(0, 0) == Catch::Approx(0.5).margin(1e-10));
  CHECK(std::abs(p(1, 1)) < 1e-10);
}

TEST_CASE("pinv satisfies the four Penrose conditions") {
  Rng rng(5, "penrose");
  Matrix a = random_matrix(5, 3, rng);
  Matrix p = pinv(a);
  CHECK(max_abs_diff(matmul(matmul(a, p), a), a) < 1e-8);
  CHECK(max_abs_diff(matmul(matmul(p, a), p), p) < 1e-8);
  Matrix ap = matmul(a, p);
  CHECK(max_abs_diff(ap, transpose(ap)) < 1e-8);
  Matrix pa = matmul(p, a);
  CHECK(max_abs_diff(pa, transpose(pa)) < 1e-8);
}

TEST_CASE("pinv is an involution on full-rank matrices") {
  Rng rng(6, "pinv-inv");
  Matrix a = random_matrix(4, 4, rng);
  for (int i = 0; i < 4; ++i) a(i, i) += 2.0;
  CHECK(max_abs_diff(pinv(pinv(a)), a) < 1e-7);
}

TEST_CASE("property: eigen residuals on random sizes up to 50") {
  Rng rng(2024, "eig-prop");
  for (int n : {10, 25, 50}) {
    Matrix a = random_symmetric(n, rng);
    Matrix b = random_spd(n, rng);
    auto pairs = sym_eig_smallest(a, b, 3);
    for (const auto& p : pairs) {
      auto av = matvec(a, p.vector);
      auto bv = matvec(b, p.vector);
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = av[i] - p.value * bv[i];
        res += r * r;
      }
      CHECK(std::sqrt(res) < 1e-8);
    }
  }
}

TEST_CASE("determinism: identical inputs give identical results") {
  Rng rng(11, "det");
  Matrix a = random_symmetric(12, rng);
  Matrix b = random_spd(12, rng);
  auto p1 = sym_eig_smallest(a, b, 4);
  auto p2 = sym_eig_smallest(a, b, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(p1[i].value == p2[i].value);
    CHECK(p1[i].vector == p2[i].vector);
  }
}

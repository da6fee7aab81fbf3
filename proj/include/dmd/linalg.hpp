#pragma once

// Small dense linear-algebra core: products, norms, Cholesky, cyclic Jacobi
// eigensolver (plain and generalized), one-sided Jacobi SVD and the
// Moore-Penrose pseudo-inverse built on it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmd {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols != static_cast<int>(x.size()))
    throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < std::min(a.rows, a.cols); ++i) s += a(i, i);
  return s;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.v) s += x * x;
  return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("max_abs_diff: dimension mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("cholesky: matrix not square");
  const int n = a.rows;
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0)
          throw NumericalError("cholesky: matrix not positive-definite (pivot " +
                               std::to_string(s) + " at index " + std::to_string(i) + ")");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Solve L x = b with L lower-triangular.
inline std::vector<double> forward_sub(const Matrix& l, const std::vector<double>& b) {
  const int n = l.rows;
  std::vector<double> x(b);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) x[i] -= l(i, k) * x[k];
    x[i] /= l(i, i);
  }
  return x;
}

// Solve L^T x = b with L lower-triangular.
inline std::vector<double> back_sub_transposed(const Matrix& l, const std::vector<double>& b) {
  const int n = l.rows;
  std::vector<double> x(b);
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) x[i] -= l(k, i) * x[k];
    x[i] /= l(i, i);
  }
  return x;
}

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;
};

// Cyclic Jacobi eigensolver for a symmetric matrix. Returns all eigenpairs
// sorted by ascending eigenvalue; eigenvectors are orthonormal.
inline std::vector<EigenPair> jacobi_eigen(Matrix a, int max_sweeps = 64,
                                           double tol = 1e-14) {
  if (a.rows != a.cols) throw std::invalid_argument("jacobi_eigen: matrix not square");
  const int n = a.rows;
  Matrix q = Matrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double scale = std::max(frobenius_norm(a), 1e-300);
  int sweep = 0;
  while (off_norm() > tol * scale) {
    if (++sweep > max_sweeps)
      throw NumericalError("jacobi_eigen: no convergence after " +
                           std::to_string(max_sweeps) + " sweeps");
    for (int p = 0; p < n - 1; ++p) {
      for (int qi = p + 1; qi < n; ++qi) {
        const double apq = a(p, qi);
        if (std::abs(apq) <= tol * scale * 1e-3) continue;
        const double app = a(p, p);
        const double aqq = a(qi, qi);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, qi);
          a(k, p) = c * akp - s * akq;
          a(k, qi) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(qi, k);
          a(p, k) = c * apk - s * aqk;
          a(qi, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double qkp = q(k, p);
          const double qkq = q(k, qi);
          q(k, p) = c * qkp - s * qkq;
          q(k, qi) = s * qkp + c * qkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) < a(j, j); });
  std::vector<EigenPair> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].value = a(order[i], order[i]);
    out[i].vector.resize(n);
    for (int k = 0; k < n; ++k) out[i].vector[k] = q(k, order[i]);
  }
  return out;
}

inline void require_symmetric(const Matrix& a, double tol, const char* who) {
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol * std::max(1.0, frobenius_norm(a)))
        throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

// k smallest generalized eigenpairs of A v = lambda B v with A symmetric and
// B symmetric positive-definite (after a small ridge). Eigenvectors come back
// B-orthonormal, eigenvalues ascending. Solved by whitening through B's
// Cholesky factor followed by a cyclic Jacobi sweep.
inline std::vector<EigenPair> sym_eig_smallest(const Matrix& a, const Matrix& b, int k) {
  if (a.rows != a.cols || b.rows != b.cols || a.rows != b.rows)
    throw std::invalid_argument("sym_eig_smallest: dimension mismatch");
  require_symmetric(a, 1e-9, "sym_eig_smallest(A)");
  require_symmetric(b, 1e-9, "sym_eig_smallest(B)");
  const int n = a.rows;
  if (k < 1 || k > n) throw std::invalid_argument("sym_eig_smallest: bad k");

  // Ridge keeps B factorizable when the sample Gram matrix is rank-deficient;
  // a cleanly positive-definite B is factored as-is.
  Matrix l;
  try {
    l = cholesky(b);
  } catch (const NumericalError&) {
    const double eps = 1e-8 * std::max(trace(b), 1.0) / n;
    Matrix breg = b;
    for (int i = 0; i < n; ++i) breg(i, i) += eps;
    try {
      l = cholesky(breg);
    } catch (const NumericalError& e) {
      double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        dmax = std::max(dmax, std::abs(breg(i, i)));
        dmin = std::min(dmin, std::abs(breg(i, i)));
      }
      throw NumericalError(std::string("sym_eig_smallest: B singular beyond ridge repair (") +
                           e.what() + "; diag condition ~" +
                           std::to_string(dmax / std::max(dmin, 1e-300)) + ")");
    }
  }

  // C = L^{-1} A L^{-T}, computed column-by-column with triangular solves.
  Matrix c(n, n);
  std::vector<double> col(n);
  Matrix y(n, n);  // Y = L^{-1} A
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) col[i] = a(i, j);
    auto s = forward_sub(l, col);
    for (int i = 0; i < n; ++i) y(i, j) = s[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col[j] = y(i, j);
    auto s = forward_sub(l, col);  // solves L z = Y(i,:)^T, i.e. row of C
    for (int j = 0; j < n; ++j) c(i, j) = s[j];
  }
  // symmetrize against roundoff
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = m;
      c(j, i) = m;
    }

  auto pairs = jacobi_eigen(std::move(c));
  pairs.resize(k);
  for (auto& p : pairs) p.vector = back_sub_transposed(l, p.vector);
  return pairs;
}

struct Svd {
  Matrix u;                    // m x r, orthonormal columns
  std::vector<double> sigma;   // r nonnegative, descending
  Matrix v;                    // n x r, orthonormal columns
};

namespace detail {

// One-sided Jacobi on A with rows >= cols: rotates column pairs until all are
// mutually orthogonal.
inline Svd svd_tall(Matrix a, int max_sweeps, double tol) {
  const int m = a.rows, n = a.cols;
  Matrix v = Matrix::identity(n);
  double norm = std::max(frobenius_norm(a), 1e-300);

  for (int sweep = 0;; ++sweep) {
    if (sweep > max_sweeps)
      throw NumericalError("svd: no convergence after " + std::to_string(max_sweeps) +
                           " sweeps");
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += a(i, p) * a(i, p);
          aqq += a(i, q) * a(i, q);
          apq += a(i, p) * a(i, q);
        }
        if (std::abs(apq) <= tol * norm * norm) continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < m; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += a(i, j) * a(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return sigma[i] > sigma[j]; });

  Svd out;
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  out.sigma.resize(n);
  const double sig_max = sigma.empty() ? 0.0 : sigma[order[0]];
  int rank = 0;
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    out.sigma[j] = sigma[src];
    for (int i = 0; i < n; ++i) out.v(i, j) = v(i, src);
    if (sigma[src] > 1e-300 && sigma[src] > 1e-15 * sig_max) {
      for (int i = 0; i < m; ++i) out.u(i, j) = a(i, src) / sigma[src];
      ++rank;
    }
  }
  // Fill null-space columns of U with an orthonormal complement so that U
  // always has orthonormal columns.
  for (int j = rank; j < n; ++j) {
    std::vector<double> e(m, 0.0);
    for (int basis = 0; basis < m; ++basis) {
      std::fill(e.begin(), e.end(), 0.0);
      e[basis] = 1.0;
      for (int c2 = 0; c2 < j; ++c2) {
        double d = 0.0;
        for (int i = 0; i < m; ++i) d += out.u(i, c2) * e[i];
        for (int i = 0; i < m; ++i) e[i] -= d * out.u(i, c2);
      }
      double nrm = 0.0;
      for (double x : e) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-6) {
        for (int i = 0; i < m; ++i) out.u(i, j) = e[i] / nrm;
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

// Singular value decomposition A = U diag(sigma) V^T.
inline Svd svd(const Matrix& a, int max_sweeps = 64, double tol = 1e-15) {
  if (a.rows == 0 || a.cols == 0) throw std::invalid_argument("svd: empty matrix");
  if (a.rows >= a.cols) return detail::svd_tall(a, max_sweeps, tol);
  Svd t = detail::svd_tall(transpose(a), max_sweeps, tol);
  return Svd{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

// Moore-Penrose pseudo-inverse; singular values below tol * sigma_max are
// treated as zero.
inline Matrix pinv(const Matrix& a, double tol = 1e-12) {
  Svd d = svd(a);
  const double sig_max = d.sigma.empty() ? 0.0 : d.sigma[0];
  Matrix out(a.cols, a.rows);
  for (size_t j = 0; j < d.sigma.size(); ++j) {
    if (d.sigma[j] <= tol * sig_max || d.sigma[j] == 0.0) continue;
    const double inv = 1.0 / d.sigma[j];
    for (int r = 0; r < a.cols; ++r) {
      const double vj = d.v(r, static_cast<int>(j)) * inv;
      if (vj == 0.0) continue;
      for (int c = 0; c < a.rows; ++c) out(r, c) += vj * d.u(c, static_cast<int>(j));
    }
  }
  return out;
}

}  // namespace dmd

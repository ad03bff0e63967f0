#include "dmtn/kernels.hpp"

#include <algorithm>

#include <cstdint>

namespace dmtn::kernels {

namespace serial {

void matvec(std::span<const double> m, std::span<const double> x, std::span<double> y,
            std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t_acc(std::span<const double> m, std::span<const double> g, std::span<double> out,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m.data() + i * cols;
    const double gi = g[i];
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * gi;
  }
}

void outer_acc(std::span<double> grad, std::span<const double> g, std::span<const double> x,
               std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = grad.data() + i * cols;
    const double gi = g[i];
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * p;
    for (std::size_t j = 0; j < p; ++j) crow[j] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      const double* brow = b.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) acc += dc[i * p + j] * b[k * p + j];
      da[i * n + k] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      double* dbrow = db.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) dbrow[j] += aik * dc[i * p + j];
    }
  }
}

void contract_mode(std::span<const double> w, std::span<const double> v, std::span<double> out,
                   std::size_t outer, std::size_t n, std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o) {
    double* orow = out.data() + o * inner;
    for (std::size_t j = 0; j < inner; ++j) orow[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = v[i];
      const double* wrow = w.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) orow[j] += wrow[j] * vi;
    }
  }
}

void contract_mode_grad_v(std::span<const double> w, std::span<const double> g,
                          std::span<double> grad_v, std::size_t outer, std::size_t n,
                          std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o) {
    const double* grow = g.data() + o * inner;
    for (std::size_t i = 0; i < n; ++i) {
      const double* wrow = w.data() + (o * n + i) * inner;
      double acc = grad_v[i];
      for (std::size_t j = 0; j < inner; ++j) acc += grow[j] * wrow[j];
      grad_v[i] = acc;
    }
  }
}

void contract_mode_grad_w(std::span<const double> g, std::span<const double> v,
                          std::span<double> grad_w, std::size_t outer, std::size_t n,
                          std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o) {
    const double* grow = g.data() + o * inner;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = v[i];
      double* wrow = grad_w.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) wrow[j] += grow[j] * vi;
    }
  }
}

}  // namespace serial

// The parallel loops below iterate output elements in the outer (split) loop
// and keep the serial accumulation order in the inner loop.

namespace {

// Rows [begin, end) of y = M x, four rows at a time. Each y[i] still sums
// j = 0..cols-1 in order, so results match serial::matvec bit for bit.
void matvec_rows(const double* m, const double* x, double* y, std::size_t begin, std::size_t end,
                 std::size_t cols) {
  std::size_t i = begin;
  for (; i + 4 <= end; i += 4) {
    const double* r0 = m + i * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xj = x[j];
      a0 += r0[j] * xj;
      a1 += r1[j] * xj;
      a2 += r2[j] * xj;
      a3 += r3[j] * xj;
    }
    y[i] = a0;
    y[i + 1] = a1;
    y[i + 2] = a2;
    y[i + 3] = a3;
  }
  for (; i < end; ++i) {
    const double* row = m + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

}  // namespace

void matvec(std::span<const double> m, std::span<const double> x, std::span<double> y,
            std::size_t rows, std::size_t cols) {
  if (rows * cols < kParallelMinWork) {
    matvec_rows(m.data(), x.data(), y.data(), 0, rows, cols);
    return;
  }
  const auto blocks = static_cast<std::int64_t>((rows + 3) / 4);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const auto begin = static_cast<std::size_t>(b) * 4;
    matvec_rows(m.data(), x.data(), y.data(), begin, std::min(rows, begin + 4), cols);
  }
}

void matvec_t_acc(std::span<const double> m, std::span<const double> g, std::span<double> out,
                  std::size_t rows, std::size_t cols) {
  if (rows * cols < kParallelMinWork) {
    serial::matvec_t_acc(m, g, out, rows, cols);
    return;
  }
  const auto nc = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < nc; ++j) {
    double acc = out[j];
    for (std::size_t i = 0; i < rows; ++i) acc += m[i * cols + j] * g[i];
    out[j] = acc;
  }
}

void outer_acc(std::span<double> grad, std::span<const double> g, std::span<const double> x,
               std::size_t rows, std::size_t cols) {
  if (rows * cols < kParallelMinWork) {
    serial::outer_acc(grad, g, x, rows, cols);
    return;
  }
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double* row = grad.data() + i * cols;
    const double gi = g[i];
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t n, std::size_t p) {
  if (m * n * p < kParallelMinWork) {
    serial::matmul(a, b, c, m, n, p);
    return;
  }
  const auto nm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nm; ++i) {
    double* crow = c.data() + i * p;
    for (std::size_t j = 0; j < p; ++j) crow[j] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      const double* brow = b.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t n, std::size_t p) {
  if (m * n * p < kParallelMinWork) {
    serial::matmul_grad_a(dc, b, da, m, n, p);
    return;
  }
  const auto nm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nm; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) acc += dc[i * p + j] * b[k * p + j];
      da[i * n + k] += acc;
    }
  }
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t n, std::size_t p) {
  if (m * n * p < kParallelMinWork) {
    serial::matmul_grad_b(a, dc, db, m, n, p);
    return;
  }
  const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < nn; ++k) {
    double* dbrow = db.data() + k * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double aik = a[i * n + k];
      for (std::size_t j = 0; j < p; ++j) dbrow[j] += aik * dc[i * p + j];
    }
  }
}

void contract_mode(std::span<const double> w, std::span<const double> v, std::span<double> out,
                   std::size_t outer, std::size_t n, std::size_t inner) {
  if (outer * n * inner < kParallelMinWork) {
    serial::contract_mode(w, v, out, outer, n, inner);
    return;
  }
  const auto no = static_cast<std::int64_t>(outer);
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < no; ++o) {
    double* orow = out.data() + o * inner;
    for (std::size_t j = 0; j < inner; ++j) orow[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = v[i];
      const double* wrow = w.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) orow[j] += wrow[j] * vi;
    }
  }
}

void contract_mode_grad_v(std::span<const double> w, std::span<const double> g,
                          std::span<double> grad_v, std::size_t outer, std::size_t n,
                          std::size_t inner) {
  if (outer * n * inner < kParallelMinWork) {
    serial::contract_mode_grad_v(w, g, grad_v, outer, n, inner);
    return;
  }
  const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nn; ++i) {
    double acc = grad_v[i];
    for (std::size_t o = 0; o < outer; ++o) {
      const double* grow = g.data() + o * inner;
      const double* wrow = w.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) acc += grow[j] * wrow[j];
    }
    grad_v[i] = acc;
  }
}

void contract_mode_grad_w(std::span<const double> g, std::span<const double> v,
                          std::span<double> grad_w, std::size_t outer, std::size_t n,
                          std::size_t inner) {
  if (outer * n * inner < kParallelMinWork) {
    serial::contract_mode_grad_w(g, v, grad_w, outer, n, inner);
    return;
  }
  const auto no = static_cast<std::int64_t>(outer);
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < no; ++o) {
    const double* grow = g.data() + o * inner;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = v[i];
      double* wrow = grad_w.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) wrow[j] += grow[j] * vi;
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace dmtn::kernels

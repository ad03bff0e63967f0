#pragma once

#include <cstddef>
#include <span>

// Dense inner loops behind the autodiff ops.
//
// Every kernel exists twice: a plain loop in `serial` kept as the reference,
// and an OpenMP version that splits work over output elements only. Each
// output element is accumulated in the same order on both paths, so the two
// are bit-identical for any thread count.

namespace dmtn::kernels {

/// Work (multiply-adds) below which the OpenMP kernels stay on one thread.
inline constexpr std::size_t kParallelMinWork = std::size_t{1} << 15;

namespace serial {

// y = M x, M is rows x cols.
void matvec(std::span<const double> m, std::span<const double> x, std::span<double> y,
            std::size_t rows, std::size_t cols);
// out += M^T g
void matvec_t_acc(std::span<const double> m, std::span<const double> g, std::span<double> out,
                  std::size_t rows, std::size_t cols);
// G += g x^T
void outer_acc(std::span<double> grad, std::span<const double> g, std::span<const double> x,
               std::size_t rows, std::size_t cols);
// C = A B, A is m x n, B is n x p.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t n, std::size_t p);
// dA += dC B^T
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t n, std::size_t p);
// dB += A^T dC
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t n, std::size_t p);

// out[o, j] = sum_i w[o, i, j] v[i], w viewed as outer x n x inner.
void contract_mode(std::span<const double> w, std::span<const double> v, std::span<double> out,
                   std::size_t outer, std::size_t n, std::size_t inner);
// grad_v[i] += sum_{o, j} g[o, j] w[o, i, j]
void contract_mode_grad_v(std::span<const double> w, std::span<const double> g,
                          std::span<double> grad_v, std::size_t outer, std::size_t n,
                          std::size_t inner);
// grad_w[o, i, j] += g[o, j] v[i]
void contract_mode_grad_w(std::span<const double> g, std::span<const double> v,
                          std::span<double> grad_w, std::size_t outer, std::size_t n,
                          std::size_t inner);

}  // namespace serial

void matvec(std::span<const double> m, std::span<const double> x, std::span<double> y,
            std::size_t rows, std::size_t cols);
void matvec_t_acc(std::span<const double> m, std::span<const double> g, std::span<double> out,
                  std::size_t rows, std::size_t cols);
void outer_acc(std::span<double> grad, std::span<const double> g, std::span<const double> x,
               std::size_t rows, std::size_t cols);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t n, std::size_t p);
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t n, std::size_t p);
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t n, std::size_t p);

void contract_mode(std::span<const double> w, std::span<const double> v, std::span<double> out,
                   std::size_t outer, std::size_t n, std::size_t inner);
void contract_mode_grad_v(std::span<const double> w, std::span<const double> g,
                          std::span<double> grad_v, std::size_t outer, std::size_t n,
                          std::size_t inner);
void contract_mode_grad_w(std::span<const double> g, std::span<const double> v,
                          std::span<double> grad_w, std::size_t outer, std::size_t n,
                          std::size_t inner);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace dmtn::kernels

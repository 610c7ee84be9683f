#pragma once

#include <Eigen/Dense>

namespace daibc {

// Thin wrappers mapping raw row-major buffers onto Eigen for the handful of
// GEMM shapes the layers need. Eigen's fixed evaluation order keeps seeded
// runs bit-reproducible.

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Y[m,n] = X[m,k] * W[n,k]^T
template <class T>
void gemm_nt(const T* x, const T* w, T* y, int m, int k, int n) {
  ConstMatMap<T> X(x, m, k), W(w, n, k);
  MatMap<T> Y(y, m, n);
  Y.noalias() = X * W.transpose();
}

// Y[m,k] = G[m,n] * W[n,k]
template <class T>
void gemm_nn(const T* g, const T* w, T* y, int m, int n, int k) {
  ConstMatMap<T> G(g, m, n), W(w, n, k);
  MatMap<T> Y(y, m, k);
  Y.noalias() = G * W;
}

// W[n,k] += G[m,n]^T * X[m,k]
template <class T>
void gemm_tn_acc(const T* g, const T* x, T* w, int m, int n, int k) {
  ConstMatMap<T> G(g, m, n), X(x, m, k);
  MatMap<T> W(w, n, k);
  W.noalias() += G.transpose() * X;
}

// out[n] += column sums of G[m,n]
template <class T>
void colsum_acc(const T* g, T* out, int m, int n) {
  ConstMatMap<T> G(g, m, n);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> O(out, n);
  O.noalias() += G.colwise().sum().transpose();
}

}  // namespace daibc

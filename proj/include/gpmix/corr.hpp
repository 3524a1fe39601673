#pragma once

// Cholesky factors of correlation matrices parameterized by unconstrained
// canonical partial correlations (tanh-transformed), with the LKJ density.

#include <array>
#include <cmath>

#include "gpmix/dual.hpp"

namespace gpmix {

template <int K>
inline constexpr int kNumCpc = K * (K - 1) / 2;

template <int K, class T>
struct CholeskyCorr {
  std::array<T, K * K> L{};  // row-major, lower triangular
  T log_jacobian{};          // of y -> strictly lower entries of L
};

template <int K, class T>
CholeskyCorr<K, T> cholesky_corr_constrain(const std::array<T, kNumCpc<K>>& y) {
  using std::log;
  using std::sqrt;
  using std::tanh;
  CholeskyCorr<K, T> out;
  out.log_jacobian = T(0.0);
  out.L[0] = T(1.0);
  int k = 0;
  for (int i = 1; i < K; ++i) {
    const T z0 = tanh(y[k++]);
    out.log_jacobian = out.log_jacobian + log(1.0 - z0 * z0);
    out.L[i * K] = z0;
    T sum_sqs = z0 * z0;
    for (int j = 1; j < i; ++j) {
      const T z = tanh(y[k++]);
      out.log_jacobian = out.log_jacobian + log(1.0 - z * z);
      out.log_jacobian = out.log_jacobian + 0.5 * log(1.0 - sum_sqs);
      out.L[i * K + j] = z * sqrt(1.0 - sum_sqs);
      sum_sqs = sum_sqs + out.L[i * K + j] * out.L[i * K + j];
    }
    out.L[i * K + i] = sqrt(1.0 - sum_sqs);
  }
  return out;
}

template <int K>
std::array<double, kNumCpc<K>> cholesky_corr_free(const std::array<double, K * K>& L) {
  std::array<double, kNumCpc<K>> y{};
  int k = 0;
  for (int i = 1; i < K; ++i) {
    double sum_sqs = 0.0;
    for (int j = 0; j < i; ++j) {
      const double z = L[i * K + j] / std::sqrt(1.0 - sum_sqs);
      y[k++] = std::atanh(z);
      sum_sqs += L[i * K + j] * L[i * K + j];
    }
  }
  return y;
}

/// log of the LKJ normalizing constant c_K(eta), so that the density of a
/// correlation matrix R is det(R)^(eta-1) / c_K(eta).
double lkj_log_normalizer(int K, double eta);

/// LKJ(eta) log-density expressed on the Cholesky factor (includes the
/// R -> L Jacobian and the normalizing constant).
template <int K, class T>
T lkj_corr_cholesky_lpdf(const std::array<T, K * K>& L, double eta) {
  using std::log;
  T lp(-lkj_log_normalizer(K, eta));
  for (int i = 1; i < K; ++i) {
    const double coef = static_cast<double>(K - i - 1) + 2.0 * eta - 2.0;
    lp = lp + coef * log(L[i * K + i]);
  }
  return lp;
}

}  // namespace gpmix

#pragma once

#include "qks/tensor.hpp"

namespace qks {

/// Row-major matrix product [n x k] * [k x p] -> [n x p].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Gradients of matmul: d_a += d_out * b^T, d_b += a^T * d_out.
template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& d_out,
                     Tensor<T>& d_a, Tensor<T>& d_b);

/// Affine map x * w + bias, bias broadcast over rows.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Accumulates d_x, d_w, d_bias from the output gradient.
template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                     Tensor<T>& d_x, Tensor<T>& d_w, Tensor<T>& d_bias);

/// Row-wise softmax with per-row max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

/// Row-wise softmax backward given the forward probabilities.
/// d_x[i,:] = p .* (d_p - (d_p . p)).
template <typename T>
void softmax_rows_backward(const Tensor<T>& probs, const Tensor<T>& d_probs, Tensor<T>& d_x);

/// In-place softmax of one contiguous row of length n.
template <typename T>
void softmax_row_inplace(T* row, std::size_t n);

template <typename T>
void softmax_row_backward(const T* probs, const T* d_probs, T* d_scores, std::size_t n);

/// Per-row zero-mean unit-variance normalization followed by gain/bias.
/// Variance is the population variance (divide by d).
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps);

/// Layernorm with cached normalized rows and inverse stddev for backward.
template <typename T>
struct LayerNormTrace {
    Tensor<T> normalized; // (x - mean) / sqrt(var + eps)
    std::vector<T> inv_std;
};

template <typename T>
Tensor<T> layernorm_forward(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                            T eps, LayerNormTrace<T>& trace);

template <typename T>
void layernorm_backward(const LayerNormTrace<T>& trace, const Tensor<T>& gain,
                        const Tensor<T>& d_out, Tensor<T>& d_x, Tensor<T>& d_gain,
                        Tensor<T>& d_bias);

/// Elementwise Gaussian-error-linear unit, exact erf form:
/// gelu(x) = 0.5 x (1 + erf(x / sqrt(2))).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& d_out, Tensor<T>& d_x);

/// out += a (same shape).
template <typename T>
void add_inplace(Tensor<T>& out, const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Column sums of a 2-D tensor, accumulated into d_bias.
template <typename T>
void add_colsum(const Tensor<T>& x, Tensor<T>& acc);

/// Numerically stable log(1 + exp(x)).
double softplus(double x);

/// Logistic sigmoid.
double sigmoid(double x);

#define QKS_KERNEL_EXTERN(T)                                                                   \
    extern template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                   \
    extern template void matmul_backward<T>(const Tensor<T>&, const Tensor<T>&,                \
                                            const Tensor<T>&, Tensor<T>&, Tensor<T>&);         \
    extern template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    extern template void linear_backward<T>(const Tensor<T>&, const Tensor<T>&,                \
                                            const Tensor<T>&, Tensor<T>&, Tensor<T>&,          \
                                            Tensor<T>&);                                       \
    extern template Tensor<T> softmax_rows<T>(const Tensor<T>&);                               \
    extern template void softmax_rows_backward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                                  Tensor<T>&);                                 \
    extern template void softmax_row_inplace<T>(T*, std::size_t);                              \
    extern template void softmax_row_backward<T>(const T*, const T*, T*, std::size_t);         \
    extern template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&,                 \
                                           const Tensor<T>&, T);                               \
    extern template Tensor<T> layernorm_forward<T>(const Tensor<T>&, const Tensor<T>&,         \
                                                   const Tensor<T>&, T, LayerNormTrace<T>&);   \
    extern template void layernorm_backward<T>(const LayerNormTrace<T>&, const Tensor<T>&,     \
                                               const Tensor<T>&, Tensor<T>&, Tensor<T>&,       \
                                               Tensor<T>&);                                    \
    extern template Tensor<T> gelu<T>(const Tensor<T>&);                                       \
    extern template void gelu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);     \
    extern template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);                         \
    extern template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                      \
    extern template void add_colsum<T>(const Tensor<T>&, Tensor<T>&);

QKS_KERNEL_EXTERN(float)
QKS_KERNEL_EXTERN(double)
#undef QKS_KERNEL_EXTERN

} // namespace qks

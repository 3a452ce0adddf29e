#include "qks/kernels.hpp"

#include <cmath>
#include <numbers>

#include "qks/errors.hpp"

namespace qks {

namespace {

template <typename T>
void require_2d(const Tensor<T>& t, const char* op) {
    if (t.rank() != 2) throw DataError(std::string(op) + ": expected 2-D tensor, got " + t.shape_str());
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DataError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

} // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DataError("matmul: inner dimensions disagree, " + a.shape_str() + " * " + b.shape_str());
    }
    const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
    Tensor<T> out({n, p});
    // i-k-j order: the inner loop walks contiguous rows of b and out.
    for (std::size_t i = 0; i < n; ++i) {
        T* out_row = out.row(i);
        const T* a_row = a.row(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = a_row[kk];
            const T* b_row = b.row(kk);
            for (std::size_t j = 0; j < p; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& d_out,
                     Tensor<T>& d_a, Tensor<T>& d_b) {
    const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
    if (d_out.rows() != n || d_out.cols() != p) {
        throw DataError("matmul_backward: gradient shape " + d_out.shape_str() + " does not match output");
    }
    // d_a[i,kk] += sum_j d_out[i,j] * b[kk,j]
    for (std::size_t i = 0; i < n; ++i) {
        const T* g_row = d_out.row(i);
        T* da_row = d_a.row(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T* b_row = b.row(kk);
            T acc = 0;
            for (std::size_t j = 0; j < p; ++j) acc += g_row[j] * b_row[j];
            da_row[kk] += acc;
        }
    }
    // d_b[kk,j] += sum_i a[i,kk] * d_out[i,j]
    for (std::size_t i = 0; i < n; ++i) {
        const T* a_row = a.row(i);
        const T* g_row = d_out.row(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = a_row[kk];
            T* db_row = d_b.row(kk);
            for (std::size_t j = 0; j < p; ++j) db_row[j] += av * g_row[j];
        }
    }
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    Tensor<T> out = matmul(x, w);
    const std::size_t n = out.rows(), p = out.cols();
    if (bias.numel() != p) {
        throw DataError("linear: bias length " + std::to_string(bias.numel()) +
                        " does not match output width " + std::to_string(p));
    }
    for (std::size_t i = 0; i < n; ++i) {
        T* row = out.row(i);
        for (std::size_t j = 0; j < p; ++j) row[j] += bias[j];
    }
    return out;
}

template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                     Tensor<T>& d_x, Tensor<T>& d_w, Tensor<T>& d_bias) {
    matmul_backward(x, w, d_out, d_x, d_w);
    add_colsum(d_out, d_bias);
}

template <typename T>
void softmax_row_inplace(T* row, std::size_t n) {
    T max = row[0];
    for (std::size_t j = 1; j < n; ++j) max = row[j] > max ? row[j] : max;
    if (!std::isfinite(static_cast<double>(max))) {
        throw VerificationError("softmax: non-finite input");
    }
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - max);
        sum += row[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    require_2d(x, "softmax_rows");
    Tensor<T> out = x;
    const std::size_t n = out.rows(), k = out.cols();
    for (std::size_t i = 0; i < n; ++i) softmax_row_inplace(out.row(i), k);
    return out;
}

template <typename T>
void softmax_row_backward(const T* probs, const T* d_probs, T* d_scores, std::size_t n) {
    T dot = 0;
    for (std::size_t j = 0; j < n; ++j) dot += d_probs[j] * probs[j];
    for (std::size_t j = 0; j < n; ++j) d_scores[j] += probs[j] * (d_probs[j] - dot);
}

template <typename T>
void softmax_rows_backward(const Tensor<T>& probs, const Tensor<T>& d_probs, Tensor<T>& d_x) {
    require_same_shape(probs, d_probs, "softmax_rows_backward");
    const std::size_t n = probs.rows(), k = probs.cols();
    for (std::size_t i = 0; i < n; ++i) {
        softmax_row_backward(probs.row(i), d_probs.row(i), d_x.row(i), k);
    }
}

template <typename T>
Tensor<T> layernorm_forward(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                            T eps, LayerNormTrace<T>& trace) {
    require_2d(x, "layernorm");
    const std::size_t n = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) {
        throw DataError("layernorm: gain/bias length does not match width " + std::to_string(d));
    }
    trace.normalized = Tensor<T>({n, d});
    trace.inv_std.assign(n, T(0));
    Tensor<T> out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        const T* xi = x.row(i);
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const T c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T inv_std = T(1) / std::sqrt(var + eps);
        trace.inv_std[i] = inv_std;
        T* norm = trace.normalized.row(i);
        T* oi = out.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            norm[j] = (xi[j] - mean) * inv_std;
            oi[j] = gain[j] * norm[j] + bias[j];
        }
    }
    return out;
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
    LayerNormTrace<T> trace;
    return layernorm_forward(x, gain, bias, eps, trace);
}

template <typename T>
void layernorm_backward(const LayerNormTrace<T>& trace, const Tensor<T>& gain,
                        const Tensor<T>& d_out, Tensor<T>& d_x, Tensor<T>& d_gain,
                        Tensor<T>& d_bias) {
    const std::size_t n = d_out.rows(), d = d_out.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const T* g = d_out.row(i);
        const T* norm = trace.normalized.row(i);
        const T inv_std = trace.inv_std[i];
        T sum_dn = 0, sum_dn_norm = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const T dn = g[j] * gain[j];
            sum_dn += dn;
            sum_dn_norm += dn * norm[j];
            d_gain[j] += g[j] * norm[j];
            d_bias[j] += g[j];
        }
        const T inv_d = T(1) / static_cast<T>(d);
        T* dx = d_x.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const T dn = g[j] * gain[j];
            dx[j] += inv_std * (dn - inv_d * sum_dn - norm[j] * inv_d * sum_dn_norm);
        }
    }
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = x;
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const T v = out[i];
        out[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
    }
    return out;
}

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& d_out, Tensor<T>& d_x) {
    require_same_shape(x, d_out, "gelu_backward");
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T v = x[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        d_x[i] += d_out[i] * (cdf + v * pdf);
    }
}

template <typename T>
void add_inplace(Tensor<T>& out, const Tensor<T>& a) {
    require_same_shape(out, a, "add");
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += a[i];
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out = a;
    add_inplace(out, b);
    return out;
}

template <typename T>
void add_colsum(const Tensor<T>& x, Tensor<T>& acc) {
    const std::size_t n = x.rows(), p = x.cols();
    if (acc.numel() != p) throw DataError("add_colsum: accumulator width mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.row(i);
        for (std::size_t j = 0; j < p; ++j) acc[j] += row[j];
    }
}

double softplus(double x) {
    return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

#define QKS_KERNEL_INSTANTIATE(T)                                                              \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
    template void matmul_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                     Tensor<T>&, Tensor<T>&);                                  \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
    template void linear_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                     Tensor<T>&, Tensor<T>&, Tensor<T>&);                      \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                      \
    template void softmax_rows_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);    \
    template void softmax_row_inplace<T>(T*, std::size_t);                                     \
    template void softmax_row_backward<T>(const T*, const T*, T*, std::size_t);                \
    template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
    template Tensor<T> layernorm_forward<T>(const Tensor<T>&, const Tensor<T>&,                \
                                            const Tensor<T>&, T, LayerNormTrace<T>&);          \
    template void layernorm_backward<T>(const LayerNormTrace<T>&, const Tensor<T>&,            \
                                        const Tensor<T>&, Tensor<T>&, Tensor<T>&, Tensor<T>&); \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                              \
    template void gelu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);            \
    template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                             \
    template void add_colsum<T>(const Tensor<T>&, Tensor<T>&);

QKS_KERNEL_INSTANTIATE(float)
QKS_KERNEL_INSTANTIATE(double)
#undef QKS_KERNEL_INSTANTIATE

} // namespace qks

#include <cstring>
#include "kia/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "kia/errors.hpp"

namespace kia {

namespace {

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_matrix(const Tensor& a, const char* op) {
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                             shape_string(a.shape()));
    }
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
    }
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
    }
    if (element_count(shape_) != data_.size()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
    return Tensor({rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::row(std::initializer_list<double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

std::size_t Tensor::rows() const {
    if (shape_.size() == 1) return 1;
    if (shape_.size() == 2) return shape_[0];
    throw DimensionError("rows(): tensor of shape " + shape_string(shape_) + " is not a matrix");
}

std::size_t Tensor::cols() const {
    if (shape_.size() == 1) return shape_[0];
    if (shape_.size() == 2) return shape_[1];
    throw DimensionError("cols(): tensor of shape " + shape_string(shape_) + " is not a matrix");
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ContractError("item(): tensor of shape " + shape_string(shape_) + " is not a scalar");
    }
    return data_[0];
}

std::span<const double> Tensor::row_span(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row_span(std::size_t r) {
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(r * c, c);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

namespace kernels {

namespace {

// c[i, :] += sum_kk a[i, kk] * b[kk, :], kk ascending. Register tiles of R rows x 8 columns.
typedef double v4d __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
    v4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

template <std::size_t R, std::size_t W>
inline void tile(const double* __restrict A, std::size_t lda, const double* __restrict B, std::size_t p,
                 double* __restrict C, std::size_t k) {
    if constexpr (W == 8) {
        v4d lo[R], hi[R];
        for (std::size_t r = 0; r < R; ++r) {
            lo[r] = load4(C + r * p);
            hi[r] = load4(C + r * p + 4);
        }
        for (std::size_t kk = 0; kk < k; ++kk) {
            const v4d b0 = load4(B + kk * p);
            const v4d b1 = load4(B + kk * p + 4);
            for (std::size_t r = 0; r < R; ++r) {
                const double av = A[r * lda + kk];
                lo[r] += av * b0;
                hi[r] += av * b1;
            }
        }
        for (std::size_t r = 0; r < R; ++r) {
            store4(C + r * p, lo[r]);
            store4(C + r * p + 4, hi[r]);
        }
    } else {
        double acc[R][W];
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < W; ++c) acc[r][c] = C[r * p + c];
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* __restrict brow = B + kk * p;
            for (std::size_t r = 0; r < R; ++r) {
                const double av = A[r * lda + kk];
                for (std::size_t c = 0; c < W; ++c) acc[r][c] += av * brow[c];
            }
        }
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < W; ++c) C[r * p + c] = acc[r][c];
    }
}

template <std::size_t R>
inline void row_block(const double* __restrict A, std::size_t lda, const double* __restrict B, double* __restrict C,
                      std::size_t k, std::size_t p) {
    std::size_t j = 0;
    for (; j + 8 <= p; j += 8) tile<R, 8>(A, lda, B + j, p, C + j, k);
    for (; j < p; ++j) tile<R, 1>(A, lda, B + j, p, C + j, k);
}

void gemm_acc(const double* __restrict A, std::size_t lda, const double* __restrict B, double* __restrict C,
              std::size_t n, std::size_t k, std::size_t p) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) row_block<4>(A + i * lda, lda, B, C + i * p, k, p);
    for (; i < n; ++i) row_block<1>(A + i * lda, lda, B, C + i * p, k, p);
}

}  // namespace

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
    double* C = out.storage().data();
    std::fill(C, C + n * p, 0.0);
    gemm_acc(a.storage().data(), k, b.storage().data(), C, n, k, p);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    // a (n x k) * b^T where b is (p x k): transpose b once, then row-major gemm.
    const Tensor bt = transpose(b);
    gemm_acc(a.storage().data(), a.cols(), bt.storage().data(), out.storage().data(), a.rows(), a.cols(), b.rows());
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    // a^T (n x k) * b (k x p) with a stored (k x n): transpose a once.
    const Tensor at = transpose(a);
    gemm_acc(at.storage().data(), at.cols(), b.storage().data(), out.storage().data(), at.rows(), at.cols(), b.cols());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()));
    }
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    matmul(a, b, out);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (auto& v : out.storage()) v *= c;
    return out;
}

Tensor tanh(const Tensor& a) {
    Tensor out = a;
    for (auto& v : out.storage()) v = std::tanh(v);
    return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_matrix(a, "add_row");
    if (row.size() != a.cols()) {
        throw DimensionError("add_row: row " + shape_string(row.shape()) + " does not match " +
                             shape_string(a.shape()));
    }
    Tensor out = a;
    const std::size_t c = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) out(r, j) += row[j];
    }
    return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    require_matrix(a, "slice_cols");
    if (begin >= end || end > a.cols()) {
        throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                             std::to_string(end) + ") for " + shape_string(a.shape()));
    }
    Tensor out = Tensor::matrix(a.rows(), end - begin);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row_span(r).subspan(begin, end - begin);
        std::copy(src.begin(), src.end(), out.row_span(r).begin());
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_matrix(a, "concat_cols");
    require_matrix(b, "concat_cols");
    if (a.rows() != b.rows()) {
        throw DimensionError("concat_cols: row counts disagree, " + shape_string(a.shape()) +
                             " and " + shape_string(b.shape()));
    }
    Tensor out = Tensor::matrix(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row_span(r);
        auto ra = a.row_span(r);
        auto rb = b.row_span(r);
        std::copy(ra.begin(), ra.end(), dst.begin());
        std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(ra.size()));
    }
    return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows");
        if (p.cols() != c) {
            throw DimensionError("concat_rows: column counts disagree, " +
                                 shape_string(parts.front().shape()) + " and " + shape_string(p.shape()));
        }
        r += p.rows();
    }
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
    return Tensor({r, c}, std::move(data));
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    Tensor out = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

}  // namespace kernels

}  // namespace kia

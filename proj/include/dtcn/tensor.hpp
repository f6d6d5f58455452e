#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtcn {

// Dense row-major tensor of 64-bit reals. The universal numeric carrier.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape product " + std::to_string(count(shape)));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    // 2-D accessors; most of the pipeline works on [batch, features].
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s), 0.0); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    double item() const {
        if (data.size() != 1) throw std::logic_error("Tensor::item: tensor is not scalar");
        return data[0];
    }
};

std::string shape_str(const Tensor& t);
void require_shape(const Tensor& t, const std::vector<std::size_t>& s, const char* what);
bool all_finite(const Tensor& t);

namespace kernels {

// y = x * w, x:[m,k] w:[k,n] y:[m,n]. Parallel over output rows via OpenMP;
// the per-element summation order is fixed, so results are bit-identical to
// the serial reference.
void matmul(const double* x, const double* w, double* y,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_serial(const double* x, const double* w, double* y,
                   std::size_t m, std::size_t k, std::size_t n);

// y = x * w^T, x:[m,n] w:[k,n] y:[m,k]
void matmul_bt(const double* x, const double* w, double* y,
               std::size_t m, std::size_t n, std::size_t k);
void matmul_bt_serial(const double* x, const double* w, double* y,
                      std::size_t m, std::size_t n, std::size_t k);

// y = x^T * g, x:[m,k] g:[m,n] y:[k,n]
void matmul_at(const double* x, const double* g, double* y,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_at_serial(const double* x, const double* g, double* y,
                      std::size_t m, std::size_t k, std::size_t n);

}  // namespace kernels

Tensor matmul(const Tensor& x, const Tensor& w);

}  // namespace dtcn

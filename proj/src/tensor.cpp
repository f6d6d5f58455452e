#include "dtcn/tensor.hpp"

#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dtcn {

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
        os << (i ? "," : "") << t.shape[i];
    os << "]";
    return os.str();
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& s, const char* what) {
    if (t.shape != s) {
        Tensor want(s);
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(want) +
                                    ", got " + shape_str(t));
    }
}

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace kernels {

void matmul_serial(const double* x, const double* w, double* y,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* yr = y + i * n;
        for (std::size_t j = 0; j < n; ++j) yr[j] = 0.0;
        const double* xr = x + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = xr[p];
            const double* wr = w + p * n;
            for (std::size_t j = 0; j < n; ++j) yr[j] += xv * wr[j];
        }
    }
}

void matmul(const double* x, const double* w, double* y,
            std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m > 16)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double* yr = y + i * n;
        for (std::size_t j = 0; j < n; ++j) yr[j] = 0.0;
        const double* xr = x + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = xr[p];
            const double* wr = w + p * n;
            for (std::size_t j = 0; j < n; ++j) yr[j] += xv * wr[j];
        }
    }
}

void matmul_bt_serial(const double* x, const double* w, double* y,
                      std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = x + i * n;
        double* yr = y + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* wr = w + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += xr[p] * wr[p];
            yr[j] = acc;
        }
    }
}

void matmul_bt(const double* x, const double* w, double* y,
               std::size_t m, std::size_t n, std::size_t k) {
#pragma omp parallel for schedule(static) if (m > 16)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const double* xr = x + i * n;
        double* yr = y + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* wr = w + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += xr[p] * wr[p];
            yr[j] = acc;
        }
    }
}

void matmul_at_serial(const double* x, const double* g, double* y,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        double* yr = y + p * n;
        for (std::size_t j = 0; j < n; ++j) yr[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double xv = x[i * k + p];
            const double* gr = g + i * n;
            for (std::size_t j = 0; j < n; ++j) yr[j] += xv * gr[j];
        }
    }
}

void matmul_at(const double* x, const double* g, double* y,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (k > 16)
    for (long long pp = 0; pp < static_cast<long long>(k); ++pp) {
        const std::size_t p = static_cast<std::size_t>(pp);
        double* yr = y + p * n;
        for (std::size_t j = 0; j < n; ++j) yr[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double xv = x[i * k + p];
            const double* gr = g + i * n;
            for (std::size_t j = 0; j < n; ++j) yr[j] += xv * gr[j];
        }
    }
}

}  // namespace kernels

Tensor matmul(const Tensor& x, const Tensor& w) {
    if (x.ndim() != 2 || w.ndim() != 2 || x.shape[1] != w.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(x) + " x " + shape_str(w));
    Tensor y({x.shape[0], w.shape[1]});
    kernels::matmul(x.data.data(), w.data.data(), y.data.data(),
                    x.shape[0], x.shape[1], w.shape[1]);
    return y;
}

}  // namespace dtcn

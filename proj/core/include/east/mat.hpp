#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace east {

// Row-major dense matrix of doubles. Small and unclever on purpose: the
// model runs at toy scale and gradient checking wants full precision.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0) {}

    double* row(int i) { return v.data() + std::size_t(i) * cols; }
    const double* row(int i) const { return v.data() + std::size_t(i) * cols; }
    double& at(int i, int j) { return v[std::size_t(i) * cols + j]; }
    double at(int i, int j) const { return v[std::size_t(i) * cols + j]; }
    std::size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// C = A * B
inline void matmul(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.rows);
    c.rows = a.rows;
    c.cols = b.cols;
    c.v.assign(std::size_t(a.rows) * b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
}

// C = A * B^T
inline void matmul_nt(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.cols);
    c.rows = a.rows;
    c.cols = b.rows;
    c.v.assign(std::size_t(a.rows) * b.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
}

// C += A^T * B ; caller sizes C as (a.cols x b.cols)
inline void matmul_tn_acc(const Mat& a, const Mat& b, double* c) {
    assert(a.rows == b.rows);
    for (int k = 0; k < a.rows; ++k) {
        const double* ar = a.row(k);
        const double* br = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = ar[i];
            double* cr = c + std::size_t(i) * b.cols;
            for (int j = 0; j < b.cols; ++j) cr[j] += aki * br[j];
        }
    }
}

}  // namespace east

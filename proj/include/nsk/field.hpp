// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "nsk/grid.hpp"

namespace nsk {

/// Scalar field sampled at the grid points, row-major (last axis fastest).
struct RealField {
    Grid grid;
    std::vector<double> values;

    RealField() = default;
    explicit RealField(const Grid& g) : grid(g), values(g.size(), 0.0) {}
    RealField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size())
            throw std::invalid_argument("RealField: sample count does not match grid");
    }

    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }

    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Fourier coefficients of a scalar field, FFT mode order, row-major.
///
/// Convention: coeff(k) = (1/n^dim) sum_x f(x) exp(-i kappa_k . x), so a real
/// field has Hermitian-symmetric coefficients and Parseval reads
/// ||f||_{L2}^2 = L^dim sum_k |coeff(k)|^2.
struct SpectralField {
    Grid grid;
    std::vector<std::complex<double>> coeffs;

    SpectralField() = default;
    explicit SpectralField(const Grid& g) : grid(g), coeffs(g.size(), 0.0) {}
    SpectralField(const Grid& g, std::vector<std::complex<double>> c)
        : grid(g), coeffs(std::move(c)) {
        if (coeffs.size() != grid.size())
            throw std::invalid_argument("SpectralField: coefficient count does not match grid");
    }
};

using VectorField = std::vector<RealField>;
using SpectralVectorField = std::vector<SpectralField>;

/// Build a real field from a pointwise function of the grid coordinates.
template <class Fn>
RealField sample_field(const Grid& g, Fn&& fn) {
    RealField f(g);
    const int n = g.n();
    const double h = g.dx();
    if (g.dim() == 2) {
        std::size_t idx = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j, ++idx) f.values[idx] = fn(i * h, j * h, 0.0);
    } else {
        std::size_t idx = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k, ++idx) f.values[idx] = fn(i * h, j * h, k * h);
    }
    return f;
}

}  // namespace nsk

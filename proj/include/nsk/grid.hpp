// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nsk {

/// Uniform periodic grid on [0, L)^dim, dim in {2,3}, n points per axis.
///
/// Frequencies are stored in FFT order: index j along an axis corresponds to
/// the signed integer mode k = j for j < n/2 and k = j - n otherwise, so
/// k runs over {-n/2, ..., n/2-1}.  The physical wavenumber of mode k is
/// 2*pi*k/L; with the default L = 2*pi the two coincide.
class Grid {
public:
    Grid() = default;
    Grid(int dim, int n, double length) : dim_(dim), n_(n), length_(length) {}

    int dim() const { return dim_; }
    int n() const { return n_; }
    double length() const { return length_; }
    double dx() const { return length_ / n_; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }

    /// Signed integer mode for FFT-ordered axis index j.
    int mode(int j) const { return j < n_ / 2 ? j : j - n_; }

    /// Physical wavenumber 2*pi*k/L for axis index j.
    double wavenumber(int j) const {
        return 2.0 * std::numbers::pi * mode(j) / length_;
    }

    /// Largest wavenumber magnitude retained by the 2/3 dealiasing rule.
    double max_retained_wavenumber() const {
        int kmax = n_ / 3;
        double per_axis = 2.0 * std::numbers::pi * kmax / length_;
        return per_axis * std::sqrt(static_cast<double>(dim_));
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.dim_ == b.dim_ && a.n_ == b.n_ && a.length_ == b.length_;
    }
    friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }

private:
    int dim_ = 2;
    int n_ = 8;
    double length_ = 2.0 * std::numbers::pi;
};

inline Grid make_grid(int dim, int n, double length = 2.0 * std::numbers::pi) {
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("make_grid: dim must be 2 or 3, got " + std::to_string(dim));
    if (n < 8)
        throw std::invalid_argument("make_grid: n must be >= 8, got " + std::to_string(n));
    if (n % 2 != 0)
        throw std::invalid_argument("make_grid: n must be even, got " + std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length))
        throw std::invalid_argument("make_grid: length must be positive and finite");
    return Grid(dim, n, length);
}

}  // namespace nsk

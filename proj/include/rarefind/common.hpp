#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rarefind {

// Bad experiment/dataset description (wrong counts, mismatched dims, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// API called with arguments that violate a documented precondition.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite arithmetic is required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major matrix. Small sizes only; no BLAS behind it.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace rarefind

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace convrec {

// Dense real matrices are row-major so that a user/item embedding is a
// contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ItemList = std::vector<int>;
using AspectSet = std::vector<int>;  // sorted, unique aspect indices

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or inputs violating an operation's preconditions.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

// A well-formed request refused by a stateful rule (re-critique, closed session).
class Rejected : public Error {
public:
    using Error::Error;
};

// Non-finite loss or parameters during optimization.
class Diverged : public Error {
public:
    using Error::Error;
};

inline double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow for large |z|.
inline double log_sigmoid(double z) {
    if (z >= 0) {
        return -std::log1p(std::exp(-z));
    }
    return z - std::log1p(std::exp(z));
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace convrec

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

// Shared test oracles. These deliberately avoid the library's own code paths:
// the matrix exponential is a scaled 30-term Taylor series, dense references
// use Eigen's dense factorizations directly.
namespace testsupport {

// Reference matrix exponential: scale so ||A||_1 <= 0.25, 30-term Taylor
// series, then repeated squaring.
inline Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    while (norm > 0.25 && squarings < 60) {
        norm *= 0.5;
        ++squarings;
    }
    Eigen::MatrixXd scaled = a / std::pow(2.0, squarings);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = (term * scaled / static_cast<double>(k)).eval();
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
    return sum;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64{seed}; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n01(rng);
    return m;
}

// Strictly increasing random times on [0, span].
inline std::vector<double> random_times(std::mt19937_64& rng, int n, double span) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (auto& v : t) v = uniform(rng, 0.0, span);
    std::sort(t.begin(), t.end());
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] - t[i - 1] < 1e-6 * span / n) t[i] = t[i - 1] + 1e-6 * span / n;
    return t;
}

}  // namespace testsupport

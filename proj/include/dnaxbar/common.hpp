#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dnaxbar {

using Matrix = Eigen::MatrixXd;
using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Malformed or out-of-contract input (CLI exit code 1).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Singular systems, non-convergence and other numerical breakdowns (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double planck = 6.62607015e-34;               // J s
inline constexpr double boltzmann_ev = 8.617333262e-5;         // eV / K
// 2 q^2 / h, the spin-degenerate conductance quantum (S).
inline constexpr double conductance_quantum = 2.0 * elementary_charge * elementary_charge / planck;
}  // namespace constants

}  // namespace dnaxbar

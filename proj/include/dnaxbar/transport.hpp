#pragma once

#include "dnaxbar/common.hpp"
#include "dnaxbar/iv_table.hpp"

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace dnaxbar {

// Fock/overlap input for one strand. Blocks are nucleotides ordered 3' -> 5'.
struct QuantumSystem {
    Matrix fock;                 // eV
    Matrix overlap;              // dimensionless
    std::vector<int> partition;  // orbitals per block
    double homo_energy_ev = 0.0;

    int n_orb() const { return static_cast<int>(fock.rows()); }
    int n_blocks() const { return static_cast<int>(partition.size()); }

    // Shape, symmetry (1e-12 relative), partition sum. Positive definiteness
    // of the overlap is checked where it is factorized.
    void validate() const;
};

struct ContactProbeConfig {
    double gamma_contact_ev = 1.0;  // Gamma_L = Gamma_R
    double gamma_probe_ev = 0.010;  // Gamma_k on every interior block

    void validate() const;
};

struct BiasPoint {
    double v_bias = 0.0;           // V
    double e_fermi_left_ev = 0.0;  // eV
    double temperature_k = 300.0;  // K

    double e_fermi_right_ev() const { return e_fermi_left_ev + v_bias; }
    double kt_ev() const { return constants::boltzmann_ev * temperature_k; }
};

struct TransmissionSpectrum {
    std::vector<double> energies;  // eV, strictly increasing
    std::vector<double> t_eff;
    std::vector<double> t_coherent;
};

// Orbital ranges of the terminals attached to a partitioned system. Terminal 0
// is the left contact (first block), 1 the right contact (last block), and
// 2.. the decoherence probes on the interior blocks in strand order. A single
// block carries both contacts.
class TerminalLayout {
public:
    struct Range {
        int offset = 0;
        int size = 0;
    };

    explicit TerminalLayout(std::span<const int> partition);

    int count() const { return 2 + static_cast<int>(probes_.size()); }
    int probe_count() const { return static_cast<int>(probes_.size()); }
    int n_orb() const { return n_orb_; }
    const Range& terminal(int k) const;
    const std::vector<Range>& blocks() const { return blocks_; }

private:
    std::vector<Range> blocks_;
    Range left_, right_;
    std::vector<Range> probes_;
    int n_orb_ = 0;
};

// S^{-1/2} F S^{-1/2}. Rejects overlaps whose smallest eigenvalue is <= 1e-10.
Matrix lowdin_orthogonalize(const Matrix& fock, const Matrix& overlap);

struct BlockDiagonalization {
    Matrix h_b;  // U^T H_a U
    Matrix u;    // block-diagonal, orthogonal
};

// Diagonalizes every diagonal block of h_a with that block's eigenvectors.
// Eigenvector signs are fixed so each column's largest component is positive.
BlockDiagonalization block_diagonalize(const Matrix& h_a, std::span<const int> partition);

// Potential V_n per block for the linear ramp: 0 at the first block, V_bias at
// the last, 0.4 -> 0.6 of V_bias linearly across the interior. N = 3 puts the
// single interior block at 0.5 V_bias; N = 1 uses 0.5 V_bias.
std::vector<double> bias_ramp_profile(int n_blocks, double v_bias);

// Adds q V_n (numerically V_n in eV) to the diagonal of block n.
Matrix apply_bias_ramp(const Matrix& h_b, double v_bias, std::span<const int> partition);

// Solves [E - (H + Sigma_L + Sigma_R + Sigma_B)] G = I by LU.
Eigen::MatrixXcd retarded_green(double energy, const Matrix& h, const TerminalLayout& layout,
                                const ContactProbeConfig& config);

// Terminal-to-terminal transmissions T_kl = Tr[Gamma_k G Gamma_l G^dagger].
struct TerminalTransmissions {
    Matrix t;                    // count x count, zero diagonal
    Eigen::VectorXd reflection;  // R_kk = 1 - sum_{l != k} T_kl

    int probe_count() const { return static_cast<int>(t.rows()) - 2; }
};

TerminalTransmissions probe_transmissions(const Eigen::MatrixXcd& g_r, const TerminalLayout& layout,
                                          const ContactProbeConfig& config);

struct EffectiveTransmission {
    double t_eff = 0.0;
    double t_coherent = 0.0;
    // (f_k - f_L) / (f_R - f_L) for each probe, from the zero-current condition.
    Eigen::VectorXd probe_occupation;
};

// T_eff = T_LR + sum_kl T_Lk (W^-1)_kl T_lR with W applied through an LU solve.
EffectiveTransmission effective_transmission(const TerminalTransmissions& tm);

TransmissionSpectrum transmission_spectrum(const Matrix& h, const TerminalLayout& layout,
                                           const ContactProbeConfig& config, std::span<const double> energies,
                                           unsigned threads = 1);

double fermi(double energy, double mu, double kt);

// Uniform grid over [mu_min - 10 kT, mu_max + 10 kT] with spacing at most
// max_step_ev and at most kT / 4.
std::vector<double> energy_grid(const BiasPoint& bias, double max_step_ev = 1e-3);

// I = (2q^2/h) * integral T_eff(E) [f_R(E) - f_L(E)] dE, trapezoidal. Positive
// for V_bias > 0 (electrons flow from the right contact into the left one).
double landauer_current(const TransmissionSpectrum& spectrum, const BiasPoint& bias);

// Orthogonalized, block-diagonalized, unbiased Hamiltonian ready for sweeps.
struct PreparedSystem {
    Matrix h_b;
    std::vector<int> partition;
    double homo_energy_ev = 0.0;
};

PreparedSystem prepare_system(const QuantumSystem& system);

struct SweepOptions {
    double temperature_k = 300.0;
    double max_step_ev = 1e-3;
    int threads = 0;
    std::string strand_id = "strand";
};

// Current table over v_grid x delta_grid with E_fL = HOMO + delta.
IVTable iv_sweep(const QuantumSystem& system, const ContactProbeConfig& config, std::span<const double> v_grid,
                 std::span<const double> delta_grid, const SweepOptions& options = {});

// Highest zero-bias transmission peak in [gap_reference - span, gap_reference].
double propose_homo_energy(const QuantumSystem& system, const ContactProbeConfig& config,
                           double gap_reference_ev, double search_span_ev = 2.0, double step_ev = 1e-3);

// Tight-binding chain used in place of DFT output.
struct ChainParams {
    int n_blocks = 7;
    int orbitals_per_block = 1;
    std::vector<double> onsite_ev;       // per block, cycled; default -5.2 eV
    double intra_block_spread_ev = 0.3;  // orbital k of a block sits at onsite + k * spread
    double intra_coupling_ev = 0.05;     // between orbitals inside a block
    double hopping_ev = -0.1;            // between neighbouring blocks, orbital to orbital
    double overlap_neighbor = 0.0;       // overlap between neighbouring blocks
    double homo_energy_ev = -5.2;
};

QuantumSystem tight_binding_chain(const ChainParams& params);

}  // namespace dnaxbar

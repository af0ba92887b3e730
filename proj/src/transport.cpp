#include "dnaxbar/transport.hpp"
#include "dnaxbar/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dnaxbar {

namespace {

constexpr double kOverlapFloor = 1e-10;

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

bool symmetric_within(const Matrix& a, double rel) {
    return max_abs(a - a.transpose()) <= rel * std::max(1.0, max_abs(a));
}

void check_partition(std::span<const int> partition, Eigen::Index n, const char* who) {
    if (partition.empty()) throw InputError(std::string(who) + ": partition is empty");
    long sum = 0;
    for (int p : partition) {
        if (p <= 0) throw InputError(std::string(who) + ": partition entries must be positive");
        sum += p;
    }
    if (sum != n) {
        std::ostringstream os;
        os << who << ": partition sums to " << sum << " but the matrix has " << n << " orbitals";
        throw InputError(os.str());
    }
}

bool strictly_increasing(std::span<const double> g) {
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) return false;
    return true;
}

}  // namespace

void QuantumSystem::validate() const {
    if (fock.rows() == 0 || fock.rows() != fock.cols())
        throw InputError("quantum system: fock must be a non-empty square matrix");
    if (overlap.rows() != fock.rows() || overlap.cols() != fock.cols())
        throw InputError("quantum system: overlap and fock dimensions differ");
    if (!fock.allFinite() || !overlap.allFinite()) throw InputError("quantum system: non-finite matrix entry");
    if (!symmetric_within(fock, 1e-12)) throw InputError("quantum system: fock is not symmetric");
    if (!symmetric_within(overlap, 1e-12)) throw InputError("quantum system: overlap is not symmetric");
    check_partition(partition, fock.rows(), "quantum system");
}

void ContactProbeConfig::validate() const {
    if (!(gamma_contact_ev > 0.0) || !std::isfinite(gamma_contact_ev))
        throw InputError("contact coupling must be positive");
    if (!(gamma_probe_ev >= 0.0) || !std::isfinite(gamma_probe_ev))
        throw InputError("probe coupling must be non-negative");
}

TerminalLayout::TerminalLayout(std::span<const int> partition) {
    if (partition.empty()) throw InputError("terminal layout: partition is empty");
    int offset = 0;
    for (int p : partition) {
        if (p <= 0) throw InputError("terminal layout: partition entries must be positive");
        blocks_.push_back({offset, p});
        offset += p;
    }
    n_orb_ = offset;
    left_ = blocks_.front();
    right_ = blocks_.back();
    for (std::size_t b = 1; b + 1 < blocks_.size(); ++b) probes_.push_back(blocks_[b]);
}

const TerminalLayout::Range& TerminalLayout::terminal(int k) const {
    if (k == 0) return left_;
    if (k == 1) return right_;
    return probes_.at(static_cast<std::size_t>(k - 2));
}

Matrix lowdin_orthogonalize(const Matrix& fock, const Matrix& overlap) {
    if (fock.rows() != fock.cols() || overlap.rows() != fock.rows() || overlap.cols() != fock.cols())
        throw InputError("lowdin: fock and overlap must be square and of equal size");
    Eigen::SelfAdjointEigenSolver<Matrix> es(overlap);
    if (es.info() != Eigen::Success) throw NumericalError("lowdin: overlap eigendecomposition failed");
    const double smallest = es.eigenvalues().minCoeff();
    if (!(smallest > kOverlapFloor)) {
        std::ostringstream os;
        os << "lowdin: overlap is not positive definite (smallest eigenvalue " << smallest << ")";
        throw InputError(os.str());
    }
    const Matrix s_inv_half =
        es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    Matrix h = s_inv_half * fock * s_inv_half;
    return 0.5 * (h + h.transpose());
}

BlockDiagonalization block_diagonalize(const Matrix& h_a, std::span<const int> partition) {
    if (h_a.rows() != h_a.cols()) throw InputError("block_diagonalize: matrix must be square");
    check_partition(partition, h_a.rows(), "block_diagonalize");
    const auto n = h_a.rows();
    BlockDiagonalization out;
    out.u = Matrix::Zero(n, n);
    Eigen::Index off = 0;
    for (int size : partition) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(h_a.block(off, off, size, size));
        if (es.info() != Eigen::Success) throw NumericalError("block_diagonalize: block eigensolver failed");
        Matrix vecs = es.eigenvectors();
        for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
            Eigen::Index r = 0;
            vecs.col(c).cwiseAbs().maxCoeff(&r);
            if (vecs(r, c) < 0.0) vecs.col(c) *= -1.0;
        }
        out.u.block(off, off, size, size) = vecs;
        off += size;
    }
    Matrix h = out.u.transpose() * h_a * out.u;
    out.h_b = 0.5 * (h + h.transpose());
    return out;
}

std::vector<double> bias_ramp_profile(int n_blocks, double v_bias) {
    if (n_blocks < 1) throw InputError("bias ramp: need at least one block");
    if (n_blocks == 1) return {0.5 * v_bias};
    std::vector<double> v(static_cast<std::size_t>(n_blocks));
    v.front() = 0.0;
    v.back() = v_bias;
    if (n_blocks == 3) {
        v[1] = 0.5 * v_bias;
    } else {
        // 0.4 + 0.2 (b - 2) / (N - 3) as one integer ratio, so each fraction is correctly rounded.
        const int den = 5 * (n_blocks - 3);
        for (int b = 2; b <= n_blocks - 1; ++b)
            v[static_cast<std::size_t>(b - 1)] =
                v_bias * (static_cast<double>(2 * (n_blocks - 3) + (b - 2)) / static_cast<double>(den));
    }
    return v;
}

Matrix apply_bias_ramp(const Matrix& h_b, double v_bias, std::span<const int> partition) {
    check_partition(partition, h_b.rows(), "apply_bias_ramp");
    const auto shifts = bias_ramp_profile(static_cast<int>(partition.size()), v_bias);
    Matrix h = h_b;
    Eigen::Index off = 0;
    for (std::size_t b = 0; b < partition.size(); ++b) {
        for (int k = 0; k < partition[b]; ++k) h(off + k, off + k) += shifts[b];
        off += partition[b];
    }
    return h;
}

Eigen::MatrixXcd retarded_green(double energy, const Matrix& h, const TerminalLayout& layout,
                                const ContactProbeConfig& config) {
    if (h.rows() != layout.n_orb() || h.cols() != layout.n_orb())
        throw InputError("retarded_green: Hamiltonian size does not match the partition");
    const auto n = h.rows();
    Eigen::MatrixXcd a = (-h).cast<std::complex<double>>();
    a.diagonal().array() += energy;
    // E - Sigma adds +i Gamma / 2 on every coupled orbital.
    auto couple = [&](const TerminalLayout::Range& r, double gamma) {
        for (int k = 0; k < r.size; ++k) a(r.offset + k, r.offset + k) += std::complex<double>(0.0, 0.5 * gamma);
    };
    couple(layout.terminal(0), config.gamma_contact_ev);
    couple(layout.terminal(1), config.gamma_contact_ev);
    for (int k = 2; k < layout.count(); ++k) couple(layout.terminal(k), config.gamma_probe_ev);

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    Eigen::MatrixXcd g = lu.solve(Eigen::MatrixXcd::Identity(n, n));
    if (!g.allFinite()) throw NumericalError("retarded_green: singular system matrix");
    return g;
}

TerminalTransmissions probe_transmissions(const Eigen::MatrixXcd& g_r, const TerminalLayout& layout,
                                          const ContactProbeConfig& config) {
    const int count = layout.count();
    auto gamma = [&](int k) { return k < 2 ? config.gamma_contact_ev : config.gamma_probe_ev; };
    TerminalTransmissions tm;
    tm.t = Matrix::Zero(count, count);
    // Gamma_k = gamma_k on the block identity, so the trace reduces to a sum of |G_ab|^2.
    for (int k = 0; k < count; ++k) {
        const auto& rk = layout.terminal(k);
        for (int l = 0; l < count; ++l) {
            if (l == k) continue;
            const auto& rl = layout.terminal(l);
            const double s = g_r.block(rk.offset, rl.offset, rk.size, rl.size).cwiseAbs2().sum();
            tm.t(k, l) = gamma(k) * gamma(l) * s;
        }
    }
    tm.reflection = Eigen::VectorXd::Ones(count) - tm.t.rowwise().sum();
    return tm;
}

EffectiveTransmission effective_transmission(const TerminalTransmissions& tm) {
    EffectiveTransmission out;
    out.t_coherent = tm.t(0, 1);
    out.t_eff = out.t_coherent;
    const int np = tm.probe_count();
    out.probe_occupation = Eigen::VectorXd::Zero(np);
    if (np == 0) return out;

    Matrix w = -tm.t.bottomRightCorner(np, np);
    for (int k = 0; k < np; ++k) w(k, k) = tm.t.row(k + 2).sum();
    if (max_abs(w) == 0.0) return out;  // probes decoupled

    const Eigen::VectorXd t_pr = tm.t.col(1).tail(np);
    Eigen::PartialPivLU<Matrix> lu(w);
    Eigen::VectorXd x = lu.solve(t_pr);
    if (!x.allFinite()) return out;
    out.probe_occupation = x;
    out.t_eff = out.t_coherent + tm.t.row(0).tail(np).dot(x);
    return out;
}

TransmissionSpectrum transmission_spectrum(const Matrix& h, const TerminalLayout& layout,
                                           const ContactProbeConfig& config, std::span<const double> energies,
                                           unsigned threads) {
    config.validate();
    TransmissionSpectrum s;
    s.energies.assign(energies.begin(), energies.end());
    s.t_eff.assign(energies.size(), 0.0);
    s.t_coherent.assign(energies.size(), 0.0);
    parallel_for(energies.size(), threads, [&](std::size_t i) {
        const auto g = retarded_green(energies[i], h, layout, config);
        const auto e = effective_transmission(probe_transmissions(g, layout, config));
        s.t_eff[i] = e.t_eff;
        s.t_coherent[i] = e.t_coherent;
    });
    return s;
}

double fermi(double energy, double mu, double kt) {
    const double x = (energy - mu) / kt;
    if (x > 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

std::vector<double> energy_grid(const BiasPoint& bias, double max_step_ev) {
    if (!(bias.temperature_k > 0.0)) throw InputError("temperature must be positive");
    if (!(max_step_ev > 0.0)) throw InputError("energy step must be positive");
    const double kt = bias.kt_ev();
    const double lo = std::min(bias.e_fermi_left_ev, bias.e_fermi_right_ev()) - 10.0 * kt;
    const double hi = std::max(bias.e_fermi_left_ev, bias.e_fermi_right_ev()) + 10.0 * kt;
    const double step = std::min(max_step_ev, kt / 4.0);
    const auto intervals = static_cast<std::size_t>(std::ceil((hi - lo) / step - 1e-9));
    std::vector<double> e(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i)
        e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(intervals);
    e.back() = hi;
    return e;
}

double landauer_current(const TransmissionSpectrum& spectrum, const BiasPoint& bias) {
    const auto& e = spectrum.energies;
    if (e.size() < 2 || spectrum.t_eff.size() != e.size())
        throw InputError("landauer_current: spectrum needs at least two points and matching lengths");
    if (!strictly_increasing(e)) throw InputError("landauer_current: energies must be strictly increasing");
    const double kt = bias.kt_ev();
    if (!(kt > 0.0)) throw InputError("landauer_current: temperature must be positive");
    const double mu_l = bias.e_fermi_left_ev;
    const double mu_r = bias.e_fermi_right_ev();
    const double lo = std::min(mu_l, mu_r) - 10.0 * kt;
    const double hi = std::max(mu_l, mu_r) + 10.0 * kt;
    const double slack = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (e.front() > lo + slack || e.back() < hi - slack) {
        std::ostringstream os;
        os << "landauer_current: spectrum covers [" << e.front() << ", " << e.back()
           << "] eV but the bias window requires at least [" << lo << ", " << hi << "] eV";
        throw InputError(os.str());
    }
    if (mu_l == mu_r) return 0.0;

    double integral = 0.0;
    double prev = spectrum.t_eff[0] * (fermi(e[0], mu_r, kt) - fermi(e[0], mu_l, kt));
    for (std::size_t i = 1; i < e.size(); ++i) {
        const double cur = spectrum.t_eff[i] * (fermi(e[i], mu_r, kt) - fermi(e[i], mu_l, kt));
        integral += 0.5 * (prev + cur) * (e[i] - e[i - 1]);
        prev = cur;
    }
    // Energies in eV: G0 times the integral in eV gives amperes.
    return constants::conductance_quantum * integral;
}

PreparedSystem prepare_system(const QuantumSystem& system) {
    system.validate();
    PreparedSystem p;
    p.h_b = block_diagonalize(lowdin_orthogonalize(system.fock, system.overlap), system.partition).h_b;
    p.partition = system.partition;
    p.homo_energy_ev = system.homo_energy_ev;
    return p;
}

IVTable iv_sweep(const QuantumSystem& system, const ContactProbeConfig& config, std::span<const double> v_grid,
                 std::span<const double> delta_grid, const SweepOptions& options) {
    config.validate();
    if (v_grid.empty() || delta_grid.empty()) throw InputError("iv_sweep: grids must be non-empty");
    if (!strictly_increasing(v_grid) || !strictly_increasing(delta_grid))
        throw InputError("iv_sweep: grids must be strictly increasing");
    const PreparedSystem prep = prepare_system(system);
    const TerminalLayout layout(prep.partition);

    IVTable t;
    t.strand_id = options.strand_id;
    t.v_grid.assign(v_grid.begin(), v_grid.end());
    t.delta_grid.assign(delta_grid.begin(), delta_grid.end());
    t.current = Matrix::Zero(static_cast<Eigen::Index>(delta_grid.size()), static_cast<Eigen::Index>(v_grid.size()));

    const std::size_t nv = v_grid.size();
    const std::size_t points = nv * delta_grid.size();
    std::vector<double> out(points, 0.0);
    parallel_for(points, resolve_threads(options.threads), [&](std::size_t idx) {
        const std::size_t d = idx / nv;
        const std::size_t v = idx % nv;
        BiasPoint bias{v_grid[v], prep.homo_energy_ev + delta_grid[d], options.temperature_k};
        if (bias.v_bias == 0.0) return;
        const Matrix h = apply_bias_ramp(prep.h_b, bias.v_bias, prep.partition);
        const auto energies = energy_grid(bias, options.max_step_ev);
        const auto spectrum = transmission_spectrum(h, layout, config, energies, 1);
        out[idx] = landauer_current(spectrum, bias);
    });
    for (std::size_t idx = 0; idx < points; ++idx)
        t.current(static_cast<Eigen::Index>(idx / nv), static_cast<Eigen::Index>(idx % nv)) = out[idx];
    return t;
}

double propose_homo_energy(const QuantumSystem& system, const ContactProbeConfig& config, double gap_reference_ev,
                           double search_span_ev, double step_ev) {
    if (!(search_span_ev > 0.0) || !(step_ev > 0.0)) throw InputError("propose_homo_energy: span and step must be positive");
    const PreparedSystem prep = prepare_system(system);
    const TerminalLayout layout(prep.partition);
    const auto count = static_cast<std::size_t>(std::ceil(search_span_ev / step_ev));
    std::vector<double> e(count + 1);
    for (std::size_t i = 0; i <= count; ++i)
        e[i] = gap_reference_ev - search_span_ev + search_span_ev * static_cast<double>(i) / static_cast<double>(count);
    const auto s = transmission_spectrum(prep.h_b, layout, config, e, 1);
    for (std::size_t i = count - 1; i >= 1; --i)
        if (s.t_eff[i] >= s.t_eff[i - 1] && s.t_eff[i] > s.t_eff[i + 1]) return e[i];
    throw InputError("propose_homo_energy: no transmission peak below the gap reference in the search window");
}

}  // namespace dnaxbar

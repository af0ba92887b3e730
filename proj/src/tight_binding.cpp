#include "dnaxbar/transport.hpp"

namespace dnaxbar {

QuantumSystem tight_binding_chain(const ChainParams& p) {
    if (p.n_blocks < 1 || p.orbitals_per_block < 1)
        throw InputError("tight_binding_chain: need at least one block and one orbital per block");
    const int nb = p.n_blocks;
    const int no = p.orbitals_per_block;
    const int n = nb * no;
    const std::vector<double> onsite = p.onsite_ev.empty() ? std::vector<double>{-5.2} : p.onsite_ev;

    QuantumSystem s;
    s.fock = Matrix::Zero(n, n);
    s.overlap = Matrix::Identity(n, n);
    s.partition.assign(static_cast<std::size_t>(nb), no);
    s.homo_energy_ev = p.homo_energy_ev;

    for (int b = 0; b < nb; ++b) {
        const double eps = onsite[static_cast<std::size_t>(b) % onsite.size()];
        for (int k = 0; k < no; ++k) {
            const int i = b * no + k;
            s.fock(i, i) = eps + k * p.intra_block_spread_ev;
            if (k + 1 < no) s.fock(i, i + 1) = s.fock(i + 1, i) = p.intra_coupling_ev;
            if (b + 1 < nb) {
                const int j = i + no;
                s.fock(i, j) = s.fock(j, i) = p.hopping_ev;
                s.overlap(i, j) = s.overlap(j, i) = p.overlap_neighbor;
            }
        }
    }
    s.validate();
    return s;
}

}  // namespace dnaxbar

#include "qeno/quantum.hpp"

#include <bit>
#include <cmath>

namespace qeno {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

void check_qubits(int q) {
    if (q < 1 || q > 12) {
        throw ContractError("statevector qubit count must be in [1,12], got " + std::to_string(q));
    }
}

}  // namespace

StateVector StateVector::ground(int q) {
    check_qubits(q);
    StateVector psi;
    psi.q = q;
    psi.amps.assign(std::size_t{1} << q, Amp{0.0, 0.0});
    psi.amps[0] = Amp{1.0, 0.0};
    return psi;
}

void StateVector::reset_ground() {
    std::fill(amps.begin(), amps.end(), Amp{0.0, 0.0});
    amps[0] = Amp{1.0, 0.0};
}

double StateVector::norm_sq() const {
    double acc = 0.0;
    for (const Amp& a : amps) acc += std::norm(a);
    return acc;
}

void apply_rx(StateVector& psi, int qubit, double theta) {
    if (qubit < 0 || qubit >= psi.q) throw ContractError("apply_rx: qubit index out of range");
    const double c = std::cos(theta * 0.5), s = std::sin(theta * 0.5);
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t n = psi.amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i & mask) continue;
        Amp a = psi.amps[i], b = psi.amps[i | mask];
        // [[c, -is], [-is, c]]
        psi.amps[i] = Amp{c * a.real() + s * b.imag(), c * a.imag() - s * b.real()};
        psi.amps[i | mask] = Amp{s * a.imag() + c * b.real(), -s * a.real() + c * b.imag()};
    }
}

void apply_ry(StateVector& psi, int qubit, double theta) {
    if (qubit < 0 || qubit >= psi.q) throw ContractError("apply_ry: qubit index out of range");
    const double c = std::cos(theta * 0.5), s = std::sin(theta * 0.5);
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t n = psi.amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i & mask) continue;
        Amp a = psi.amps[i], b = psi.amps[i | mask];
        // [[c, -s], [s, c]]
        psi.amps[i] = c * a - s * b;
        psi.amps[i | mask] = s * a + c * b;
    }
}

void apply_rz(StateVector& psi, int qubit, double theta) {
    if (qubit < 0 || qubit >= psi.q) throw ContractError("apply_rz: qubit index out of range");
    const double c = std::cos(theta * 0.5), s = std::sin(theta * 0.5);
    const Amp e0{c, -s}, e1{c, s};  // diag(e^{-i t/2}, e^{+i t/2})
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t n = psi.amps.size();
    for (std::size_t i = 0; i < n; ++i) psi.amps[i] *= (i & mask) ? e1 : e0;
}

void apply_cnot(StateVector& psi, int control, int target) {
    if (control < 0 || control >= psi.q || target < 0 || target >= psi.q || control == target) {
        throw ContractError("apply_cnot: bad qubit pair (" + std::to_string(control) + "," +
                            std::to_string(target) + ") for q=" + std::to_string(psi.q));
    }
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    const std::size_t n = psi.amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((i & cmask) && !(i & tmask)) std::swap(psi.amps[i], psi.amps[i | tmask]);
    }
}

StateVector angle_encode(const std::vector<double>& phi_enc, int q) {
    check_qubits(q);
    if (static_cast<int>(phi_enc.size()) != q) {
        throw ContractError("angle_encode: expected " + std::to_string(q) + " phases, got " +
                            std::to_string(phi_enc.size()));
    }
    StateVector psi = StateVector::ground(q);
    for (int i = 0; i < q; ++i) apply_ry(psi, i, phi_enc[static_cast<std::size_t>(i)]);
    return psi;
}

void apply_layer(StateVector& psi, const double* rx, const double* ry, const double* rz,
                 const EntanglementGraph& graph) {
    if (graph.q != psi.q) {
        throw ContractError("apply_layer: graph is for q=" + std::to_string(graph.q) +
                            " but state has q=" + std::to_string(psi.q));
    }
    for (int i = 0; i < psi.q; ++i) apply_rx(psi, i, rx[i]);
    for (int i = 0; i < psi.q; ++i) apply_ry(psi, i, ry[i]);
    for (int i = 0; i < psi.q; ++i) apply_rz(psi, i, rz[i]);
    for (auto [c, t] : graph.edges) apply_cnot(psi, c, t);
}

void run_circuit_into(const double* phi, const EntanglementGraph& graph, int layers,
                      StateVector& psi) {
    psi.reset_ground();
    const int q = psi.q;
    const PhaseLayout lay{q, layers};
    for (int i = 0; i < q; ++i) apply_ry(psi, i, phi[lay.encoding() + i]);
    for (int l = 0; l < layers; ++l) {
        apply_layer(psi, phi + lay.layer(l, 0), phi + lay.layer(l, 1), phi + lay.layer(l, 2), graph);
    }
}

StateVector run_circuit(const std::vector<double>& phi, const EntanglementGraph& graph, int layers) {
    if (layers < 1) throw ContractError("run_circuit: layers must be >= 1");
    check_qubits(graph.q);
    const PhaseLayout lay{graph.q, layers};
    if (static_cast<int>(phi.size()) != lay.size()) {
        throw ContractError("run_circuit: expected " + std::to_string(lay.size()) + " phases, got " +
                            std::to_string(phi.size()));
    }
    StateVector psi = StateVector::ground(graph.q);
    run_circuit_into(phi.data(), graph, layers, psi);
    return psi;
}

void measure_into(const StateVector& psi, const std::vector<PauliObservable>& obs, double* out) {
    if (obs.empty()) throw ContractError("measure: observable list must be nonempty");
    const std::size_t n = psi.amps.size();
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const PauliObservable& o = obs[j];
        double acc = 0.0;
        if (o.kind == PauliObservable::Kind::LocalZ) {
            if (o.qubit < 0 || o.qubit >= psi.q)
                throw ContractError("measure: LocalZ qubit " + std::to_string(o.qubit) +
                                    " out of range for q=" + std::to_string(psi.q));
            const std::size_t mask = std::size_t{1} << o.qubit;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::norm(psi.amps[i]);
                acc += (i & mask) ? -p : p;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::norm(psi.amps[i]);
                acc += (std::popcount(i) & 1) ? -p : p;
            }
        }
        out[j] = acc;
    }
}

std::vector<double> measure(const StateVector& psi, const std::vector<PauliObservable>& obs) {
    std::vector<double> m(obs.size(), 0.0);
    measure_into(psi, obs, m.data());
    return m;
}

std::vector<double> parameter_shift_grad(const std::vector<double>& phi,
                                         const EntanglementGraph& graph, int layers,
                                         const std::vector<PauliObservable>& obs) {
    const std::size_t n_phi = phi.size();
    const std::size_t n_obs = obs.size();
    std::vector<double> grads(n_obs * n_phi, 0.0);
    std::vector<double> shifted = phi;
    std::vector<double> m_plus(n_obs), m_minus(n_obs);
    StateVector psi = StateVector::ground(graph.q);
    for (std::size_t k = 0; k < n_phi; ++k) {
        shifted[k] = phi[k] + kHalfPi;
        run_circuit_into(shifted.data(), graph, layers, psi);
        measure_into(psi, obs, m_plus.data());
        shifted[k] = phi[k] - kHalfPi;
        run_circuit_into(shifted.data(), graph, layers, psi);
        measure_into(psi, obs, m_minus.data());
        shifted[k] = phi[k];
        for (std::size_t j = 0; j < n_obs; ++j) {
            grads[j * n_phi + k] = 0.5 * (m_plus[j] - m_minus[j]);
        }
    }
    return grads;
}

}  // namespace qeno

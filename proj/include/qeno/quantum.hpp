#pragma once

#include <complex>
#include <vector>

#include "qeno/topology.hpp"

namespace qeno {

using Amp = std::complex<double>;

/// 2^q complex amplitudes; index i encodes basis |b_{q-1}...b_0> with
/// qubit 0 as the least-significant bit.
struct StateVector {
    int q = 0;
    std::vector<Amp> amps;

    static StateVector ground(int q);
    void reset_ground();
    double norm_sq() const;
};

struct PauliObservable {
    enum class Kind { LocalZ, GlobalParity };
    Kind kind = Kind::LocalZ;
    int qubit = 0;  // LocalZ only

    static PauliObservable local_z(int qubit) { return {Kind::LocalZ, qubit}; }
    static PauliObservable global_parity() { return {Kind::GlobalParity, 0}; }
};

/// Offsets into the flat phase vector: [encoding(q)] then per layer
/// [rx(q), ry(q), rz(q)].
struct PhaseLayout {
    int q = 0;
    int layers = 0;

    int size() const { return q * (1 + 3 * layers); }
    int encoding() const { return 0; }
    // family: 0 = rx, 1 = ry, 2 = rz
    int layer(int l, int family) const { return q * (1 + 3 * l + family); }
};

// ---- gate application (in place) ----
void apply_rx(StateVector& psi, int qubit, double theta);
void apply_ry(StateVector& psi, int qubit, double theta);
void apply_rz(StateVector& psi, int qubit, double theta);
void apply_cnot(StateVector& psi, int control, int target);

// |psi0> = prod_i Ry(phi_i) |0...0>
StateVector angle_encode(const std::vector<double>& phi_enc, int q);

// One evolution layer: RX then RY then RZ on every qubit, then CNOTs along
// the graph edges in listed order. Phase arrays each hold q values.
void apply_layer(StateVector& psi, const double* rx, const double* ry, const double* rz,
                 const EntanglementGraph& graph);

StateVector run_circuit(const std::vector<double>& phi, const EntanglementGraph& graph, int layers);
void run_circuit_into(const double* phi, const EntanglementGraph& graph, int layers,
                      StateVector& psi);

std::vector<double> measure(const StateVector& psi, const std::vector<PauliObservable>& obs);
void measure_into(const StateVector& psi, const std::vector<PauliObservable>& obs, double* out);

// Exact gradients d m_j / d phi_k via two shifted circuit evaluations per
// phase: (m(phi_k + pi/2) - m(phi_k - pi/2)) / 2. Row-major [obs x phases].
std::vector<double> parameter_shift_grad(const std::vector<double>& phi,
                                         const EntanglementGraph& graph, int layers,
                                         const std::vector<PauliObservable>& obs);

}  // namespace qeno

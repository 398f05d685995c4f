#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyqal/tensor.hpp"

namespace hyqal::qsim {

// Qubit q maps to bit q of the basis-state index (qubit 0 = least
// significant bit).
class StateVector {
  public:
    explicit StateVector(int num_qubits); // |0...0>

    int num_qubits() const { return num_qubits_; }
    std::size_t dim() const { return amps_.size(); }
    const std::vector<std::complex<double>>& amplitudes() const { return amps_; }
    std::complex<double> amplitude(std::size_t index) const { return amps_[index]; }

    void apply_ry(int qubit, double theta);
    void apply_rz(int qubit, double theta);
    void apply_cnot(int control, int target);

    double norm() const;

    // Amplitudes touched by gate kernels since construction. A single-qubit
    // gate accounts for exactly 2^Q; CNOT for 2^(Q-1) (the flipped half).
    std::uint64_t amplitudes_touched() const { return touched_; }

  private:
    void check_qubit(int qubit, const char* gate) const;

    int num_qubits_;
    std::vector<std::complex<double>> amps_;
    std::uint64_t touched_ = 0;
};

enum class Topology { ring, line, none };

Topology topology_from_string(const std::string& s);
std::string to_string(Topology t);

enum class Axis { ry, rz };

struct CircuitSpec {
    int num_qubits = 8;
    int num_layers = 2;
    Topology topology = Topology::ring;
    std::vector<Axis> axes = {Axis::ry, Axis::rz}; // rotations per qubit per layer, in order

    std::size_t num_axes() const { return axes.size(); }
    // Expected shape of the variational parameter tensor: [L, Q, axes].
    std::vector<std::size_t> theta_shape() const;
    void validate() const;
};

struct VariationalParams {
    Tensor theta; // [L, Q, num_axes], radians

    static VariationalParams zeros(const CircuitSpec& spec);
    // Uniform in [-0.1, 0.1]: near-identity start.
    static VariationalParams random_init(const CircuitSpec& spec, class Rng& rng);
};

// state = tensor product of RY(u_q)|0> over qubits.
StateVector angle_encode(std::span<const double> u);

// Per layer: the configured single-qubit rotations on every qubit, then CNOT
// entanglers along the topology (ring: CNOT(q, (q+1) mod Q)).
void apply_variational(StateVector& state, const CircuitSpec& spec, const VariationalParams& params);

// Per-qubit Pauli-Z expectations, each in [-1, 1].
std::vector<double> measure_z(const StateVector& state);

// encode + variational + measure, the quantum layer's forward map.
std::vector<double> run_circuit(std::span<const double> u, const CircuitSpec& spec,
                                const VariationalParams& params);

struct QuantumGradients {
    Tensor grad_u;     // [Q]
    Tensor grad_theta; // [L, Q, num_axes]
};

// Parameter-shift gradients for every rotation angle (encoding u and
// variational theta), chain-ruled against grad_wrt_q = dLoss/d<Z>.
QuantumGradients quantum_gradients(std::span<const double> u, const CircuitSpec& spec,
                                   const VariationalParams& params,
                                   std::span<const double> grad_wrt_q);

} // namespace hyqal::qsim

#include "hyqal/qsim.hpp"

#include <cmath>

#include "hyqal/parallel.hpp"
#include "hyqal/rng.hpp"

namespace hyqal::qsim {

StateVector::StateVector(int num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits < 1 || num_qubits > 16) {
        throw ShapeError("StateVector: num_qubits must be in [1,16], got " +
                         std::to_string(num_qubits));
    }
    amps_.assign(std::size_t{1} << num_qubits, {0.0, 0.0});
    amps_[0] = {1.0, 0.0};
}

void StateVector::check_qubit(int qubit, const char* gate) const {
    if (qubit < 0 || qubit >= num_qubits_) {
        throw ShapeError(std::string(gate) + ": qubit " + std::to_string(qubit) +
                         " out of range for " + std::to_string(num_qubits_) + " qubits");
    }
}

void StateVector::apply_ry(int qubit, double theta) {
    check_qubit(qubit, "ry");
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t lo_mask = mask - 1;
    const std::size_t hi_mask = ~lo_mask;
    const std::size_t pairs = amps_.size() >> 1;
    for (std::size_t i = 0; i < pairs; ++i) {
        const std::size_t i0 = ((i & hi_mask) << 1) | (i & lo_mask);
        const std::size_t i1 = i0 | mask;
        const std::complex<double> a0 = amps_[i0];
        const std::complex<double> a1 = amps_[i1];
        amps_[i0] = c * a0 - s * a1;
        amps_[i1] = s * a0 + c * a1;
    }
    touched_ += amps_.size();
}

void StateVector::apply_rz(int qubit, double theta) {
    check_qubit(qubit, "rz");
    const std::complex<double> phase_lo{std::cos(theta / 2.0), -std::sin(theta / 2.0)};
    const std::complex<double> phase_hi{std::cos(theta / 2.0), std::sin(theta / 2.0)};
    const std::size_t mask = std::size_t{1} << qubit;
    for (std::size_t k = 0; k < amps_.size(); ++k) {
        amps_[k] *= (k & mask) ? phase_hi : phase_lo;
    }
    touched_ += amps_.size();
}

void StateVector::apply_cnot(int control, int target) {
    check_qubit(control, "cnot");
    check_qubit(target, "cnot");
    if (control == target) {
        throw ShapeError("cnot: control and target must differ");
    }
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    for (std::size_t k = 0; k < amps_.size(); ++k) {
        // Swap each (target=0, target=1) pair once, where control bit is set.
        if ((k & cmask) && !(k & tmask)) {
            std::swap(amps_[k], amps_[k | tmask]);
        }
    }
    touched_ += amps_.size() >> 1;
}

double StateVector::norm() const {
    double sq = 0.0;
    for (const auto& a : amps_) {
        sq += std::norm(a);
    }
    return std::sqrt(sq);
}

Topology topology_from_string(const std::string& s) {
    if (s == "ring") return Topology::ring;
    if (s == "line") return Topology::line;
    if (s == "none") return Topology::none;
    throw DataError("unknown entanglement topology: " + s);
}

std::string to_string(Topology t) {
    switch (t) {
        case Topology::ring: return "ring";
        case Topology::line: return "line";
        case Topology::none: return "none";
    }
    return "?";
}

std::vector<std::size_t> CircuitSpec::theta_shape() const {
    return {static_cast<std::size_t>(num_layers), static_cast<std::size_t>(num_qubits),
            num_axes()};
}

void CircuitSpec::validate() const {
    if (num_qubits < 1 || num_qubits > 16) {
        throw DataError("CircuitSpec: num_qubits must be in [1,16]");
    }
    if (num_layers < 0) {
        throw DataError("CircuitSpec: num_layers must be >= 0");
    }
    if (axes.empty()) {
        throw DataError("CircuitSpec: at least one rotation axis per layer required");
    }
}

VariationalParams VariationalParams::zeros(const CircuitSpec& spec) {
    return {Tensor(spec.theta_shape())};
}

VariationalParams VariationalParams::random_init(const CircuitSpec& spec, Rng& rng) {
    VariationalParams p{Tensor(spec.theta_shape())};
    for (double& v : p.theta.values()) {
        v = rng.uniform(-0.1, 0.1);
    }
    return p;
}

StateVector angle_encode(std::span<const double> u) {
    StateVector state(static_cast<int>(u.size()));
    for (std::size_t q = 0; q < u.size(); ++q) {
        state.apply_ry(static_cast<int>(q), u[q]);
    }
    return state;
}

void apply_variational(StateVector& state, const CircuitSpec& spec,
                       const VariationalParams& params) {
    spec.validate();
    if (state.num_qubits() != spec.num_qubits) {
        throw ShapeError("apply_variational: state has " + std::to_string(state.num_qubits()) +
                         " qubits, spec expects " + std::to_string(spec.num_qubits));
    }
    if (params.theta.shape() != spec.theta_shape()) {
        throw ShapeError("apply_variational: theta " + params.theta.shape_str() +
                         " does not match spec " + shape_to_string(spec.theta_shape()));
    }
    const int q_count = spec.num_qubits;
    for (int layer = 0; layer < spec.num_layers; ++layer) {
        for (int q = 0; q < q_count; ++q) {
            for (std::size_t a = 0; a < spec.num_axes(); ++a) {
                const double angle = params.theta.at(static_cast<std::size_t>(layer),
                                                     static_cast<std::size_t>(q), a);
                if (spec.axes[a] == Axis::ry) {
                    state.apply_ry(q, angle);
                } else {
                    state.apply_rz(q, angle);
                }
            }
        }
        if (spec.topology == Topology::none || q_count < 2) {
            continue;
        }
        const int last = (spec.topology == Topology::ring) ? q_count : q_count - 1;
        for (int q = 0; q < last; ++q) {
            state.apply_cnot(q, (q + 1) % q_count);
        }
    }
}

std::vector<double> measure_z(const StateVector& state) {
    const int q_count = state.num_qubits();
    std::vector<double> expect(static_cast<std::size_t>(q_count), 0.0);
    const auto& amps = state.amplitudes();
    for (std::size_t k = 0; k < amps.size(); ++k) {
        const double p = std::norm(amps[k]);
        if (p == 0.0) continue;
        for (int q = 0; q < q_count; ++q) {
            expect[static_cast<std::size_t>(q)] += (k >> q) & 1 ? -p : p;
        }
    }
    return expect;
}

std::vector<double> run_circuit(std::span<const double> u, const CircuitSpec& spec,
                                const VariationalParams& params) {
    if (static_cast<int>(u.size()) != spec.num_qubits) {
        throw ShapeError("run_circuit: encoding vector has " + std::to_string(u.size()) +
                         " entries, spec expects " + std::to_string(spec.num_qubits));
    }
    StateVector state = angle_encode(u);
    apply_variational(state, spec, params);
    return measure_z(state);
}

namespace {

// Circuit evaluation with one angle shifted. Angle indices enumerate the Q
// encoding angles first, then theta in row-major [layer, qubit, axis] order.
std::vector<double> eval_shifted(std::span<const double> u, const CircuitSpec& spec,
                                 const VariationalParams& params, std::size_t angle_index,
                                 double shift) {
    const std::size_t q_count = static_cast<std::size_t>(spec.num_qubits);
    if (angle_index < q_count) {
        std::vector<double> shifted(u.begin(), u.end());
        shifted[angle_index] += shift;
        return run_circuit(shifted, spec, params);
    }
    VariationalParams shifted{params.theta};
    shifted.theta[angle_index - q_count] += shift;
    return run_circuit(u, spec, shifted);
}

} // namespace

QuantumGradients quantum_gradients(std::span<const double> u, const CircuitSpec& spec,
                                   const VariationalParams& params,
                                   std::span<const double> grad_wrt_q) {
    spec.validate();
    const std::size_t q_count = static_cast<std::size_t>(spec.num_qubits);
    if (u.size() != q_count || grad_wrt_q.size() != q_count) {
        throw ShapeError("quantum_gradients: u and grad_wrt_q must both have length " +
                         std::to_string(q_count));
    }
    const std::size_t n_angles = q_count + params.theta.size();
    std::vector<double> grad_flat(n_angles, 0.0);
    // Every rotation angle obeys the same +-pi/2 shift identity; evaluations
    // for distinct angles are independent.
    parallel_for(n_angles, [&](std::size_t a) {
        const std::vector<double> up = eval_shifted(u, spec, params, a, M_PI / 2.0);
        const std::vector<double> down = eval_shifted(u, spec, params, a, -M_PI / 2.0);
        double acc = 0.0;
        for (std::size_t j = 0; j < q_count; ++j) {
            acc += grad_wrt_q[j] * 0.5 * (up[j] - down[j]);
        }
        grad_flat[a] = acc;
    });
    QuantumGradients out{Tensor({q_count}), Tensor(spec.theta_shape())};
    for (std::size_t q = 0; q < q_count; ++q) {
        out.grad_u[q] = grad_flat[q];
    }
    for (std::size_t i = 0; i < params.theta.size(); ++i) {
        out.grad_theta[i] = grad_flat[q_count + i];
    }
    return out;
}

} // namespace hyqal::qsim

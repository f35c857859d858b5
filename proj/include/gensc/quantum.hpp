#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gensc/rng.hpp"
#include "gensc/tensor.hpp"

namespace gensc {

using cplx = std::complex<double>;

inline constexpr int kMaxStatevectorQubits = 12;
inline constexpr int kMaxDensityQubits = 10;

/// Pure n-qubit state. Qubit 0 is the most significant bit of the basis
/// index, so |10> (n = 2) is index 2.
class Statevector {
 public:
  /// |0...0>
  explicit Statevector(int n_qubits);

  /// Takes ownership of 2^n amplitudes; the norm must be 1 to 1e-12.
  static Statevector from_amplitudes(std::vector<cplx> amplitudes);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amps_.size(); }
  std::span<const cplx> amplitudes() const noexcept { return amps_; }
  cplx operator[](std::size_t i) const { return amps_[i]; }
  double norm() const noexcept;

  /// Raw access for gate kernels operating on a private copy.
  std::span<cplx> mutable_amplitudes() noexcept { return amps_; }

 private:
  Statevector(int n_qubits, std::vector<cplx> amps) : n_qubits_(n_qubits), amps_(std::move(amps)) {}

  int n_qubits_;
  std::vector<cplx> amps_;
};

struct DensityValidity {
  double hermiticity_error = 0.0;  // max |rho - rho^dagger|
  double trace_error = 0.0;        // |tr(rho) - 1|
  double min_eigenvalue = 0.0;

  bool ok(double tol = 1e-12, double psd_tol = 1e-10) const noexcept {
    return hermiticity_error <= tol && trace_error <= tol && min_eigenvalue >= -psd_tol;
  }
};

class DensityMatrix {
 public:
  static DensityMatrix from_statevector(const Statevector& s);
  /// Checks the shape (2^n square) and, when `validate` is set, the
  /// density-matrix invariants.
  static DensityMatrix from_matrix(Eigen::MatrixXcd rho, bool validate = true);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rho_.rows()); }
  const Eigen::MatrixXcd& matrix() const noexcept { return rho_; }
  cplx operator()(std::size_t r, std::size_t c) const { return rho_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)); }

  cplx trace() const { return rho_.trace(); }
  /// Real diagonal: computational-basis measurement probabilities.
  std::vector<double> probabilities() const;
  DensityValidity validity() const;
  double fidelity(const Statevector& pure) const;

  Eigen::MatrixXcd& mutable_matrix() noexcept { return rho_; }

 private:
  DensityMatrix(int n_qubits, Eigen::MatrixXcd rho) : n_qubits_(n_qubits), rho_(std::move(rho)) {}
  int n_qubits_;
  Eigen::MatrixXcd rho_;
};

// Gate kernels act in place on a 2^n amplitude buffer.
namespace gates {
using Matrix2 = std::array<cplx, 4>;  // row-major

void apply_1q(std::span<cplx> amps, int n_qubits, int qubit, const Matrix2& u);
void x(std::span<cplx> amps, int n_qubits, int qubit);
void z(std::span<cplx> amps, int n_qubits, int qubit);
void h(std::span<cplx> amps, int n_qubits, int qubit);
void ry(std::span<cplx> amps, int n_qubits, int qubit, double theta);
void cnot(std::span<cplx> amps, int n_qubits, int control, int target);
void cphase(std::span<cplx> amps, int n_qubits, int control, int target, double theta);
}  // namespace gates

/// Single-qubit Kraus channel {K_i}.
struct KrausChannel {
  std::vector<Eigen::Matrix2cd> operators;

  static KrausChannel bitflip(double p);
  static KrausChannel phaseflip(double p);

  /// max |sum_i K_i^dagger K_i - I|
  double completeness_error() const;
  DensityMatrix apply(const DensityMatrix& rho, int qubit) const;
};

/// rho' = (1-p) rho + p X_q rho X_q
DensityMatrix bitflip_channel(const DensityMatrix& rho, double p, int qubit);
/// rho' = (1-p) rho + p Z_q rho Z_q
DensityMatrix phaseflip_channel(const DensityMatrix& rho, double p, int qubit);

// ---------------------------------------------------------------------------
// Embeddings and entanglement

enum class Embedding { amplitude, angle };
enum class EntanglementKind { none, ring_cnot, controlled_phase };
enum class Readout { expectation_z, amplitude_readback };
enum class Correction { none, repetition3_bitflip, repetition3_phaseflip };
enum class RepetitionCode { bitflip, phaseflip };
enum class NoiseSimulation { trajectory, density_matrix };

std::string to_string(Embedding e);
std::string to_string(EntanglementKind k);
std::string to_string(Readout r);
std::string to_string(Correction c);
std::string to_string(NoiseSimulation s);
Embedding parse_embedding(const std::string& s);
EntanglementKind parse_entanglement(const std::string& s);
Readout parse_readout(const std::string& s);
Correction parse_correction(const std::string& s);
NoiseSimulation parse_noise_simulation(const std::string& s);

struct Entanglement {
  EntanglementKind kind = EntanglementKind::none;
  double theta = 3.141592653589793;  // controlled-phase angle
};

struct AmplitudeEmbedding {
  Statevector state;
  double norm = 0.0;
};

/// Zero-pads v to 2^n and divides by its Euclidean norm.
AmplitudeEmbedding amplitude_embed(std::span<const double> v, int n_qubits);

/// Product of RY(v_i)|0>: cos(v_i/2)|0> + sin(v_i/2)|1> per qubit; missing
/// angles are 0.
Statevector angle_embed(std::span<const double> v, int n_qubits);

/// Ring of CNOT(i, i+1 mod n) or CP(theta) on the same ring, i = 0..n-1.
/// For n = 2 the ring is the single edge (0, 1).
Statevector apply_entanglement(const Statevector& s, const Entanglement& e);
Statevector undo_entanglement(const Statevector& s, const Entanglement& e);
DensityMatrix apply_entanglement(const DensityMatrix& rho, const Entanglement& e);
DensityMatrix undo_entanglement(const DensityMatrix& rho, const Entanglement& e);

/// Independently per qubit: X with probability p_x, then Z with probability p_z.
Statevector monte_carlo_channel(const Statevector& s, double p_x, double p_z, RandomStream& stream);

// ---------------------------------------------------------------------------
// Three-qubit repetition codes

/// Leg to flip for a syndrome (parity of legs 0-1, parity of legs 1-2);
/// nullopt for the trivial syndrome.
std::optional<int> repetition_correction(bool parity01, bool parity12) noexcept;

/// Probability that majority decoding leaves a logical error under i.i.d.
/// flips with probability p, by enumerating all 8 error patterns through
/// repetition_correction. Templated so exact rational types can be used.
template <typename Real>
Real repetition_logical_error_rate(const Real& p) {
  const Real one(1);
  Real total(0);
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    Real prob = one;
    for (int leg = 0; leg < 3; ++leg) prob = prob * (((pattern >> leg) & 1U) ? p : one - p);
    const bool p01 = ((pattern >> 0) ^ (pattern >> 1)) & 1U;
    const bool p12 = ((pattern >> 1) ^ (pattern >> 2)) & 1U;
    unsigned residual = pattern;
    if (const auto leg = repetition_correction(p01, p12)) residual ^= 1U << *leg;
    if (residual == 0b111U) total = total + prob;
  }
  return total;
}

/// a|0> + b|1>  ->  a|000> + b|111> (bit-flip code) or the same in the
/// Hadamard basis (phase-flip code).
Statevector encode_repetition(const Statevector& s, RepetitionCode code);

/// Syndrome measurement, majority correction and unencoding on a 3-qubit
/// state; returns the logical qubit.
DensityMatrix decode_repetition(const DensityMatrix& rho, RepetitionCode code);

/// Encodes each of n logical qubits into physical qubits (3k, 3k+1, 3k+2).
Statevector encode_repetition_blocks(const Statevector& s, RepetitionCode code);
/// Block-wise decode of a 3n-qubit pure state. Syndromes are sampled from
/// `stream` (they are deterministic after Pauli errors).
Statevector decode_repetition_blocks(const Statevector& s, RepetitionCode code, RandomStream& stream);
DensityMatrix decode_repetition_blocks(const DensityMatrix& rho, RepetitionCode code);

// ---------------------------------------------------------------------------
// Readback

/// |a_i| * norm
std::vector<double> amplitude_readback(const Statevector& s, double recorded_norm);
/// sqrt(rho_ii) * norm
std::vector<double> amplitude_readback(const DensityMatrix& rho, double recorded_norm);
/// <Z_q> per qubit.
std::vector<double> expectation_z(const Statevector& s);
std::vector<double> expectation_z(const DensityMatrix& rho);

using QuantumState = std::variant<Statevector, DensityMatrix>;

/// amplitude-readback: amplitudes scaled by the recorded norm (magnitudes
/// only, so signs are recovered for non-negative inputs only).
/// expectation-Z: arccos(<Z_q>) per qubit, i.e. the RY angle.
FeatureTensor readback(const QuantumState& state, Readout readout, Embedding embedding, double recorded_norm);

// ---------------------------------------------------------------------------
// End-to-end

struct QuantumChannelConfig {
  Embedding embedding = Embedding::amplitude;
  int n_qubits = 4;  // physical qubits; with a repetition code, 3 per logical qubit
  Entanglement entanglement;
  double p_bitflip = 0.0;
  double p_phaseflip = 0.0;
  Correction correction = Correction::none;
  Readout readout = Readout::amplitude_readback;
  NoiseSimulation simulation = NoiseSimulation::trajectory;

  int logical_qubits() const noexcept { return correction == Correction::none ? n_qubits : n_qubits / 3; }
  /// Features carried per chunk.
  std::size_t chunk_capacity() const noexcept;
  void validate() const;
};

/// Chunks the tensor, and per chunk: embed -> entangle -> (encode) -> Pauli
/// noise -> (decode) -> disentangle -> readback. Angle chunks are min-max
/// scaled to [0, pi] with the range kept as side information; all-zero
/// amplitude chunks are passed as zeros.
FeatureTensor quantum_transmit(const FeatureTensor& t, const QuantumChannelConfig& cfg, RandomStream& stream);

/// |<a|b>|^2
double state_overlap(const Statevector& a, const Statevector& b);
/// Fidelity kernel |<phi(x)|phi(y)>|^2 for the given embedding.
double quantum_kernel(std::span<const double> x, std::span<const double> y, Embedding embedding, int n_qubits);

/// Debug dump: f64 tensor of shape [2^n, 2] holding interleaved (re, im).
FeatureTensor to_tensor(const Statevector& s);

}  // namespace gensc

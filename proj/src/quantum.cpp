#include "gensc/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gensc/error.hpp"

namespace gensc {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;

constexpr double kNormTol = 1e-12;

std::size_t bit_mask(int n_qubits, int qubit) noexcept { return std::size_t{1} << (n_qubits - 1 - qubit); }

bool bit_of(std::size_t index, int n_qubits, int qubit) noexcept {
  return (index & bit_mask(n_qubits, qubit)) != 0;
}

void check_qubit(int n_qubits, int qubit) {
  if (qubit < 0 || qubit >= n_qubits)
    throw Error(Errc::out_of_range, "qubit " + std::to_string(qubit) + " outside register of " +
                                        std::to_string(n_qubits));
}

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::out_of_range, "probability must lie in [0, 1]");
}

int qubits_for_dim(std::size_t dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0) throw Error(Errc::shape_mismatch, "dimension must be a power of two >= 2");
  int n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  return n;
}

std::span<cplx> column(MatrixXcd& m, Index c) { return {m.col(c).data(), static_cast<std::size_t>(m.rows())}; }

// rho <- U rho U^dagger for any linear map U given as an in-place kernel on
// column vectors.
template <typename Op>
void conjugate(MatrixXcd& rho, Op&& op) {
  for (Index c = 0; c < rho.cols(); ++c) op(column(rho, c));
  MatrixXcd t = rho.adjoint();
  for (Index c = 0; c < t.cols(); ++c) op(column(t, c));
  rho = t.adjoint();
}

gates::Matrix2 to_array(const Eigen::Matrix2cd& m) { return {m(0, 0), m(0, 1), m(1, 0), m(1, 1)}; }

// Ring edges of the entanglement layer; a 2-qubit ring is a single edge.
std::vector<std::pair<int, int>> ring_edges(int n) {
  std::vector<std::pair<int, int>> edges;
  if (n < 2) return edges;
  if (n == 2) return {{0, 1}};
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return edges;
}

void entangle_in_place(std::span<cplx> amps, int n, const Entanglement& e, bool inverse) {
  if (e.kind == EntanglementKind::none) return;
  if (n < 2) throw Error(Errc::invalid_argument, "entanglement layers need at least 2 qubits");
  auto edges = ring_edges(n);
  if (inverse) std::reverse(edges.begin(), edges.end());
  for (const auto& [c, t] : edges) {
    if (e.kind == EntanglementKind::ring_cnot)
      gates::cnot(amps, n, c, t);
    else
      gates::cphase(amps, n, c, t, inverse ? -e.theta : e.theta);
  }
}

int syndrome_of(std::size_t index, int n, int a) noexcept {
  const bool b0 = bit_of(index, n, a), b1 = bit_of(index, n, a + 1), b2 = bit_of(index, n, a + 2);
  return (static_cast<int>(b0 ^ b1) << 1) | static_cast<int>(b1 ^ b2);
}

// Index of the physical basis state holding logical bits at qubits 3k and
// ancilla bits (two per block) at 3k+1, 3k+2.
std::size_t compose_index(std::size_t logical, std::size_t ancilla, int n_logical) {
  const int n_phys = 3 * n_logical;
  std::size_t p = 0;
  for (int k = 0; k < n_logical; ++k) {
    if ((logical >> (n_logical - 1 - k)) & 1U) p |= bit_mask(n_phys, 3 * k);
    if ((ancilla >> (2 * (n_logical - 1 - k) + 1)) & 1U) p |= bit_mask(n_phys, 3 * k + 1);
    if ((ancilla >> (2 * (n_logical - 1 - k))) & 1U) p |= bit_mask(n_phys, 3 * k + 2);
  }
  return p;
}

void check_code_register(int n_qubits) {
  if (n_qubits % 3 != 0) throw Error(Errc::invalid_argument, "repetition-coded register must hold 3k qubits");
}

}  // namespace

// ---------------------------------------------------------------------------
// States

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxStatevectorQubits)
    throw Error(Errc::capacity, "statevectors support 1.." + std::to_string(kMaxStatevectorQubits) + " qubits");
  amps_.assign(std::size_t{1} << n_qubits, cplx{});
  amps_[0] = 1.0;
}

Statevector Statevector::from_amplitudes(std::vector<cplx> amplitudes) {
  const int n = qubits_for_dim(amplitudes.size());
  if (n > kMaxStatevectorQubits) throw Error(Errc::capacity, "too many qubits for a statevector");
  Statevector s(n, std::move(amplitudes));
  if (std::abs(s.norm() - 1.0) > kNormTol) throw Error(Errc::invalid_argument, "statevector is not normalized");
  return s;
}

double Statevector::norm() const noexcept {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return std::sqrt(acc);
}

DensityMatrix DensityMatrix::from_statevector(const Statevector& s) {
  if (s.n_qubits() > kMaxDensityQubits)
    throw Error(Errc::capacity, "density matrices support up to " + std::to_string(kMaxDensityQubits) + " qubits");
  Eigen::Map<const Eigen::VectorXcd> psi(s.amplitudes().data(), static_cast<Index>(s.dim()));
  return DensityMatrix(s.n_qubits(), psi * psi.adjoint());
}

DensityMatrix DensityMatrix::from_matrix(MatrixXcd rho, bool validate) {
  if (rho.rows() != rho.cols()) throw Error(Errc::shape_mismatch, "density matrix must be square");
  const int n = qubits_for_dim(static_cast<std::size_t>(rho.rows()));
  if (n > kMaxDensityQubits) throw Error(Errc::capacity, "too many qubits for a density matrix");
  DensityMatrix out(n, std::move(rho));
  if (validate && !out.validity().ok()) throw Error(Errc::invalid_argument, "matrix is not a valid density matrix");
  return out;
}

std::vector<double> DensityMatrix::probabilities() const {
  std::vector<double> p(dim());
  for (std::size_t i = 0; i < dim(); ++i) p[i] = rho_(static_cast<Index>(i), static_cast<Index>(i)).real();
  return p;
}

DensityValidity DensityMatrix::validity() const {
  DensityValidity v;
  v.hermiticity_error = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  v.trace_error = std::abs(rho_.trace() - cplx(1.0, 0.0));
  const MatrixXcd herm = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(herm, Eigen::EigenvaluesOnly);
  v.min_eigenvalue = solver.eigenvalues().minCoeff();
  return v;
}

double DensityMatrix::fidelity(const Statevector& pure) const {
  if (pure.dim() != dim()) throw Error(Errc::shape_mismatch, "state dimensions differ");
  Eigen::Map<const Eigen::VectorXcd> psi(pure.amplitudes().data(), static_cast<Index>(pure.dim()));
  return (psi.adjoint() * rho_ * psi)(0, 0).real();
}

// ---------------------------------------------------------------------------
// Gates

namespace gates {

void apply_1q(std::span<cplx> amps, int n_qubits, int qubit, const Matrix2& u) {
  check_qubit(n_qubits, qubit);
  const std::size_t mask = bit_mask(n_qubits, qubit);
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (i & mask) continue;
    const cplx a0 = amps[i];
    const cplx a1 = amps[i | mask];
    amps[i] = u[0] * a0 + u[1] * a1;
    amps[i | mask] = u[2] * a0 + u[3] * a1;
  }
}

void x(std::span<cplx> amps, int n_qubits, int qubit) {
  check_qubit(n_qubits, qubit);
  const std::size_t mask = bit_mask(n_qubits, qubit);
  for (std::size_t i = 0; i < amps.size(); ++i)
    if (!(i & mask)) std::swap(amps[i], amps[i | mask]);
}

void z(std::span<cplx> amps, int n_qubits, int qubit) {
  check_qubit(n_qubits, qubit);
  const std::size_t mask = bit_mask(n_qubits, qubit);
  for (std::size_t i = 0; i < amps.size(); ++i)
    if (i & mask) amps[i] = -amps[i];
}

void h(std::span<cplx> amps, int n_qubits, int qubit) {
  const double r = 1.0 / std::numbers::sqrt2;
  apply_1q(amps, n_qubits, qubit, {r, r, r, -r});
}

void ry(std::span<cplx> amps, int n_qubits, int qubit, double theta) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  apply_1q(amps, n_qubits, qubit, {c, -s, s, c});
}

void cnot(std::span<cplx> amps, int n_qubits, int control, int target) {
  check_qubit(n_qubits, control);
  check_qubit(n_qubits, target);
  if (control == target) throw Error(Errc::invalid_argument, "CNOT control equals target");
  const std::size_t cm = bit_mask(n_qubits, control);
  const std::size_t tm = bit_mask(n_qubits, target);
  for (std::size_t i = 0; i < amps.size(); ++i)
    if ((i & cm) && !(i & tm)) std::swap(amps[i], amps[i | tm]);
}

void cphase(std::span<cplx> amps, int n_qubits, int control, int target, double theta) {
  check_qubit(n_qubits, control);
  check_qubit(n_qubits, target);
  if (control == target) throw Error(Errc::invalid_argument, "CP control equals target");
  const std::size_t both = bit_mask(n_qubits, control) | bit_mask(n_qubits, target);
  const cplx phase = std::polar(1.0, theta);
  for (std::size_t i = 0; i < amps.size(); ++i)
    if ((i & both) == both) amps[i] *= phase;
}

}  // namespace gates

// ---------------------------------------------------------------------------
// Channels

KrausChannel KrausChannel::bitflip(double p) {
  check_probability(p);
  Eigen::Matrix2cd k0 = std::sqrt(1.0 - p) * Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd k1;
  k1 << 0.0, 1.0, 1.0, 0.0;
  k1 *= std::sqrt(p);
  return {{k0, k1}};
}

KrausChannel KrausChannel::phaseflip(double p) {
  check_probability(p);
  Eigen::Matrix2cd k0 = std::sqrt(1.0 - p) * Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd k1;
  k1 << 1.0, 0.0, 0.0, -1.0;
  k1 *= std::sqrt(p);
  return {{k0, k1}};
}

double KrausChannel::completeness_error() const {
  Eigen::Matrix2cd sum = Eigen::Matrix2cd::Zero();
  for (const auto& k : operators) sum += k.adjoint() * k;
  return (sum - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
}

DensityMatrix KrausChannel::apply(const DensityMatrix& rho, int qubit) const {
  check_qubit(rho.n_qubits(), qubit);
  const int n = rho.n_qubits();
  MatrixXcd out = MatrixXcd::Zero(rho.matrix().rows(), rho.matrix().cols());
  for (const auto& k : operators) {
    MatrixXcd term = rho.matrix();
    const auto u = to_array(k);
    conjugate(term, [&](std::span<cplx> v) { gates::apply_1q(v, n, qubit, u); });
    out += term;
  }
  return DensityMatrix::from_matrix(std::move(out), false);
}

DensityMatrix bitflip_channel(const DensityMatrix& rho, double p, int qubit) {
  check_probability(p);
  check_qubit(rho.n_qubits(), qubit);
  const auto& m = rho.matrix();
  const auto mask = static_cast<Index>(bit_mask(rho.n_qubits(), qubit));
  MatrixXcd out(m.rows(), m.cols());
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) out(r, c) = (1.0 - p) * m(r, c) + p * m(r ^ mask, c ^ mask);
  return DensityMatrix::from_matrix(std::move(out), false);
}

DensityMatrix phaseflip_channel(const DensityMatrix& rho, double p, int qubit) {
  check_probability(p);
  check_qubit(rho.n_qubits(), qubit);
  // Z_q rho Z_q negates entries whose row and column differ in bit q; all
  // other entries, the diagonal included, are left bit-for-bit unchanged.
  const auto mask = static_cast<Index>(bit_mask(rho.n_qubits(), qubit));
  const double damp = 1.0 - 2.0 * p;
  MatrixXcd out = rho.matrix();
  for (Index c = 0; c < out.cols(); ++c)
    for (Index r = 0; r < out.rows(); ++r)
      if ((r & mask) != (c & mask)) out(r, c) *= damp;
  return DensityMatrix::from_matrix(std::move(out), false);
}

Statevector monte_carlo_channel(const Statevector& s, double p_x, double p_z, RandomStream& stream) {
  check_probability(p_x);
  check_probability(p_z);
  Statevector out = s;
  auto amps = out.mutable_amplitudes();
  for (int q = 0; q < s.n_qubits(); ++q) {
    const bool flip = stream.uniform() < p_x;
    const bool phase = stream.uniform() < p_z;
    if (flip) gates::x(amps, s.n_qubits(), q);
    if (phase) gates::z(amps, s.n_qubits(), q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Names

std::string to_string(Embedding e) { return e == Embedding::amplitude ? "amplitude" : "angle"; }

std::string to_string(EntanglementKind k) {
  switch (k) {
    case EntanglementKind::none: return "none";
    case EntanglementKind::ring_cnot: return "ring-cnot";
    case EntanglementKind::controlled_phase: return "controlled-phase";
  }
  return "?";
}

std::string to_string(Readout r) { return r == Readout::expectation_z ? "expectation-z" : "amplitude-readback"; }

std::string to_string(Correction c) {
  switch (c) {
    case Correction::none: return "none";
    case Correction::repetition3_bitflip: return "repetition3-bitflip";
    case Correction::repetition3_phaseflip: return "repetition3-phaseflip";
  }
  return "?";
}

std::string to_string(NoiseSimulation s) {
  return s == NoiseSimulation::trajectory ? "trajectory" : "density-matrix";
}

Embedding parse_embedding(const std::string& s) {
  if (s == "amplitude") return Embedding::amplitude;
  if (s == "angle") return Embedding::angle;
  throw Error(Errc::config_invalid, "unknown embedding '" + s + "'");
}

EntanglementKind parse_entanglement(const std::string& s) {
  if (s == "none") return EntanglementKind::none;
  if (s == "ring-cnot") return EntanglementKind::ring_cnot;
  if (s == "controlled-phase") return EntanglementKind::controlled_phase;
  throw Error(Errc::config_invalid, "unknown entanglement '" + s + "'");
}

Readout parse_readout(const std::string& s) {
  if (s == "expectation-z") return Readout::expectation_z;
  if (s == "amplitude-readback") return Readout::amplitude_readback;
  throw Error(Errc::config_invalid, "unknown readout '" + s + "'");
}

Correction parse_correction(const std::string& s) {
  if (s == "none") return Correction::none;
  if (s == "repetition3-bitflip") return Correction::repetition3_bitflip;
  if (s == "repetition3-phaseflip") return Correction::repetition3_phaseflip;
  throw Error(Errc::config_invalid, "unknown correction '" + s + "'");
}

NoiseSimulation parse_noise_simulation(const std::string& s) {
  if (s == "trajectory") return NoiseSimulation::trajectory;
  if (s == "density-matrix") return NoiseSimulation::density_matrix;
  throw Error(Errc::config_invalid, "unknown noise simulation '" + s + "'");
}

// ---------------------------------------------------------------------------
// Embeddings

AmplitudeEmbedding amplitude_embed(std::span<const double> v, int n_qubits) {
  Statevector zero(n_qubits);
  if (v.size() > zero.dim())
    throw Error(Errc::capacity, std::to_string(v.size()) + " values exceed 2^" + std::to_string(n_qubits));
  double acc = 0.0;
  for (double x : v) acc += x * x;
  const double norm = std::sqrt(acc);
  if (!(norm > 0.0)) throw Error(Errc::zero_power, "cannot amplitude-embed a zero vector");
  std::vector<cplx> amps(zero.dim(), cplx{});
  for (std::size_t i = 0; i < v.size(); ++i) amps[i] = v[i] / norm;
  return {Statevector::from_amplitudes(std::move(amps)), norm};
}

Statevector angle_embed(std::span<const double> v, int n_qubits) {
  Statevector s(n_qubits);
  if (v.size() > static_cast<std::size_t>(n_qubits))
    throw Error(Errc::capacity, std::to_string(v.size()) + " angles exceed " + std::to_string(n_qubits) + " qubits");
  auto amps = s.mutable_amplitudes();
  for (std::size_t q = 0; q < v.size(); ++q) gates::ry(amps, n_qubits, static_cast<int>(q), v[q]);
  return s;
}

Statevector apply_entanglement(const Statevector& s, const Entanglement& e) {
  Statevector out = s;
  entangle_in_place(out.mutable_amplitudes(), s.n_qubits(), e, false);
  return out;
}

Statevector undo_entanglement(const Statevector& s, const Entanglement& e) {
  Statevector out = s;
  entangle_in_place(out.mutable_amplitudes(), s.n_qubits(), e, true);
  return out;
}

DensityMatrix apply_entanglement(const DensityMatrix& rho, const Entanglement& e) {
  MatrixXcd m = rho.matrix();
  const int n = rho.n_qubits();
  conjugate(m, [&](std::span<cplx> v) { entangle_in_place(v, n, e, false); });
  return DensityMatrix::from_matrix(std::move(m), false);
}

DensityMatrix undo_entanglement(const DensityMatrix& rho, const Entanglement& e) {
  MatrixXcd m = rho.matrix();
  const int n = rho.n_qubits();
  conjugate(m, [&](std::span<cplx> v) { entangle_in_place(v, n, e, true); });
  return DensityMatrix::from_matrix(std::move(m), false);
}

// ---------------------------------------------------------------------------
// Repetition codes

std::optional<int> repetition_correction(bool parity01, bool parity12) noexcept {
  if (parity01 && !parity12) return 0;
  if (parity01 && parity12) return 1;
  if (!parity01 && parity12) return 2;
  return std::nullopt;
}

Statevector encode_repetition_blocks(const Statevector& s, RepetitionCode code) {
  const int n = s.n_qubits();
  const int phys = 3 * n;
  Statevector out(phys);
  auto amps = out.mutable_amplitudes();
  std::fill(amps.begin(), amps.end(), cplx{});
  for (std::size_t l = 0; l < s.dim(); ++l) amps[compose_index(l, 0, n)] = s[l];
  for (int k = 0; k < n; ++k) {
    gates::cnot(amps, phys, 3 * k, 3 * k + 1);
    gates::cnot(amps, phys, 3 * k, 3 * k + 2);
    if (code == RepetitionCode::phaseflip)
      for (int leg = 0; leg < 3; ++leg) gates::h(amps, phys, 3 * k + leg);
  }
  return out;
}

Statevector encode_repetition(const Statevector& s, RepetitionCode code) {
  if (s.n_qubits() != 1) throw Error(Errc::invalid_argument, "encode_repetition takes a single qubit");
  return encode_repetition_blocks(s, code);
}

Statevector decode_repetition_blocks(const Statevector& s, RepetitionCode code, RandomStream& stream) {
  const int phys = s.n_qubits();
  check_code_register(phys);
  const int n = phys / 3;
  std::vector<cplx> work(s.amplitudes().begin(), s.amplitudes().end());
  std::span<cplx> amps(work);
  for (int k = 0; k < n; ++k) {
    const int a = 3 * k;
    if (code == RepetitionCode::phaseflip)
      for (int leg = 0; leg < 3; ++leg) gates::h(amps, phys, a + leg);

    std::array<double, 4> prob{};
    for (std::size_t i = 0; i < amps.size(); ++i) prob[syndrome_of(i, phys, a)] += std::norm(amps[i]);
    const double total = std::accumulate(prob.begin(), prob.end(), 0.0);
    const double u = stream.uniform() * total;
    int syndrome = 0;
    double cumulative = 0.0;
    for (; syndrome < 3; ++syndrome) {
      cumulative += prob[syndrome];
      if (u < cumulative) break;
    }
    while (prob[syndrome] == 0.0) --syndrome;  // guards u landing on an empty tail bin
    const double scale = 1.0 / std::sqrt(prob[syndrome]);
    for (std::size_t i = 0; i < amps.size(); ++i)
      amps[i] = syndrome_of(i, phys, a) == syndrome ? amps[i] * scale : cplx{};

    if (const auto leg = repetition_correction(syndrome & 2, syndrome & 1)) gates::x(amps, phys, a + *leg);
    gates::cnot(amps, phys, a, a + 1);
    gates::cnot(amps, phys, a, a + 2);
  }

  // Ancillas are now |0>; keep the logical sub-register.
  std::vector<cplx> logical(std::size_t{1} << n);
  for (std::size_t l = 0; l < logical.size(); ++l) logical[l] = work[compose_index(l, 0, n)];
  double norm = 0.0;
  for (const auto& v : logical) norm += std::norm(v);
  norm = std::sqrt(norm);
  for (auto& v : logical) v /= norm;
  return Statevector::from_amplitudes(std::move(logical));
}

DensityMatrix decode_repetition_blocks(const DensityMatrix& rho, RepetitionCode code) {
  const int phys = rho.n_qubits();
  check_code_register(phys);
  const int n = phys / 3;
  MatrixXcd m = rho.matrix();
  const Index dim = m.rows();
  for (int k = 0; k < n; ++k) {
    const int a = 3 * k;
    if (code == RepetitionCode::phaseflip)
      conjugate(m, [&](std::span<cplx> v) {
        for (int leg = 0; leg < 3; ++leg) gates::h(v, phys, a + leg);
      });
    // Syndrome measurement followed by the conditioned correction:
    // rho -> sum_s C_s P_s rho P_s C_s^dagger
    MatrixXcd corrected = MatrixXcd::Zero(dim, dim);
    for (int s = 0; s < 4; ++s) {
      MatrixXcd term = MatrixXcd::Zero(dim, dim);
      for (Index c = 0; c < dim; ++c) {
        if (syndrome_of(static_cast<std::size_t>(c), phys, a) != s) continue;
        for (Index r = 0; r < dim; ++r)
          if (syndrome_of(static_cast<std::size_t>(r), phys, a) == s) term(r, c) = m(r, c);
      }
      if (const auto leg = repetition_correction(s & 2, s & 1)) {
        const int q = a + *leg;
        conjugate(term, [&](std::span<cplx> v) { gates::x(v, phys, q); });
      }
      corrected += term;
    }
    m = std::move(corrected);
    conjugate(m, [&](std::span<cplx> v) {
      gates::cnot(v, phys, a, a + 1);
      gates::cnot(v, phys, a, a + 2);
    });
  }

  // Partial trace over the ancillas.
  const std::size_t ldim = std::size_t{1} << n;
  const std::size_t adim = std::size_t{1} << (2 * n);
  MatrixXcd out = MatrixXcd::Zero(static_cast<Index>(ldim), static_cast<Index>(ldim));
  for (std::size_t i = 0; i < ldim; ++i)
    for (std::size_t j = 0; j < ldim; ++j) {
      cplx acc{};
      for (std::size_t anc = 0; anc < adim; ++anc)
        acc += m(static_cast<Index>(compose_index(i, anc, n)), static_cast<Index>(compose_index(j, anc, n)));
      out(static_cast<Index>(i), static_cast<Index>(j)) = acc;
    }
  return DensityMatrix::from_matrix(std::move(out), false);
}

DensityMatrix decode_repetition(const DensityMatrix& rho, RepetitionCode code) {
  if (rho.n_qubits() != 3) throw Error(Errc::invalid_argument, "decode_repetition takes a 3-qubit state");
  return decode_repetition_blocks(rho, code);
}

// ---------------------------------------------------------------------------
// Readback

std::vector<double> amplitude_readback(const Statevector& s, double recorded_norm) {
  std::vector<double> out(s.dim());
  for (std::size_t i = 0; i < s.dim(); ++i) out[i] = std::abs(s[i]) * recorded_norm;
  return out;
}

std::vector<double> amplitude_readback(const DensityMatrix& rho, double recorded_norm) {
  auto p = rho.probabilities();
  for (auto& v : p) v = std::sqrt(std::max(v, 0.0)) * recorded_norm;
  return p;
}

std::vector<double> expectation_z(const Statevector& s) {
  std::vector<double> out(static_cast<std::size_t>(s.n_qubits()), 0.0);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    const double p = std::norm(s[i]);
    for (int q = 0; q < s.n_qubits(); ++q) out[q] += bit_of(i, s.n_qubits(), q) ? -p : p;
  }
  return out;
}

std::vector<double> expectation_z(const DensityMatrix& rho) {
  std::vector<double> out(static_cast<std::size_t>(rho.n_qubits()), 0.0);
  const auto p = rho.probabilities();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int q = 0; q < rho.n_qubits(); ++q) out[q] += bit_of(i, rho.n_qubits(), q) ? -p[i] : p[i];
  return out;
}

FeatureTensor readback(const QuantumState& state, Readout readout, Embedding embedding, double recorded_norm) {
  if (readout == Readout::amplitude_readback && embedding != Embedding::amplitude)
    throw Error(Errc::mode_mismatch, "amplitude-readback requires amplitude embedding");
  if (readout == Readout::expectation_z && embedding != Embedding::angle)
    throw Error(Errc::mode_mismatch, "expectation-Z readout requires angle embedding");
  std::vector<double> values;
  if (readout == Readout::amplitude_readback) {
    values = std::visit([&](const auto& s) { return amplitude_readback(s, recorded_norm); }, state);
  } else {
    values = std::visit([](const auto& s) { return expectation_z(s); }, state);
    for (auto& v : values) v = std::acos(std::clamp(v, -1.0, 1.0));
  }
  return FeatureTensor::vector(std::move(values));
}

// ---------------------------------------------------------------------------
// End-to-end

std::size_t QuantumChannelConfig::chunk_capacity() const noexcept {
  const int l = logical_qubits();
  return embedding == Embedding::amplitude ? (std::size_t{1} << l) : static_cast<std::size_t>(l);
}

void QuantumChannelConfig::validate() const {
  const int cap = simulation == NoiseSimulation::trajectory ? kMaxStatevectorQubits : kMaxDensityQubits;
  if (n_qubits < 1 || n_qubits > cap)
    throw Error(Errc::config_invalid, "n_qubits must be in [1, " + std::to_string(cap) + "] for " +
                                          to_string(simulation) + " simulation");
  if (!(p_bitflip >= 0.0 && p_bitflip <= 1.0) || !(p_phaseflip >= 0.0 && p_phaseflip <= 1.0))
    throw Error(Errc::config_invalid, "flip probabilities must lie in [0, 1]");
  if (correction != Correction::none && n_qubits % 3 != 0)
    throw Error(Errc::config_invalid, "repetition codes require n_qubits to be a multiple of 3");
  if (entanglement.kind != EntanglementKind::none && logical_qubits() < 2)
    throw Error(Errc::config_invalid, "entanglement layers need at least 2 logical qubits");
  if ((readout == Readout::amplitude_readback) != (embedding == Embedding::amplitude))
    throw Error(Errc::mode_mismatch, "readout " + to_string(readout) + " does not match " + to_string(embedding) +
                                         " embedding");
}

namespace {

RepetitionCode code_for(Correction c) {
  return c == Correction::repetition3_phaseflip ? RepetitionCode::phaseflip : RepetitionCode::bitflip;
}

// Sends one embedded chunk through the configured noise and returns the
// readback values.
std::vector<double> transmit_state(const Statevector& embedded, double norm, const QuantumChannelConfig& cfg,
                                   RandomStream& stream) {
  Statevector s = apply_entanglement(embedded, cfg.entanglement);
  const bool coded = cfg.correction != Correction::none;
  const auto code = code_for(cfg.correction);
  if (coded) s = encode_repetition_blocks(s, code);

  QuantumState received = s;
  if (cfg.simulation == NoiseSimulation::trajectory) {
    s = monte_carlo_channel(s, cfg.p_bitflip, cfg.p_phaseflip, stream);
    if (coded) s = decode_repetition_blocks(s, code, stream);
    received = undo_entanglement(s, cfg.entanglement);
  } else {
    auto rho = DensityMatrix::from_statevector(s);
    for (int q = 0; q < rho.n_qubits(); ++q) {
      if (cfg.p_bitflip > 0.0) rho = bitflip_channel(rho, cfg.p_bitflip, q);
      if (cfg.p_phaseflip > 0.0) rho = phaseflip_channel(rho, cfg.p_phaseflip, q);
    }
    if (coded) rho = decode_repetition_blocks(rho, code);
    received = undo_entanglement(rho, cfg.entanglement);
  }
  const auto out = readback(received, cfg.readout, cfg.embedding, norm);
  return {out.data().begin(), out.data().end()};
}

}  // namespace

FeatureTensor quantum_transmit(const FeatureTensor& t, const QuantumChannelConfig& cfg, RandomStream& stream) {
  cfg.validate();
  const int logical = cfg.logical_qubits();
  const std::size_t cap = cfg.chunk_capacity();
  const auto x = t.data();
  std::vector<double> out(x.size(), 0.0);

  for (std::size_t begin = 0; begin < x.size(); begin += cap) {
    const std::size_t count = std::min(cap, x.size() - begin);
    const auto chunk = x.subspan(begin, count);
    if (cfg.embedding == Embedding::amplitude) {
      double acc = 0.0;
      for (double v : chunk) acc += v * v;
      if (acc == 0.0) continue;  // all-zero chunk: nothing to embed, zeros on output
      const auto emb = amplitude_embed(chunk, logical);
      const auto values = transmit_state(emb.state, emb.norm, cfg, stream);
      std::copy_n(values.begin(), count, out.begin() + static_cast<std::ptrdiff_t>(begin));
    } else {
      const auto [mn, mx] = std::minmax_element(chunk.begin(), chunk.end());
      const double lo = *mn, hi = *mx;
      const double span = hi - lo;
      std::vector<double> angles(count, 0.0);
      if (span > 0.0)
        for (std::size_t i = 0; i < count; ++i) angles[i] = std::numbers::pi * (chunk[i] - lo) / span;
      const auto values = transmit_state(angle_embed(angles, logical), 1.0, cfg, stream);
      for (std::size_t i = 0; i < count; ++i)
        out[begin + i] = span > 0.0 ? lo + values[i] / std::numbers::pi * span : lo;
    }
  }
  return t.with_data(std::move(out), t.dtype() == DType::f32 ? DType::f32 : DType::f64);
}

double state_overlap(const Statevector& a, const Statevector& b) {
  if (a.dim() != b.dim()) throw Error(Errc::shape_mismatch, "state dimensions differ");
  cplx acc{};
  for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(a[i]) * b[i];
  return std::norm(acc);
}

double quantum_kernel(std::span<const double> x, std::span<const double> y, Embedding embedding, int n_qubits) {
  if (embedding == Embedding::amplitude)
    return state_overlap(amplitude_embed(x, n_qubits).state, amplitude_embed(y, n_qubits).state);
  return state_overlap(angle_embed(x, n_qubits), angle_embed(y, n_qubits));
}

FeatureTensor to_tensor(const Statevector& s) {
  std::vector<double> data(2 * s.dim());
  for (std::size_t i = 0; i < s.dim(); ++i) {
    data[2 * i] = s[i].real();
    data[2 * i + 1] = s[i].imag();
  }
  return FeatureTensor(DType::f64, {s.dim(), 2}, std::move(data));
}

}  // namespace gensc

#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "gensc/quantum.hpp"
#include "test_util.hpp"

using namespace gensc;
using testutil::error_of;

namespace {

// Exact fraction for the zero-tolerance logical-rate check.
struct Rational {
  long long num = 0, den = 1;
  Rational(long long n = 0, long long d = 1) : num(n), den(d) { reduce(); }
  void reduce() {
    const long long g = std::gcd(num, den);
    num /= g;
    den /= g;
    if (den < 0) num = -num, den = -den;
  }
  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).cwiseAbs().maxCoeff(); }

Statevector random_state(int n, RandomStream& rng) {
  std::vector<cplx> a(std::size_t{1} << n);
  double norm = 0;
  for (auto& v : a) {
    v = {rng.normal(), rng.normal()};
    norm += std::norm(v);
  }
  for (auto& v : a) v /= std::sqrt(norm);
  return Statevector::from_amplitudes(a);
}

}  // namespace

TEST_CASE("gate kernels use qubit 0 as the most significant bit") {
  Statevector s(2);
  auto a = s.mutable_amplitudes();
  gates::x(a, 2, 0);
  CHECK(s[2] == cplx(1, 0));  // |10>
  gates::cnot(a, 2, 0, 1);
  CHECK(s[3] == cplx(1, 0));  // |11>
  gates::cphase(a, 2, 0, 1, std::numbers::pi);
  CHECK(std::abs(s[3] + cplx(1, 0)) < 1e-15);

  Statevector h(1);
  gates::h(h.mutable_amplitudes(), 1, 0);
  CHECK(h[0].real() == doctest::Approx(1 / std::numbers::sqrt2));
  CHECK(h[1].real() == doctest::Approx(1 / std::numbers::sqrt2));
  CHECK(error_of([&] { gates::x(a, 2, 2); }) == Errc::out_of_range);
}

TEST_CASE("embeddings") {
  const std::vector<double> v = {3, 4};
  const auto e = amplitude_embed(v, 1);
  CHECK(e.norm == 5.0);
  CHECK(e.state[0].real() == doctest::Approx(0.6));
  CHECK(e.state[1].real() == doctest::Approx(0.8));
  CHECK(amplitude_readback(e.state, e.norm)[1] == doctest::Approx(4.0));
  CHECK(error_of([] { amplitude_embed(std::vector<double>{1, 2, 3}, 1); }) == Errc::capacity);
  CHECK(error_of([] { amplitude_embed(std::vector<double>{0, 0}, 1); }) == Errc::zero_power);

  const std::vector<double> angles = {0.3, 1.2, 2.9};
  const auto z = expectation_z(angle_embed(angles, 3));
  for (int q = 0; q < 3; ++q) CHECK(z[q] == doctest::Approx(std::cos(angles[q])).epsilon(1e-12));
  CHECK(error_of([&] { angle_embed(angles, 2); }) == Errc::capacity);
}

TEST_CASE("entanglement layers invert exactly") {
  auto rng = derive_stream(SeedSpec{1}, "ent", "test");
  for (int n : {2, 3, 5}) {
    const auto s = random_state(n, rng);
    for (auto kind : {EntanglementKind::ring_cnot, EntanglementKind::controlled_phase}) {
      const Entanglement e{kind, 0.7};
      const auto back = undo_entanglement(apply_entanglement(s, e), e);
      CHECK(state_overlap(s, back) == doctest::Approx(1.0).epsilon(1e-12));
      const auto rho = DensityMatrix::from_statevector(s);
      CHECK(max_abs_diff(undo_entanglement(apply_entanglement(rho, e), e).matrix(), rho.matrix()) < 1e-12);
    }
  }
  // A 2-qubit ring is one CNOT, not two.
  Statevector s(2);
  gates::x(s.mutable_amplitudes(), 2, 0);
  CHECK(apply_entanglement(s, {EntanglementKind::ring_cnot})[3] == cplx(1, 0));
  CHECK(error_of([] { apply_entanglement(Statevector(1), {EntanglementKind::ring_cnot}); }) == Errc::invalid_argument);
}

TEST_CASE("Pauli channel laws") {
  const auto zero = DensityMatrix::from_statevector(Statevector(1));
  const auto flipped = bitflip_channel(zero, 0.5, 0);
  CHECK(std::abs(flipped(0, 0) - 0.5) < 1e-12);
  CHECK(std::abs(flipped(1, 1) - 0.5) < 1e-12);

  auto rng = derive_stream(SeedSpec{2}, "chan", "test");
  const auto rho = DensityMatrix::from_statevector(random_state(3, rng));
  for (double p : {0.0, 0.1, 0.37, 1.0}) {
    for (int q = 0; q < 3; ++q) {
      const auto pf = phaseflip_channel(rho, p, q);
      for (std::size_t i = 0; i < rho.dim(); ++i) CHECK(pf(i, i) == rho(i, i));
      CHECK(max_abs_diff(pf.matrix(), KrausChannel::phaseflip(p).apply(rho, q).matrix()) < 1e-12);
      CHECK(max_abs_diff(bitflip_channel(rho, p, q).matrix(), KrausChannel::bitflip(p).apply(rho, q).matrix()) < 1e-12);
      CHECK(bitflip_channel(rho, p, q).validity().ok());
    }
    CHECK(KrausChannel::bitflip(p).completeness_error() < 1e-12);
    CHECK(KrausChannel::phaseflip(p).completeness_error() < 1e-12);
  }
  CHECK(error_of([&] { bitflip_channel(rho, 1.5, 0); }) == Errc::out_of_range);
}

TEST_CASE("angle readout under bit-flip and phase-flip noise") {
  const double v = 1.1, p = 0.2;
  const auto rho = DensityMatrix::from_statevector(angle_embed(std::vector<double>{v}, 1));
  CHECK(expectation_z(bitflip_channel(rho, p, 0))[0] == doctest::Approx((1 - 2 * p) * std::cos(v)).epsilon(1e-12));
  // Z noise commutes with the Z observable.
  CHECK(expectation_z(phaseflip_channel(rho, p, 0))[0] == doctest::Approx(std::cos(v)).epsilon(1e-12));
}

TEST_CASE("trajectories converge to the Kraus evolution") {
  auto rng = derive_stream(SeedSpec{3}, "mc", "test");
  const auto psi = random_state(2, rng);
  const double px = 0.15, pz = 0.3;
  auto exact = DensityMatrix::from_statevector(psi);
  for (int q = 0; q < 2; ++q) exact = phaseflip_channel(bitflip_channel(exact, px, q), pz, q);

  const int trajectories = 100000;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(4, 4);
  for (int t = 0; t < trajectories; ++t) {
    const auto s = monte_carlo_channel(psi, px, pz, rng);
    Eigen::Map<const Eigen::VectorXcd> v(s.amplitudes().data(), 4);
    acc += v * v.adjoint();
  }
  acc /= trajectories;
  CHECK(max_abs_diff(acc, exact.matrix()) < 0.01);
}

TEST_CASE("repetition code logical error rate is exactly 3p^2 - 2p^3") {
  for (auto p : {Rational(1, 20), Rational(1, 10), Rational(1, 5)}) {
    const Rational expected = Rational(3) * p * p - Rational(2) * p * p * p;
    CHECK(repetition_logical_error_rate(p) == expected);
  }
  CHECK(repetition_correction(true, false) == 0);
  CHECK(repetition_correction(true, true) == 1);
  CHECK(repetition_correction(false, true) == 2);
  CHECK_FALSE(repetition_correction(false, false).has_value());
}

TEST_CASE("density-matrix repetition pipeline matches the analytic rate") {
  for (double p : {0.05, 0.1, 0.2}) {
    const double expected = 3 * p * p - 2 * p * p * p;

    auto rho = DensityMatrix::from_statevector(encode_repetition(Statevector(1), RepetitionCode::bitflip));
    for (int q = 0; q < 3; ++q) rho = bitflip_channel(rho, p, q);
    const auto out = decode_repetition(rho, RepetitionCode::bitflip);
    CHECK(std::abs(out(1, 1).real() - expected) < 1e-10);
    CHECK(out.validity().ok());

    // Phase-flip code: |0> encodes to |+++>, so two or more Z flips decode to |1>.
    auto sigma = DensityMatrix::from_statevector(encode_repetition(Statevector(1), RepetitionCode::phaseflip));
    for (int q = 0; q < 3; ++q) sigma = phaseflip_channel(sigma, p, q);
    const auto dec = decode_repetition(sigma, RepetitionCode::phaseflip);
    CHECK(std::abs(dec(1, 1).real() - expected) < 1e-10);
    CHECK(dec.validity().ok());
  }
}

TEST_CASE("repetition blocks correct any single flip per block") {
  auto rng = derive_stream(SeedSpec{4}, "rep", "test");
  const auto psi = random_state(2, rng);
  for (auto code : {RepetitionCode::bitflip, RepetitionCode::phaseflip}) {
    const auto enc = encode_repetition_blocks(psi, code);
    CHECK(enc.n_qubits() == 6);
    for (int a = 0; a < 3; ++a)
      for (int b = 3; b < 6; ++b) {
        auto s = enc;
        auto amps = s.mutable_amplitudes();
        if (code == RepetitionCode::bitflip) {
          gates::x(amps, 6, a);
          gates::x(amps, 6, b);
        } else {
          gates::z(amps, 6, a);
          gates::z(amps, 6, b);
        }
        CHECK(state_overlap(decode_repetition_blocks(s, code, rng), psi) == doctest::Approx(1.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("quantum transmit") {
  std::vector<double> x = {0.5, 1.5, 2.0, 0.25, 3.0, 1.0, 0.75};
  const auto t = FeatureTensor::vector(x);
  auto rng = derive_stream(SeedSpec{5}, "qt", "test");

  QuantumChannelConfig cfg;
  cfg.n_qubits = 2;  // 4 values per chunk
  for (auto ent : {EntanglementKind::none, EntanglementKind::ring_cnot, EntanglementKind::controlled_phase}) {
    cfg.entanglement.kind = ent;
    for (auto sim : {NoiseSimulation::trajectory, NoiseSimulation::density_matrix}) {
      cfg.simulation = sim;
      const auto out = quantum_transmit(t, cfg, rng);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-12));
    }
  }

  QuantumChannelConfig angle;
  angle.embedding = Embedding::angle;
  angle.readout = Readout::expectation_z;
  angle.n_qubits = 3;
  const auto out = quantum_transmit(t, angle, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-9));

  // Coded and noisy: single flips per block are corrected, so at small p
  // the density-matrix result deviates far less than the uncoded one.
  QuantumChannelConfig coded = cfg;
  coded.entanglement.kind = EntanglementKind::none;
  coded.simulation = NoiseSimulation::density_matrix;
  coded.p_bitflip = 0.05;
  coded.n_qubits = 6;
  coded.correction = Correction::repetition3_bitflip;
  QuantumChannelConfig bare = coded;
  bare.n_qubits = 2;
  bare.correction = Correction::none;
  auto err = [&](const QuantumChannelConfig& c) {
    const auto y = quantum_transmit(t, c, rng);
    double e = 0;
    for (std::size_t i = 0; i < x.size(); ++i) e += (y[i] - x[i]) * (y[i] - x[i]);
    return e;
  };
  CHECK(err(coded) < 0.2 * err(bare));

  QuantumChannelConfig bad = cfg;
  bad.readout = Readout::expectation_z;
  CHECK(error_of([&] { quantum_transmit(t, bad, rng); }) == Errc::mode_mismatch);
  bad = cfg;
  bad.n_qubits = 13;
  CHECK(error_of([&] { quantum_transmit(t, bad, rng); }) == Errc::config_invalid);
  bad = cfg;
  bad.correction = Correction::repetition3_bitflip;
  bad.n_qubits = 4;
  CHECK(error_of([&] { bad.validate(); }) == Errc::config_invalid);
}

TEST_CASE("quantum kernel") {
  const std::vector<double> a = {1, 0}, b = {0, 1}, c = {2, 0};
  CHECK(quantum_kernel(a, b, Embedding::amplitude, 1) == doctest::Approx(0.0));
  CHECK(quantum_kernel(a, c, Embedding::amplitude, 1) == doctest::Approx(1.0));
  const std::vector<double> u = {0.4}, w = {1.0};
  CHECK(quantum_kernel(u, w, Embedding::angle, 1) == doctest::Approx(std::pow(std::cos(0.3), 2)));
}

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gensc/classical.hpp"
#include "gensc/codec.hpp"
#include "gensc/error.hpp"
#include "gensc/experiment.hpp"
#include "gensc/manifest.hpp"
#include "gensc/metrics.hpp"
#include "gensc/noisegen.hpp"
#include "gensc/quantum.hpp"
#include "gensc/report.hpp"
#include "gensc/rng.hpp"
#include "gensc/tensor.hpp"

namespace py = pybind11;
using namespace gensc;

namespace {

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  if (s == "u8") return DType::u8;
  throw Error(Errc::unknown_dtype, "unknown dtype '" + s + "'");
}

FeatureTensor from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> a, const std::string& dtype) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  if (shape.empty()) shape.push_back(1);
  std::vector<double> data(a.data(), a.data() + a.size());
  return FeatureTensor(parse_dtype(dtype), std::move(shape), std::move(data));
}

py::array_t<double> to_numpy(const FeatureTensor& t) {
  py::array_t<double> out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

RandomStream stream_for(std::uint64_t seed, const std::string& sample_id, const std::string& stage) {
  return derive_stream(SeedSpec{seed}, sample_id, stage);
}

py::object json_to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "gensc simulator core";

  // Messages start with the error class, e.g. "bad_magic: ...".
  py::register_exception<Error>(m, "GenscError", PyExc_RuntimeError);

  py::class_<FeatureTensor>(m, "Tensor")
      .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> a, const std::string& dtype) {
             return from_numpy(std::move(a), dtype);
           }),
           py::arg("data"), py::arg("dtype") = "f64")
      .def_property_readonly("dtype", [](const FeatureTensor& t) { return std::string(to_string(t.dtype())); })
      .def_property_readonly("shape", &FeatureTensor::shape)
      .def("numpy", &to_numpy)
      .def("__len__", &FeatureTensor::size)
      .def("__eq__", [](const FeatureTensor& a, const FeatureTensor& b) { return a == b; })
      .def("__repr__", [](const FeatureTensor& t) {
        std::string s = "Tensor(" + std::string(to_string(t.dtype())) + ", [";
        for (std::size_t i = 0; i < t.shape().size(); ++i) s += (i ? "," : "") + std::to_string(t.shape()[i]);
        return s + "])";
      });

  m.def("read_tensor", &read_tensor, py::arg("path"));
  m.def("write_tensor", &write_tensor, py::arg("tensor"), py::arg("path"));
  m.def("encode_tensor", [](const FeatureTensor& t) {
    const auto b = encode_tensor(t);
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  });
  m.def("decode_tensor", [](const py::bytes& b) {
    const std::string s = b;
    return decode_tensor(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });
  m.def("stream_uniforms", [](std::uint64_t seed, const std::string& sample_id, const std::string& stage, std::size_t n) {
    auto st = stream_for(seed, sample_id, stage);
    std::vector<double> out(n);
    for (auto& v : out) v = st.uniform();
    return out;
  }, py::arg("seed"), py::arg("sample_id"), py::arg("stage"), py::arg("n"));

  // Codec
  m.def("entropy_roundtrip", [](const std::vector<std::uint32_t>& symbols, std::uint32_t alphabet) {
    const auto blob = entropy_encode(symbols, alphabet);
    return py::make_tuple(entropy_decode(CompressedBlob::parse(blob.serialize())), blob.serialized_size());
  }, py::arg("symbols"), py::arg("alphabet"), "Encode and decode; returns (decoded symbols, serialized bytes).");
  m.def("quantize_roundtrip", [](const FeatureTensor& t, int bits) {
    QuantizerConfig cfg;
    cfg.bits = bits;
    const auto q = quantize(t, cfg);
    return py::make_tuple(dequantize(q), q.step());
  }, py::arg("tensor"), py::arg("bits") = 8, "Returns (dequantized tensor, step).");
  m.def("compression_rate", &compression_rate, py::arg("original_bytes"), py::arg("compressed_bytes"));
  m.def("format_rate", &format_rate, py::arg("rate"), py::arg("decimals") = 3);

  // Classical channel
  m.def("awgn", [](const FeatureTensor& t, double snr_db, std::uint64_t seed, const std::string& sample_id,
                   const std::string& stage) {
    auto st = stream_for(seed, sample_id, stage);
    return awgn(t, snr_db, st);
  }, py::arg("tensor"), py::arg("snr_db"), py::arg("seed") = 0, py::arg("sample_id") = "", py::arg("stage") = "awgn");
  m.def("jscc_transmit", [](const FeatureTensor& t, double snr_db, bool ofdm, std::uint64_t seed,
                            const std::string& sample_id) {
    ChannelConfig cfg;
    cfg.snr_db = snr_db;
    cfg.mode = ChannelMode::analog_jscc;
    if (ofdm) cfg.ofdm = OfdmConfig{};
    auto st = stream_for(seed, sample_id, "classical-jscc:" + format_number(snr_db));
    return jscc_transmit(t, cfg, st);
  }, py::arg("tensor"), py::arg("snr_db"), py::arg("ofdm") = false, py::arg("seed") = 0, py::arg("sample_id") = "");
  m.def("digital_transmit", [](const FeatureTensor& t, double snr_db, const std::string& constellation, int bits,
                               std::uint64_t seed, const std::string& sample_id) {
    ChannelConfig cfg;
    cfg.snr_db = snr_db;
    cfg.mode = ChannelMode::digital;
    cfg.constellation = parse_constellation(constellation);
    QuantizerConfig q;
    q.bits = bits;
    auto st = stream_for(seed, sample_id, "classical-digital:" + format_number(snr_db));
    const auto r = digital_transmit_detailed(t, q, cfg, st);
    py::dict d;
    d["output"] = r.output;
    d["ber"] = r.ber();
    d["blob_bytes"] = r.blob_bytes;
    d["original_bytes"] = r.original_bytes;
    d["compression_rate"] = compression_rate(r.original_bytes, r.blob_bytes);
    d["fallback_used"] = r.fallback_used;
    return d;
  }, py::arg("tensor"), py::arg("snr_db"), py::arg("constellation") = "QPSK", py::arg("bits") = 8,
     py::arg("seed") = 0, py::arg("sample_id") = "");
  m.def("constellation_points", [](const std::string& c) { return constellation_points(parse_constellation(c)); });
  m.def("q_function", &q_function);

  // Quantum channel
  m.def("density_matrix", [](const std::vector<cplx>& amplitudes) {
    return DensityMatrix::from_statevector(Statevector::from_amplitudes(amplitudes)).matrix();
  }, "Pure-state density matrix for normalized amplitudes.");
  m.def("bitflip_channel", [](const Eigen::MatrixXcd& rho, double p, int qubit) {
    return bitflip_channel(DensityMatrix::from_matrix(rho), p, qubit).matrix();
  }, py::arg("rho"), py::arg("p"), py::arg("qubit"));
  m.def("phaseflip_channel", [](const Eigen::MatrixXcd& rho, double p, int qubit) {
    return phaseflip_channel(DensityMatrix::from_matrix(rho), p, qubit).matrix();
  }, py::arg("rho"), py::arg("p"), py::arg("qubit"));
  m.def("amplitude_embed", [](const std::vector<double>& v, int n_qubits) {
    const auto e = amplitude_embed(v, n_qubits);
    return py::make_tuple(std::vector<cplx>(e.state.amplitudes().begin(), e.state.amplitudes().end()), e.norm);
  }, py::arg("values"), py::arg("n_qubits"));
  m.def("repetition_logical_error_rate", &repetition_logical_error_rate<double>, py::arg("p"));
  m.def("quantum_transmit", [](const FeatureTensor& t, const std::string& embedding, int n_qubits, double p_bitflip,
                               double p_phaseflip, const std::string& correction, const std::string& entanglement,
                               const std::string& simulation, std::uint64_t seed, const std::string& sample_id) {
    QuantumChannelConfig cfg;
    cfg.embedding = parse_embedding(embedding);
    cfg.readout = cfg.embedding == Embedding::angle ? Readout::expectation_z : Readout::amplitude_readback;
    cfg.n_qubits = n_qubits;
    cfg.p_bitflip = p_bitflip;
    cfg.p_phaseflip = p_phaseflip;
    cfg.correction = parse_correction(correction);
    cfg.entanglement.kind = parse_entanglement(entanglement);
    cfg.simulation = parse_noise_simulation(simulation);
    auto st = stream_for(seed, sample_id, "quantum:0");
    return quantum_transmit(t, cfg, st);
  }, py::arg("tensor"), py::arg("embedding") = "amplitude", py::arg("n_qubits") = 4, py::arg("p_bitflip") = 0.0,
     py::arg("p_phaseflip") = 0.0, py::arg("correction") = "none", py::arg("entanglement") = "none",
     py::arg("simulation") = "trajectory", py::arg("seed") = 0, py::arg("sample_id") = "");

  // Metrics
  m.def("mse", &mse);
  m.def("psnr", &psnr, py::arg("reference"), py::arg("test"), py::arg("max_value") = py::none());
  m.def("empirical_snr", py::overload_cast<const FeatureTensor&, const FeatureTensor&>(&empirical_snr));
  m.def("iou", &iou);
  m.def("mpa", &mpa, py::arg("truth"), py::arg("predicted"), py::arg("k"));
  m.def("classification_metrics", [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                                     std::size_t k) {
    const auto r = classification_metrics(truth, pred, k);
    std::vector<std::vector<std::uint64_t>> cm(k, std::vector<std::uint64_t>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) cm[i][j] = r.confusion.at(i, j);
    py::dict d;
    d["confusion"] = cm;
    d["accuracy"] = r.accuracy;
    d["f1_macro"] = r.f1_macro;
    d["recall_macro"] = r.recall_macro;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    return d;
  }, py::arg("truth"), py::arg("predicted"), py::arg("k"));

  // Dataset, augmentation and experiments
  m.def("manifest_summary", [](const std::filesystem::path& path) {
    const auto s = load_manifest(path).summary();
    py::dict d;
    d["classes"] = s.classes;
    d["samples"] = s.samples;
    d["train"] = s.train;
    d["test"] = s.test;
    d["snr_levels"] = s.snr_levels;
    return d;
  });
  m.def("augment_dataset", [](const std::filesystem::path& manifest, const std::vector<int>& snrs,
                              const std::filesystem::path& out, std::uint64_t seed, const std::string& normalization,
                              unsigned jobs) {
    AugmentPlan plan;
    plan.snr_list = snrs;
    plan.normalization = parse_noise_reference(normalization);
    plan.seed.master_seed = seed;
    plan.output_root = out;
    augment_dataset(load_manifest(manifest), plan, jobs);
    return out / "manifest.json";
  }, py::arg("manifest"), py::arg("snr_list"), py::arg("output_root"), py::arg("seed") = 0,
     py::arg("normalization") = "per-tensor-power", py::arg("jobs") = 1);
  m.def("verify_collection", [](const std::filesystem::path& manifest, unsigned jobs) {
    const auto r = verify_collection(load_manifest(manifest, false), jobs);
    py::list entries;
    for (const auto& e : r.entries) {
      py::dict d;
      d["sample_id"] = e.sample_id;
      d["snr_db"] = e.snr_db;
      d["measured_db"] = e.measured_db;
      d["expected_db"] = e.expected_db;
      d["tolerance_db"] = e.tolerance_db;
      d["flagged"] = e.flagged;
      d["error"] = e.error;
      entries.append(d);
    }
    py::dict d;
    d["entries"] = entries;
    d["flagged"] = r.summary.flagged;
    return d;
  }, py::arg("manifest"), py::arg("jobs") = 1);
  m.def("run_experiment", [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
                             std::optional<std::filesystem::path> out, unsigned jobs) {
    auto cfg = load_config(config);
    resolve_seed(cfg, seed);
    const auto report = run_experiment(cfg, jobs);
    if (out) write_outputs(report, cfg, *out);
    return json_to_py(report_to_json(report));
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(), py::arg("jobs") = 1,
     "Runs a config and returns the report as a dict; writes the output files when `out` is given.");
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "edgecast/compare.hpp"
#include "edgecast/control.hpp"
#include "edgecast/qoc.hpp"
#include "edgecast/sensor.hpp"
#include "edgecast/ts.hpp"

namespace py = pybind11;
using namespace edgecast;

namespace {

std::vector<std::uint8_t> packets_to_bytes(const std::vector<ts::TsPacket>& pkts) {
    std::vector<std::uint8_t> out;
    out.reserve(pkts.size() * ts::kPacketSize);
    for (const auto& p : pkts)
        out.insert(out.end(), p.raw.begin(), p.raw.end());
    return out;
}

} // namespace

PYBIND11_MODULE(_edgecast, m) {
    m.doc() = "content-aware TS stream suppression core";

    py::enum_<ts::FrameClass>(m, "FrameClass")
        .value("Reference", ts::FrameClass::Reference)
        .value("Differential", ts::FrameClass::Differential)
        .value("NonVideo", ts::FrameClass::NonVideo)
        .value("Unknown", ts::FrameClass::Unknown);

    py::class_<ts::TsPacket>(m, "TsPacket")
        .def_readonly("pid", &ts::TsPacket::pid)
        .def_readonly("pusi", &ts::TsPacket::pusi)
        .def_readonly("continuity_counter", &ts::TsPacket::continuity_counter)
        .def_readonly("transport_error", &ts::TsPacket::transport_error)
        .def_property_readonly("payload_offset",
                               [](const ts::TsPacket& p) { return p.payload_offset; })
        .def_property_readonly("raw", [](const ts::TsPacket& p) {
            return py::bytes(reinterpret_cast<const char*>(p.raw.data()),
                             p.raw.size());
        });

    m.def("parse_ts_packet", [](py::bytes raw) {
        std::string s = raw;
        return ts::parse_ts_packet(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    });
    m.def("scan_datagram", [](py::bytes payload) {
        std::string s = payload;
        return ts::scan_datagram(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    });
    m.def("classify_stream", [](py::bytes payload, std::uint16_t video_pid) {
        std::string s = payload;
        auto pkts = ts::scan_datagram(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        std::map<std::uint16_t, ts::PidState> states;
        std::vector<ts::FrameClass> classes;
        for (const auto& p : pkts) {
            auto& st = states[p.pid];
            if (st.last_continuity == std::nullopt && st.frame_index == 0) {
                st.pid = p.pid;
                st.is_video = (p.pid == video_pid);
            }
            classes.push_back(ts::classify_packet(st, p));
        }
        return classes;
    });

    py::enum_<qoc::DropStrategy>(m, "DropStrategy")
        .value("Uniform", qoc::DropStrategy::Uniform)
        .value("Differential", qoc::DropStrategy::Differential);

    py::class_<qoc::DetectionTable>(m, "DetectionTable")
        .def_static("builtin", &qoc::DetectionTable::builtin)
        .def_static("load", &qoc::DetectionTable::load);

    m.def("detection_lookup", &qoc::detection_lookup, py::arg("loss_percent"),
          py::arg("strategy"), py::arg("table") = qoc::DetectionTable::builtin());
    m.def("max_tolerable_loss", &qoc::max_tolerable_loss, py::arg("threshold"),
          py::arg("strategy"), py::arg("table") = qoc::DetectionTable::builtin());
    m.def("effective_quality", [](const std::vector<double>& keeps) {
        std::vector<qoc::StreamQuality> row;
        for (double k : keeps)
            row.push_back({k});
        return qoc::effective_quality(row).differential_keep;
    });
    m.def("bandwidth_full",
          [](const std::vector<std::pair<double, double>>& rates, std::size_t m) {
              std::vector<qoc::RateModel> models;
              for (auto [r, d] : rates)
                  models.push_back({r, d});
              return qoc::bandwidth_full(models, m);
          });
    m.def("bandwidth_saved",
          [](const std::vector<std::pair<double, double>>& rates,
             const std::vector<double>& keeps) {
              std::vector<qoc::RateModel> models;
              std::vector<qoc::StreamQuality> effs;
              for (auto [r, d] : rates)
                  models.push_back({r, d});
              for (double k : keeps)
                  effs.push_back({k});
              return qoc::bandwidth_saved(models, effs);
          });
    m.def("solve_min_bandwidth",
          [](const std::map<std::pair<std::size_t, std::size_t>, double>& thresholds,
             qoc::DropStrategy strategy, std::size_t n, std::size_t mm) {
              std::map<std::pair<std::size_t, std::size_t>, qoc::QocRequirement> reqs;
              for (const auto& [key, thr] : thresholds)
                  reqs[key] = {thr, strategy};
              auto sol = qoc::solve_min_bandwidth(reqs, qoc::DetectionTable::builtin(),
                                                  n, mm);
              std::map<std::pair<std::size_t, std::size_t>, double> omega;
              for (const auto& [key, q] : sol.omega.omega)
                  omega[key] = q.differential_keep;
              std::vector<double> q_eff;
              for (auto q : sol.q_eff)
                  q_eff.push_back(q.differential_keep);
              return py::make_tuple(omega, q_eff, sol.delta.delta);
          });

    m.def("generate_synthetic",
          [](std::uint32_t gop, std::uint32_t packets_per_frame,
             std::uint32_t num_frames, double ref_size_multiplier,
             std::uint16_t video_pid, std::uint32_t seed) {
              sensor::StreamSource::Synthetic spec;
              spec.gop_length = gop;
              spec.packets_per_frame = packets_per_frame;
              spec.num_frames = num_frames;
              spec.ref_size_multiplier = ref_size_multiplier;
              spec.video_pid = video_pid;
              spec.seed = seed;
              auto bytes = packets_to_bytes(sensor::generate_synthetic(spec));
              return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                               bytes.size());
          },
          py::arg("gop") = 12, py::arg("packets_per_frame") = 3,
          py::arg("num_frames") = 24, py::arg("ref_size_multiplier") = 1.0,
          py::arg("video_pid") = 0x0100, py::arg("seed") = 1);

    m.def("compare_strategies",
          [](std::uint32_t gop, std::uint32_t packets_per_frame,
             std::uint32_t num_frames, double loss_fraction,
             const std::vector<std::uint32_t>& seeds) {
              sensor::StreamSource::Synthetic spec;
              spec.gop_length = gop;
              spec.packets_per_frame = packets_per_frame;
              spec.num_frames = num_frames;
              auto r = metrics::compare_strategies(spec, loss_fraction, seeds);
              return py::make_tuple(r.uniform_ratio, r.selective_ratio);
          });

    m.def("encode_quality_notify", [](std::uint16_t stream_id, double keep) {
        auto bytes = control::encode(
            control::QualityNotify{stream_id, control::to_fixed(keep)});
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def("decode_quality_notify", [](py::bytes raw) {
        std::string s = raw;
        auto msg = control::decode(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        auto& n = std::get<control::QualityNotify>(msg);
        return py::make_tuple(n.stream_id, n.keep());
    });
}

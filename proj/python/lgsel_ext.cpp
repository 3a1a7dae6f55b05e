#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lgsel/core_types.hpp"
#include "lgsel/decode_map.hpp"
#include "lgsel/error.hpp"
#include "lgsel/harness.hpp"
#include "lgsel/pool_index.hpp"
#include "lgsel/providers.hpp"
#include "lgsel/scoring.hpp"

namespace py = pybind11;
using namespace lgsel;

namespace {

py::object parse_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

std::unique_ptr<FrameProvider> stub_or_none(const Dataset& ds, std::optional<std::uint64_t> seed,
                                            std::optional<std::uint32_t> vocab_size) {
    if (!seed) return nullptr;
    return std::make_unique<StubProvider>(vocab_size.value_or(ds.required_vocab()), *seed);
}

}  // namespace

PYBIND11_MODULE(_lgsel, m) {
    m.doc() = "Decoding-free candidate selection from one step of vocabulary logits.";

    py::register_exception<Error>(m, "LgselError", PyExc_ValueError);

    py::class_<LogitFrame>(m, "LogitFrame")
        .def(py::init([](std::vector<float> values, std::int64_t step, std::string provenance) {
                 LogitFrame f;
                 f.vocab_size = static_cast<std::uint32_t>(values.size());
                 f.values = std::move(values);
                 f.step = step;
                 f.provenance = std::move(provenance);
                 return f;
             }),
             py::arg("values"), py::arg("step") = 0, py::arg("provenance") = "")
        .def_readwrite("vocab_size", &LogitFrame::vocab_size)
        .def_readwrite("step", &LogitFrame::step)
        .def_readwrite("values", &LogitFrame::values)
        .def_readwrite("provenance", &LogitFrame::provenance)
        .def(py::self == py::self)
        .def("__repr__", [](const LogitFrame& f) {
            return "<LogitFrame vocab_size=" + std::to_string(f.vocab_size) + " step=" + std::to_string(f.step) + ">";
        });

    py::class_<Candidate>(m, "Candidate")
        .def(py::init([](std::string id, std::string text, std::vector<TokenId> tokens,
                         std::optional<std::vector<std::uint32_t>> mask) {
                 return Candidate{std::move(id), std::move(text), std::move(tokens), std::move(mask)};
             }),
             py::arg("id"), py::arg("text"), py::arg("tokens"), py::arg("mask") = py::none())
        .def_readwrite("id", &Candidate::id)
        .def_readwrite("text", &Candidate::text)
        .def_readwrite("tokens", &Candidate::tokens)
        .def_readwrite("mask", &Candidate::mask)
        .def(py::self == py::self);

    py::class_<CandidatePool>(m, "CandidatePool")
        .def(py::init([](std::vector<Candidate> candidates, std::string fingerprint, bool prepend_space) {
                 return CandidatePool{std::move(candidates), std::move(fingerprint), prepend_space};
             }),
             py::arg("candidates"), py::arg("tokenizer_fingerprint") = "python", py::arg("prepend_space") = true)
        .def_readwrite("candidates", &CandidatePool::candidates)
        .def_readwrite("tokenizer_fingerprint", &CandidatePool::tokenizer_fingerprint)
        .def_readwrite("prepend_space", &CandidatePool::prepend_space)
        .def("__len__", &CandidatePool::size)
        .def(py::self == py::self);

    py::class_<Method>(m, "Method")
        .def_static("first", &Method::first)
        .def_static("last", &Method::last)
        .def_static("kth", &Method::kth, py::arg("k"))
        .def_static("average", &Method::average)
        .def_static("sum", &Method::sum)
        .def_static("sample_average", &Method::sample_average)
        .def_static("parse", &Method::parse, py::arg("name"), py::arg("k") = py::none())
        .def_static("all_kinds", &Method::all_kinds, py::arg("k") = 1)
        .def_property_readonly("name", &Method::name)
        .def_property_readonly("label", &Method::label)
        .def_readonly("k", &Method::k)
        .def("__repr__", [](const Method& me) { return "<Method " + me.label() + ">"; });

    py::class_<ScoreVector>(m, "ScoreVector")
        .def_readonly("aggregates", &ScoreVector::aggregates)
        .def_readonly("probabilities", &ScoreVector::probabilities);

    py::class_<RankEntry>(m, "RankEntry")
        .def_readonly("id", &RankEntry::id)
        .def_readonly("ordinal", &RankEntry::ordinal)
        .def_readonly("probability", &RankEntry::probability);

    py::class_<Ranking>(m, "Ranking")
        .def_readonly("entries", &Ranking::entries)
        .def_readonly("k", &Ranking::k)
        .def("ids", [](const Ranking& r) {
            std::vector<std::string> ids;
            for (const auto& e : r.entries) ids.push_back(e.id);
            return ids;
        });

    m.def("validate_frame", [](const LogitFrame& f) { return validate_frame(f); }, py::arg("frame"));
    m.def(
        "validate_pool",
        [](const CandidatePool& p, std::uint32_t vocab) { return validate_pool(p, vocab).duplicate_sequences; },
        py::arg("pool"), py::arg("vocab_size"),
        "Raises on invalid pools; returns groups of ids sharing a token sequence.");

    m.def("aggregate", &aggregate, py::arg("frame"), py::arg("candidate"), py::arg("method"),
          py::arg("use_mask") = false);
    m.def("score_pool", &score_pool, py::arg("frame"), py::arg("pool"), py::arg("method"), py::arg("use_mask") = false,
          py::call_guard<py::gil_scoped_release>());
    m.def("score_pool_naive", &score_pool_naive, py::arg("frame"), py::arg("pool"), py::arg("method"),
          py::arg("use_mask") = false);
    m.def("top_k", &top_k, py::arg("scores"), py::arg("pool"), py::arg("k"));

    m.def("encode_lgts", [](const LogitFrame& f) { return py::bytes(encode_lgts(f)); }, py::arg("frame"));
    m.def("decode_lgts", [](const py::bytes& b) { return decode_lgts(std::string(b)); }, py::arg("data"));
    m.def("write_lgts", &write_lgts, py::arg("frame"), py::arg("path"));
    m.def("read_frame_file", &read_frame_file, py::arg("path"));

    m.def("build_pool_reference", &build_pool_reference, py::arg("candidate_file"), py::arg("prepend_space") = true);
    m.def("load_pool", &load_pool, py::arg("path"));
    m.def("save_pool", &save_pool, py::arg("pool"), py::arg("path"));
    m.def(
        "attach_masks",
        [](const CandidatePool& p, const std::filesystem::path& file) { return attach_masks(p, file); },
        py::arg("pool"), py::arg("mask_file"));

    m.def("head_letters", [](std::size_t n) { return HeadScheme::letters(n).heads; }, py::arg("n"));
    m.def(
        "extract_choice",
        [](const std::string& output, const CandidatePool& pool, std::optional<std::vector<std::string>> heads) {
            HeadScheme scheme = heads ? HeadScheme{*heads} : HeadScheme::letters(pool.size());
            return extract_choice(output, pool, scheme);
        },
        py::arg("output"), py::arg("pool"), py::arg("heads") = py::none());

    py::class_<StubProvider>(m, "StubProvider")
        .def(py::init<std::uint32_t, std::uint64_t>(), py::arg("vocab_size"), py::arg("seed"))
        .def(
            "get_frame",
            [](StubProvider& s, const std::string& prompt, std::int64_t step, bool use_template) {
                return s.get_frame({prompt, step, use_template});
            },
            py::arg("prompt"), py::arg("step") = 0, py::arg("template") = false);

    m.def(
        "load_dataset_and_eval",
        [](const std::filesystem::path& dataset, const std::string& method, std::optional<std::uint32_t> kth,
           std::optional<std::uint64_t> seed, std::optional<std::uint32_t> vocab_size, std::optional<std::size_t> k,
           bool use_mask, std::int64_t step, bool use_template, unsigned workers) {
            const Dataset ds = load_dataset(dataset);
            auto provider = stub_or_none(ds, seed, vocab_size);
            EvalConfig cfg;
            cfg.method = Method::parse(method, kth);
            cfg.k = k;
            cfg.use_mask = use_mask;
            cfg.step = step;
            cfg.use_template = use_template;
            cfg.workers = workers;
            MetricsReport report;
            {
                py::gil_scoped_release release;
                report = run_eval(ds, provider.get(), cfg);
            }
            return parse_json(report_json(report, true));
        },
        py::arg("dataset"), py::arg("method"), py::arg("kth") = py::none(), py::arg("seed") = py::none(),
        py::arg("vocab_size") = py::none(), py::arg("k") = py::none(), py::arg("use_mask") = false,
        py::arg("step") = 0, py::arg("template") = false, py::arg("workers") = 1,
        "Runs an evaluation with the stub provider (when seeded) or frame files; returns the report dict.");

    m.def(
        "run_decode_eval",
        [](const std::filesystem::path& dataset, const std::filesystem::path& outputs) {
            const Dataset ds = load_dataset(dataset);
            return parse_json(report_json(run_decode_eval(ds, outputs), true));
        },
        py::arg("dataset"), py::arg("outputs"));
}

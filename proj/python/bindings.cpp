#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "duwak/attack.hpp"
#include "duwak/bench.hpp"
#include "duwak/detect.hpp"
#include "duwak/generate.hpp"
#include "duwak/stats.hpp"
#include "duwak/theory.hpp"

namespace py = pybind11;
using namespace duwak;

namespace {

// Bundles a model with the maps its attacks need so Python holds one object.
struct Model {
    ModelHandle handle;
    SynonymMap synonyms;
    ContractionMap contractions;
    CaseFoldMap casefold;

    explicit Model(const ModelConfig& c) : handle(make_model(c)) {
        synonyms = nearest_neighbour_synonyms(*handle.model);
        contractions = builtin_contraction_map(*handle.vocab);
        casefold = builtin_casefold_map(*handle.vocab);
    }
    AttackMaps maps() const { return {handle.vocab.get(), &synonyms, &contractions, &casefold, nullptr}; }
};

py::dict trace_dict(const GenerationTrace& tr) {
    py::list steps;
    for (const auto& s : tr.steps) {
        py::dict d;
        d["seed"] = s.seed;
        d["r"] = s.r;
        d["contrastive"] = s.contrastive;
        d["green"] = s.green;
        d["token"] = s.token;
        d["prob"] = s.prob;
        d["exp_r"] = s.exp_r;
        steps.append(d);
    }
    py::dict out;
    out["scheme"] = to_string(tr.scheme);
    out["prompt"] = tr.prompt.tokens;
    out["tokens"] = tr.tokens.tokens;
    out["steps"] = steps;
    return out;
}

}  // namespace

PYBIND11_MODULE(_duwak, m) {
    m.doc() = "Dual watermarking for language-model text";

    py::register_exception<Error>(m, "DuwakError", PyExc_ValueError);

    py::class_<DuwakConfig>(m, "DuwakConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &DuwakConfig::gamma)
        .def_readwrite("delta", &DuwakConfig::delta)
        .def_readwrite("eta", &DuwakConfig::eta)
        .def_readwrite("alpha", &DuwakConfig::alpha)
        .def_readwrite("k", &DuwakConfig::k)
        .def_readwrite("L", &DuwakConfig::L)
        .def_readwrite("h", &DuwakConfig::h)
        .def_readwrite("M", &DuwakConfig::M)
        .def_readwrite("detector_seed", &DuwakConfig::detector_seed)
        .def_readwrite("p_threshold", &DuwakConfig::p_threshold)
        .def_readwrite("max_inspect", &DuwakConfig::max_inspect)
        .def("validate", &DuwakConfig::validate);

    py::class_<WatermarkKeys>(m, "WatermarkKeys")
        .def(py::init<>())
        .def(py::init([](std::uint64_t tp, std::uint64_t cs) {
                 WatermarkKeys k;
                 k.tp.value = tp;
                 k.cs.value = cs;
                 k.validate();
                 return k;
             }),
             py::arg("tp"), py::arg("cs"))
        .def_property_readonly("tp", [](const WatermarkKeys& k) { return k.tp.value; })
        .def_property_readonly("cs", [](const WatermarkKeys& k) { return k.cs.value; });

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("seed", &ModelConfig::seed)
        .def_readwrite("dim", &ModelConfig::dim)
        .def_readwrite("temperature", &ModelConfig::temperature)
        .def_readwrite("vocab_size", &ModelConfig::vocab_size)
        .def_readwrite("vocab_file", &ModelConfig::vocab_file)
        .def_readwrite("logits_url", &ModelConfig::logits_url);

    py::class_<Model>(m, "Model")
        .def(py::init<const ModelConfig&>(), py::arg("config") = ModelConfig{})
        .def_property_readonly("vocab_size", [](const Model& md) { return md.handle.vocab->size(); })
        .def("tokenize", [](const Model& md, const std::string& text) { return tokenize(text, *md.handle.vocab).tokens; })
        .def("detokenize", [](const Model& md, const std::vector<TokenId>& t) { return detokenize(t, *md.handle.vocab); })
        .def("next_logits", [](const Model& md, const std::vector<TokenId>& ctx) { return md.handle.model->next_logits(ctx); })
        .def("prompt", [](const Model& md, std::uint64_t master_seed, std::size_t text_id, std::size_t length) {
            return bench_prompt(*md.handle.vocab, master_seed, text_id, length);
        }, py::arg("master_seed"), py::arg("text_id"), py::arg("length") = 8);

    py::class_<DetectionReport>(m, "DetectionReport")
        .def_readonly("T", &DetectionReport::T)
        .def_readonly("phi_tp", &DetectionReport::phi_tp)
        .def_readonly("z_tp", &DetectionReport::z_tp)
        .def_readonly("p_tp", &DetectionReport::p_tp)
        .def_readonly("phi_cs", &DetectionReport::phi_cs)
        .def_readonly("c_count", &DetectionReport::c_count)
        .def_readonly("p_cs", &DetectionReport::p_cs)
        .def_readonly("degenerate_cs", &DetectionReport::degenerate_cs)
        .def_readonly("p_combined", &DetectionReport::p_combined)
        .def_readonly("exp_score", &DetectionReport::exp_score)
        .def_readonly("p_exp", &DetectionReport::p_exp);

    m.def("schemes", [] {
        std::vector<std::string> out;
        for (Scheme s : all_schemes()) out.push_back(to_string(s));
        return out;
    });

    m.def(
        "generate",
        [](const Model& md, const std::vector<TokenId>& prompt, const std::string& scheme, const WatermarkKeys& keys,
           const DuwakConfig& config, std::size_t length, std::uint64_t sampling_seed) {
            GenerationTrace tr;
            {
                py::gil_scoped_release release;
                tr = generate(*md.handle.model, prompt, parse_scheme(scheme), keys, config, length, sampling_seed);
            }
            return trace_dict(tr);
        },
        py::arg("model"), py::arg("prompt"), py::arg("scheme") = "DUWAK", py::arg("keys") = WatermarkKeys{},
        py::arg("config") = DuwakConfig{}, py::arg("length") = 200, py::arg("sampling_seed") = 0);

    m.def(
        "detect",
        [](const Model& md, const std::vector<TokenId>& tokens, const WatermarkKeys& keys, const DuwakConfig& config,
           const std::vector<TokenId>& prefix) {
            py::gil_scoped_release release;
            return duwak_detect(tokens, keys, config, *md.handle.model, prefix);
        },
        py::arg("model"), py::arg("tokens"), py::arg("keys") = WatermarkKeys{}, py::arg("config") = DuwakConfig{},
        py::arg("prefix") = std::vector<TokenId>{});

    m.def(
        "detection_efficiency",
        [](const Model& md, const std::vector<TokenId>& tokens, const std::string& detector, double threshold,
           const WatermarkKeys& keys, const DuwakConfig& config, const std::vector<TokenId>& prefix) {
            py::gil_scoped_release release;
            const auto e = detection_efficiency(tokens, parse_detector(detector), keys, config, md.handle.model.get(),
                                                threshold, config.max_inspect, prefix);
            return std::make_pair(e.t_star, e.render());
        },
        py::arg("model"), py::arg("tokens"), py::arg("detector") = "duwak", py::arg("threshold") = 0.02,
        py::arg("keys") = WatermarkKeys{}, py::arg("config") = DuwakConfig{},
        py::arg("prefix") = std::vector<TokenId>{},
        "Returns (t_star or None, rendered string such as '57' or '>1024').");

    m.def(
        "attack",
        [](const Model& md, const std::vector<TokenId>& tokens, const std::string& label, std::uint64_t seed) {
            return apply_attack(TokenSeq{tokens, Origin::generated}, AttackSpec::parse(label, seed), md.maps()).tokens;
        },
        py::arg("model"), py::arg("tokens"), py::arg("label"), py::arg("seed") = 0);

    m.def("attack_grid", [](bool include_external) {
        std::vector<std::string> out;
        for (const auto& s : attack_grid(0, include_external)) out.push_back(s.label());
        return out;
    }, py::arg("include_external") = false);

    m.def("fisher_combine", &fisher_combine);
    m.def("normal_cdf", &normal_cdf);
    m.def("gamma_q", &gamma_q);
    m.def("diversity", [](const std::vector<TokenId>& t) { return diversity(t); });
    m.def("spike_z", &spike_z);
    m.def("duwak_A", &duwak_A);

    m.def(
        "run_bench",
        [](const std::string& config_json) {
            std::string csv;
            {
                py::gil_scoped_release release;
                const auto cfg = bench_config_from_json(config_json);
                csv = summary_csv(run_bench(cfg), cfg.record_timings);
            }
            return csv;
        },
        py::arg("config_json"), "Runs a benchmark from a JSON config string and returns summary.csv.");
}

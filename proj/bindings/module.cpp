// Python surface over the library's core operations: caption embedding,
// concept mixing, the noise schedule, and the shapes dataset generator.
// Training loops and sampling stay behind the CLI, which is built for long
// deterministic runs.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvc/caption.hpp"
#include "mvc/dataset.hpp"
#include "mvc/mixer.hpp"
#include "mvc/schedule.hpp"
#include "mvc/shapes.hpp"

namespace py = pybind11;
using namespace mvc;

namespace {

std::vector<std::vector<float>> matrix_rows(const EmbeddingMatrix& m) {
    std::vector<std::vector<float>> rows(static_cast<std::size_t>(m.rows));
    for (int i = 0; i < m.rows; ++i)
        rows[static_cast<std::size_t>(i)].assign(m.v.begin() + static_cast<std::size_t>(i) * m.cols,
                                                 m.v.begin() + (static_cast<std::size_t>(i) + 1) * m.cols);
    return rows;
}

}  // namespace

PYBIND11_MODULE(_mvcaug, mod) {
    mod.doc() = "diffusion-based dataset augmentation via caption-embedding mixing";

    py::register_exception<Error>(mod, "MvcError");

    py::class_<TokenEmbedder>(mod, "TokenEmbedder")
        .def(py::init<int, int, std::uint64_t>(), py::arg("m"), py::arg("d"), py::arg("seed"))
        .def_property_readonly("m", &TokenEmbedder::m)
        .def_property_readonly("d", &TokenEmbedder::d)
        .def_property_readonly("seed", &TokenEmbedder::seed)
        .def(
            "embed",
            [](const TokenEmbedder& e, const std::string& label, const std::string& descriptor) {
                const Caption caption = build_caption(
                    label, descriptor.empty() ? std::nullopt
                                              : std::optional<std::string>(descriptor));
                return matrix_rows(embed_caption(e, caption));
            },
            py::arg("label"), py::arg("descriptor") = "",
            "embed the templated caption for a class label, as m rows of d floats")
        .def(
            "embed_text",
            [](const TokenEmbedder& e, const std::string& text) {
                return matrix_rows(embed_caption(e, Caption{"", text, CaptionSource::imported}));
            },
            py::arg("text"), "embed raw text without templating")
        .def("null_embedding",
             [](const TokenEmbedder& e) { return matrix_rows(null_embedding(e)); });

    mod.def("caption_text", [](const std::string& label, const std::string& descriptor) {
        return build_caption(label, descriptor.empty() ? std::nullopt
                                                       : std::optional<std::string>(descriptor))
            .text;
    }, py::arg("label"), py::arg("descriptor") = "");

    mod.def(
        "mix_captions",
        [](const std::vector<std::string>& captions, int m, int d, std::uint64_t embed_seed,
           int coarse_passes, int fine_passes, int outputs, std::uint64_t mix_seed,
           const std::string& label) {
            const TokenEmbedder embedder(m, d, embed_seed);
            std::vector<EmbeddingMatrix> pool;
            for (const std::string& text : captions)
                pool.push_back(embed_caption(embedder, Caption{label, text}));
            MixerConfig cfg;
            cfg.coarse_passes = coarse_passes;
            cfg.fine_passes = fine_passes;
            cfg.outputs_per_class = outputs;
            cfg.seed = mix_seed;
            const auto mixed = mix_embeddings(pool, cfg, null_embedding(embedder), label);
            std::vector<std::vector<std::vector<float>>> out;
            for (const MixedConditioning& mc : mixed) out.push_back(matrix_rows(mc.cond));
            return out;
        },
        py::arg("captions"), py::arg("m") = 16, py::arg("d") = 32, py::arg("embed_seed") = 1,
        py::arg("coarse_passes") = 1, py::arg("fine_passes") = 2, py::arg("outputs") = 8,
        py::arg("mix_seed") = 0, py::arg("label") = "",
        "mix embedded captions into novel conditionings");

    mod.def(
        "alpha_bars",
        [](int steps, double beta_start, double beta_end) {
            return make_schedule(steps, beta_start, beta_end).alpha_bar;
        },
        py::arg("steps") = 200, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02,
        "cumulative signal retention per timestep");

    mod.def(
        "gen_shapes",
        [](const std::string& out_dir, const std::vector<std::string>& classes, int count,
           int size, std::uint64_t seed) {
            std::vector<ShapeSpec> specs;
            for (const std::string& label : classes) specs.push_back(ShapeSpec{label, count});
            return make_shapes_dataset(out_dir, specs, size, seed).records.size();
        },
        py::arg("out_dir"), py::arg("classes"), py::arg("count") = 20, py::arg("size") = 32,
        py::arg("seed") = 1, "render a labeled shapes dataset; returns the record count");

    mod.def(
        "manifest_summary",
        [](const std::string& path) {
            const DatasetManifest m = load_manifest(path);
            py::dict out;
            out["classes"] = m.classes;
            out["records"] = m.records.size();
            std::size_t real = 0;
            for (const DatasetRecord& r : m.records)
                if (r.provenance == Provenance::real) ++real;
            out["real"] = real;
            out["synthetic"] = m.records.size() - real;
            return out;
        },
        py::arg("path"), "classes and record counts of a dataset manifest");
}

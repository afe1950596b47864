#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/eval.hpp"
#include "alignretrieve/pipeline.hpp"
#include "alignretrieve/query_enhancement.hpp"
#include "alignretrieve/retrieval.hpp"
#include "alignretrieve/reward.hpp"
#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"

namespace py = pybind11;
using namespace alignretrieve;

namespace {

std::vector<SourceFile> to_source_files(const std::vector<std::pair<std::string, std::string>>& files) {
    std::vector<SourceFile> out;
    out.reserve(files.size());
    for (const auto& [path, content] : files) {
        out.push_back({path, split_lines(content)});
    }
    return out;
}

std::string kind_name(SnippetKind kind) {
    return kind == SnippetKind::Base ? "base" : "dependency";
}

py::list ranked_to_list(const std::vector<RankedResult>& results) {
    py::list out;
    for (const RankedResult& r : results) {
        out.append(py::make_tuple(r.snippet_id, r.score, r.rank));
    }
    return out;
}

SamplingTheoryParams make_theory_params(double p_s, double rho, double alpha, double beta,
                                        double gamma) {
    SamplingTheoryParams params;
    params.p_s = p_s;
    params.rho = rho;
    params.alpha = alpha;
    params.beta = beta;
    params.gamma = gamma;
    validate_theory_params(params);
    return params;
}

py::dict run_mock_completion(const std::vector<std::pair<std::string, std::string>>& files,
                             const std::string& completion_path, const std::string& unfinished_code,
                             int sampling_k, double temperature, double top_p, std::uint64_t seed,
                             bool no_dependency_context, bool no_query_enhancement,
                             std::size_t dim, std::size_t buckets) {
    PipelineConfig config;
    config.sampling_k = sampling_k;
    config.temperature = temperature;
    config.top_p = top_p;
    config.sampling_seed = seed;
    config.no_dependency_context = no_dependency_context;
    config.no_query_enhancement = no_query_enhancement;
    MockBackend sampler;
    MockBackend generator;
    const EmbedderParams params = init_params(dim, buckets, seed_stream(seed, "init"));
    Diagnostics diags;
    const CompletionOutcome outcome =
        run_completion(to_source_files(files), completion_path, unfinished_code, config, sampler,
                       generator, params, &diags);
    py::dict out;
    out["prediction"] = outcome.prediction;
    py::list candidates;
    for (const CandidateCompletion& c : outcome.candidates) {
        candidates.append(c.text);
    }
    out["candidates"] = std::move(candidates);
    out["coarse"] = ranked_to_list(outcome.coarse_results);
    out["dense"] = ranked_to_list(outcome.dense_results);
    out["warnings"] = diags;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "retrieval-aligned repository code completion core";
    m.attr("__version__") = "0.1.0";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            switch (e.kind()) {
                case ErrorKind::InvalidParameter:
                case ErrorKind::InvalidInput:
                case ErrorKind::InvalidConfig:
                    PyErr_SetString(PyExc_ValueError, e.what());
                    break;
                default:
                    PyErr_SetString(PyExc_RuntimeError, e.what());
            }
        }
    });

    py::class_<Snippet>(m, "Snippet")
        .def_readonly("id", &Snippet::id)
        .def_property_readonly("kind", [](const Snippet& s) { return kind_name(s.kind); })
        .def_readonly("origin_path", &Snippet::origin_path)
        .def_readonly("start_line", &Snippet::start_line)
        .def_readonly("end_line", &Snippet::end_line)
        .def_readonly("text", &Snippet::text)
        .def_readonly("line_count", &Snippet::line_count)
        .def("__repr__", [](const Snippet& s) {
            return "<Snippet " + s.id + " (" + kind_name(s.kind) + ")>";
        });

    py::class_<EmbedderParams>(m, "EmbedderParams")
        .def_property_readonly("dim", [](const EmbedderParams& p) { return p.dim; })
        .def_property_readonly("buckets", [](const EmbedderParams& p) { return p.buckets; })
        .def("checksum", [](const EmbedderParams& p) { return params_checksum(p); });

    m.def("tokenize", &tokenize, py::arg("text"), "lowercased identifier-aware code tokens");

    m.def(
        "build_codebase",
        [](const std::vector<std::pair<std::string, std::string>>& files,
           const std::string& completion_path, std::size_t max_snippet_lines) {
            CorpusConfig config;
            config.max_snippet_lines = max_snippet_lines;
            Diagnostics diags;
            auto snippets = build_codebase(to_source_files(files), completion_path, config, &diags);
            return py::make_tuple(std::move(snippets), diags);
        },
        py::arg("files"), py::arg("completion_path"), py::arg("max_snippet_lines") = 15,
        "dual-type snippet corpus for one completion file; returns (snippets, warnings)");

    m.def(
        "corpus_to_jsonl",
        [](const std::vector<Snippet>& snippets) { return corpus_to_jsonl(snippets); },
        py::arg("snippets"));
    m.def(
        "corpus_from_jsonl", [](const std::string& text) { return corpus_from_jsonl(text); },
        py::arg("text"));

    m.def(
        "bm25_retrieve",
        [](const std::vector<Snippet>& snippets, const std::string& query, std::size_t k) {
            RetrievalIndex index(snippets);
            return ranked_to_list(index.bm25_retrieve(query, k));
        },
        py::arg("snippets"), py::arg("query"), py::arg("k"),
        "sparse lexical retrieval; list of (snippet_id, score, rank)");

    m.def(
        "dense_retrieve",
        [](const std::vector<Snippet>& snippets, const EmbedderParams& params,
           const std::string& query, std::size_t k) {
            RetrievalIndex index(snippets);
            index.compute_embeddings(params);
            return ranked_to_list(index.dense_retrieve(params, query, k));
        },
        py::arg("snippets"), py::arg("params"), py::arg("query"), py::arg("k"),
        "embedding-similarity retrieval; list of (snippet_id, score, rank)");

    m.def(
        "init_embedder",
        [](std::size_t dim, std::size_t buckets, std::uint64_t seed) {
            return init_params(dim, buckets, seed_stream(seed, "init"));
        },
        py::arg("dim") = 128, py::arg("buckets") = 4096, py::arg("seed") = 0);
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def(
        "embed", [](const EmbedderParams& p, const std::string& text) { return embed(p, text); },
        py::arg("params"), py::arg("text"), "unit-norm embedding (zero vector when degenerate)");
    m.def("cosine", &cosine, py::arg("u"), py::arg("v"));

    m.def(
        "enhanced_query",
        [](const std::string& unfinished_code, const std::vector<std::string>& candidates,
           std::size_t tail_lines) {
            std::vector<CandidateCompletion> wrapped;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                wrapped.push_back({candidates[i], static_cast<int>(i), {}});
            }
            return build_enhanced_query(unfinished_code, wrapped, tail_lines).rendered;
        },
        py::arg("unfinished_code"), py::arg("candidates"), py::arg("tail_lines") = 10,
        "unfinished-code tail augmented with sampled candidates");

    m.def(
        "p_at_least_one",
        [](int n, double p_s, double rho) {
            return p_at_least_one(make_theory_params(p_s, rho, 1.0, 0.05, 0.05), n);
        },
        py::arg("n"), py::arg("p_s") = 0.5, py::arg("rho") = 0.0);
    m.def(
        "cumulative_error",
        [](int n, double p_s) {
            return cumulative_error(make_theory_params(p_s, 0.0, 1.0, 0.05, 0.05), n);
        },
        py::arg("n"), py::arg("p_s") = 0.5);
    m.def(
        "utility",
        [](double n, double p_s, double alpha, double beta, double gamma) {
            return utility(make_theory_params(p_s, 0.0, alpha, beta, gamma), n);
        },
        py::arg("n"), py::arg("p_s") = 0.5, py::arg("alpha") = 1.0, py::arg("beta") = 0.05,
        py::arg("gamma") = 0.05);
    m.def(
        "optimal_n",
        [](double p_s, double alpha, double beta, double gamma) {
            return optimal_n(make_theory_params(p_s, 0.0, alpha, beta, gamma));
        },
        py::arg("p_s") = 0.5, py::arg("alpha") = 1.0, py::arg("beta") = 0.05,
        py::arg("gamma") = 0.05);

    m.def("perplexity", [](const std::vector<double>& logprobs) {
        TokenLogprobs t;
        t.logprobs = logprobs;
        t.tokens.resize(logprobs.size());
        return perplexity(t);
    });
    m.def("select_mp", &select_mp, py::arg("ppls"),
          "index of the minimal perplexity, lowest index on ties");
    m.def(
        "reward_from_scores",
        [](const std::vector<double>& scores, std::size_t mp_index) {
            const std::vector<double> soft = softmax_weights(scores);
            py::dict out;
            out["softmax"] = soft;
            out["reward"] = reward(scores, mp_index);
            out["grad_scores"] = reward_gradient_wrt_scores(scores, mp_index);
            return out;
        },
        py::arg("scores"), py::arg("mp_index"));

    m.def("exact_match", &exact_match, py::arg("prediction"), py::arg("groundtruth"));
    m.def("edit_similarity", &edit_similarity, py::arg("prediction"), py::arg("groundtruth"));
    m.def("em_at_k", &em_at_k, py::arg("predictions"), py::arg("groundtruth"), py::arg("k"));

    m.def("run_mock_completion", &run_mock_completion, py::arg("files"),
          py::arg("completion_path"), py::arg("unfinished_code"), py::arg("sampling_k") = 4,
          py::arg("temperature") = 0.8, py::arg("top_p") = 0.95, py::arg("seed") = 0,
          py::arg("no_dependency_context") = false, py::arg("no_query_enhancement") = false,
          py::arg("dim") = 64, py::arg("buckets") = 1024,
          "full pipeline against the deterministic mock backend");
}

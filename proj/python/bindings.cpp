#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <string>
#include <vector>

#include "transaudit/audit.hpp"
#include "transaudit/corpus.hpp"
#include "transaudit/error.hpp"
#include "transaudit/fragments.hpp"
#include "transaudit/judge.hpp"
#include "transaudit/scores.hpp"
#include "transaudit/stats.hpp"

namespace py = pybind11;
namespace ta = transaudit;

namespace {

// Structured results cross the boundary as JSON text; the package decodes them.
std::string dump(const nlohmann::ordered_json& j) { return j.dump(); }

std::vector<ta::Corpus> load_all(const std::vector<std::filesystem::path>& paths) {
  std::vector<ta::Corpus> out;
  for (const auto& p : paths) out.push_back(ta::parse_jsonl_corpus(p));
  return out;
}

std::vector<ta::SegmentScore> load_all_scores(const std::vector<std::filesystem::path>& paths) {
  std::vector<ta::SegmentScore> all;
  for (const auto& p : paths) {
    auto part = ta::load_scores(p);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace

PYBIND11_MODULE(_transaudit, m) {
  m.doc() = "Native core of transaudit";
  m.attr("__version__") = TRANSAUDIT_VERSION;

  static py::exception<ta::Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ta::Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      inst.attr("kind") = std::string(ta::to_string(e.kind()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  m.def("average_ranks", [](const std::vector<double>& v) { return ta::stats::average_ranks(v); }, py::arg("values"));
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = ta::stats::spearman(x, y);
        return py::make_tuple(r.rho, r.p);
      },
      py::arg("x"), py::arg("y"), "(rho, p) with average ranks for ties.");
  m.def(
      "friedman",
      [](const std::vector<std::vector<double>>& ranks) {
        const auto r = ta::stats::friedman_test(ranks);
        return py::make_tuple(r.chi2, r.p);
      },
      py::arg("per_block_ranks"), "(chi2, p) over a blocks x systems rank matrix.");
  m.def("nemenyi_cd", &ta::stats::nemenyi_cd, py::arg("k"), py::arg("n_blocks"), py::arg("alpha") = 0.05);
  m.def(
      "analyze_ranks",
      [](std::vector<std::string> systems, std::vector<std::string> blocks, std::vector<std::vector<double>> ranks,
         double alpha) { return dump(ta::to_json(ta::analyze_ranks(std::move(systems), std::move(blocks), std::move(ranks), alpha))); },
      py::arg("systems"), py::arg("blocks"), py::arg("per_block_ranks"), py::arg("alpha") = 0.05);

  m.def(
      "leakage_inflation",
      [](std::size_t pool, std::size_t eval, std::size_t shots, double accuracy) {
        return ta::estimate_leakage_inflation({pool, eval, shots, accuracy});
      },
      py::arg("context_pool_size"), py::arg("eval_split_size"), py::arg("shots"), py::arg("true_accuracy"));

  m.def("serialize_fragments", [](const std::vector<std::string>& f) { return ta::serialize_fragments(f); },
        py::arg("fragments"));
  m.def("deserialize_fragments", &ta::deserialize_fragments, py::arg("payload"), py::arg("expected_n"));

  m.def("majority_threshold", &ta::majority_threshold, py::arg("pool_size"));

  m.def(
      "audit",
      [](const std::vector<std::filesystem::path>& corpus, const std::vector<std::filesystem::path>& english,
         std::vector<std::string> languages) {
        ta::AuditOptions opts;
        opts.target_languages = std::move(languages);
        const auto targets = load_all(corpus);
        const auto originals = load_all(english);
        return dump(ta::to_json(ta::audit(targets, originals, opts)));
      },
      py::arg("corpus"), py::arg("english"), py::arg("languages") = std::vector<std::string>{});

  m.def(
      "landscape",
      [](const std::vector<std::filesystem::path>& scores) {
        const auto all = load_all_scores(scores);
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (const auto& c : ta::landscape(all)) cells.push_back(ta::to_json(c));
        return dump(cells);
      },
      py::arg("scores"));
  m.def(
      "compare",
      [](const std::vector<std::filesystem::path>& scores, const std::string& a, const std::string& b,
         const std::string& mode, std::size_t bootstrap, double alpha, std::uint64_t seed) {
        const auto parsed = ta::parse_score_mode(mode);
        if (!parsed) throw ta::Error(ta::ErrorKind::DomainError, "unknown mode '" + mode + "'");
        const auto all = load_all_scores(scores);
        const auto pairs = ta::paired_overlap(all, a, b, *parsed);
        return dump(ta::to_json(ta::paired_bootstrap_ci(pairs, bootstrap, alpha, seed)));
      },
      py::arg("scores"), py::arg("system_a"), py::arg("system_b"), py::arg("mode") = "ref_free", py::arg("bootstrap") = ta::kDefaultBootstrap,
      py::arg("alpha") = ta::kDefaultAlpha, py::arg("seed") = ta::kDefaultSeed);
}

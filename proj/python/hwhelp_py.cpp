#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hwhelp/catalog.hpp"
#include "hwhelp/codescan.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/evaluator.hpp"
#include "hwhelp/gateway.hpp"
#include "hwhelp/guard.hpp"
#include "hwhelp/promptkit.hpp"
#include "hwhelp/replay.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace hwhelp;

namespace {

// JSON crosses the boundary through the stdlib json module.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

GuardConfig guard_config(const py::dict& kw) {
  GuardConfig c;
  if (kw.contains("leak_threshold")) c.leak_threshold = kw["leak_threshold"].cast<std::size_t>();
  if (kw.contains("max_sentences")) c.max_sentences = kw["max_sentences"].cast<std::size_t>();
  return c;
}

class PyCatalog {
 public:
  explicit PyCatalog(const fs::path& dir) : catalog_(load_catalog(dir)) {}

  std::vector<std::string> ids() const { return catalog_.ids(); }
  py::object manifest(const std::string& id) const { return to_py(manifest_to_json(catalog_.at(id))); }

  py::object run_tests(const std::string& id, const std::string& source) const {
    py::gil_scoped_release release;
    auto r = hwhelp::run_tests(source, catalog_.at(id));
    py::gil_scoped_acquire acquire;
    return to_py(report_to_json(r));
  }

  std::string format_report(const std::string& id, const std::string& source) const {
    py::gil_scoped_release release;
    return hwhelp::format_report(hwhelp::run_tests(source, catalog_.at(id)));
  }

  py::dict syntax(const std::string& id, const std::string& source) const {
    auto v = syntax_check(source, catalog_.at(id).runner);
    py::dict d;
    d["ok"] = v.ok;
    d["line"] = v.line ? py::cast(*v.line) : py::none();
    d["message"] = v.message ? py::cast(*v.message) : py::none();
    return d;
  }

  py::dict detect(const std::string& source, std::optional<std::string> hint) const {
    auto r = detect_problem(source, catalog_, hint);
    py::list ranked;
    for (const auto& s : r.ranked) ranked.append(py::make_tuple(s.id, s.score));
    py::dict d;
    d["chosen"] = r.chosen ? py::cast(*r.chosen) : py::none();
    d["ambiguous"] = r.ambiguous;
    d["ranked"] = ranked;
    return d;
  }

  std::string region(const std::string& id, const std::string& source) const {
    return extract_region(source, catalog_.at(id)).text;
  }

  py::object assemble(const std::string& id, const std::string& code, const fs::path& template_dir,
                      const std::string& template_id, const py::list& history, const py::object& eval_report) const {
    auto t = load_template(template_dir, template_id);
    std::vector<Exchange> h;
    for (const auto& e : history) h.push_back(exchange_from_json(from_py(e)));
    std::optional<EvalReport> report;
    if (!eval_report.is_none()) report = report_from_json(from_py(eval_report));
    auto p = assemble_prompt(t, catalog_.at(id), code, h, report ? &*report : nullptr);
    auto j = prompt_to_json(p);
    j["rendered"] = render_prompt_text(p);
    return to_py(j);
  }

  py::object guard(const std::string& id, const std::string& response, const py::dict& kw) const {
    return to_py(verdict_to_json(run_guard(response, catalog_.at(id), guard_config(kw))));
  }

  py::object replay(const fs::path& checkpoints, const fs::path& template_dir, const std::string& template_id,
                    const std::string& backend, std::size_t parallelism) const {
    auto cps = load_checkpoints(checkpoints);
    auto t = load_template(template_dir, template_id);
    CodePredicate predicate;
    if (backend == "stub") {
      predicate = make_evaluator_predicate(catalog_);
    } else if (backend == "always-correct") {
      predicate = [](std::string_view, std::string_view) { return true; };
    } else {
      throw ConfigError("unknown replay backend: " + backend);
    }
    StubBackend stub({}, predicate);
    std::vector<ReplayResult> results;
    {
      py::gil_scoped_release release;
      results = run_replay(t, cps, catalog_, stub, {.parallelism = parallelism});
    }
    json out = {{"metrics", metrics_to_json(score_replay(results, cps))}, {"results", json::array()}};
    for (const auto& r : results) out["results"].push_back(result_to_json(r));
    return to_py(out);
  }

 private:
  Catalog catalog_;
};

}  // namespace

PYBIND11_MODULE(hwhelp, m) {
  m.doc() = "Autoevaluator, prompt assembly, response guard and replay";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  m.attr("CORRECT_CODE_PHRASE") = std::string(kCorrectCodePhrase);
  m.attr("DEFAULT_TEMPLATE") = std::string(kDefaultTemplateId);

  py::class_<PyCatalog>(m, "Catalog")
      .def(py::init<const fs::path&>(), py::arg("path"))
      .def("ids", &PyCatalog::ids)
      .def("manifest", &PyCatalog::manifest, py::arg("problem_id"))
      .def("run_tests", &PyCatalog::run_tests, py::arg("problem_id"), py::arg("source"))
      .def("format_report", &PyCatalog::format_report, py::arg("problem_id"), py::arg("source"))
      .def("syntax_check", &PyCatalog::syntax, py::arg("problem_id"), py::arg("source"))
      .def("detect", &PyCatalog::detect, py::arg("source"), py::arg("hint") = std::nullopt)
      .def("region", &PyCatalog::region, py::arg("problem_id"), py::arg("source"))
      .def("assemble", &PyCatalog::assemble, py::arg("problem_id"), py::arg("code"), py::arg("template_dir"),
           py::arg("template_id") = std::string(kDefaultTemplateId), py::arg("history") = py::list(),
           py::arg("eval_report") = py::none())
      .def(
          "guard",
          [](const PyCatalog& c, const std::string& id, const std::string& response, py::kwargs kw) {
            return c.guard(id, response, kw);
          },
          py::arg("problem_id"), py::arg("response"))
      .def("replay", &PyCatalog::replay, py::arg("checkpoints"), py::arg("template_dir"),
           py::arg("template_id") = std::string(kDefaultTemplateId), py::arg("backend") = "stub",
           py::arg("parallelism") = 4);

  m.def("executed_test_count", &executed_test_count);
  m.def("check_brevity", [](const std::string& response, std::size_t max_sentences) {
    GuardConfig c;
    c.max_sentences = max_sentences;
    auto r = check_brevity(response, c);
    return py::make_tuple(r.sentence_count, r.violation);
  }, py::arg("response"), py::arg("max_sentences") = GuardConfig{}.max_sentences);
}

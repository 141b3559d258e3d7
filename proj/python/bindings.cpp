#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "marketpulse/cli.hpp"
#include "marketpulse/codec.hpp"
#include "marketpulse/metrics.hpp"
#include "marketpulse/simgen.hpp"
#include "marketpulse/store.hpp"
#include "marketpulse/topk.hpp"

namespace py = pybind11;
namespace mp = marketpulse;

namespace {

// Records cross the boundary as JSON text; the Python side decodes them.
std::string dump(const nlohmann::json& j) { return j.dump(); }
std::string dump(const nlohmann::ordered_json& j) { return j.dump(); }

std::vector<mp::AppId> to_ids(const std::vector<std::string>& names) { return {names.begin(), names.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "marketpulse native core";

  static py::exception<mp::Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const mp::Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  // -- ranked lists -------------------------------------------------------
  py::class_<mp::SimilarityResult>(m, "SimilarityResult")
      .def_readonly("m", &mp::SimilarityResult::m)
      .def_readonly("n_raw", &mp::SimilarityResult::n_raw)
      .def_readonly("n_max", &mp::SimilarityResult::n_max)
      .def("__repr__", [](const mp::SimilarityResult& r) {
        std::ostringstream out;
        out << "SimilarityResult(m=" << r.m << ", n_raw=" << r.n_raw << ", n_max=" << r.n_max << ")";
        return out.str();
      });

  m.def(
      "inverse_rank_measure",
      [](const std::vector<std::string>& prev, const std::vector<std::string>& next) {
        return mp::inverse_rank_measure(to_ids(prev), to_ids(next));
      },
      py::arg("prev"), py::arg("next"), "Top-weighted similarity of two rankings (1 = identical).");

  // -- metrics --------------------------------------------------------------
  m.def(
      "yule_q", [](std::size_t a, std::size_t b, std::size_t c, std::size_t d) { return mp::yule_q({a, b, c, d}); },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), "(ad-bc)/(ad+bc), or None when undefined.");

  py::class_<mp::PowerLawFit>(m, "PowerLawFit")
      .def_readonly("alpha", &mp::PowerLawFit::alpha)
      .def_readonly("x_min", &mp::PowerLawFit::x_min)
      .def_readonly("n_tail", &mp::PowerLawFit::n_tail)
      .def_readonly("ks_distance", &mp::PowerLawFit::ks_distance);

  m.def(
      "fit_power_law", [](const std::vector<double>& xs, double x_min) { return mp::fit_power_law(xs, x_min); },
      py::arg("samples"), py::arg("x_min") = 1.0);
  m.def(
      "fit_power_law_scan", [](const std::vector<double>& xs, std::size_t min_tail) { return mp::fit_power_law_scan(xs, min_tail); },
      py::arg("samples"), py::arg("min_tail") = 50);

  m.def(
      "seasonal_trend_decompose",
      [](const std::vector<double>& series, int period) {
        const auto d = mp::seasonal_trend_decompose(series, period);
        py::dict out;
        out["trend"] = d.trend;
        out["seasonal"] = d.seasonal;
        out["remainder"] = d.remainder;
        out["period"] = d.period;
        return out;
      },
      py::arg("series"), py::arg("period"));

  m.def(
      "price_dispersion_cov", [](const std::vector<double>& prices) { return mp::price_dispersion_cov(prices); },
      py::arg("prices"));

  m.def(
      "classify_staleness",
      [](const std::string& last_updated, const std::string& reference, int window_days) {
        return std::string(mp::to_string(
            mp::classify_staleness(mp::parse_date(last_updated), mp::parse_date(reference), window_days).state));
      },
      py::arg("last_updated"), py::arg("reference"), py::arg("window_days") = 365);

  m.def(
      "classify_popularity",
      [](std::int64_t lo, std::int64_t hi) { return std::string(mp::to_string(mp::classify_popularity({lo, hi}))); },
      py::arg("lo"), py::arg("hi"));

  // -- synthetic markets -----------------------------------------------------
  m.def(
      "sample_power_law",
      [](std::uint64_t seed, std::size_t n, double alpha, double x_min) { return mp::simgen::sample_power_law(seed, n, alpha, x_min); },
      py::arg("seed"), py::arg("n"), py::arg("alpha"), py::arg("x_min") = 1.0);

  m.def(
      "simulate",
      [](const std::string& script_json, const std::filesystem::path& out_dir) {
        const auto script = mp::simgen::MarketScript::from_json(nlohmann::json::parse(script_json));
        const auto data = mp::simgen::generate(script);
        mp::simgen::write_dataset(data, out_dir);
        return dump(data.truth.to_json());
      },
      py::arg("script_json"), py::arg("out_dir"), "Generates a dataset into out_dir; returns the ground truth as JSON text.");

  // -- store -----------------------------------------------------------------
  py::class_<mp::SnapStore>(m, "SnapStore")
      .def(py::init<std::filesystem::path>(), py::arg("path"))
      .def("ingest_dataset", [](mp::SnapStore& s, const std::filesystem::path& dir) { return dump(s.ingest_dataset(dir).to_json()); })
      .def("apps", [](const mp::SnapStore& s) {
        std::vector<std::string> out;
        for (const auto& a : s.apps()) out.push_back(a.str());
        return out;
      })
      .def("app_series", [](const mp::SnapStore& s, const std::string& app) {
        std::vector<std::string> out;
        for (const auto& snap : s.query_app_series(mp::AppId(app)).snapshots) out.push_back(dump(mp::to_json(snap)));
        return out;
      })
      .def("list_series", [](const mp::SnapStore& s, const std::string& list) {
        const auto type = mp::parse_list_type(list);
        if (!type) throw mp::Error(mp::ErrorCode::InvalidInput, "unknown list type '" + list + "'");
        std::vector<std::string> out;
        const auto series = s.query_list_series(*type);
        for (const auto& o : series.observations()) out.push_back(dump(mp::to_json(o)));
        return out;
      })
      .def("snapshot_count", &mp::SnapStore::snapshot_count)
      .def("review_count", py::overload_cast<>(&mp::SnapStore::review_count, py::const_))
      .def("topk_count", &mp::SnapStore::topk_count);

  // -- command line -------------------------------------------------------------
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv{"marketpulse"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        const int code = mp::cli::run(argv, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one marketpulse command in-process; returns (exit_code, stdout, stderr).");
}

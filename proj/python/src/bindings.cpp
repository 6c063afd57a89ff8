#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qcseg/context.hpp"
#include "qcseg/error.hpp"
#include "qcseg/evaluation.hpp"
#include "qcseg/gmm.hpp"
#include "qcseg/hdp_ar.hpp"
#include "qcseg/pipeline.hpp"
#include "qcseg/signal.hpp"
#include "qcseg/synth.hpp"
#include "qcseg/trend_filter.hpp"

namespace py = pybind11;
using namespace qcseg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw Error(ErrorCode::InvalidArgument, "expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

py::array_t<int> label_array(const AdherenceLabels& labels) {
  py::array_t<int> out(static_cast<py::ssize_t>(labels.size()));
  auto m = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<py::ssize_t>(i)) = static_cast<int>(labels[i]);
  return out;
}

AdherenceLabels to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  AdherenceLabels out;
  out.reserve(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    const int v = a.data()[i];
    if (v != 1 && v != 2) throw Error(ErrorCode::InvalidArgument, "labels must be 1 (adherence) or 2 (violation)");
    out.push_back(static_cast<Adherence>(v));
  }
  return out;
}

py::array_t<int> state_array(const StateSequence& z) {
  py::array_t<int> out(static_cast<py::ssize_t>(z.size()));
  auto m = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < z.size(); ++i) m(static_cast<py::ssize_t>(i)) = z.indicators[i] + 1;
  return out;
}

Array matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Array out({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(cols)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = rows[i][k];
  }
  return out;
}

Array triaxial(const std::vector<Vec3>& v) {
  Array out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) m(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(a)) = v[i][a];
  }
  return out;
}

py::dict metrics_dict(const FoldMetrics& f) {
  py::dict d;
  d["tp"] = f.tp ? py::cast(*f.tp) : py::none();
  d["tn"] = f.tn ? py::cast(*f.tn) : py::none();
  d["ba"] = f.ba ? py::cast(*f.ba) : py::none();
  return d;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the qcseg protocol-adherence segmentation library";
  py::register_exception<Error>(m, "QcsegError", PyExc_RuntimeError);

  m.def(
      "l1_trend_filter",
      [](const Array& x, std::optional<double> lam, const std::string& fidelity) {
        TrendFilterConfig cfg;
        cfg.lambda = lam;
        cfg.fidelity = fidelity == "absolute" ? FidelityMode::Absolute : FidelityMode::Squared;
        if (fidelity != "absolute" && fidelity != "squared") {
          throw Error(ErrorCode::InvalidArgument, "fidelity must be 'squared' or 'absolute'");
        }
        const TrendFilterResult r = l1_trend_filter({1.0, to_vector(x), ScalarUnit::Raw}, cfg);
        py::dict d;
        d["trend"] = to_array(r.trend.values);
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["lambda"] = r.lambda;
        d["objective"] = trend_objective(to_vector(x), r.trend.values, r.lambda, cfg.fidelity);
        return d;
      },
      py::arg("x"), py::arg("lam") = py::none(), py::arg("fidelity") = "squared",
      "Piecewise-linear trend minimizing fidelity + lam * ||D2 g||_1.");

  m.def(
      "preprocess",
      [](const std::string& kind, const Array& times, const Array& samples, double audio_rate) {
        PipelineConfig cfg;
        cfg.kind = test_kind_from_string(kind);
        RawRecording raw;
        if (cfg.kind == TestKind::Voice) {
          raw.audio = {audio_rate, to_vector(samples), ScalarUnit::Raw};
          raw.audio_start = times.size() > 0 ? times.data()[0] : 0.0;
        } else {
          if (samples.ndim() != 2 || samples.shape(1) != 3) {
            throw Error(ErrorCode::InvalidArgument, "acceleration must have shape (n, 3)");
          }
          raw.accel.timestamps = to_vector(times);
          auto s = samples.unchecked<2>();
          for (py::ssize_t i = 0; i < s.shape(0); ++i) raw.accel.samples.push_back({s(i, 0), s(i, 1), s(i, 2)});
        }
        const PreprocessResult r = preprocess_recipe(cfg, raw);
        return py::make_tuple(to_array(r.times), to_array(r.feature.values), r.feature.rate);
      },
      py::arg("kind"), py::arg("times"), py::arg("samples"), py::arg("audio_rate") = 44100.0,
      "Default preprocessing recipe of a test kind. Returns (times, feature, rate).");

  m.def(
      "power_spectrum",
      [](const Array& x, double rate, std::size_t segment_length, double overlap, const std::string& window) {
        WelchOptions w;
        w.segment_length = segment_length;
        w.overlap = overlap;
        w.window = window == "rectangular" ? SpectralWindow::Rectangular : SpectralWindow::Hann;
        const SpectrumEstimate s = power_spectrum({rate, to_vector(x), ScalarUnit::Raw}, w);
        return py::make_tuple(to_array(s.frequencies), to_array(s.power));
      },
      py::arg("x"), py::arg("rate"), py::arg("segment_length") = 0, py::arg("overlap") = 0.5,
      py::arg("window") = "hann");

  m.def(
      "ar_psd",
      [](const Array& coefficients, double variance, const Array& freqs) {
        ArState s{to_vector(coefficients), 0.0, variance};
        const auto f = to_vector(freqs);
        return to_array(ar_psd(s, f).power);
      },
      py::arg("coefficients"), py::arg("variance"), py::arg("freqs"),
      "Closed-form AR spectral density on normalized frequencies.");

  m.def(
      "segment_gmm",
      [](const Array& x, double rate, const std::string& kind, double window_seconds, std::uint64_t seed) {
        GmmOptions o;
        o.seed = seed;
        const GmmSegmentation g = segment_gmm({rate, to_vector(x), ScalarUnit::Raw}, test_kind_from_string(kind),
                                              default_median_window(rate, window_seconds), o);
        py::dict d;
        d["labels"] = label_array(g.labels);
        d["states"] = state_array(g.smoothed);
        d["means"] = g.fit.params.means;
        d["variances"] = g.fit.params.variances;
        d["weights"] = g.fit.params.weights;
        d["loglik_trace"] = to_array(g.fit.loglik_trace);
        return d;
      },
      py::arg("x"), py::arg("rate"), py::arg("kind"), py::arg("window_seconds") = 2.0, py::arg("seed") = 0);

  m.def(
      "fit_hdp_ar",
      [](const Array& x, double rate, int order, int truncation, int sweeps, int burn_in, std::uint64_t seed,
         double alpha, double gamma, double kappa) {
        HdpArConfig c;
        c.order = order;
        c.truncation = truncation;
        c.sweeps = sweeps;
        c.burn_in = burn_in;
        c.seed = seed;
        c.alpha = alpha;
        c.gamma = gamma;
        c.kappa = kappa;
        HdpArFit fit;
        {
          py::gil_scoped_release release;
          fit = fit_hdp_ar({rate, to_vector(x), ScalarUnit::Raw}, c);
        }
        py::dict d;
        d["states"] = state_array(fit.states);
        d["posteriors"] = matrix(fit.states.posteriors);
        d["loglik_trace"] = to_array(fit.loglik_trace);
        d["occupied_trace"] = fit.occupied_trace;
        d["occupied_mode"] = fit.occupied_mode(burn_in);
        d["model"] = json_to_py(to_json(fit.model));
        return d;
      },
      py::arg("x"), py::arg("rate") = 1.0, py::arg("order") = 4, py::arg("truncation") = 20, py::arg("sweeps") = 500,
      py::arg("burn_in") = 250, py::arg("seed") = 0, py::arg("alpha") = 1.0, py::arg("gamma") = 1.0,
      py::arg("kappa") = 0.0);

  m.def(
      "naive_bayes_cv",
      [](const py::array_t<int>& states, const py::array_t<int, py::array::c_style | py::array::forcecast>& labels,
         int state_count, int folds, const std::string& metric, double smoothing) {
        StateSequence z;
        for (py::ssize_t i = 0; i < states.size(); ++i) z.indicators.push_back(states.data()[i] - 1);
        const AdherenceLabels u = to_labels(labels);
        const auto inputs = counts_from_states(z, state_count);
        CvOptions o;
        o.folds = folds;
        o.definition = metric_definition_from_string(metric);
        AdherenceLabels oof;
        const MetricsReport r = kfold_cv(u, naive_bayes_pipeline(inputs, u, smoothing), o, &oof);
        return py::make_tuple(json_to_py(to_json(r)), label_array(oof));
      },
      py::arg("states"), py::arg("labels"), py::arg("state_count"), py::arg("folds") = 10,
      py::arg("metric") = "predictive", py::arg("smoothing") = 1.0,
      "Block cross-validated naive Bayes on 1-based state ids. Returns (report, out-of-fold labels).");

  m.def(
      "tp_tn_ba",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& predicted,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& truth, const std::string& metric) {
        return metrics_dict(tp_tn_ba(to_labels(predicted), to_labels(truth), metric_definition_from_string(metric)));
      },
      py::arg("predicted"), py::arg("truth"), py::arg("metric") = "predictive");

  m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("a"), py::arg("b"));

  m.def(
      "synth",
      [](const std::string& scenario, std::uint64_t seed) {
        const SynthSpec spec = make_spec(scenario_from_string(scenario), seed);
        py::dict d;
        d["rate"] = spec.rate;
        d["duration"] = spec.duration;
        py::list schedule;
        for (const auto& s : spec.schedule) schedule.append(py::make_tuple(s.state + 1, s.start, s.end));
        d["schedule"] = schedule;
        switch (spec.scenario) {
          case Scenario::SwitchingAr: {
            const SimulatedPath p = gen_switching_ar(spec, default_switching_states());
            d["series"] = to_array(p.series.values);
            d["states"] = state_array(p.truth);
            break;
          }
          case Scenario::TwoCluster: {
            const TwoClusterData t = gen_two_cluster(spec);
            d["series"] = to_array(t.series.values);
            d["labels"] = label_array(t.labels);
            break;
          }
          case Scenario::GravityDrift: {
            const GravityDriftData g = gen_gravity_drift(spec);
            d["times"] = to_array(g.raw.timestamps);
            d["accel"] = triaxial(g.raw.samples);
            d["gravity"] = triaxial(g.gravity);
            d["dynamic"] = triaxial(g.dynamic);
            break;
          }
          default: {
            const SynthRecording r = gen_recording(spec);
            if (r.kind == TestKind::Voice) {
              d["audio"] = to_array(r.audio.values);
            } else {
              d["times"] = to_array(r.accel.timestamps);
              d["accel"] = triaxial(r.accel.samples);
            }
            d["kind"] = std::string(to_string(r.kind));
            d["behaviours"] = r.behaviours;
            std::vector<int> adherence;
            for (auto a : r.adherence) adherence.push_back(static_cast<int>(a));
            d["adherence"] = adherence;
            break;
          }
        }
        return d;
      },
      py::arg("scenario"), py::arg("seed") = 0);

  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        const PipelineConfig cfg = pipeline_config_from_json(nlohmann::json::parse(config_json));
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline_files(cfg);
        }
        py::dict d;
        d["times"] = to_array(r.pre.times);
        d["feature"] = to_array(r.pre.feature.values);
        d["states"] = state_array(r.states);
        d["labels"] = label_array(r.labels);
        d["report"] = r.report ? json_to_py(to_json(*r.report)) : py::none();
        d["config_hash"] = pipeline_config_hash(cfg);
        return d;
      },
      py::arg("config_json"), "Runs the file-based pipeline from a JSON config string.");
}

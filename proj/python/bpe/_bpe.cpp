#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bpe/config.hpp"
#include "bpe/datasets.hpp"
#include "bpe/error.hpp"
#include "bpe/metrics.hpp"
#include "bpe/pursuit.hpp"
#include "bpe/trainer.hpp"

namespace py = pybind11;
using namespace bpe;

namespace {

using CodeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

CodeMatrix to_matrix(const std::vector<Code>& codes, std::size_t K) {
  CodeMatrix m(static_cast<Eigen::Index>(codes.size()), static_cast<Eigen::Index>(K));
  for (std::size_t n = 0; n < codes.size(); ++n)
    for (std::size_t k = 0; k < K; ++k) m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = codes[n][k];
  return m;
}

std::vector<Code> from_matrix(const CodeMatrix& m) {
  std::vector<Code> codes(static_cast<std::size_t>(m.rows()), Code(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index n = 0; n < m.rows(); ++n)
    for (Eigen::Index k = 0; k < m.cols(); ++k) codes[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)] = m(n, k);
  return codes;
}

ConfigMap to_map(const std::map<std::string, py::object>& options) {
  ConfigMap map;
  for (const auto& [k, v] : options) {
    if (py::isinstance<py::bool_>(v))
      map[k] = v.cast<bool>() ? "true" : "false";
    else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      std::string s;
      for (auto item : v) s += (s.empty() ? "" : ",") + py::str(item).cast<std::string>();
      map[k] = s;
    } else {
      map[k] = py::str(v).cast<std::string>();
    }
  }
  return map;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["metric"] = r.metric;
  d["value"] = r.value;
  d["sparsity"] = r.sparsity;
  d["N"] = r.N;
  d["mean_active_bits"] = r.mean_active_bits;
  d["activation"] = r.activation;
  d["fingerprint"] = r.fingerprint;
  return d;
}

struct Model {
  TrainState state;
  TrainConfig config;
  std::string config_text;
  std::vector<double> epoch_mean_bound;

  std::size_t K() const { return state.net.input_dim(); }

  CodeMatrix encode(const Eigen::MatrixXd& x) const {
    EncodedSet enc;
    {
      py::gil_scoped_release release;
      enc = encode_dataset(state, config, x, config.eval_include_prior);
    }
    return to_matrix(enc.codes, K());
  }

  py::dict evaluate(const Eigen::MatrixXd& x) const {
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = evaluate_report(x);
    }
    return report_dict(r);
  }

  EvalReport evaluate_report(const Eigen::MatrixXd& x) const {
    auto r = bpe::evaluate(state, config, x);
    r.fingerprint = fingerprint(config_text);
    return r;
  }

  static Model from_checkpoint(LoadedCheckpoint ck) {
    Model m;
    m.config_text = ck.config_text;
    m.config = run_config_from_map(parse_config_text(ck.config_text)).train;
    m.state = std::move(ck.state);
    return m;
  }
};

Model train_model(const Eigen::MatrixXd& x, const std::map<std::string, py::object>& options,
                  std::optional<Eigen::MatrixXd> heldout) {
  const auto run = run_config_from_map(to_map(options));
  if (!run.has_train_seed) throw Error("a seed is required: set train.seed");
  Model m;
  m.config = run.train;
  m.config_text = to_config_text(run);
  m.config.config_text = m.config_text;
  TrainResult r;
  {
    py::gil_scoped_release release;
    r = train(m.config, x, heldout ? &*heldout : nullptr);
  }
  m.state = std::move(r.state);
  m.epoch_mean_bound = std::move(r.epoch_mean_bound);
  return m;
}

Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> code_vector(const Code& z) {
  return Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>(z.data(), static_cast<Eigen::Index>(z.size()));
}

py::tuple pursuit_tuple(const PursuitResult& r) {
  return py::make_tuple(code_vector(r.code), r.trace, r.evaluations);
}

}  // namespace

PYBIND11_MODULE(_bpe, m) {
  m.doc() = "Beta-Bernoulli process sparse coding";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("generate_synthetic",
        [](const std::string& likelihood, std::size_t K, std::size_t D, std::size_t N, std::uint64_t seed,
           double gamma, std::size_t T, double weight_scale) {
          SyntheticSpec s;
          s.kind = parse_likelihood(likelihood);
          s.K = K;
          s.D = D;
          s.N = N;
          s.T = T;
          s.seed = seed;
          s.gamma_mass = gamma > 0.0 ? gamma : static_cast<double>(K) / 5.0;
          s.weight_scale = weight_scale;
          const auto d = generate_synthetic(s);
          py::dict out;
          out["X"] = d.X;
          out["codes"] = to_matrix(d.codes, K);
          out["scales"] = d.lambda;
          out["pi"] = d.pi;
          return out;
        },
        py::arg("likelihood") = "gaussian", py::arg("K") = 8, py::arg("D") = 16, py::arg("N") = 1000,
        py::arg("seed") = 0, py::arg("gamma") = 0.0, py::arg("T") = 4, py::arg("weight_scale") = 6.0,
        "Samples data, true codes and scales from the generative model.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("K", &Model::K)
      .def_property_readonly("config_text", [](const Model& md) { return md.config_text; })
      .def_property_readonly("epoch", [](const Model& md) { return md.state.epoch; })
      .def_property_readonly("epoch_mean_bound", [](const Model& md) { return md.epoch_mean_bound; })
      .def_property_readonly("pi_a", [](const Model& md) { return md.state.pi.a; })
      .def_property_readonly("pi_b", [](const Model& md) { return md.state.pi.b; })
      .def_property_readonly("beta",
                             [](const Model& md) -> py::object {
                               if (const auto* p = std::get_if<PoissonLikelihoodConfig>(&md.state.likelihood))
                                 return py::cast(p->beta());
                               return py::none();
                             })
      .def("encode", &Model::encode, py::arg("X"), "Greedy pursuit codes, one row per datum.")
      .def("evaluate", &Model::evaluate, py::arg("X"), "Held-out MSE or NLL plus code sparsity.")
      .def("decode", [](const Model& md, const CodeMatrix& codes) {
        const auto cs = from_matrix(codes);
        return forward_batch(md.state.net, codes_to_matrix(cs, md.K())).transpose().eval();
      })
      .def("save", [](const Model& md, const std::string& path) { save_checkpoint(path, md.state, md.config_text); })
      .def_static("load", [](const std::string& path) { return Model::from_checkpoint(load_checkpoint(path)); });

  m.def("train", &train_model, py::arg("X"), py::arg("options"), py::arg("heldout") = py::none(),
        "Fits a model; options are configuration keys such as {'model.K': 8, 'train.seed': 1}.");

  m.def("greedy_encode",
        [](std::size_t K, const std::function<double(const Code&)>& score, std::size_t max_active) {
          return pursuit_tuple(encode(FunctionEvaluator(K, score), max_active));
        },
        py::arg("K"), py::arg("score"), py::arg("max_active") = 0,
        "Greedy pursuit over a Python scoring function; returns (code, trace, evaluations).");
  m.def("exhaustive_encode",
        [](std::size_t K, const std::function<double(const Code&)>& score) {
          const auto r = exhaustive_encode(FunctionEvaluator(K, score));
          return py::make_tuple(code_vector(r.code), r.score);
        },
        py::arg("K"), py::arg("score"));

  m.def("gauss_lambda_posterior",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& f, double sigma2, double c) {
          const auto p = gauss_lambda_posterior(x, f, {sigma2, c});
          return py::make_tuple(p.mean, p.variance);
        },
        py::arg("x"), py::arg("f"), py::arg("sigma2") = 0.1, py::arg("c") = 1.0);
  m.def("gauss_marginal_loglik",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& f, double sigma2, double c) {
          return gauss_marginal_loglik(x, f, {sigma2, c});
        },
        py::arg("x"), py::arg("f"), py::arg("sigma2") = 0.1, py::arg("c") = 1.0);
  m.def("poiss_lambda_posterior",
        [](const Eigen::VectorXd& x, double a, double b) {
          const auto p = poiss_lambda_posterior(x, a, b);
          return py::make_tuple(p.shape, p.rate);
        },
        py::arg("x"), py::arg("a") = 1.0, py::arg("b") = 1.0);

  m.def("hoyer", [](const Code& z) { return hoyer(z); }, py::arg("code"));
  m.def("sparsity", [](const CodeMatrix& codes) { return sparsity(from_matrix(codes)); }, py::arg("codes"));
  m.def("fingerprint", &fingerprint, py::arg("text"));
  m.def("config_keys", &config_keys);
}

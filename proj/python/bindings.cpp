#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flat/baselines.hpp"
#include "flat/cli.hpp"
#include "flat/cluster.hpp"
#include "flat/error.hpp"
#include "flat/sdq.hpp"
#include "flat/simulation.hpp"
#include "flat/solver.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace flat;

namespace {

SpatialDataset dataset(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    SpatialDataset ds{coords, x, y, {}};
    for (Index k = 0; k < x.cols(); ++k) ds.covariate_names.push_back("x" + std::to_string(k + 1));
    ds.validate();
    return ds;
}

py::list edges(const SpanningTree& tree) {
    py::list out;
    for (const auto& e : tree.edges) out.append(py::make_tuple(e.u, e.v, e.weight));
    return out;
}

py::dict fused_dict(const FusedFit& fit) {
    return py::dict("beta"_a = fit.beta.beta, "theta"_a = fit.theta, "lambda1"_a = fit.lambda1,
                    "lambda2"_a = fit.lambda2, "objective"_a = fit.objective, "rss"_a = fit.rss,
                    "df"_a = fit.df, "converged"_a = fit.converged, "edges"_a = edges(fit.graph->tree()));
}

py::dict fit_flat_py(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::optional<double> lambda1, std::optional<double> lambda2, double gamma,
                     std::optional<double> init_lambda, double tol, int max_sweeps) {
    const auto ds = dataset(coords, x, y);
    FlatConfig cfg;
    cfg.gamma = gamma;
    cfg.init_lambda = init_lambda;
    cfg.cd_tolerance = tol;
    cfg.max_sweeps = max_sweeps;
    if (lambda1.has_value() != lambda2.has_value())
        throw ConfigError(lambda1 ? "lambda2" : "lambda1", "give both lambda1 and lambda2, or neither");
    FlatFit fit;
    std::vector<GridScore> scores;
    {
        py::gil_scoped_release release;
        if (lambda1) {
            cfg.lambda1 = *lambda1;
            cfg.lambda2 = *lambda2;
            fit = fit_flat(ds, cfg);
        } else {
            LambdaSelection sel = select_lambdas(ds, cfg);
            scores = std::move(sel.scores);
            fit = std::move(sel.fit);
        }
    }
    py::list grid;
    for (const auto& s : scores)
        grid.append(py::dict("lambda1"_a = s.lambdas.lambda1, "lambda2"_a = s.lambdas.lambda2, "bic"_a = s.bic,
                             "rss"_a = s.rss, "df"_a = s.df, "ok"_a = s.ok));
    return py::dict("beta"_a = fit.beta.beta, "theta"_a = fit.theta, "initial"_a = fit.initial.beta,
                    "lambda1"_a = fit.config.lambda1, "lambda2"_a = fit.config.lambda2,
                    "init_lambda"_a = fit.init_lambda, "objective"_a = fit.objective, "rss"_a = fit.rss,
                    "df"_a = fit.df, "converged"_a = fit.converged, "pi"_a = fit.graph->pi(),
                    "edges"_a = edges(fit.graph->tree()), "grid"_a = grid);
}

py::dict simulate_py(Index n, double phi, double r, double sigma, std::uint64_t seed) {
    SimulationSpec spec;
    spec.n = n;
    spec.phi = phi;
    spec.r = r;
    spec.sigma = sigma;
    spec.seed = seed;
    const Dgp dgp = generate_dgp(spec);
    return py::dict("coords"_a = dgp.data.coords, "covariates"_a = dgp.data.covariates,
                    "response"_a = dgp.data.response, "beta"_a = dgp.truth.beta, "labels"_a = dgp.labels,
                    "covariate_names"_a = dgp.data.covariate_names);
}

py::dict sdq_dict(const SdqField& f) {
    std::vector<bool> defined(f.defined.begin(), f.defined.end());
    return py::dict("values"_a = f.values, "defined"_a = defined);
}

}  // namespace

PYBIND11_MODULE(_flat, m) {
    m.doc() = "Fused lasso spatial regression over adaptive minimum spanning trees";

    auto base = py::register_exception<Error>(m, "FlatError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());

    m.def("fit_flat", &fit_flat_py, "coords"_a, "covariates"_a, "response"_a, "lambda1"_a = py::none(),
          "lambda2"_a = py::none(), "gamma"_a = 1.0, "init_lambda"_a = py::none(), "tol"_a = 1e-6,
          "max_sweeps"_a = 10000,
          "Two-stage estimator; penalties chosen by BIC on the default grid when not given.");

    m.def(
        "fit_scc",
        [](const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
           std::optional<double> lambda1) {
            const auto ds = dataset(coords, x, y);
            FusedFit fit;
            {
                py::gil_scoped_release release;
                fit = fit_scc(ds, lambda1);
            }
            return fused_dict(fit);
        },
        "coords"_a, "covariates"_a, "response"_a, "lambda1"_a = py::none());

    m.def(
        "fit_gwr",
        [](const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
           std::optional<double> bandwidth) {
            const auto ds = dataset(coords, x, y);
            GwrConfig cfg;
            cfg.bandwidth = bandwidth;
            GwrFit fit;
            {
                py::gil_scoped_release release;
                fit = fit_gwr(ds, cfg);
            }
            std::vector<bool> flagged(fit.flagged.begin(), fit.flagged.end());
            return py::dict("beta"_a = fit.beta.beta, "bandwidth"_a = fit.bandwidth, "flagged"_a = flagged,
                            "cv_scores"_a = fit.cv_scores);
        },
        "coords"_a, "covariates"_a, "response"_a, "bandwidth"_a = py::none());

    m.def("pooled_ols", [](const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
        return pooled_ols(dataset(coords, x, y));
    });

    m.def("prim_mst", [](const Eigen::MatrixXd& dist) { return edges(prim_mst(dist)); }, "dist"_a,
          "Edges (u, v, weight) of the minimum spanning tree of a distance matrix.");
    m.def("pairwise_distances", &pairwise_distances, "rows"_a);

    m.def("dbscan", [](const Eigen::MatrixXd& points, double eps, int min_pts) {
        return dbscan(points, eps, min_pts).labels;
    }, "points"_a, "eps"_a, "min_pts"_a, "Cluster labels 1..k, noise -1.");

    m.def(
        "select_clustering",
        [](const Eigen::MatrixXd& points, std::vector<double> eps_grid, std::vector<int> minpts_grid,
           int k_max, double max_noise_fraction) {
            SelectionRules rules;
            rules.k_max = k_max;
            rules.max_noise_fraction = max_noise_fraction;
            if (eps_grid.empty()) eps_grid = default_epsilon_grid(points);
            if (minpts_grid.empty()) minpts_grid = default_minpts_grid();
            const auto sel = select_clustering(points, eps_grid, minpts_grid, rules);
            return py::dict("labels"_a = sel.result.labels, "k"_a = sel.result.k, "eps"_a = sel.result.epsilon,
                            "min_pts"_a = sel.result.min_pts);
        },
        "points"_a, "eps_grid"_a = std::vector<double>{}, "minpts_grid"_a = std::vector<int>{}, "k_max"_a = 12,
        "max_noise_fraction"_a = 0.2);

    m.def("rand_index", [](std::vector<int> a, std::vector<int> b) { return rand_index(a, b); });
    m.def("adjusted_rand_index", [](std::vector<int> a, std::vector<int> b) { return adjusted_rand_index(a, b); });
    m.def("silhouette", [](const Eigen::MatrixXd& p, std::vector<int> l) { return silhouette(p, l); });
    m.def("calinski_harabasz", [](const Eigen::MatrixXd& p, std::vector<int> l) { return calinski_harabasz(p, l); });

    m.def("sdq_axis", [](const Eigen::MatrixXd& c, const Eigen::VectorXd& f) { return sdq_dict(sdq_axis(c, f)); },
          "coords"_a, "field"_a);
    m.def("sdq_nn", [](const Eigen::MatrixXd& c, const Eigen::VectorXd& f) { return sdq_dict(sdq_nn(c, f)); },
          "coords"_a, "field"_a);

    m.def("simulate", &simulate_py, "n"_a = 200, "phi"_a = 0.2, "r"_a = 0.75, "sigma"_a = 0.1, "seed"_a,
          "One draw from the default three-surface model.");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        "args"_a, "Runs the command-line tool in process; returns (exit code, stdout, stderr).");
}

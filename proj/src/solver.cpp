#include "flat/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "flat/error.hpp"
#include "stage.hpp"

namespace flat {

namespace {

void require_positive(double value, const char* field) {
    if (!(value > 0) || !std::isfinite(value))
        throw ConfigError(field, std::string(field) + " must be positive and finite");
}

bool same_ratio(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

std::vector<double> log_space(double lo, double hi, int points) {
    std::vector<double> out;
    if (points == 1) return {lo};
    out.reserve(points);
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < points; ++i) out.push_back(std::exp(a + (b - a) * i / (points - 1)));
    return out;
}

CdOptions options_from(const FlatConfig& config) {
    CdOptions options;
    options.tolerance = config.cd_tolerance;
    options.max_sweeps = config.max_sweeps;
    return options;
}

}  // namespace

void FlatConfig::validate() const {
    require_positive(lambda1, "lambda1");
    require_positive(lambda2, "lambda2");
    require_positive(gamma, "gamma");
    require_positive(cd_tolerance, "cd_tolerance");
    if (max_sweeps < 1) throw ConfigError("max_sweeps", "max_sweeps must be at least 1");
    for (const auto& pair : lambda_grid) {
        require_positive(pair.lambda1, "lambda_grid.lambda1");
        require_positive(pair.lambda2, "lambda_grid.lambda2");
    }
    if (init_lambda) require_positive(*init_lambda, "init_lambda");
    require_positive(design_budget, "design_budget");
}

Design Design::from_matrix(Eigen::MatrixXd m, Index blocks) {
    Design d;
    d.col_sq_norms = m.colwise().squaredNorm().transpose();
    d.n = m.rows();
    d.p = blocks;
    d.matrix = std::move(m);
    return d;
}

Design build_design(const SpatialDataset& ds, const FusionGraph& fg, double budget) {
    const Index n = ds.n();
    const Index p = ds.p();
    if (fg.n() != n) throw DimensionError("fusion graph size does not match dataset");
    if (static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(p) > budget)
        throw ConfigError("design_budget", "design of " + std::to_string(n) + "x" +
                                               std::to_string(n * p) +
                                               " exceeds the configured budget");
    const Eigen::MatrixXd inverse = fg.inverse_dense();
    Eigen::MatrixXd x(n, n * p);
    for (Index k = 0; k < p; ++k)
        x.middleCols(k * n, n).noalias() = ds.covariates.col(k).asDiagonal() * inverse;
    return Design::from_matrix(std::move(x), p);
}

double lasso_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& theta, double lambda) {
    return 0.5 * (y - x * theta).squaredNorm() + lambda * theta.lpNorm<1>();
}

double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& theta, double lambda) {
    // Gradient of the smooth part is -X^T (y - X theta).
    const Eigen::VectorXd grad = -(x.transpose() * (y - x * theta));
    double worst = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
        if (x.col(j).squaredNorm() == 0.0) continue;
        const double v = theta[j] == 0.0 ? std::max(0.0, std::abs(grad[j]) - lambda)
                                         : std::abs(grad[j] + lambda * (theta[j] > 0 ? 1 : -1));
        worst = std::max(worst, v);
    }
    return worst;
}

namespace {

// Quasi-Newton step on the nonzero coordinates with their signs held fixed: an
// exact line search along a regularized Newton direction, cut at the first
// coordinate that would change sign. Never increases the objective.
void orthant_step(const Eigen::MatrixXd& x, double lambda, const std::vector<Index>& candidates,
                  Eigen::VectorXd& theta, Eigen::VectorXd& r) {
    std::vector<Index> active;
    for (Index j : candidates)
        if (theta[j] != 0.0) active.push_back(j);
    const Index a = static_cast<Index>(active.size());
    if (a == 0 || a > x.rows()) return;
    // Columns are scaled to unit norm so the rank test is scale free.
    Eigen::MatrixXd xa(x.rows(), a);
    Eigen::VectorXd current(a), sign(a), scale(a);
    for (Index i = 0; i < a; ++i) {
        scale[i] = x.col(active[i]).norm();
        xa.col(i) = x.col(active[i]) / scale[i];
        current[i] = theta[active[i]] * scale[i];
        sign[i] = current[i] > 0 ? 1.0 : -1.0;
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(a, a);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xa.transpose());
    gram.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) return;

    // Descent direction for the quadratic restricted to the current orthant.
    const Eigen::VectorXd slope = lambda * sign.cwiseQuotient(scale);
    const Eigen::VectorXd direction = llt.solve(xa.transpose() * r - slope);
    if (!direction.allFinite()) return;
    const Eigen::VectorXd moves = xa * direction;
    const double descent = moves.dot(r) - slope.dot(direction);
    if (!(descent > 0)) return;
    const double curvature = moves.squaredNorm();

    double t = curvature > 0 ? descent / curvature : std::numeric_limits<double>::infinity();
    Index hit = -1;
    for (Index i = 0; i < a; ++i) {
        if (direction[i] * sign[i] >= 0) continue;
        const double ti = -current[i] / direction[i];
        if (ti < t) {
            t = ti;
            hit = i;
        }
    }
    if (!std::isfinite(t)) return;
    Eigen::VectorXd next = current + t * direction;
    if (hit >= 0) next[hit] = 0.0;
    for (Index i = 0; i < a; ++i)
        if (next[i] * sign[i] < 0) next[i] = 0.0;
    auto penalty = [&](const Eigen::VectorXd& v) { return lambda * v.cwiseQuotient(scale).lpNorm<1>(); };
    const Eigen::VectorXd moved = r - xa * (next - current);
    if (0.5 * moved.squaredNorm() + penalty(next) > 0.5 * r.squaredNorm() + penalty(current)) return;
    r = moved;
    for (Index i = 0; i < a; ++i) theta[active[i]] = next[i] / scale[i];
}

}  // namespace

CdResult coordinate_descent(const Design& design, const Eigen::VectorXd& y, double lambda,
                            const CdOptions& options, const Eigen::VectorXd* warm_start) {
    const Eigen::MatrixXd& x = design.matrix;
    const Index m = x.cols();
    if (y.size() != x.rows()) throw DimensionError("response length does not match design rows");
    if (!(lambda >= 0) || !std::isfinite(lambda))
        throw ConfigError("lambda1", "lambda must be nonnegative");

    CdResult result;
    result.theta = Eigen::VectorXd::Zero(m);
    if (warm_start) {
        if (warm_start->size() != m) throw DimensionError("warm start length mismatch");
        result.theta = *warm_start;
    }
    Eigen::VectorXd& theta = result.theta;
    const Eigen::VectorXd& sq = design.col_sq_norms;
    for (Index j = 0; j < m; ++j)
        if (sq[j] <= 0.0) theta[j] = 0.0;

    Eigen::VectorXd r = y - x * theta;

    auto update = [&](Index j) {
        const double norm = sq[j];
        if (norm <= 0.0) return 0.0;
        const double old = theta[j];
        const double z = x.col(j).dot(r) + norm * old;
        const double fresh = soft_threshold(z, lambda) / norm;
        const double delta = fresh - old;
        if (delta != 0.0) {
            r.noalias() -= delta * x.col(j);
            theta[j] = fresh;
        }
        return delta;
    };
    auto objective = [&] { return 0.5 * r.squaredNorm() + lambda * theta.lpNorm<1>(); };

    double previous = objective();
    std::vector<Index> active;
    double step = 0.0;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double step_sq = 0.0;
        for (Index j = 0; j < m; ++j) {
            const double d = update(j);
            step_sq += d * d;
        }
        step = std::sqrt(step_sq);
        result.sweeps = sweep;

        if (options.check_monotone || options.record_trace) {
            const double current = objective();
            if (options.check_monotone &&
                current > previous + 1e-12 * std::max(1.0, std::abs(previous)))
                throw std::logic_error("coordinate descent objective increased");
            if (options.record_trace) result.trace.push_back(current);
            previous = current;
        }
        if (step < options.tolerance) {
            result.converged = true;
            break;
        }

        active.clear();
        for (Index j = 0; j < m; ++j)
            if (theta[j] != 0.0) active.push_back(j);
        for (int pass = 0; pass < options.max_sweeps; ++pass) {
            if (pass % 4 == 0) orthant_step(x, lambda, active, theta, r);
            double inner_sq = 0.0;
            for (Index j : active) {
                const double d = update(j);
                inner_sq += d * d;
            }
            if (std::sqrt(inner_sq) < options.tolerance) break;
        }
    }

    r = y - x * theta;
    result.objective = objective();
    if (!result.converged) {
        std::ostringstream msg;
        msg << "coordinate descent did not converge in " << options.max_sweeps
            << " sweeps (last step " << step << ", tolerance " << options.tolerance << ")";
        throw ConvergenceError(msg.str(), theta, result.sweeps, step);
    }
    return result;
}

int fused_degrees_of_freedom(const Eigen::MatrixXd& beta, double tol) {
    int df = 0;
    std::vector<double> column;
    for (Index k = 0; k < beta.cols(); ++k) {
        column.assign(beta.col(k).data(), beta.col(k).data() + beta.rows());
        std::sort(column.begin(), column.end());
        int levels = column.empty() ? 0 : 1;
        for (std::size_t i = 1; i < column.size(); ++i)
            if (column[i] - column[i - 1] > tol) ++levels;
        df += levels;
    }
    return df;
}

double residual_sum_of_squares(const SpatialDataset& ds, const Eigen::MatrixXd& beta) {
    const Eigen::VectorXd fitted = (ds.covariates.array() * beta.array()).rowwise().sum();
    return (ds.response - fitted).squaredNorm();
}

double bic_score(Index n, double rss, int df) {
    const double nn = static_cast<double>(n);
    const double mean_sq = std::max(rss / nn, 1e-300);
    return nn * std::log(mean_sq) + std::log(nn) * df;
}

FusedFit fit_fused(const SpatialDataset& ds, std::shared_ptr<const FusionGraph> graph,
                   const Design& design, double lambda1, const CdOptions& options,
                   const Eigen::MatrixXd* warm_beta) {
    const Index n = ds.n();
    const Index p = ds.p();
    Eigen::VectorXd warm;
    if (warm_beta) {
        warm.resize(n * p);
        for (Index k = 0; k < p; ++k) warm.segment(k * n, n) = graph->multiply(warm_beta->col(k));
    }
    CdResult cd = coordinate_descent(design, ds.response, lambda1, options,
                                     warm_beta ? &warm : nullptr);

    FusedFit fit;
    fit.theta = Eigen::Map<const Eigen::MatrixXd>(cd.theta.data(), n, p);
    fit.beta.beta.resize(n, p);
    for (Index k = 0; k < p; ++k) fit.beta.beta.col(k) = graph->solve(fit.theta.col(k));
    fit.beta.covariate_names = ds.covariate_names;
    fit.objective = cd.objective;
    fit.sweeps = cd.sweeps;
    fit.converged = cd.converged;
    fit.lambda1 = lambda1;
    fit.lambda2 = lambda1 * graph->ratio();
    fit.rss = residual_sum_of_squares(ds, fit.beta.beta);
    fit.df = fused_degrees_of_freedom(fit.beta.beta);
    fit.graph = std::move(graph);
    return fit;
}

double edge_correlation_scale(const SpatialDataset& ds, const FusionGraph& fg) {
    const Eigen::MatrixXd inverse = fg.inverse_dense();
    const Index n = ds.n();
    double scale = 0.0;
    for (Index k = 0; k < ds.p(); ++k) {
        const Eigen::VectorXd weighted = ds.covariates.col(k).cwiseProduct(ds.response);
        const Eigen::VectorXd corr = inverse.transpose() * weighted;
        scale = std::max(scale, corr.head(n - 1).cwiseAbs().maxCoeff());
    }
    return scale;
}

std::vector<LambdaPair> default_lambda_grid(double scale, int points) {
    if (!(scale > 0)) scale = 1.0;
    const double base = 0.5 * scale;
    std::vector<LambdaPair> grid;
    for (double ratio : log_space(1e-2, 1.0, points))
        for (double l1 : log_space(1e-3 * base, 1e1 * base, points)) grid.push_back({l1, l1 * ratio});
    return grid;
}

std::vector<double> default_single_grid(double scale, int points) {
    if (!(scale > 0)) scale = 1.0;
    const double base = 0.5 * scale;
    return log_space(1e-3 * base, 1e1 * base, points);
}

namespace {

TreeSelection select_on_tree_impl(const SpatialDataset& ds, const SpanningTree& tree,
                                  const Eigen::VectorXd& pi, const std::vector<LambdaPair>& grid,
                                  const CdOptions& options, double budget,
                                  const Eigen::MatrixXd* initial_warm) {
    if (grid.empty()) throw ConfigError("lambda_grid", "lambda grid is empty");
    for (const auto& pair : grid) {
        require_positive(pair.lambda1, "lambda_grid.lambda1");
        require_positive(pair.lambda2, "lambda_grid.lambda2");
    }

    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ra = grid[a].lambda2 / grid[a].lambda1;
        const double rb = grid[b].lambda2 / grid[b].lambda1;
        if (!same_ratio(ra, rb)) return ra < rb;
        return grid[a].lambda1 > grid[b].lambda1;
    });

    TreeSelection out;
    out.scores.resize(grid.size());
    std::shared_ptr<const FusionGraph> graph;
    Design design;
    Eigen::MatrixXd warm;
    bool have_warm = false;
    if (initial_warm) {
        warm = *initial_warm;
        have_warm = true;
    }
    bool have_best = false;
    GridScore best_score;
    auto better = [](const GridScore& a, const GridScore& b) {
        return std::tie(a.bic, a.lambdas.lambda1, a.lambdas.lambda2) <
               std::tie(b.bic, b.lambdas.lambda1, b.lambdas.lambda2);
    };

    for (std::size_t idx : order) {
        const LambdaPair pair = grid[idx];
        GridScore& score = out.scores[idx];
        score.lambdas = pair;
        const double ratio = pair.lambda2 / pair.lambda1;
        try {
            if (!graph || !same_ratio(graph->ratio(), ratio)) {
                graph = std::make_shared<const FusionGraph>(tree, pi, ratio);
                design = build_design(ds, *graph, budget);
            }
            FusedFit fit = fit_fused(ds, graph, design, pair.lambda1, options,
                                     have_warm ? &warm : nullptr);
            score.rss = fit.rss;
            score.df = fit.df;
            score.bic = bic_score(ds.n(), fit.rss, fit.df);
            score.ok = true;
            warm = fit.beta.beta;
            have_warm = true;
            if (!have_best || better(score, best_score)) {
                best_score = score;
                out.best = pair;
                out.best_fit = std::move(fit);
                have_best = true;
            }
        } catch (const Error& e) {
            score.ok = false;
            score.error = e.what();
        }
    }

    if (!have_best) {
        std::ostringstream msg;
        msg << "every lambda grid point failed:";
        for (const auto& s : out.scores)
            msg << " [lambda1=" << s.lambdas.lambda1 << ", lambda2=" << s.lambdas.lambda2 << ": "
                << s.error << "]";
        throw Error(msg.str());
    }
    return out;
}

std::shared_ptr<const FusionGraph> spatial_graph(const SpatialDataset& ds) {
    SpanningTree tree = prim_mst(euclidean_distance_matrix(ds));
    Eigen::VectorXd pi = Eigen::VectorXd::Ones(ds.n() - 1);
    return std::make_shared<const FusionGraph>(std::move(tree), std::move(pi), kRatioFloor);
}

}  // namespace

TreeSelection select_on_tree(const SpatialDataset& ds, const SpanningTree& tree,
                             const Eigen::VectorXd& pi, const std::vector<LambdaPair>& grid,
                             const CdOptions& options, double budget) {
    return select_on_tree_impl(ds, tree, pi, grid, options, budget, nullptr);
}

FusedFit spatial_tree_fit(const SpatialDataset& ds, double lambda, const CdOptions& options,
                          double budget) {
    ds.validate();
    require_positive(lambda, "init_lambda");
    auto graph = spatial_graph(ds);
    const Design design = build_design(ds, *graph, budget);
    return fit_fused(ds, graph, design, lambda, options);
}

FusedFit spatial_tree_fit_auto(const SpatialDataset& ds, const std::vector<double>& grid,
                               const CdOptions& options, double budget) {
    ds.validate();
    auto graph = spatial_graph(ds);
    std::vector<double> lambdas = grid;
    if (lambdas.empty()) lambdas = default_single_grid(edge_correlation_scale(ds, *graph));
    std::vector<LambdaPair> pairs;
    for (double l : lambdas) pairs.push_back({l, l * kRatioFloor});
    TreeSelection sel = select_on_tree(ds, graph->tree(), graph->pi(), pairs, options, budget);
    return std::move(sel.best_fit);
}

CoefficientField initial_estimate(const SpatialDataset& ds, double init_lambda,
                                  const CdOptions& options, double budget) {
    return spatial_tree_fit(ds, init_lambda, options, budget).beta;
}

namespace {

struct AdaptiveTree {
    FusedFit initial;
    SpanningTree tree;
    Eigen::VectorXd pi;
};

AdaptiveTree build_adaptive_tree(const SpatialDataset& ds, const FlatConfig& config) {
    const CdOptions options = options_from(config);
    AdaptiveTree out;
    out.initial = detail::in_stage("initial_estimate", [&] {
        return config.init_lambda
                   ? spatial_tree_fit(ds, *config.init_lambda, options, config.design_budget)
                   : spatial_tree_fit_auto(ds, {}, options, config.design_budget);
    });
    const Eigen::MatrixXd coef_dist = detail::in_stage(
        "coefficient_distance", [&] { return coefficient_distance_matrix(out.initial.beta); });
    out.tree = detail::in_stage("adaptive_mst", [&] { return prim_mst(coef_dist); });
    out.pi = detail::in_stage("adaptive_weights",
                              [&] { return adaptive_weights(out.tree, coef_dist, config.gamma); });
    return out;
}

FlatFit to_flat_fit(FusedFit fit, const FlatConfig& config, const FusedFit& initial) {
    FlatFit out;
    out.beta = std::move(fit.beta);
    out.theta = Eigen::Map<const Eigen::VectorXd>(fit.theta.data(), fit.theta.size());
    out.objective = fit.objective;
    out.sweeps = fit.sweeps;
    out.converged = fit.converged;
    out.rss = fit.rss;
    out.df = fit.df;
    out.config = config;
    out.config.lambda1 = fit.lambda1;
    out.config.lambda2 = fit.lambda2;
    out.config.init_lambda = initial.lambda1;
    out.graph = std::move(fit.graph);
    out.initial = initial.beta;
    out.init_lambda = initial.lambda1;
    return out;
}

}  // namespace

FlatFit fit_flat(const SpatialDataset& ds, const FlatConfig& config) {
    detail::in_stage("validate", [&] {
        ds.validate();
        config.validate();
        return 0;
    });
    AdaptiveTree adaptive = build_adaptive_tree(ds, config);
    auto graph = detail::in_stage("h_tilde", [&] {
        return std::make_shared<const FusionGraph>(adaptive.tree, adaptive.pi,
                                                   config.lambda2 / config.lambda1);
    });
    const Design design =
        detail::in_stage("design", [&] { return build_design(ds, *graph, config.design_budget); });
    FusedFit fit = detail::in_stage("coordinate_descent", [&] {
        return fit_fused(ds, graph, design, config.lambda1, options_from(config));
    });
    return to_flat_fit(std::move(fit), config, adaptive.initial);
}

LambdaSelection select_lambdas(const SpatialDataset& ds, const FlatConfig& config) {
    detail::in_stage("validate", [&] {
        ds.validate();
        config.validate();
        return 0;
    });
    AdaptiveTree adaptive = build_adaptive_tree(ds, config);
    std::vector<LambdaPair> grid = config.lambda_grid;
    if (grid.empty()) {
        grid = detail::in_stage("lambda_grid", [&] {
            const FusionGraph reference(adaptive.tree, adaptive.pi, 1.0);
            return default_lambda_grid(edge_correlation_scale(ds, reference));
        });
    }
    TreeSelection sel = detail::in_stage("select_lambdas", [&] {
        return select_on_tree_impl(ds, adaptive.tree, adaptive.pi, grid, options_from(config),
                                   config.design_budget, &adaptive.initial.beta.beta);
    });
    LambdaSelection out;
    out.best = sel.best;
    out.scores = std::move(sel.scores);
    out.fit = to_flat_fit(std::move(sel.best_fit), config, adaptive.initial);
    return out;
}

}  // namespace flat

#include "flat/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

#include "flat/baselines.hpp"
#include "flat/cluster.hpp"
#include "flat/error.hpp"
#include "flat/solver.hpp"

namespace flat {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream};
    return std::mt19937_64(seq);
}

constexpr std::uint32_t kLocationStream = 0x10c;
constexpr std::uint32_t kDrawStream = 0xd6f;

Eigen::VectorXd standard_normals(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd out(n);
    for (Index i = 0; i < n; ++i) out[i] = normal(rng);
    return out;
}

const std::vector<std::string> kMeasures = {"RMSE", "MAE", "SD", "RI", "ARI", "SC", "CHI"};

}  // namespace

bool Region::contains(double x, double y) const {
    switch (kind) {
        case Kind::All: return true;
        case Kind::XRange: return x >= x0 && x < x1;
        case Kind::YRange: return y >= y0 && y < y1;
        case Kind::Rect: return x >= x0 && x < x1 && y >= y0 && y < y1;
        case Kind::Disk: return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
    }
    return false;
}

void Surface::validate() const {
    if (regions.empty()) throw ConfigError("surfaces", "a surface needs at least one region");
    for (const auto& r : regions)
        if (!std::isfinite(r.level)) throw ConfigError("surfaces", "region level must be finite");
    constexpr int kSteps = 200;
    for (int a = 0; a <= kSteps; ++a) {
        for (int b = 0; b <= kSteps; ++b) {
            const double x = double(a) / kSteps, y = double(b) / kSteps;
            if (label_at(x, y) == 0)
                throw ConfigError("surfaces", "regions do not cover [0,1]^2 (gap near (" +
                                                  std::to_string(x) + ", " + std::to_string(y) +
                                                  "))");
        }
    }
}

int Surface::label_at(double x, double y) const {
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i].contains(x, y)) return static_cast<int>(i) + 1;
    return 0;
}

double Surface::value_at(double x, double y) const {
    const int label = label_at(x, y);
    if (label == 0) throw ConfigError("surfaces", "location outside every region");
    return regions[label - 1].level;
}

std::vector<Surface> default_surfaces() {
    using K = Region::Kind;
    Surface beta1{{Region{.kind = K::YRange, .y0 = 0.0, .y1 = 0.5, .level = 1.0},
                   Region{.kind = K::All, .level = 3.0}}};
    Surface beta2{{Region{.kind = K::XRange, .x0 = 0.0, .x1 = 1.0 / 3.0, .level = 2.0},
                   Region{.kind = K::XRange, .x0 = 1.0 / 3.0, .x1 = 2.0 / 3.0, .level = 4.0},
                   Region{.kind = K::All, .level = 6.0}}};
    Surface beta3{{Region{.kind = K::Disk, .cx = 0.5, .cy = 0.5, .radius = 0.3, .level = 5.0},
                   Region{.kind = K::All, .level = 2.0}}};
    return {beta1, beta2, beta3};
}

void SimulationSpec::validate() const {
    if (n < 2) throw ConfigError("n", "n must be at least 2");
    if (!(phi > 0) || !std::isfinite(phi)) throw ConfigError("phi", "phi must be positive");
    if (!(r >= 0 && r < 1)) throw ConfigError("r", "r must lie in [0, 1)");
    if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("sigma", "sigma must be >= 0");
    if (static_cast<Index>(surfaces.size()) != p())
        throw ConfigError("surfaces", "exactly 3 surfaces are required (beta_1, beta_2, beta_3)");
    for (const auto& s : surfaces) s.validate();
    if (reps < 1) throw ConfigError("reps", "reps must be at least 1");
}

GpSampler::GpSampler(const Eigen::MatrixXd& coords, double phi) {
    if (!(phi > 0)) throw ConfigError("phi", "phi must be positive");
    const Eigen::MatrixXd cov = (-pairwise_distances(coords).array() / phi).exp().matrix();
    for (double jitter = 1e-10; jitter <= 1e-6 * 1.0000001; jitter *= 10) {
        Eigen::MatrixXd a = cov;
        a.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) {
            lower_ = llt.matrixL();
            jitter_ = jitter;
            return;
        }
    }
    throw Error("Gaussian process covariance is not positive definite even with jitter 1e-6");
}

Eigen::VectorXd GpSampler::draw(std::mt19937_64& rng) const {
    const Eigen::VectorXd z = standard_normals(lower_.rows(), rng);
    return lower_.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd sample_gp(const Eigen::MatrixXd& coords, double phi, std::uint64_t seed) {
    auto rng = make_engine(seed, kDrawStream);
    return GpSampler(coords, phi).draw(rng);
}

CovariatePair make_covariates(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, double r) {
    if (!(std::abs(r) < 1)) throw ConfigError("r", "|r| must be below 1");
    if (z1.size() != z2.size()) throw DimensionError("z1 and z2 differ in length");
    return {z1, r * z1 + std::sqrt(1.0 - r * r) * z2};
}

Eigen::MatrixXd draw_locations(Index n, std::uint64_t seed) {
    auto rng = make_engine(seed, kLocationStream);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd coords(n, 2);
    for (Index i = 0; i < n; ++i) {
        coords(i, 0) = unit(rng);
        coords(i, 1) = unit(rng);
    }
    return coords;
}

Dgp generate_dgp(const SimulationSpec& spec, const Eigen::MatrixXd& coords, const GpSampler& gp,
                 std::uint64_t seed) {
    const Index n = coords.rows();
    auto rng = make_engine(seed, kDrawStream);
    const Eigen::VectorXd z1 = gp.draw(rng);
    const Eigen::VectorXd z2 = gp.draw(rng);
    const CovariatePair x = make_covariates(z1, z2, spec.r);
    const Eigen::VectorXd noise = standard_normals(n, rng) * spec.sigma;

    Dgp out;
    out.data.coords = coords;
    out.data.covariates.resize(n, 3);
    out.data.covariates.col(0) = x.x1;
    out.data.covariates.col(1) = x.x2;
    out.data.covariates.col(2).setOnes();
    out.data.covariate_names = {"cov1", "cov2", "intercept"};
    out.truth.beta.resize(n, 3);
    out.truth.covariate_names = out.data.covariate_names;
    out.labels.assign(3, std::vector<int>(n));
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < 3; ++k) {
            const Surface& s = spec.surfaces[k];
            out.labels[k][i] = s.label_at(coords(i, 0), coords(i, 1));
            out.truth.beta(i, k) = s.value_at(coords(i, 0), coords(i, 1));
        }
    }
    out.data.response =
        (out.data.covariates.array() * out.truth.beta.array()).rowwise().sum().matrix() + noise;
    return out;
}

Dgp generate_dgp(const SimulationSpec& spec) {
    spec.validate();
    const Eigen::MatrixXd coords = draw_locations(spec.n, spec.seed);
    const GpSampler gp(coords, spec.phi);
    return generate_dgp(spec, coords, gp, spec.seed);
}

Method standard_method(MethodKind kind) {
    switch (kind) {
        case MethodKind::Flat:
            return {"FLAT", [](const SpatialDataset& ds) {
                        return select_lambdas(ds, FlatConfig{}).fit.beta;
                    }};
        case MethodKind::Scc:
            return {"SCC", [](const SpatialDataset& ds) { return fit_scc(ds).beta; }};
        case MethodKind::Gwr:
            return {"GWR", [](const SpatialDataset& ds) { return fit_gwr(ds).beta; }};
    }
    throw ConfigError("methods", "unknown method");
}

MethodKind parse_method(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "flat") return MethodKind::Flat;
    if (lower == "scc") return MethodKind::Scc;
    if (lower == "gwr") return MethodKind::Gwr;
    throw ConfigError("methods", "unknown method '" + name + "' (expected flat, scc or gwr)");
}

double MetricTable::get(const std::string& measure, int coordinate,
                        const std::string& method) const {
    for (const auto& e : entries)
        if (e.measure == measure && e.coordinate == coordinate && e.method == method)
            return e.value;
    throw ConfigError("measure", "no entry for " + measure + "/" + std::to_string(coordinate) +
                                     "/" + method);
}

ErrorSummary summarize_errors(const std::vector<Eigen::VectorXd>& estimates,
                              const Eigen::VectorXd& truth) {
    if (estimates.empty()) throw DimensionError("no estimates to summarize");
    const Index n = truth.size();
    const double t = static_cast<double>(estimates.size());
    ErrorSummary out;
    for (Index i = 0; i < n; ++i) {
        double sq = 0.0, abs = 0.0, sum = 0.0;
        for (const auto& e : estimates) {
            const double err = e[i] - truth[i];
            sq += err * err;
            abs += std::abs(err);
            sum += e[i];
        }
        const double mean = sum / t;
        double spread = 0.0;
        for (const auto& e : estimates) spread += (e[i] - mean) * (e[i] - mean);
        out.rmse += std::sqrt(sq / t);
        out.mae += abs / t;
        out.sd += std::sqrt(spread / t);
    }
    out.rmse /= static_cast<double>(n);
    out.mae /= static_cast<double>(n);
    out.sd /= static_cast<double>(n);
    return out;
}

namespace {

struct ClusterScores {
    double ri = 0, ari = 0, sc = 0, chi = 0;
};

ClusterScores score_field(const Eigen::VectorXd& field, const std::vector<int>& truth) {
    const Eigen::MatrixXd points = field;
    ClusterScores s;
    std::vector<int> labels;
    try {
        const ClusterSelection sel =
            select_clustering(points, default_epsilon_grid(points), default_minpts_grid());
        labels = sel.result.labels;
        s.sc = silhouette(points, labels);
        s.chi = calinski_harabasz(points, labels);
    } catch (const UndefinedMetricError&) {
        labels.assign(truth.size(), 1);
    }
    const auto pred = noise_as_singletons(labels);
    s.ri = rand_index(truth, pred);
    s.ari = adjusted_rand_index(truth, pred);
    return s;
}

struct ReplicateResult {
    bool ok = false;
    std::string error;
    std::vector<Eigen::MatrixXd> estimates;           // per method, n x p
    std::vector<std::vector<ClusterScores>> scores;  // per method, per coefficient
};

}  // namespace

MetricTable run_replications(const SimulationSpec& spec, const std::vector<Method>& methods,
                             const ReplicationOptions& options) {
    spec.validate();
    if (methods.empty()) throw ConfigError("methods", "at least one method is required");
    const Index p = spec.p();
    const Eigen::MatrixXd coords = draw_locations(spec.n, spec.seed);
    const GpSampler gp(coords, spec.phi);

    std::vector<ReplicateResult> results(spec.reps);
    auto run_one = [&](int t) {
        ReplicateResult& out = results[t - 1];
        try {
            const Dgp dgp = generate_dgp(spec, coords, gp, spec.seed ^ static_cast<std::uint64_t>(t));
            for (const auto& m : methods) {
                CoefficientField est = m.fit(dgp.data);
                est.validate_against(dgp.data);
                std::vector<ClusterScores> per_coef;
                for (Index k = 0; k < p; ++k)
                    per_coef.push_back(score_field(est.beta.col(k), dgp.labels[k]));
                out.estimates.push_back(std::move(est.beta));
                out.scores.push_back(std::move(per_coef));
            }
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = "replicate " + std::to_string(t) + ": " + e.what();
        }
    };

    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(spec.reps));
    if (threads == 1) {
        for (int t = 1; t <= spec.reps; ++t) run_one(t);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (int t = 1 + static_cast<int>(w); t <= spec.reps; t += static_cast<int>(threads))
                    run_one(t);
            });
        for (auto& th : pool) th.join();
    }

    MetricTable table;
    table.reps = spec.reps;
    for (const auto& r : results) {
        if (r.ok) continue;
        ++table.failures;
        table.failure_messages.push_back(r.error);
    }
    if (table.failures * 10 > spec.reps || table.failures == spec.reps) {
        std::string msg = "too many failed replicates (" + std::to_string(table.failures) + "/" +
                          std::to_string(spec.reps) + ")";
        if (!table.failure_messages.empty()) msg += "; first: " + table.failure_messages.front();
        throw Error(msg);
    }

    const Eigen::MatrixXd truth = [&] {
        Eigen::MatrixXd b(spec.n, p);
        for (Index i = 0; i < spec.n; ++i)
            for (Index k = 0; k < p; ++k)
                b(i, k) = spec.surfaces[k].value_at(coords(i, 0), coords(i, 1));
        return b;
    }();

    // values[measure][k][method]
    std::vector<std::vector<std::vector<double>>> values(
        kMeasures.size(), std::vector<std::vector<double>>(p, std::vector<double>(methods.size())));
    for (std::size_t m = 0; m < methods.size(); ++m) {
        for (Index k = 0; k < p; ++k) {
            std::vector<Eigen::VectorXd> est;
            ClusterScores sum;
            for (const auto& r : results) {
                if (!r.ok) continue;
                est.emplace_back(r.estimates[m].col(k));
                const ClusterScores& s = r.scores[m][k];
                sum.ri += s.ri;
                sum.ari += s.ari;
                sum.sc += s.sc;
                sum.chi += s.chi;
            }
            const double count = static_cast<double>(est.size());
            const ErrorSummary e = summarize_errors(est, truth.col(k));
            values[0][k][m] = e.rmse;
            values[1][k][m] = e.mae;
            values[2][k][m] = e.sd;
            values[3][k][m] = sum.ri / count;
            values[4][k][m] = sum.ari / count;
            values[5][k][m] = sum.sc / count;
            values[6][k][m] = sum.chi / count;
        }
    }
    for (std::size_t q = 0; q < kMeasures.size(); ++q)
        for (Index k = 0; k < p; ++k)
            for (std::size_t m = 0; m < methods.size(); ++m)
                table.entries.push_back(
                    {kMeasures[q], static_cast<int>(k) + 1, methods[m].name, values[q][k][m]});
    return table;
}

MetricTable score_estimate(const CoefficientField& estimate, const CoefficientField& truth,
                           const std::vector<std::vector<int>>& labels,
                           const std::string& method) {
    estimate.validate();
    truth.validate();
    if (estimate.n() != truth.n() || estimate.p() != truth.p())
        throw DimensionError("estimate and truth differ in shape");
    if (static_cast<Index>(labels.size()) != truth.p())
        throw DimensionError("need one label vector per coefficient");
    MetricTable table;
    table.reps = 1;
    std::vector<std::vector<double>> values(kMeasures.size(), std::vector<double>(truth.p()));
    for (Index k = 0; k < truth.p(); ++k) {
        const ErrorSummary e = summarize_errors({estimate.beta.col(k)}, truth.beta.col(k));
        const ClusterScores s = score_field(estimate.beta.col(k), labels[k]);
        const double row[] = {e.rmse, e.mae, e.sd, s.ri, s.ari, s.sc, s.chi};
        for (std::size_t q = 0; q < kMeasures.size(); ++q) values[q][k] = row[q];
    }
    for (std::size_t q = 0; q < kMeasures.size(); ++q)
        for (Index k = 0; k < truth.p(); ++k)
            table.entries.push_back({kMeasures[q], static_cast<int>(k) + 1, method, values[q][k]});
    return table;
}

}  // namespace flat

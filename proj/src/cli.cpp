#include "flat/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "flat/baselines.hpp"
#include "flat/cluster.hpp"
#include "flat/error.hpp"
#include "flat/io.hpp"
#include "flat/sdq.hpp"
#include "flat/simulation.hpp"
#include "flat/solver.hpp"

namespace flat {

namespace {

using json = nlohmann::ordered_json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string config_hash(const json& config) {
    // nlohmann::json keeps keys sorted, which makes the dump canonical.
    return hex64(fnv1a64(nlohmann::json(config).dump()));
}

std::string join(const std::filesystem::path& dir, const char* name) { return (dir / name).string(); }

std::filesystem::path prepare_dir(const std::string& out) {
    std::filesystem::path dir(out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + out + ": " + ec.message());
    return dir;
}

// ---- surfaces <-> json --------------------------------------------------

const std::map<std::string, Region::Kind> kRegionKinds = {
    {"all", Region::Kind::All},   {"x_range", Region::Kind::XRange}, {"y_range", Region::Kind::YRange},
    {"rect", Region::Kind::Rect}, {"disk", Region::Kind::Disk}};

json region_json(const Region& r) {
    json j;
    for (const auto& [name, kind] : kRegionKinds)
        if (kind == r.kind) j["kind"] = name;
    switch (r.kind) {
        case Region::Kind::All: break;
        case Region::Kind::XRange: j["x0"] = r.x0; j["x1"] = r.x1; break;
        case Region::Kind::YRange: j["y0"] = r.y0; j["y1"] = r.y1; break;
        case Region::Kind::Rect:
            j["x0"] = r.x0; j["x1"] = r.x1; j["y0"] = r.y0; j["y1"] = r.y1;
            break;
        case Region::Kind::Disk: j["cx"] = r.cx; j["cy"] = r.cy; j["radius"] = r.radius; break;
    }
    j["level"] = r.level;
    return j;
}

json surfaces_json(const std::vector<Surface>& surfaces) {
    json out = json::array();
    for (const auto& s : surfaces) {
        json regions = json::array();
        for (const auto& r : s.regions) regions.push_back(region_json(r));
        out.push_back(regions);
    }
    return out;
}

std::vector<Surface> surfaces_from(const json& j) {
    if (!j.is_array()) throw ConfigError("surfaces", "surfaces must be an array of region lists");
    std::vector<Surface> out;
    for (const auto& s : j) {
        if (!s.is_array()) throw ConfigError("surfaces", "each surface must be an array of regions");
        Surface surface;
        for (const auto& rj : s) {
            if (!rj.is_object() || !rj.contains("kind") || !rj.contains("level"))
                throw ConfigError("surfaces", "each region needs 'kind' and 'level'");
            const auto kind = kRegionKinds.find(rj.at("kind").get<std::string>());
            if (kind == kRegionKinds.end())
                throw ConfigError("surfaces", "unknown region kind " + rj.at("kind").dump());
            Region r;
            r.kind = kind->second;
            static const std::set<std::string> fields = {"kind", "level", "x0", "x1", "y0",
                                                         "y1",   "cx",    "cy", "radius"};
            for (const auto& [key, value] : rj.items()) {
                if (!fields.count(key)) throw ConfigError("surfaces", "unknown region key '" + key + "'");
                if (key == "kind") continue;
                const double v = value.get<double>();
                if (key == "level") r.level = v;
                else if (key == "x0") r.x0 = v;
                else if (key == "x1") r.x1 = v;
                else if (key == "y0") r.y0 = v;
                else if (key == "y1") r.y1 = v;
                else if (key == "cx") r.cx = v;
                else if (key == "cy") r.cy = v;
                else r.radius = v;
            }
            surface.regions.push_back(r);
        }
        out.push_back(std::move(surface));
    }
    return out;
}

// ---- config files -------------------------------------------------------

using Setter = std::function<void(const json&)>;

template <class T>
Setter set(T& target) {
    return [&target](const json& v) { target = v.template get<T>(); };
}

template <class T>
Setter set_optional(std::optional<T>& target) {
    return [&target](const json& v) { target = v.template get<T>(); };
}

/// Values in the file override flags. Keys are flag names, with '-' or '_'.
void apply_config(const std::string& path, const std::map<std::string, Setter>& setters) {
    if (path.empty()) return;
    json config;
    try {
        config = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config", path + ": invalid JSON: " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config", path + ": top level must be an object");
    for (const auto& [raw, value] : config.items()) {
        std::string key = raw;
        std::replace(key.begin(), key.end(), '-', '_');
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(key, path + ": unknown key '" + raw + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError(key, path + ": bad value for '" + raw + "': " + e.what());
        }
    }
}

// ---- simulate / evaluate share the generator settings ----------------------

struct GeneratorArgs {
    std::uint64_t seed = 0;
    Index n = 1000;
    double phi = 0.2;
    double r = 0.75;
    double sigma = 0.1;
    int reps = 100;
    std::optional<json> surfaces;

    void add_flags(CLI::App* app) {
        app->add_option("--seed", seed, "64-bit seed for every random draw")->required();
        app->add_option("--n", n, "number of locations")->capture_default_str();
        app->add_option("--phi", phi, "range of the exponential covariance")->capture_default_str();
        app->add_option("--r", r, "collinearity between x1 and x2, in [0, 1)")->capture_default_str();
        app->add_option("--sigma", sigma, "noise standard deviation")->capture_default_str();
        app->add_option("--reps", reps, "replicates")->capture_default_str();
    }

    void add_setters(std::map<std::string, Setter>& s) {
        s["seed"] = set(seed);
        s["n"] = set(n);
        s["phi"] = set(phi);
        s["r"] = set(r);
        s["sigma"] = set(sigma);
        s["reps"] = set(reps);
        s["surfaces"] = [this](const json& v) { surfaces = v; };
    }

    SimulationSpec spec() const {
        SimulationSpec s;
        s.seed = seed;
        s.n = n;
        s.phi = phi;
        s.r = r;
        s.sigma = sigma;
        s.reps = reps;
        if (surfaces) s.surfaces = surfaces_from(*surfaces);
        s.validate();
        return s;
    }
};

json spec_json(const SimulationSpec& s) {
    json j;
    j["seed"] = s.seed;
    j["n"] = s.n;
    j["phi"] = s.phi;
    j["r"] = s.r;
    j["sigma"] = s.sigma;
    j["reps"] = s.reps;
    j["surfaces"] = surfaces_json(s.surfaces);
    return j;
}

// ---- simulate --------------------------------------------------------------

struct SimulateCmd {
    GeneratorArgs gen;
    std::string out = ".";
    std::string config;

    void attach(CLI::App* app) {
        gen.add_flags(app);
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "JSON config; its values override flags");
    }

    json run() {
        std::map<std::string, Setter> s;
        gen.add_setters(s);
        s["out"] = set(out);
        apply_config(config, s);
        const SimulationSpec spec = gen.spec();

        const Dgp dgp = generate_dgp(spec);
        const auto dir = prepare_dir(out);
        const json cfg = spec_json(spec);
        const std::string hash = config_hash(cfg);

        write_dataset_csv(dgp.data, join(dir, "dataset.csv"));
        FieldTable truth{dgp.data.coords, dgp.truth, dgp.labels};
        write_field_csv(truth, join(dir, "truth.csv"));
        json meta;
        meta["config_hash"] = hash;
        meta["spec"] = cfg;
        meta["covariate_names"] = dgp.data.covariate_names;
        write_text_file(join(dir, "spec.json"), meta.dump(2) + "\n");

        json summary;
        summary["command"] = "simulate";
        summary["config_hash"] = hash;
        summary["outputs"] = {join(dir, "dataset.csv"), join(dir, "truth.csv"), join(dir, "spec.json")};
        return summary;
    }
};

// ---- fit -------------------------------------------------------------------

json grid_json(const std::vector<GridScore>& scores) {
    json out = json::array();
    for (const auto& g : scores) {
        json j;
        j["lambda1"] = g.lambdas.lambda1;
        j["lambda2"] = g.lambdas.lambda2;
        j["ok"] = g.ok;
        if (g.ok) {
            j["bic"] = number(g.bic);
            j["rss"] = number(g.rss);
            j["df"] = g.df;
        } else {
            j["error"] = g.error;
        }
        out.push_back(j);
    }
    return out;
}

struct FitCmd {
    std::string data;
    std::string method = "flat";
    std::optional<double> lambda1, lambda2, init_lambda, bandwidth;
    double gamma = 1.0;
    double cd_tolerance = 1e-6;
    int max_sweeps = 10000;
    bool auto_tune = false;
    bool standardize = false;
    bool add_intercept = false;
    std::vector<std::vector<double>> lambda_grid;
    std::string out = ".";
    std::string config;

    void attach(CLI::App* app) {
        app->add_option("--data", data, "dataset CSV: id,x1,x2[,x3],<covariates>,<response>");
        app->add_option("--method", method, "flat, scc or gwr")
            ->check(CLI::IsMember({"flat", "scc", "gwr"}))
            ->capture_default_str();
        app->add_option_function<double>("--lambda1", [this](const double& v) { lambda1 = v; },
                                         "fusion penalty");
        app->add_option_function<double>("--lambda2", [this](const double& v) { lambda2 = v; },
                                         "sparsity penalty (flat)");
        app->add_option_function<double>("--init-lambda", [this](const double& v) { init_lambda = v; },
                                         "initializer penalty (flat); BIC when omitted");
        app->add_option_function<double>("--bandwidth", [this](const double& v) { bandwidth = v; },
                                         "kernel bandwidth (gwr); cross-validated when omitted");
        app->add_option("--gamma", gamma, "adaptive weight exponent")->capture_default_str();
        app->add_option("--cd-tolerance", cd_tolerance, "coordinate descent tolerance")
            ->capture_default_str();
        app->add_option("--max-sweeps", max_sweeps, "coordinate descent sweep limit")
            ->capture_default_str();
        app->add_flag("--auto-tune", auto_tune, "choose penalties by BIC");
        app->add_flag("--standardize", standardize, "z-score non-constant covariates before fitting");
        app->add_flag("--add-intercept", add_intercept, "prepend an all-ones covariate");
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "JSON config; its values override flags");
    }

    json settings() const {
        json j;
        j["method"] = method;
        j["lambda1"] = lambda1 ? json(*lambda1) : json(nullptr);
        j["lambda2"] = lambda2 ? json(*lambda2) : json(nullptr);
        j["init_lambda"] = init_lambda ? json(*init_lambda) : json(nullptr);
        j["bandwidth"] = bandwidth ? json(*bandwidth) : json(nullptr);
        j["gamma"] = gamma;
        j["cd_tolerance"] = cd_tolerance;
        j["max_sweeps"] = max_sweeps;
        j["auto_tune"] = auto_tune;
        j["standardize"] = standardize;
        j["add_intercept"] = add_intercept;
        j["lambda_grid"] = lambda_grid;
        return j;
    }

    json run() {
        std::map<std::string, Setter> s;
        s["data"] = set(data);
        s["method"] = set(method);
        s["lambda1"] = set_optional(lambda1);
        s["lambda2"] = set_optional(lambda2);
        s["init_lambda"] = set_optional(init_lambda);
        s["bandwidth"] = set_optional(bandwidth);
        s["gamma"] = set(gamma);
        s["cd_tolerance"] = set(cd_tolerance);
        s["max_sweeps"] = set(max_sweeps);
        s["auto_tune"] = set(auto_tune);
        s["standardize"] = set(standardize);
        s["add_intercept"] = set(add_intercept);
        s["lambda_grid"] = set(lambda_grid);
        s["out"] = set(out);
        apply_config(config, s);
        if (data.empty()) throw ConfigError("data", "--data is required");
        if (method != "flat" && method != "scc" && method != "gwr")
            throw ConfigError("method", "method must be flat, scc or gwr");

        const std::string raw = read_text_file(data);
        SpatialDataset ds = read_dataset_csv(data);
        if (add_intercept) flat::add_intercept(ds);
        if (standardize) standardize_covariates(ds);

        json result;
        result["method"] = method;
        CoefficientField beta;
        if (method == "flat") {
            FlatConfig c;
            if (lambda1) c.lambda1 = *lambda1;
            if (lambda2) c.lambda2 = *lambda2;
            c.gamma = gamma;
            c.cd_tolerance = cd_tolerance;
            c.max_sweeps = max_sweeps;
            c.init_lambda = init_lambda;
            for (const auto& pair : lambda_grid) {
                if (pair.size() != 2) throw ConfigError("lambda_grid", "grid entries are [lambda1, lambda2]");
                c.lambda_grid.push_back({pair[0], pair[1]});
            }
            FlatFit fit;
            if (auto_tune || !c.lambda_grid.empty()) {
                LambdaSelection sel = select_lambdas(ds, c);
                result["grid"] = grid_json(sel.scores);
                fit = std::move(sel.fit);
            } else {
                fit = fit_flat(ds, c);
            }
            result["objective"] = number(fit.objective);
            result["sweeps"] = fit.sweeps;
            result["converged"] = fit.converged;
            result["lambda1"] = fit.config.lambda1;
            result["lambda2"] = fit.config.lambda2;
            result["init_lambda"] = fit.init_lambda;
            result["df"] = fit.df;
            beta = std::move(fit.beta);
        } else if (method == "scc") {
            CdOptions o;
            o.tolerance = cd_tolerance;
            o.max_sweeps = max_sweeps;
            const bool fixed = lambda1 && !auto_tune;
            FusedFit fit = fit_scc(ds, fixed ? lambda1 : std::nullopt, o);
            result["objective"] = number(fit.objective);
            result["sweeps"] = fit.sweeps;
            result["converged"] = fit.converged;
            result["lambda1"] = fit.lambda1;
            result["lambda2"] = fit.lambda2;
            result["df"] = fit.df;
            beta = std::move(fit.beta);
        } else {
            GwrConfig g;
            if (bandwidth && !auto_tune) g.bandwidth = bandwidth;
            GwrFit fit = fit_gwr(ds, g);
            result["bandwidth"] = fit.bandwidth;
            result["flagged"] = std::count(fit.flagged.begin(), fit.flagged.end(), 1);
            json cv = json::array();
            for (const auto& [b, score] : fit.cv_scores) cv.push_back({{"bandwidth", b}, {"loo", number(score)}});
            result["cv_scores"] = cv;
            beta = std::move(fit.beta);
        }
        const double rss = residual_sum_of_squares(ds, beta.beta);
        result["rss"] = number(rss);
        result["rmse"] = number(std::sqrt(rss / static_cast<double>(ds.n())));
        result["n"] = ds.n();
        result["p"] = ds.p();
        result["covariate_names"] = ds.covariate_names;

        json cfg = settings();
        cfg["data_hash"] = hex64(fnv1a64(raw));
        const std::string hash = config_hash(cfg);
        json doc;
        doc["config_hash"] = hash;
        doc["config"] = cfg;
        for (auto& [k, v] : result.items()) doc[k] = v;

        const auto dir = prepare_dir(out);
        write_field_csv(FieldTable{ds.coords, beta, {}}, join(dir, "coefficients.csv"));
        write_text_file(join(dir, "fit.json"), doc.dump(2) + "\n");

        json summary;
        summary["command"] = "fit";
        summary["config_hash"] = hash;
        summary["method"] = method;
        summary["rmse"] = result["rmse"];
        summary["outputs"] = {join(dir, "coefficients.csv"), join(dir, "fit.json")};
        return summary;
    }
};

// ---- cluster ---------------------------------------------------------------

json selection_json(const ClusterSelection& sel) {
    json scores;
    for (const auto& s : sel.table) {
        json j;
        j["epsilon"] = s.epsilon;
        j["min_pts"] = s.min_pts;
        j["k"] = s.k;
        j["noise_fraction"] = s.noise_fraction;
        j["admissible"] = s.admissible;
        if (s.admissible) {
            j["silhouette"] = number(s.silhouette);
            j["chi"] = number(s.chi);
        } else {
            j["reason"] = s.reason;
        }
        scores[s.key()] = j;
    }
    json out;
    ClusterScore chosen;
    chosen.epsilon = sel.result.epsilon;
    chosen.min_pts = sel.result.min_pts;
    out["selected"] = chosen.key();
    out["k"] = sel.result.k;
    out["noise_fraction"] = sel.result.noise_fraction();
    out["scores"] = scores;
    return out;
}

struct ClusterCmd {
    std::string input;
    std::vector<double> eps_grid;
    std::vector<int> minpts_grid;
    bool per_coordinate = false;
    bool joint = false;
    int k_max = 12;
    double max_noise_fraction = 0.2;
    std::string out = ".";
    std::string config;

    void attach(CLI::App* app) {
        app->add_option("--input", input, "coefficient CSV: id,x1,x2[,x3],beta_1..beta_p");
        app->add_option("--eps-grid", eps_grid, "comma-separated epsilon values")->delimiter(',');
        app->add_option("--minpts-grid", minpts_grid, "comma-separated minPts values")->delimiter(',');
        auto* pc = app->add_flag("--per-coordinate", per_coordinate,
                                 "cluster each coefficient separately (default)");
        auto* jt = app->add_flag("--joint", joint, "cluster the full coefficient vectors");
        pc->excludes(jt);
        app->add_option("--k-max", k_max, "largest admissible cluster count")->capture_default_str();
        app->add_option("--max-noise-fraction", max_noise_fraction, "largest admissible noise share")
            ->capture_default_str();
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "JSON config; its values override flags");
    }

    json run() {
        std::map<std::string, Setter> s;
        s["input"] = set(input);
        s["eps_grid"] = set(eps_grid);
        s["minpts_grid"] = set(minpts_grid);
        s["per_coordinate"] = set(per_coordinate);
        s["joint"] = set(joint);
        s["k_max"] = set(k_max);
        s["max_noise_fraction"] = set(max_noise_fraction);
        s["out"] = set(out);
        apply_config(config, s);
        if (input.empty()) throw ConfigError("input", "--input is required");
        if (joint && per_coordinate)
            throw ConfigError("joint", "choose one of per_coordinate and joint");

        const FieldTable table = read_field_csv(input);
        const std::string raw = read_text_file(input);
        SelectionRules rules;
        rules.k_max = k_max;
        rules.max_noise_fraction = max_noise_fraction;
        const auto minpts = minpts_grid.empty() ? default_minpts_grid() : minpts_grid;

        auto select = [&](const Eigen::MatrixXd& points, const std::string& what) {
            try {
                return select_clustering(points, eps_grid.empty() ? default_epsilon_grid(points) : eps_grid,
                                         minpts, rules);
            } catch (const UndefinedMetricError& e) {
                throw UndefinedMetricError(what + ": " + e.what());
            }
        };

        json cfg;
        cfg["mode"] = joint ? "joint" : "per-coordinate";
        cfg["eps_grid"] = eps_grid;
        cfg["minpts_grid"] = minpts;
        cfg["k_max"] = k_max;
        cfg["max_noise_fraction"] = max_noise_fraction;
        cfg["input_hash"] = hex64(fnv1a64(raw));
        const std::string hash = config_hash(cfg);

        json doc;
        doc["config_hash"] = hash;
        doc["config"] = cfg;
        std::vector<std::vector<int>> columns;
        std::vector<std::string> names;
        if (joint) {
            ClusterSelection sel = select(table.field.beta, "joint");
            doc["joint"] = selection_json(sel);
            columns.push_back(sel.result.labels);
            names.push_back("label");
        } else {
            json per;
            for (Index k = 0; k < table.field.p(); ++k) {
                const std::string name = table.field.covariate_names[k];
                ClusterSelection sel = select(table.field.beta.col(k), name);
                per[name] = selection_json(sel);
                columns.push_back(sel.result.labels);
                names.push_back(table.field.p() == 1 ? "label" : "label_" + std::to_string(k + 1));
            }
            doc["coordinates"] = per;
        }

        const auto dir = prepare_dir(out);
        write_labels_csv(columns, names, join(dir, "labels.csv"));
        write_text_file(join(dir, "scores.json"), doc.dump(2) + "\n");
        json summary;
        summary["command"] = "cluster";
        summary["config_hash"] = hash;
        summary["outputs"] = {join(dir, "labels.csv"), join(dir, "scores.json")};
        return summary;
    }
};

// ---- sdq -------------------------------------------------------------------

struct SdqCmd {
    std::string input;
    int coordinate = 1;
    std::string method = "axis";
    std::string out = ".";
    std::string config;

    void attach(CLI::App* app) {
        app->add_option("--input", input, "coefficient CSV: id,x1,x2[,x3],beta_1..beta_p");
        app->add_option("--coordinate", coordinate, "1-based coefficient index")->capture_default_str();
        app->add_option("--method", method, "axis (grids) or nn (scattered)")
            ->check(CLI::IsMember({"axis", "nn"}))
            ->capture_default_str();
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "JSON config; its values override flags");
    }

    json run() {
        std::map<std::string, Setter> s;
        s["input"] = set(input);
        s["coordinate"] = set(coordinate);
        s["method"] = set(method);
        s["out"] = set(out);
        apply_config(config, s);
        if (input.empty()) throw ConfigError("input", "--input is required");
        if (method != "axis" && method != "nn") throw ConfigError("method", "method must be axis or nn");

        const FieldTable table = read_field_csv(input);
        if (coordinate < 1 || coordinate > table.field.p())
            throw ConfigError("coordinate", "coordinate must lie in 1.." + std::to_string(table.field.p()));
        const Eigen::VectorXd field = table.field.beta.col(coordinate - 1);
        const SdqField sdq = method == "axis" ? sdq_axis(table.coords, field) : sdq_nn(table.coords, field);

        const auto dir = prepare_dir(out);
        write_sdq_csv(table.coords, sdq, join(dir, "sdq.csv"));
        json cfg;
        cfg["coordinate"] = coordinate;
        cfg["method"] = method;
        cfg["input_hash"] = hex64(fnv1a64(read_text_file(input)));
        json summary;
        summary["command"] = "sdq";
        summary["config_hash"] = config_hash(cfg);
        summary["undefined"] = std::count(sdq.defined.begin(), sdq.defined.end(), 0);
        summary["outputs"] = {join(dir, "sdq.csv")};
        return summary;
    }
};

// ---- evaluate --------------------------------------------------------------

std::vector<std::vector<int>> labels_from_levels(const CoefficientField& truth) {
    std::vector<std::vector<int>> out;
    for (Index k = 0; k < truth.p(); ++k) {
        std::vector<double> levels;
        std::vector<int> labels(truth.n());
        for (Index i = 0; i < truth.n(); ++i) {
            const double v = truth.beta(i, k);
            auto it = std::find_if(levels.begin(), levels.end(),
                                   [v](double l) { return std::abs(l - v) <= 1e-12; });
            if (it == levels.end()) {
                levels.push_back(v);
                it = levels.end() - 1;
            }
            labels[i] = static_cast<int>(it - levels.begin()) + 1;
        }
        out.push_back(std::move(labels));
    }
    return out;
}

json table_json(const MetricTable& table) {
    json rows = json::array();
    for (const auto& e : table.entries) {
        json j;
        j["measure"] = e.measure;
        j["coordinate"] = e.coordinate;
        j["method"] = e.method;
        j["value"] = number(e.value);
        rows.push_back(j);
    }
    return rows;
}

struct EvaluateCmd {
    GeneratorArgs gen;
    std::vector<std::string> methods = {"flat", "scc", "gwr"};
    unsigned threads = 0;
    std::string truth;
    std::string estimate;
    std::string out = ".";
    std::string config;

    void attach(CLI::App* app) {
        gen.add_flags(app);
        app->add_option("--methods", methods, "comma-separated subset of flat,scc,gwr")
            ->delimiter(',')
            ->capture_default_str();
        app->add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
        app->add_option("--truth", truth, "truth CSV; with --estimate, score one fitted file instead");
        app->add_option("--estimate", estimate, "coefficient CSV to score against --truth");
        app->add_option("--out", out, "output directory")->capture_default_str();
        app->add_option("--config", config, "JSON config; its values override flags");
    }

    json run() {
        std::map<std::string, Setter> s;
        gen.add_setters(s);
        s["methods"] = set(methods);
        s["threads"] = set(threads);
        s["truth"] = set(truth);
        s["estimate"] = set(estimate);
        s["out"] = set(out);
        apply_config(config, s);
        if (truth.empty() != estimate.empty())
            throw ConfigError(truth.empty() ? "truth" : "estimate", "--truth and --estimate go together");

        json cfg;
        MetricTable table;
        if (!truth.empty()) {
            const FieldTable t = read_field_csv(truth);
            const FieldTable e = read_field_csv(estimate);
            if ((t.coords - e.coords).cwiseAbs().maxCoeff() > 1e-9)
                throw ValidationError("truth and estimate locations differ");
            const auto labels = t.regions.empty() ? labels_from_levels(t.field) : t.regions;
            table = score_estimate(e.field, t.field, labels, "estimate");
            cfg["truth_hash"] = hex64(fnv1a64(read_text_file(truth)));
            cfg["estimate_hash"] = hex64(fnv1a64(read_text_file(estimate)));
        } else {
            const SimulationSpec spec = gen.spec();
            if (spec.reps < 2) throw ConfigError("reps", "evaluate needs at least 2 replicates");
            std::vector<Method> list;
            for (const auto& m : methods) list.push_back(standard_method(parse_method(m)));
            ReplicationOptions options;
            options.threads = threads;
            table = run_replications(spec, list, options);
            cfg = spec_json(spec);
            cfg["methods"] = methods;
        }
        const std::string hash = config_hash(cfg);
        json doc;
        doc["config_hash"] = hash;
        doc["config"] = cfg;
        doc["reps"] = table.reps;
        doc["failures"] = table.failures;
        doc["failure_messages"] = table.failure_messages;
        doc["metrics"] = table_json(table);

        const auto dir = prepare_dir(out);
        write_text_file(join(dir, "metrics.json"), doc.dump(2) + "\n");
        write_text_file(join(dir, "metrics.csv"), metric_table_csv(table));
        json summary;
        summary["command"] = "evaluate";
        summary["config_hash"] = hash;
        summary["failures"] = table.failures;
        summary["outputs"] = {join(dir, "metrics.json"), join(dir, "metrics.csv")};
        return summary;
    }
};

json error_json(const std::string& kind, const std::string& message) {
    json e;
    e["kind"] = kind;
    e["message"] = message;
    return e;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fused lasso spatial regression over adaptive spanning trees", "flat"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    SimulateCmd simulate;
    FitCmd fit;
    ClusterCmd cluster;
    SdqCmd sdq;
    EvaluateCmd evaluate;
    simulate.attach(app.add_subcommand("simulate", "draw a synthetic dataset with known coefficients"));
    fit.attach(app.add_subcommand("fit", "estimate spatially varying coefficients"));
    cluster.attach(app.add_subcommand("cluster", "DBSCAN over a coefficient field"));
    sdq.attach(app.add_subcommand("sdq", "spatial difference quotient of one coefficient"));
    evaluate.attach(app.add_subcommand("evaluate", "replication study or single-file scoring"));

    std::vector<std::string> argv_storage = {"flat"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        json doc;
        doc["error"] = error_json("usage", e.what());
        err << doc.dump() << '\n';
        return 2;
    }

    try {
        json summary;
        if (app.got_subcommand("simulate")) summary = simulate.run();
        else if (app.got_subcommand("fit")) summary = fit.run();
        else if (app.got_subcommand("cluster")) summary = cluster.run();
        else if (app.got_subcommand("sdq")) summary = sdq.run();
        else summary = evaluate.run();
        out << summary.dump() << '\n';
        return 0;
    } catch (const StageError& e) {
        json doc;
        doc["error"] = error_json(e.kind(), e.what());
        doc["error"]["stage"] = e.stage();
        err << doc.dump() << '\n';
    } catch (const ConfigError& e) {
        json doc;
        doc["error"] = error_json(e.kind(), e.what());
        doc["error"]["field"] = e.field();
        err << doc.dump() << '\n';
    } catch (const Error& e) {
        json doc;
        doc["error"] = error_json(e.kind(), e.what());
        err << doc.dump() << '\n';
    } catch (const std::exception& e) {
        json doc;
        doc["error"] = error_json("internal", e.what());
        err << doc.dump() << '\n';
    }
    return 1;
}

}  // namespace flat

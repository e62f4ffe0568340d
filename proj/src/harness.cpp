#include "jmacate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace jmacate {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n_tasks));
    if (threads == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct RepOutcome {
    std::vector<double> method_ase;               // aligned with kMethods
    std::vector<std::vector<double>> method_w;    // ditto
    std::vector<double> model_ase;
    double cv_jma = 0.0;
    double cv_best_vertex = 0.0;
    double normalizer = 0.0;
    bool normalizer_zero = false;
    int m_pairs = 0;
    double h_used = 0.0;
};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// One full replication: match, jackknife, weights, every method's ASE on the
// evaluation points, and the infeasible-optimal normalizer.
RepOutcome run_methods(const Dataset& data, const std::vector<CandidateSpec>& specs,
                       const MatchSettings& match, const Matrix& eval_x, const Vector& truth,
                       Rng& rng) {
    const int K = static_cast<int>(specs.size());

    std::vector<int> dims = match.dims.empty() ? raw_covariates_used(specs) : match.dims;
    const CubeTransform tr = fit_cube_transform(data.x, dims);
    const Matrix x_scaled = tr.apply(data.x);
    const double h0 =
        match.h_override > 0.0
            ? match.h_override
            : pair_maximizing_side_length(
                  x_scaled, data.t,
                  default_side_length(static_cast<double>(data.n()),
                                      static_cast<int>(dims.size())));
    const int m_min = match.m_min > 0 ? match.m_min : K;

    const MatchedPairSet pairs = adaptive_match(x_scaled, data.t, h0, m_min, rng);
    const FittedModels fitted = fit_all(data, specs);
    const JackknifeSystem sys = build_jackknife_system(data, fitted, pairs);

    const SolveResult jma = solve_weights(sys);
    const ScoreTable scores = score_table(fitted, sys);
    const int k_aic = select_min(scores.aic);
    const int k_bic = select_min(scores.bic);
    const int k_tecv = tecv_select(sys);
    const WeightVector w_saic = smoothed_weights(scores.aic);
    const WeightVector w_sbic = smoothed_weights(scores.bic);

    const Matrix per_model = per_model_estimates(fitted, eval_x);
    const OracleResult oracle = oracle_weights(per_model, truth);

    RepOutcome out;
    out.m_pairs = pairs.m();
    out.h_used = pairs.h;
    out.cv_jma = jma.objective;
    out.cv_best_vertex = *std::min_element(scores.tecv.begin(), scores.tecv.end());
    if (out.cv_jma > out.cv_best_vertex * (1.0 + 1e-9) + 1e-12)
        throw std::logic_error("solve_weights returned worse criterion than the best vertex");
    out.normalizer = oracle.ase;
    out.normalizer_zero = oracle.normalizer_zero;

    const std::vector<WeightVector> method_weights = {
        jma.w,
        WeightVector::vertex(k_aic, K),
        WeightVector::vertex(k_bic, K),
        w_saic,
        w_sbic,
        WeightVector::vertex(k_tecv, K),
    };
    for (const auto& w : method_weights) {
        out.method_ase.push_back(ase(per_model * w.w, truth));
        out.method_w.push_back(to_std(w.w));
    }
    for (int k = 0; k < K; ++k) out.model_ase.push_back(ase(per_model.col(k), truth));

    // The oracle minimizes over the same simplex every method draws from.
    if (!out.normalizer_zero)
        for (double a : out.method_ase)
            if (a < out.normalizer * (1.0 - 1e-6))
                throw std::logic_error("oracle normalizer exceeds a feasible method's ASE");
    return out;
}

double wdelta_of(const std::vector<double>& w, const std::vector<int>& correct) {
    double s = 0.0;
    for (int k : correct) s += w[k];
    return s;
}

struct GridCell {
    int n;
    double r2;
    double rho;
    int design;
    double c;
};

}  // namespace

void SimulateConfig::validate() const {
    if (example != 1 && example != 2) fail(Err::ConfigInvalid, "example must be 1 or 2");
    if (n_list.empty() || r2_list.empty() || rho_list.empty() || design_list.empty())
        fail(Err::ConfigInvalid, "grid lists must be nonempty");
    for (int n : n_list)
        if (n < 20) fail(Err::ConfigInvalid, "n must be >= 20");
    for (double r2 : r2_list)
        if (!(r2 > 0.0 && r2 < 1.0)) fail(Err::ConfigInvalid, "r2 values must lie in (0,1)");
    for (double rho : rho_list)
        if (!(rho >= 0.0 && rho < 1.0)) fail(Err::ConfigInvalid, "rho values must lie in [0,1)");
    for (int d : design_list)
        if (d != 1 && d != 2) fail(Err::ConfigInvalid, "design must be 1 or 2");
    if (reps < 1) fail(Err::ConfigInvalid, "reps must be >= 1");
    if (n_eval < 1) fail(Err::ConfigInvalid, "n_eval must be >= 1");
    if (threads < 1) fail(Err::ConfigInvalid, "threads must be >= 1");
    if (calib_n_mc < 1000) fail(Err::ConfigInvalid, "calibration n_mc must be >= 1000");
    if (!(calib_tol > 0.0)) fail(Err::ConfigInvalid, "calibration tol must be positive");
    const size_t K = candidates.empty() ? default_candidates(example).size() : candidates.size();
    for (int k : correct_models)
        if (k < 0 || k >= static_cast<int>(K))
            fail(Err::ConfigInvalid, "correct_models index out of range");
}

double RunOutput::mean_normalized_risk(const std::string& method, int n, double r2, double rho,
                                       int design) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : rows) {
        if (row.method != method || row.n != n) continue;
        if (r2 >= 0.0 && row.r2 != r2) continue;
        if (rho >= 0.0 && row.rho != rho) continue;
        if (design >= 0 && row.design != design) continue;
        sum += row.ase / row.normalizer;
        ++count;
    }
    return count > 0 ? sum / count : std::nan("");
}

double RunOutput::mean_ase(const std::string& method, int n) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : rows)
        if (row.method == method && row.n == n) {
            sum += row.ase;
            ++count;
        }
    return count > 0 ? sum / count : std::nan("");
}

double RunOutput::mean_wdelta(const std::string& method, int n) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : weights)
        if (row.method == method && row.n == n) {
            sum += row.w_delta;
            ++count;
        }
    return count > 0 ? sum / count : std::nan("");
}

namespace {

std::vector<double> double_list(const nlohmann::json& v, const char* key) {
    std::vector<double> out;
    if (v.is_array())
        for (const auto& x : v) out.push_back(x.get<double>());
    else if (v.is_number())
        out.push_back(v.get<double>());
    else
        fail(Err::ConfigInvalid, std::string("config key \"") + key + "\" must be number or array");
    return out;
}

std::vector<int> int_list(const nlohmann::json& v, const char* key) {
    std::vector<int> out;
    if (v.is_array())
        for (const auto& x : v) out.push_back(x.get<int>());
    else if (v.is_number_integer())
        out.push_back(v.get<int>());
    else
        fail(Err::ConfigInvalid, std::string("config key \"") + key + "\" must be int or array");
    return out;
}

nlohmann::json candidates_to_json(const std::vector<CandidateSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json terms = nlohmann::json::array();
        for (const Term& t : s.terms) {
            if (t.is_interaction())
                terms.push_back({{"inter", {t.var_a + 1, t.var_b + 1}}});
            else
                terms.push_back({{"var", t.var_a + 1}, {"pow", t.power}});
        }
        arr.push_back({{"intercept", s.intercept}, {"terms", terms}});
    }
    return arr;
}

void parse_matching(const nlohmann::json& v, MatchSettings& out) {
    for (auto m = v.begin(); m != v.end(); ++m) {
        if (m.key() == "h")
            out.h_override = m.value().get<double>();
        else if (m.key() == "m_min")
            out.m_min = m.value().get<int>();
        else if (m.key() == "dims") {
            out.dims.clear();
            for (int d : int_list(m.value(), "dims")) {
                if (d < 1) fail(Err::ConfigInvalid, "matching dims are 1-based");
                out.dims.push_back(d - 1);
            }
        } else
            fail(Err::ConfigInvalid, "unknown matching key \"" + m.key() + "\"");
    }
}

nlohmann::json matching_to_json(const MatchSettings& m) {
    nlohmann::json j = nlohmann::json::object();
    if (m.h_override > 0.0) j["h"] = m.h_override;
    if (m.m_min > 0) j["m_min"] = m.m_min;
    if (!m.dims.empty()) {
        std::vector<int> dims1;
        for (int d : m.dims) dims1.push_back(d + 1);
        j["dims"] = dims1;
    }
    return j;
}

std::vector<CandidateSpec> parse_candidates_value(const nlohmann::json& v) {
    if (v.is_string()) return candidates_from_json_file(v.get<std::string>());
    return candidates_from_json_text(v.dump());
}

}  // namespace

RunOutput run_simulate(const SimulateConfig& cfg) {
    cfg.validate();
    const std::string started = utc_timestamp();

    const std::vector<CandidateSpec> specs =
        cfg.candidates.empty() ? default_candidates(cfg.example) : cfg.candidates;
    std::vector<int> correct = cfg.correct_models;
    if (correct.empty() && cfg.example == 2 && cfg.candidates.empty()) correct = {0};

    // Calibrate c once per (r2, rho, design); cells reuse it across n.
    std::map<std::tuple<double, double, int>, double> c_cache;
    std::vector<GridCell> cells;
    for (int n : cfg.n_list)
        for (double r2 : cfg.r2_list)
            for (double rho : cfg.rho_list)
                for (int design : cfg.design_list) {
                    const auto key = std::make_tuple(r2, rho, design);
                    if (!c_cache.count(key))
                        c_cache[key] = cfg.c_override
                                           ? *cfg.c_override
                                           : calibrate_c(r2, rho, design, cfg.calib_n_mc,
                                                         cfg.calib_tol);
                    cells.push_back({n, r2, rho, design, c_cache.at(key)});
                }

    const int n_cells = static_cast<int>(cells.size());
    const int n_tasks = n_cells * cfg.reps;
    std::vector<RepOutcome> outcomes(n_tasks);
    std::vector<int> attempts_used(n_tasks, 1);
    std::vector<uint64_t> streams(n_tasks, 0);
    std::vector<std::string> failures;
    std::mutex failures_mu;

    parallel_for(n_tasks, cfg.threads, [&](int task) {
        const GridCell& cell = cells[task / cfg.reps];
        const int rep = task % cfg.reps;
        SimConfig sim;
        sim.n = cell.n;
        sim.rho = cell.rho;
        sim.design = cell.design;
        sim.r2 = cell.r2;
        sim.c = cell.c;
        sim.n_eval = cfg.n_eval;
        sim.reps = cfg.reps;
        for (int attempt = 0;; ++attempt) {
            const uint64_t stream = static_cast<uint64_t>(task) * 8 + attempt;
            Rng rng = Rng::derive(cfg.seed, stream);
            try {
                const SimDraw draw = generate_example1(sim, rng);
                outcomes[task] =
                    run_methods(draw.data, specs, cfg.match, draw.x_eval, draw.delta_eval, rng);
                attempts_used[task] = attempt + 1;
                streams[task] = stream;
                return;
            } catch (const Error& e) {
                {
                    std::lock_guard<std::mutex> lock(failures_mu);
                    failures.push_back("n=" + std::to_string(cell.n) +
                                       " r2=" + format_double(cell.r2) + " rep=" +
                                       std::to_string(rep) + " attempt=" +
                                       std::to_string(attempt) + ": " + e.what());
                }
                if (attempt + 1 >= 5)
                    throw Error(e.code(), "replication failed after 5 attempts (n=" +
                                              std::to_string(cell.n) + ", r2=" +
                                              format_double(cell.r2) + ", rep=" +
                                              std::to_string(rep) + "): " + e.what());
            }
        }
    });

    RunOutput out;
    nlohmann::json reps_json = nlohmann::json::array();
    for (int task = 0; task < n_tasks; ++task) {
        const GridCell& cell = cells[task / cfg.reps];
        const int rep = task % cfg.reps;
        const RepOutcome& oc = outcomes[task];
        for (size_t mi = 0; mi < kMethods.size(); ++mi) {
            out.rows.push_back({kMethods[mi], cell.n, cell.r2, cell.rho, cell.design, rep,
                                oc.method_ase[mi], oc.normalizer});
            WeightRow wr{cell.n,       cell.r2, cell.rho, cell.design,
                         rep,          kMethods[mi], oc.method_w[mi],
                         correct.empty() ? 0.0 : wdelta_of(oc.method_w[mi], correct)};
            out.weights.push_back(std::move(wr));
        }
        RepDetail det;
        det.n = cell.n;
        det.r2 = cell.r2;
        det.rho = cell.rho;
        det.design = cell.design;
        det.rep = rep;
        det.model_ase = oc.model_ase;
        det.cv_jma = oc.cv_jma;
        det.cv_best_vertex = oc.cv_best_vertex;
        det.normalizer = oc.normalizer;
        det.normalizer_zero = oc.normalizer_zero;
        det.m_pairs = oc.m_pairs;
        det.h_used = oc.h_used;
        det.attempts = attempts_used[task];
        out.details.push_back(std::move(det));
        reps_json.push_back({{"n", cell.n},
                             {"r2", cell.r2},
                             {"rho", cell.rho},
                             {"design", cell.design},
                             {"rep", rep},
                             {"stream", streams[task]},
                             {"attempts", attempts_used[task]}});
    }

    nlohmann::json calib = nlohmann::json::array();
    for (const auto& [key, c] : c_cache)
        calib.push_back({{"r2", std::get<0>(key)},
                         {"rho", std::get<1>(key)},
                         {"design", std::get<2>(key)},
                         {"c", c}});

    nlohmann::json summary = nlohmann::json::array();
    for (const GridCell& cell : cells) {
        nlohmann::json risks = nlohmann::json::object();
        for (const auto& method : kMethods)
            risks[method] =
                out.mean_normalized_risk(method, cell.n, cell.r2, cell.rho, cell.design);
        summary.push_back({{"n", cell.n},
                           {"r2", cell.r2},
                           {"rho", cell.rho},
                           {"design", cell.design},
                           {"mean_normalized_risk", risks}});
    }

    out.manifest = {{"command", "simulate"},
                    {"version", kVersion},
                    {"master_seed", cfg.seed},
                    {"config", simulate_config_to_json(cfg)},
                    {"calibrated_c", calib},
                    {"correct_models", correct},
                    {"summary", summary},
                    {"replication_seeds", reps_json},
                    {"failures", failures},
                    {"started", started},
                    {"finished", utc_timestamp()}};

    if (!cfg.out_dir.empty()) write_outputs(out, cfg.out_dir);
    return out;
}

RunOutput run_weights_consistency(const SimulateConfig& cfg_in) {
    SimulateConfig cfg = cfg_in;
    cfg.example = 2;
    if (cfg.correct_models.empty() && !cfg.candidates.empty())
        fail(Err::ConfigInvalid,
             "weights-consistency with custom candidates requires correct_models");
    RunOutput out = run_simulate(cfg);
    nlohmann::json by_n = nlohmann::json::array();
    for (int n : cfg.n_list)
        by_n.push_back({{"n", n}, {"mean_wdelta", out.mean_wdelta("JMA", n)}});
    out.manifest["command"] = "weights-consistency";
    out.manifest["wdelta_by_n"] = by_n;
    if (!cfg.out_dir.empty()) write_outputs(out, cfg.out_dir);  // refresh manifest on disk
    return out;
}

RunOutput run_guided(const GuidedConfig& cfg) {
    cfg.data.validate();
    if (cfg.candidates.empty()) fail(Err::ConfigInvalid, "guided: empty candidate set");
    if (cfg.true_model < 0 || cfg.true_model >= static_cast<int>(cfg.candidates.size()))
        fail(Err::ConfigInvalid, "guided: true_model index out of range");
    if (cfg.reps < 1) fail(Err::ConfigInvalid, "guided: reps must be >= 1");
    const std::string started = utc_timestamp();

    // Fit the designated "true" process on the real data.
    const FittedModels true_fit = fit_all(cfg.data, {cfg.candidates[cfg.true_model]});
    const ModelFit& tm = true_fit.models[0];
    const int n = cfg.data.n();
    const int n_t = tm.ols_t.n();
    const int n_c = tm.ols_c.n();
    const int p_k = tm.ols_t.p();

    Vector fitted_values(n), truth(n);
    for (int i = 0; i < n; ++i) {
        const Vector basis = expand_basis(tm.spec, cfg.data.x.row(i).transpose());
        fitted_values(i) =
            cfg.data.t[i] == 1 ? predict(tm.ols_t, basis) : predict(tm.ols_c, basis);
        truth(i) = delta_hat(tm, cfg.data.x.row(i).transpose());
    }

    double sigma_t = 0.0, sigma_c = 0.0;  // standard deviations per arm
    if (!cfg.sigma_zero) {
        if (cfg.per_arm_sigma) {
            if (n_t - p_k < 1 || n_c - p_k < 1)
                fail(Err::ConfigInvalid, "guided: not enough degrees of freedom per arm");
            sigma_t = std::sqrt(tm.ols_t.rss / (n_t - p_k));
            sigma_c = std::sqrt(tm.ols_c.rss / (n_c - p_k));
        } else {
            if (n_t + n_c - 2 * p_k < 1)
                fail(Err::ConfigInvalid, "guided: not enough degrees of freedom");
            const double pooled =
                std::sqrt((tm.ols_t.rss + tm.ols_c.rss) / (n_t + n_c - 2 * p_k));
            sigma_t = sigma_c = pooled;
        }
    }

    std::vector<RepOutcome> outcomes(cfg.reps);
    std::vector<uint64_t> streams(cfg.reps, 0);
    std::vector<int> attempts_used(cfg.reps, 1);
    std::vector<std::string> failures;
    std::mutex failures_mu;

    parallel_for(cfg.reps, cfg.threads, [&](int rep) {
        for (int attempt = 0;; ++attempt) {
            const uint64_t stream = static_cast<uint64_t>(rep) * 8 + attempt;
            Rng rng = Rng::derive(cfg.seed, stream);
            try {
                Dataset regen = cfg.data;
                for (int i = 0; i < n; ++i) {
                    const double mult = rng.uniform(0.5, 1.5);
                    const double sd = (cfg.data.t[i] == 1 ? sigma_t : sigma_c) * mult;
                    regen.y(i) = fitted_values(i) + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
                }
                outcomes[rep] =
                    run_methods(regen, cfg.candidates, cfg.match, cfg.data.x, truth, rng);
                streams[rep] = stream;
                attempts_used[rep] = attempt + 1;
                return;
            } catch (const Error& e) {
                {
                    std::lock_guard<std::mutex> lock(failures_mu);
                    failures.push_back("rep=" + std::to_string(rep) + " attempt=" +
                                       std::to_string(attempt) + ": " + e.what());
                }
                if (attempt + 1 >= 5)
                    throw Error(e.code(), "guided replication " + std::to_string(rep) +
                                              " failed after 5 attempts: " + e.what());
            }
        }
    });

    RunOutput out;
    nlohmann::json reps_json = nlohmann::json::array();
    for (int rep = 0; rep < cfg.reps; ++rep) {
        const RepOutcome& oc = outcomes[rep];
        for (size_t mi = 0; mi < kMethods.size(); ++mi) {
            out.rows.push_back({kMethods[mi], n, 0.0, 0.0, 0, rep, oc.method_ase[mi],
                                oc.normalizer});
            out.weights.push_back({n, 0.0, 0.0, 0, rep, kMethods[mi], oc.method_w[mi],
                                   oc.method_w[mi][cfg.true_model]});
        }
        RepDetail det;
        det.n = n;
        det.rep = rep;
        det.model_ase = oc.model_ase;
        det.cv_jma = oc.cv_jma;
        det.cv_best_vertex = oc.cv_best_vertex;
        det.normalizer = oc.normalizer;
        det.normalizer_zero = oc.normalizer_zero;
        det.m_pairs = oc.m_pairs;
        det.h_used = oc.h_used;
        det.attempts = attempts_used[rep];
        out.details.push_back(std::move(det));
        reps_json.push_back(
            {{"rep", rep}, {"stream", streams[rep]}, {"attempts", attempts_used[rep]}});
    }

    out.manifest = {{"command", "guided"},
                    {"version", kVersion},
                    {"master_seed", cfg.seed},
                    {"sigma_t", sigma_t},
                    {"sigma_c", sigma_c},
                    {"replication_seeds", reps_json},
                    {"failures", failures},
                    {"started", started},
                    {"finished", utc_timestamp()}};
    if (!cfg.data_path.empty()) {
        nlohmann::json config = {{"data", cfg.data_path},
                                 {"candidates", candidates_to_json(cfg.candidates)},
                                 {"true_model", cfg.true_model},
                                 {"reps", cfg.reps},
                                 {"seed", cfg.seed},
                                 {"threads", cfg.threads},
                                 {"sigma_zero", cfg.sigma_zero},
                                 {"per_arm_sigma", cfg.per_arm_sigma}};
        const nlohmann::json matching = matching_to_json(cfg.match);
        if (!matching.empty()) config["matching"] = matching;
        if (!cfg.out_dir.empty()) config["out_dir"] = cfg.out_dir;
        out.manifest["config"] = config;
    }
    if (!cfg.out_dir.empty()) write_outputs(out, cfg.out_dir);
    return out;
}

EstimateOutput run_estimate(const EstimateConfig& cfg) {
    cfg.data.validate();
    if (cfg.candidates.empty()) fail(Err::ConfigInvalid, "estimate: empty candidate set");
    const std::string started = utc_timestamp();
    const int K = static_cast<int>(cfg.candidates.size());

    std::vector<int> dims =
        cfg.match.dims.empty() ? raw_covariates_used(cfg.candidates) : cfg.match.dims;
    const CubeTransform tr = fit_cube_transform(cfg.data.x, dims);
    const Matrix x_scaled = tr.apply(cfg.data.x);
    const double h0 =
        cfg.match.h_override > 0.0
            ? cfg.match.h_override
            : pair_maximizing_side_length(
                  x_scaled, cfg.data.t,
                  default_side_length(static_cast<double>(cfg.data.n()),
                                      static_cast<int>(dims.size())));
    Rng rng = Rng::derive(cfg.seed, 0);
    const MatchedPairSet pairs =
        adaptive_match(x_scaled, cfg.data.t, h0, cfg.match.m_min > 0 ? cfg.match.m_min : K, rng);

    const FittedModels fitted = fit_all(cfg.data, cfg.candidates);
    const JackknifeSystem sys = build_jackknife_system(cfg.data, fitted, pairs);
    const SolveResult sol = solve_weights(sys);
    const CateEstimate est = jma_estimate(fitted, sol.w, cfg.data.x);

    EstimateOutput out;
    out.estimates = est.point;
    out.weights = sol.w;
    out.cv = sol.objective;
    out.kkt_residual = sol.kkt_residual;
    out.converged = sol.converged;
    out.m_pairs = pairs.m();
    out.h_used = pairs.h;
    out.skipped_cells = pairs.skipped_cells;
    out.manifest = {{"command", "estimate"},
                    {"version", kVersion},
                    {"master_seed", cfg.seed},
                    {"n", cfg.data.n()},
                    {"k", K},
                    {"m_pairs", out.m_pairs},
                    {"h", out.h_used},
                    {"skipped_cells", out.skipped_cells},
                    {"cv", out.cv},
                    {"kkt_residual", out.kkt_residual},
                    {"converged", out.converged},
                    {"weights", to_std(sol.w.w)},
                    {"started", started},
                    {"finished", utc_timestamp()}};
    if (!cfg.data_path.empty()) {
        nlohmann::json config = {{"data", cfg.data_path},
                                 {"candidates", candidates_to_json(cfg.candidates)},
                                 {"seed", cfg.seed}};
        const nlohmann::json matching = matching_to_json(cfg.match);
        if (!matching.empty()) config["matching"] = matching;
        if (!cfg.out_dir.empty()) config["out_dir"] = cfg.out_dir;
        out.manifest["config"] = config;
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream est_file(cfg.out_dir + "/estimates.csv");
        est_file << "i,delta_hat\n";
        for (int i = 0; i < out.estimates.size(); ++i)
            est_file << i << "," << format_double(out.estimates(i)) << "\n";
        std::ofstream w_file(cfg.out_dir + "/weights.csv");
        w_file << "k,weight\n";
        for (int k = 0; k < K; ++k)
            w_file << k << "," << format_double(sol.w.w(k)) << "\n";
        std::ofstream mf(cfg.out_dir + "/manifest.json");
        mf << out.manifest.dump(2) << "\n";
    }
    return out;
}


SimulateConfig simulate_config_from_json(const nlohmann::json& j_in) {
    nlohmann::json j = j_in;
    if (j.is_object() && j.contains("config")) j = j.at("config");  // manifest reload
    if (!j.is_object()) fail(Err::ConfigInvalid, "config must be a JSON object");

    SimulateConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const nlohmann::json& v = it.value();
        try {
            if (key == "example")
                cfg.example = v.get<int>();
            else if (key == "n")
                cfg.n_list = int_list(v, "n");
            else if (key == "r2")
                cfg.r2_list = double_list(v, "r2");
            else if (key == "rho")
                cfg.rho_list = double_list(v, "rho");
            else if (key == "design")
                cfg.design_list = int_list(v, "design");
            else if (key == "reps")
                cfg.reps = v.get<int>();
            else if (key == "n_eval")
                cfg.n_eval = v.get<int>();
            else if (key == "seed")
                cfg.seed = v.get<uint64_t>();
            else if (key == "threads")
                cfg.threads = v.get<int>();
            else if (key == "c")
                cfg.c_override = v.get<double>();
            else if (key == "out_dir")
                cfg.out_dir = v.get<std::string>();
            else if (key == "calibration") {
                for (auto c = v.begin(); c != v.end(); ++c) {
                    if (c.key() == "n_mc")
                        cfg.calib_n_mc = c.value().get<long>();
                    else if (c.key() == "tol")
                        cfg.calib_tol = c.value().get<double>();
                    else
                        fail(Err::ConfigInvalid, "unknown calibration key \"" + c.key() + "\"");
                }
            } else if (key == "matching") {
                parse_matching(v, cfg.match);
            } else if (key == "candidates") {
                cfg.candidates = parse_candidates_value(v);
            } else if (key == "correct_models") {
                cfg.correct_models = int_list(v, "correct_models");
            } else {
                fail(Err::ConfigInvalid, "unknown config key \"" + key + "\"");
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(Err::ConfigInvalid, "config key \"" + key + "\": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::ConfigInvalid, "cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(Err::ConfigInvalid, std::string("config JSON parse error: ") + e.what());
    }
    return j;
}

SimulateConfig simulate_config_from_file(const std::string& path) {
    return simulate_config_from_json(load_json_file(path));
}

GuidedConfig guided_config_from_json(const nlohmann::json& j_in) {
    nlohmann::json j = j_in;
    if (j.is_object() && j.contains("config")) j = j.at("config");
    if (!j.is_object()) fail(Err::ConfigInvalid, "config must be a JSON object");
    GuidedConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const nlohmann::json& v = it.value();
        try {
            if (key == "data")
                cfg.data_path = v.get<std::string>();
            else if (key == "candidates")
                cfg.candidates = parse_candidates_value(v);
            else if (key == "true_model")
                cfg.true_model = v.get<int>();
            else if (key == "reps")
                cfg.reps = v.get<int>();
            else if (key == "seed")
                cfg.seed = v.get<uint64_t>();
            else if (key == "threads")
                cfg.threads = v.get<int>();
            else if (key == "sigma_zero")
                cfg.sigma_zero = v.get<bool>();
            else if (key == "per_arm_sigma")
                cfg.per_arm_sigma = v.get<bool>();
            else if (key == "matching")
                parse_matching(v, cfg.match);
            else if (key == "out_dir")
                cfg.out_dir = v.get<std::string>();
            else
                fail(Err::ConfigInvalid, "unknown config key \"" + key + "\"");
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(Err::ConfigInvalid, "config key \"" + key + "\": " + e.what());
        }
    }
    if (cfg.data_path.empty()) fail(Err::ConfigInvalid, "guided config requires \"data\"");
    if (cfg.candidates.empty()) fail(Err::ConfigInvalid, "guided config requires \"candidates\"");
    cfg.data = dataset_from_csv(cfg.data_path);
    return cfg;
}

GuidedConfig guided_config_from_file(const std::string& path) {
    return guided_config_from_json(load_json_file(path));
}

EstimateConfig estimate_config_from_json(const nlohmann::json& j_in) {
    nlohmann::json j = j_in;
    if (j.is_object() && j.contains("config")) j = j.at("config");
    if (!j.is_object()) fail(Err::ConfigInvalid, "config must be a JSON object");
    EstimateConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const nlohmann::json& v = it.value();
        try {
            if (key == "data")
                cfg.data_path = v.get<std::string>();
            else if (key == "candidates")
                cfg.candidates = parse_candidates_value(v);
            else if (key == "seed")
                cfg.seed = v.get<uint64_t>();
            else if (key == "matching")
                parse_matching(v, cfg.match);
            else if (key == "out_dir")
                cfg.out_dir = v.get<std::string>();
            else
                fail(Err::ConfigInvalid, "unknown config key \"" + key + "\"");
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(Err::ConfigInvalid, "config key \"" + key + "\": " + e.what());
        }
    }
    if (cfg.data_path.empty()) fail(Err::ConfigInvalid, "estimate config requires \"data\"");
    if (cfg.candidates.empty())
        fail(Err::ConfigInvalid, "estimate config requires \"candidates\"");
    cfg.data = dataset_from_csv(cfg.data_path);
    return cfg;
}

EstimateConfig estimate_config_from_file(const std::string& path) {
    return estimate_config_from_json(load_json_file(path));
}

nlohmann::json simulate_config_to_json(const SimulateConfig& cfg) {
    nlohmann::json j = {{"example", cfg.example},
                        {"n", cfg.n_list},
                        {"r2", cfg.r2_list},
                        {"rho", cfg.rho_list},
                        {"design", cfg.design_list},
                        {"reps", cfg.reps},
                        {"n_eval", cfg.n_eval},
                        {"seed", cfg.seed},
                        {"threads", cfg.threads},
                        {"calibration", {{"n_mc", cfg.calib_n_mc}, {"tol", cfg.calib_tol}}}};
    if (cfg.c_override) j["c"] = *cfg.c_override;
    if (!cfg.out_dir.empty()) j["out_dir"] = cfg.out_dir;
    const nlohmann::json matching = matching_to_json(cfg.match);
    if (!matching.empty()) j["matching"] = matching;
    if (!cfg.candidates.empty()) j["candidates"] = candidates_to_json(cfg.candidates);
    if (!cfg.correct_models.empty()) j["correct_models"] = cfg.correct_models;
    return j;
}

void write_outputs(const RunOutput& out, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ofstream results(out_dir + "/results.csv");
    results << "method,n,r2,rho,design,rep,ase,normalizer\n";
    for (const auto& row : out.rows)
        results << row.method << "," << row.n << "," << format_double(row.r2) << ","
                << format_double(row.rho) << "," << row.design << "," << row.rep << ","
                << format_double(row.ase) << "," << format_double(row.normalizer) << "\n";

    std::ofstream weights(out_dir + "/weights.csv");
    const int K = out.weights.empty() ? 0 : static_cast<int>(out.weights.front().w.size());
    weights << "n,r2,rho,design,rep,method,w_delta";
    for (int k = 1; k <= K; ++k) weights << ",w" << k;
    weights << "\n";
    for (const auto& row : out.weights) {
        weights << row.n << "," << format_double(row.r2) << "," << format_double(row.rho) << ","
                << row.design << "," << row.rep << "," << row.method << ","
                << format_double(row.w_delta);
        for (double w : row.w) weights << "," << format_double(w);
        weights << "\n";
    }

    std::ofstream manifest(out_dir + "/manifest.json");
    manifest << out.manifest.dump(2) << "\n";
}

}  // namespace jmacate

#include "commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "leadlag/bundle.hpp"
#include "leadlag/errors.hpp"
#include "leadlag/shaker.hpp"

namespace leadlag::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
    throw ConfigError("config field '" + path + "': " + why);
}

void check_known_keys(const json& obj, const std::string& path,
                      const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items()) {
        if (known.count(key) == 0) {
            throw ConfigError("config: unknown field '" +
                              (path.empty() ? key : path + "." + key) + "'");
        }
    }
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_number()) {
        bad_field(path + "." + key, "expected a number");
    }
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key, int fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_number_integer()) {
        bad_field(path + "." + key, "expected an integer");
    }
    return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_boolean()) {
        bad_field(path + "." + key, "expected a boolean");
    }
    return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_string()) {
        bad_field(path + "." + key, "expected a string");
    }
    return obj[key].get<std::string>();
}

std::optional<double> get_optional_number(const json& obj, const std::string& path,
                                          const std::string& key) {
    if (!obj.contains(key) || obj[key].is_null()) {
        return std::nullopt;
    }
    if (!obj[key].is_number()) {
        bad_field(path + "." + key, "expected a number or null");
    }
    return obj[key].get<double>();
}

void parse_phase1(const json& obj, const std::string& path, Phase1Config& cfg) {
    check_known_keys(obj, path,
                     {"rho1", "rho2", "u0", "u_max", "u_growth", "max_iter", "tol_primal",
                      "tol_obj", "w_solver"});
    cfg.rho1 = get_optional_number(obj, path, "rho1");
    cfg.rho2 = get_optional_number(obj, path, "rho2");
    cfg.u0 = get_number(obj, path, "u0", cfg.u0);
    cfg.u_max = get_number(obj, path, "u_max", cfg.u_max);
    cfg.u_growth = get_number(obj, path, "u_growth", cfg.u_growth);
    cfg.max_iter = get_int(obj, path, "max_iter", cfg.max_iter);
    cfg.tol_primal = get_number(obj, path, "tol_primal", cfg.tol_primal);
    cfg.tol_obj = get_number(obj, path, "tol_obj", cfg.tol_obj);
    const std::string solver = get_string(obj, path, "w_solver", "direct");
    if (solver == "direct") {
        cfg.w_solver = WSolver::Direct;
    } else if (solver == "gradient") {
        cfg.w_solver = WSolver::GradientDescent;
    } else {
        bad_field(path + ".w_solver", "expected 'direct' or 'gradient'");
    }
    cfg.validate();
}

void parse_phase2(const json& obj, const std::string& path, Phase2Config& cfg) {
    check_known_keys(obj, path,
                     {"rho3", "k", "u0", "u_max", "u_growth", "max_iter", "tol_primal",
                      "tol_obj", "a_update"});
    cfg.rho3 = get_optional_number(obj, path, "rho3");
    if (obj.contains("k") && !obj["k"].is_null()) {
        if (!obj["k"].is_number_integer()) {
            bad_field(path + ".k", "expected an integer or null");
        }
        cfg.k = obj["k"].get<Eigen::Index>();
    }
    cfg.u0 = get_number(obj, path, "u0", cfg.u0);
    cfg.u_max = get_number(obj, path, "u_max", cfg.u_max);
    cfg.u_growth = get_number(obj, path, "u_growth", cfg.u_growth);
    cfg.max_iter = get_int(obj, path, "max_iter", cfg.max_iter);
    cfg.tol_primal = get_number(obj, path, "tol_primal", cfg.tol_primal);
    cfg.tol_obj = get_number(obj, path, "tol_obj", cfg.tol_obj);
    const std::string mode = get_string(obj, path, "a_update", "eigen_refine");
    if (mode == "eigen_refine") {
        cfg.a_update = AUpdate::EigenInitRefine;
    } else if (mode == "eigen_only") {
        cfg.a_update = AUpdate::EigenOnly;
    } else {
        bad_field(path + ".a_update", "expected 'eigen_refine' or 'eigen_only'");
    }
    cfg.validate();
}

} // namespace

RunConfig load_config(const std::string& path, const Overrides& overrides) {
    std::ifstream file(path);
    if (!file.is_open()) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    json root;
    try {
        file >> root;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config file '" + path + "' must hold a JSON object");
    }

    RunConfig cfg;
    check_known_keys(root, "",
                     {"seed", "jobs", "output", "input", "phase1", "phase2", "shaker", "eval",
                      "synth"});

    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) {
            bad_field("seed", "expected a non-negative integer");
        }
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    cfg.jobs = get_int(root, "", "jobs", cfg.jobs);
    if (cfg.jobs < 1) {
        bad_field("jobs", "must be >= 1");
    }
    cfg.output = get_string(root, "", "output", cfg.output);

    if (root.contains("input")) {
        const json& in = root["input"];
        check_known_keys(in, "input",
                         {"panel_csv", "main_view", "transform", "fill", "standardize",
                          "window_begin", "window_end"});
        cfg.input.panel_csv = get_string(in, "input", "panel_csv", "");
        cfg.input.main_view = get_string(in, "input", "main_view", "");
        const std::string transform = get_string(in, "input", "transform", "raw");
        if (transform == "raw") {
            cfg.input.transform = ValueTransform::Raw;
        } else if (transform == "simple_return") {
            cfg.input.transform = ValueTransform::SimpleReturn;
        } else if (transform == "log_return") {
            cfg.input.transform = ValueTransform::LogReturn;
        } else {
            bad_field("input.transform", "expected 'raw', 'simple_return' or 'log_return'");
        }
        const std::string fill = get_string(in, "input", "fill", "reject");
        if (fill == "reject") {
            cfg.input.fill = FillPolicy::Reject;
        } else if (fill == "forward_fill") {
            cfg.input.fill = FillPolicy::ForwardFill;
        } else {
            bad_field("input.fill", "expected 'reject' or 'forward_fill'");
        }
        cfg.input.standardize = get_bool(in, "input", "standardize", true);
        cfg.input.window_begin = get_string(in, "input", "window_begin", "");
        cfg.input.window_end = get_string(in, "input", "window_end", "");
    }

    if (root.contains("phase1")) {
        parse_phase1(root["phase1"], "phase1", cfg.phase1);
    }
    if (root.contains("phase2")) {
        parse_phase2(root["phase2"], "phase2", cfg.phase2);
    }

    if (root.contains("shaker")) {
        const json& sh = root["shaker"];
        check_known_keys(sh, "shaker", {"r", "top", "source"});
        cfg.shaker.r = get_int(sh, "shaker", "r", cfg.shaker.r);
        if (cfg.shaker.r < 1) {
            bad_field("shaker.r", "must be >= 1");
        }
        cfg.shaker.top = get_int(sh, "shaker", "top", cfg.shaker.top);
        if (cfg.shaker.top < 1) {
            bad_field("shaker.top", "must be >= 1");
        }
        cfg.shaker.source = get_string(sh, "shaker", "source", cfg.shaker.source);
        if (cfg.shaker.source != "wtilde" && cfg.shaker.source != "what") {
            bad_field("shaker.source", "expected 'wtilde' or 'what'");
        }
    }

    if (root.contains("eval")) {
        const json& ev = root["eval"];
        check_known_keys(ev, "eval", {"truth_entity", "backtest"});
        cfg.eval.truth_entity = get_string(ev, "eval", "truth_entity", "");
        if (ev.contains("backtest")) {
            const json& bt = ev["backtest"];
            check_known_keys(bt, "eval.backtest",
                             {"p1", "p2", "wp", "q", "initial_cash", "transaction_cost",
                              "sell_mode"});
            cfg.eval.backtest.p1 = get_int(bt, "eval.backtest", "p1", cfg.eval.backtest.p1);
            cfg.eval.backtest.p2 = get_int(bt, "eval.backtest", "p2", cfg.eval.backtest.p2);
            cfg.eval.backtest.wp = get_number(bt, "eval.backtest", "wp", cfg.eval.backtest.wp);
            cfg.eval.backtest.q = get_number(bt, "eval.backtest", "q", cfg.eval.backtest.q);
            cfg.eval.backtest.initial_cash =
                get_number(bt, "eval.backtest", "initial_cash", cfg.eval.backtest.initial_cash);
            cfg.eval.backtest.transaction_cost = get_number(
                bt, "eval.backtest", "transaction_cost", cfg.eval.backtest.transaction_cost);
            const std::string sell = get_string(bt, "eval.backtest", "sell_mode", "all");
            if (sell == "all") {
                cfg.eval.backtest.sell_fraction_q = false;
            } else if (sell == "fraction") {
                cfg.eval.backtest.sell_fraction_q = true;
            } else {
                bad_field("eval.backtest.sell_mode", "expected 'all' or 'fraction'");
            }
            cfg.eval.backtest.validate();
        }
    }

    if (root.contains("synth")) {
        const json& sy = root["synth"];
        check_known_keys(sy, "synth",
                         {"entities", "views", "length", "k_star", "s_theta", "s_phi", "sigma",
                          "radius_cap", "theta_scale", "phi_scale", "burn_in", "corrupt_views"});
        cfg.synth.entities = get_int(sy, "synth", "entities", 10);
        cfg.synth.views = get_int(sy, "synth", "views", 1);
        cfg.synth.length = get_int(sy, "synth", "length", 31);
        cfg.synth.k_star = get_int(sy, "synth", "k_star", 2);
        cfg.synth.s_theta = get_int(sy, "synth", "s_theta", 0);
        cfg.synth.s_phi = get_int(sy, "synth", "s_phi", 0);
        cfg.synth.sigma = get_number(sy, "synth", "sigma", 0.1);
        cfg.synth.radius_cap = get_number(sy, "synth", "radius_cap", 0.9);
        cfg.synth.theta_scale = get_number(sy, "synth", "theta_scale", 5.0);
        cfg.synth.phi_scale = get_number(sy, "synth", "phi_scale", 5.0);
        cfg.synth.burn_in = get_int(sy, "synth", "burn_in", 100);
        if (sy.contains("corrupt_views")) {
            if (!sy["corrupt_views"].is_array()) {
                bad_field("synth.corrupt_views", "expected an array of view indices");
            }
            cfg.synth.corrupt_views.clear();
            for (const auto& v : sy["corrupt_views"]) {
                if (!v.is_number_integer()) {
                    bad_field("synth.corrupt_views", "expected integer view indices");
                }
                cfg.synth.corrupt_views.push_back(v.get<Eigen::Index>());
            }
        }
    } else {
        cfg.synth.entities = 10;
        cfg.synth.length = 31;
        cfg.synth.k_star = 2;
        cfg.synth.sigma = 0.1;
    }

    if (overrides.output) {
        cfg.output = *overrides.output;
    }
    if (overrides.seed) {
        cfg.seed = *overrides.seed;
    }
    if (overrides.jobs) {
        cfg.jobs = *overrides.jobs;
        if (cfg.jobs < 1) {
            throw ConfigError("--jobs must be >= 1");
        }
    }
    cfg.synth.seed = cfg.seed;
    return cfg;
}

std::string dump_config(const RunConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["jobs"] = cfg.jobs;
    root["output"] = cfg.output;
    root["input"] = {
        {"panel_csv", cfg.input.panel_csv},
        {"main_view", cfg.input.main_view},
        {"transform", cfg.input.transform == ValueTransform::Raw          ? "raw"
                      : cfg.input.transform == ValueTransform::SimpleReturn ? "simple_return"
                                                                            : "log_return"},
        {"fill", cfg.input.fill == FillPolicy::Reject ? "reject" : "forward_fill"},
        {"standardize", cfg.input.standardize},
        {"window_begin", cfg.input.window_begin},
        {"window_end", cfg.input.window_end},
    };
    root["phase1"] = {
        {"rho1", cfg.phase1.rho1 ? json(*cfg.phase1.rho1) : json(nullptr)},
        {"rho2", cfg.phase1.rho2 ? json(*cfg.phase1.rho2) : json(nullptr)},
        {"u0", cfg.phase1.u0},
        {"u_max", cfg.phase1.u_max},
        {"u_growth", cfg.phase1.u_growth},
        {"max_iter", cfg.phase1.max_iter},
        {"tol_primal", cfg.phase1.tol_primal},
        {"tol_obj", cfg.phase1.tol_obj},
        {"w_solver", cfg.phase1.w_solver == WSolver::Direct ? "direct" : "gradient"},
    };
    root["phase2"] = {
        {"rho3", cfg.phase2.rho3 ? json(*cfg.phase2.rho3) : json(nullptr)},
        {"k", cfg.phase2.k ? json(*cfg.phase2.k) : json(nullptr)},
        {"u0", cfg.phase2.u0},
        {"u_max", cfg.phase2.u_max},
        {"u_growth", cfg.phase2.u_growth},
        {"max_iter", cfg.phase2.max_iter},
        {"tol_primal", cfg.phase2.tol_primal},
        {"tol_obj", cfg.phase2.tol_obj},
        {"a_update",
         cfg.phase2.a_update == AUpdate::EigenInitRefine ? "eigen_refine" : "eigen_only"},
    };
    root["shaker"] = {
        {"r", cfg.shaker.r},
        {"top", cfg.shaker.top},
        {"source", cfg.shaker.source},
    };
    root["eval"] = {
        {"truth_entity", cfg.eval.truth_entity},
        {"backtest",
         {
             {"p1", cfg.eval.backtest.p1},
             {"p2", cfg.eval.backtest.p2},
             {"wp", cfg.eval.backtest.wp},
             {"q", cfg.eval.backtest.q},
             {"initial_cash", cfg.eval.backtest.initial_cash},
             {"transaction_cost", cfg.eval.backtest.transaction_cost},
             {"sell_mode", cfg.eval.backtest.sell_fraction_q ? "fraction" : "all"},
         }},
    };
    root["synth"] = {
        {"entities", cfg.synth.entities},
        {"views", cfg.synth.views},
        {"length", cfg.synth.length},
        {"k_star", cfg.synth.k_star},
        {"s_theta", cfg.synth.s_theta},
        {"s_phi", cfg.synth.s_phi},
        {"sigma", cfg.synth.sigma},
        {"radius_cap", cfg.synth.radius_cap},
        {"theta_scale", cfg.synth.theta_scale},
        {"phi_scale", cfg.synth.phi_scale},
        {"burn_in", cfg.synth.burn_in},
        {"corrupt_views", cfg.synth.corrupt_views},
    };
    return root.dump(2) + "\n";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    file << text;
    if (!file) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
    write_text(out_dir / "config_resolved.json", dump_config(cfg));
}

/// Panel restricted to the fit window, transformed and z-scored over that
/// window only.
PanelSeries prepare_fit_panel(const RunConfig& cfg) {
    if (cfg.input.panel_csv.empty()) {
        throw ConfigError("config field 'input.panel_csv': required for this command");
    }
    if (cfg.input.main_view.empty()) {
        throw ConfigError("config field 'input.main_view': required for this command");
    }
    CsvSchema schema;
    schema.transform = cfg.input.transform;
    schema.fill = cfg.input.fill;
    PanelSeries panel = ingest_csv(cfg.input.panel_csv, schema);
    panel.view_index(cfg.input.main_view); // throws if 'input.main_view' is wrong
    Eigen::Index begin = 0;
    Eigen::Index end = panel.num_timestamps() - 1;
    if (!cfg.input.window_begin.empty()) {
        begin = panel.timestamp_index(cfg.input.window_begin);
        if (begin < 0) {
            throw ConfigError("config field 'input.window_begin': timestamp '" +
                              cfg.input.window_begin + "' not in panel");
        }
    }
    if (!cfg.input.window_end.empty()) {
        end = panel.timestamp_index(cfg.input.window_end);
        if (end < 0) {
            throw ConfigError("config field 'input.window_end': timestamp '" +
                              cfg.input.window_end + "' not in panel");
        }
    }
    panel = slice_window(panel, begin, end);
    if (cfg.input.standardize) {
        panel = standardize_columns(panel);
    }
    return panel;
}

/// Raw-price panel over the eval window (no transform, no z-scoring).
PanelSeries load_price_window(const RunConfig& cfg) {
    CsvSchema schema;
    schema.fill = cfg.input.fill;
    PanelSeries panel = ingest_csv(cfg.input.panel_csv, schema);
    Eigen::Index begin = 0;
    Eigen::Index end = panel.num_timestamps() - 1;
    if (!cfg.input.window_begin.empty()) {
        begin = panel.timestamp_index(cfg.input.window_begin);
        if (begin < 0) {
            throw ConfigError("config field 'input.window_begin': timestamp '" +
                              cfg.input.window_begin + "' not in panel");
        }
    }
    if (!cfg.input.window_end.empty()) {
        end = panel.timestamp_index(cfg.input.window_end);
        if (end < 0) {
            throw ConfigError("config field 'input.window_end': timestamp '" +
                              cfg.input.window_end + "' not in panel");
        }
    }
    return slice_window(panel, begin, end);
}

ShakerReport report_from_bundle(const RunConfig& cfg, const Bundle& bundle,
                                const std::vector<std::string>& entities) {
    const std::string& view = cfg.input.main_view;
    const Eigen::MatrixXd& source = cfg.shaker.source == "what"
                                        ? bundle.phase1.view(view).w_hat
                                        : bundle.phase2.view(view).w_tilde;
    if (source.rows() != static_cast<Eigen::Index>(entities.size())) {
        throw DataError("bundle matrices do not match the panel entity count");
    }
    Eigen::MatrixXd e = accumulate_influence(source, cfg.shaker.r);
    return rank_shakers(e, cfg.shaker.top, cfg.shaker.r, cfg.shaker.source);
}

std::vector<std::string> manifest_entities(const fs::path& bundle_dir) {
    std::ifstream file(bundle_dir / "manifest.json");
    if (!file.is_open()) {
        throw DataError("bundle '" + bundle_dir.string() + "' has no manifest.json");
    }
    json manifest;
    file >> manifest;
    return manifest.at("entities").get<std::vector<std::string>>();
}

} // namespace

void run_synth(const RunConfig& cfg) {
    fs::create_directories(cfg.output);
    const fs::path out(cfg.output);
    PlantedInstance instance = generate(cfg.synth);
    export_instance(instance, (out / "panel.csv").string(), (out / "truth.json").string());
    echo_config(cfg, out);
}

void run_fit(const RunConfig& cfg) {
    const PanelSeries panel = prepare_fit_panel(cfg);
    Phase1Result phase1 =
        phase1_fit(panel, 0, panel.num_timestamps() - 1, cfg.phase1, cfg.jobs);
    Phase2Result phase2 = phase2_fit(phase1, cfg.phase2);

    fs::create_directories(cfg.output);
    const fs::path out(cfg.output);
    write_bundle(cfg.output, phase1, phase2);

    json manifest;
    manifest["entities"] = panel.entities;
    manifest["views"] = panel.views;
    manifest["main_view"] = cfg.input.main_view;
    manifest["window"] = {panel.timestamps.front(), panel.timestamps.back()};
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    echo_config(cfg, out);
}

void run_shakers(const RunConfig& cfg, const std::string& bundle_dir) {
    const fs::path bundle_path(bundle_dir.empty() ? cfg.output : bundle_dir);
    Bundle bundle = read_bundle(bundle_path.string());
    const std::vector<std::string> entities = manifest_entities(bundle_path);
    ShakerReport report = report_from_bundle(cfg, bundle, entities);

    fs::create_directories(cfg.output);
    const fs::path out(cfg.output);

    json doc;
    doc["r"] = report.r;
    doc["top"] = report.top;
    doc["source"] = report.source_matrix;
    json ranked = json::array();
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        const Eigen::Index u = report.ranking[i];
        ranked.push_back({{"rank", i + 1},
                          {"entity", entities[static_cast<std::size_t>(u)]},
                          {"f", report.f(u)}});
    }
    doc["ranking"] = std::move(ranked);
    write_text(out / "shakers.json", doc.dump(2) + "\n");

    std::string csv = "entity,f,rank\n";
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        const Eigen::Index u = report.ranking[i];
        csv += entities[static_cast<std::size_t>(u)] + "," + format_value(report.f(u)) + "," +
               std::to_string(i + 1) + "\n";
    }
    write_text(out / "shakers.csv", csv);
}

namespace {

struct EvalContext {
    Bundle bundle;
    std::vector<std::string> entities;
    PanelSeries prices; // raw main-view prices over the window
    ShakerReport report;
    Eigen::MatrixXd price_matrix;
};

EvalContext prepare_eval(const RunConfig& cfg, const std::string& bundle_dir) {
    const fs::path bundle_path(bundle_dir.empty() ? cfg.output : bundle_dir);
    EvalContext ctx;
    ctx.bundle = read_bundle(bundle_path.string());
    ctx.entities = manifest_entities(bundle_path);
    ctx.prices = load_price_window(cfg);
    if (ctx.prices.entities != ctx.entities) {
        throw DataError("panel entities do not match the fitted bundle");
    }
    ctx.report = report_from_bundle(cfg, ctx.bundle, ctx.entities);
    const Eigen::Index main_view = ctx.prices.view_index(cfg.input.main_view);
    ctx.price_matrix = ctx.prices.values[static_cast<std::size_t>(main_view)];
    return ctx;
}

json backtest_to_files(const RunConfig& cfg, const EvalContext& ctx, const fs::path& out) {
    const Eigen::MatrixXd& source = cfg.shaker.source == "what"
                                        ? ctx.bundle.phase1.view(cfg.input.main_view).w_hat
                                        : ctx.bundle.phase2.view(cfg.input.main_view).w_tilde;
    const auto pairs = screening(ctx.report, source, cfg.eval.backtest);
    BacktestResult bt = run_backtest(ctx.price_matrix, ctx.prices.timestamps, pairs,
                                     cfg.eval.backtest);

    std::string csv = "date,cash,holdings_value,total_value,action_count\n";
    int actions_total = 0;
    for (const auto& day : bt.log) {
        csv += day.date + "," + format_value(day.cash) + "," + format_value(day.holdings_value) +
               "," + format_value(day.total_value) + "," + std::to_string(day.action_count) +
               "\n";
        actions_total += day.action_count;
    }
    write_text(out / "backtest_log.csv", csv);

    json pairs_json = json::array();
    for (const auto& [shaker, entity] : pairs) {
        pairs_json.push_back({{"shaker", ctx.entities[static_cast<std::size_t>(shaker)]},
                              {"pool_entity", ctx.entities[static_cast<std::size_t>(entity)]}});
    }
    const double final_value = bt.state.equity_curve.back();
    return json{{"pairs", std::move(pairs_json)},
                {"initial_cash", cfg.eval.backtest.initial_cash},
                {"final_value", final_value},
                {"final_return", final_value / cfg.eval.backtest.initial_cash - 1.0},
                {"actions_total", actions_total}};
}

} // namespace

void run_eval(const RunConfig& cfg, const std::string& bundle_dir) {
    if (cfg.eval.truth_entity.empty()) {
        throw ConfigError("config field 'eval.truth_entity': required for eval");
    }
    EvalContext ctx = prepare_eval(cfg, bundle_dir);
    const Eigen::Index truth_idx = ctx.prices.entity_index(cfg.eval.truth_entity);
    if (truth_idx < 0) {
        throw ConfigError("config field 'eval.truth_entity': entity '" + cfg.eval.truth_entity +
                          "' not in panel");
    }

    fs::create_directories(cfg.output);
    const fs::path out(cfg.output);

    // Index level normalized to 100 at the window start.
    const Eigen::Index days = ctx.price_matrix.rows();
    const double base = ctx.price_matrix(0, truth_idx);
    if (!(base > 0.0)) {
        throw DataError("eval: truth series must be positive at the window start");
    }
    std::vector<double> index_level(static_cast<std::size_t>(days));
    for (Eigen::Index t = 0; t < days; ++t) {
        index_level[static_cast<std::size_t>(t)] = 100.0 * ctx.price_matrix(t, truth_idx) / base;
    }

    const int r = cfg.shaker.r;
    std::vector<double> predicted, observed;
    std::string trend_csv = "date,predicted,truth\n";
    for (Eigen::Index t = 1; t + r < days; ++t) {
        const double m_hat = monitor_trend(index_level[static_cast<std::size_t>(t)],
                                           ctx.price_matrix.row(t - 1).transpose(),
                                           ctx.price_matrix.row(t).transpose(), ctx.report);
        predicted.push_back(m_hat);
        observed.push_back(index_level[static_cast<std::size_t>(t + r)]);
        trend_csv += ctx.prices.timestamps[static_cast<std::size_t>(t + r)] + "," +
                     format_value(m_hat) + "," +
                     format_value(observed.back()) + "\n";
    }
    if (predicted.empty()) {
        throw DataError("eval: window too short for the diffusion horizon r");
    }
    write_text(out / "trend.csv", trend_csv);

    const double score =
        smape(TrendSeries(predicted, "predicted"), TrendSeries(observed, "truth"));

    json summary = backtest_to_files(cfg, ctx, out);
    summary["smape"] = score;
    summary["truth_entity"] = cfg.eval.truth_entity;
    summary["r"] = r;
    write_text(out / "summary.json", summary.dump(2) + "\n");
}

void run_backtest(const RunConfig& cfg, const std::string& bundle_dir) {
    EvalContext ctx = prepare_eval(cfg, bundle_dir);
    fs::create_directories(cfg.output);
    const fs::path out(cfg.output);
    json summary = backtest_to_files(cfg, ctx, out);
    write_text(out / "backtest_summary.json", summary.dump(2) + "\n");
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const ConfigError&) {
        return 2;
    } catch (const DataError&) {
        return 3;
    } catch (const SolverError&) {
        return 4;
    } catch (...) {
        return 1;
    }
}

} // namespace leadlag::cli

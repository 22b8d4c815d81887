// chp: ingest, describe, calibrate, simulate and check order-book Hawkes models.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chp/diagnostics.hpp"
#include "chp/error.hpp"
#include "chp/io/csv.hpp"
#include "chp/io/json_io.hpp"
#include "chp/io/lobster.hpp"
#include "chp/io/stats.hpp"
#include "chp/pipeline.hpp"
#include "chp/simulate.hpp"

namespace fs = std::filesystem;
using namespace chp;
using io::Json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitContract = 2;

void report_error(const char* kind, const std::string& message) {
    Json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

// Reads the sections of the config file, refusing keys it does not know.
class Config {
public:
    void load(const std::string& path) {
        doc_ = io::read_json_file(path);
        if (!doc_.is_object()) throw ParseError(path + ": config must be a JSON object");
        static const std::set<std::string> sections{"ingest", "stats", "calibrate", "simulate", "diagnose"};
        for (const auto& [k, v] : doc_.items()) {
            if (!sections.count(k)) throw ParseError(path + ": unknown config section '" + k + "'");
            if (!v.is_object()) throw ParseError(path + ": section '" + k + "' must be an object");
        }
    }

    // Section contents after checking its keys.
    Json section(const std::string& name, const std::set<std::string>& allowed) const {
        if (!doc_.contains(name)) return Json::object();
        const auto& s = doc_[name];
        for (const auto& [k, v] : s.items())
            if (!allowed.count(k)) throw ParseError("config: unknown key '" + name + "." + k + "'");
        return s;
    }

private:
    Json doc_ = Json::object();
};

template <typename T>
void take(const Json& section, const char* key, T& target) {
    if (!section.contains(key) || section[key].is_null()) return;
    try {
        target = section[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("config: key '") + key + "' has the wrong type");
    }
}

template <typename T>
void override_with(const std::optional<T>& flag, T& target) {
    if (flag) target = *flag;
}

io::ModelDocument load_model(const std::string& path) {
    try {
        return io::model_from_json(io::read_json_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::vector<EventRecord> load_classified(const std::string& path) {
    auto in = io::open_input(path);
    return io::read_classified(in, path);
}

std::vector<BookSnapshot> load_trajectory(const std::string& path) {
    auto in = io::open_input(path);
    return io::read_trajectory(in, path);
}

IntensityOptions intensity_for(const HawkesModel& m, double memory) {
    IntensityOptions o;
    bool needs_memory = false;
    for (const auto& row : m.kernels)
        for (const auto& k : row) needs_memory = needs_memory || (!k.as_exponential() && !k.is_zero());
    if (needs_memory && memory > 0.0) o.memory = memory;
    return o;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string messages, book, out, trajectory, report;
    std::optional<std::int64_t> tick;
    std::optional<double> warmup, open, close;
};

int run_ingest(const IngestArgs& a, const Config& cfg) {
    const auto sec = cfg.section("ingest", {"tick", "session_open", "session_close", "warmup", "columns"});
    io::ClassifyOptions opt;
    io::MessageColumns cols;
    take(sec, "tick", opt.tick);
    take(sec, "session_open", opt.session_open);
    take(sec, "session_close", opt.session_close);
    take(sec, "warmup", opt.warmup);
    if (sec.contains("columns")) {
        const auto& c = sec["columns"];
        take(c, "time", cols.time);
        take(c, "type", cols.type);
        take(c, "order_id", cols.order_id);
        take(c, "size", cols.size);
        take(c, "price", cols.price);
        take(c, "direction", cols.direction);
    }
    override_with(a.tick, opt.tick);
    override_with(a.warmup, opt.warmup);
    override_with(a.open, opt.session_open);
    override_with(a.close, opt.session_close);

    io::ParseReport parse_rep;
    auto min = io::open_input(a.messages);
    const auto msgs = io::parse_messages(min, parse_rep, cols, a.messages);
    std::vector<io::BookRow> rows;
    if (!a.book.empty()) {
        auto bin = io::open_input(a.book);
        rows = io::parse_orderbook(bin, a.book);
    }
    auto out = io::classify(msgs, opt, rows);
    out.report.malformed = parse_rep.malformed;
    out.report.warnings = parse_rep.warnings;
    for (const auto& w : parse_rep.warnings) std::cerr << "warning: " << w << '\n';

    io::write_file(a.out, [&](std::ostream& os) { io::write_classified(os, out.events); });
    if (!a.trajectory.empty())
        io::write_file(a.trajectory, [&](std::ostream& os) { io::write_trajectory(os, out.trajectory); });
    if (!a.report.empty()) {
        const auto& r = out.report;
        Json j{{"messages", r.messages},
               {"malformed", r.malformed},
               {"emitted", r.emitted},
               {"absorbed_executions", r.absorbed_executions},
               {"discarded", r.discarded},
               {"warnings", r.warnings}};
        io::write_json_file(a.report, j);
    }
    return 0;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
    std::string classified, trajectory, out;
    std::optional<double> session_length, tod_bin;
};

int run_stats(const StatsArgs& a, const Config& cfg) {
    const auto sec = cfg.section("stats", {"session_length", "tod_bin_seconds"});
    double session_length = kNasdaqClose - kNasdaqOpen, tod_bin = kDefaultTodBinSeconds;
    take(sec, "session_length", session_length);
    take(sec, "tod_bin_seconds", tod_bin);
    override_with(a.session_length, session_length);
    override_with(a.tod_bin, tod_bin);
    const auto events = load_classified(a.classified);
    std::vector<BookSnapshot> traj;
    if (!a.trajectory.empty()) traj = load_trajectory(a.trajectory);
    const auto st = io::empirical_stats(events, traj, session_length, tod_bin);
    io::write_json_file(a.out, io::to_json(st));
    return 0;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
    std::vector<std::string> classified, trajectories;
    std::string grid, out, report, days_csv;
    std::optional<double> spread_beta, tod_bin, session_length;
    std::optional<std::int64_t> min_events, min_windows;
};

EstimationGrid grid_from_json(const Json& j) {
    const auto& g = j.contains("grid") ? j["grid"] : j;
    static const std::set<std::string> keys{"dt_lin", "n_lin", "rho", "n_log"};
    for (const auto& [k, v] : g.items())
        if (!keys.count(k)) throw ParseError("grid: unknown key '" + k + "'");
    EstimationGrid grid;
    take(g, "dt_lin", grid.dt_lin);
    take(g, "n_lin", grid.n_lin);
    take(g, "rho", grid.rho);
    take(g, "n_log", grid.n_log);
    grid.validate();
    return grid;
}

int run_calibrate(const CalibrateArgs& a, const Config& cfg) {
    const auto sec = cfg.section("calibrate", {"grid", "tod_bin_seconds", "session_length", "session_start",
                                               "min_events", "ridge", "cv_threshold", "spread_window", "min_spread",
                                               "min_windows", "spread_beta", "size_min_samples"});
    CalibrationConfig c;
    if (sec.contains("grid")) c.grid = grid_from_json(sec["grid"]);
    take(sec, "tod_bin_seconds", c.nonparam.tod_bin_seconds);
    take(sec, "session_length", c.nonparam.session_length);
    take(sec, "session_start", c.session_start);
    take(sec, "min_events", c.nonparam.min_events);
    take(sec, "ridge", c.nonparam.ridge);
    take(sec, "cv_threshold", c.cv_threshold);
    take(sec, "spread_window", c.beta.window);
    take(sec, "min_spread", c.beta.min_spread);
    take(sec, "min_windows", c.beta.min_windows);
    take(sec, "size_min_samples", c.sizes.min_samples);
    if (sec.contains("spread_beta") && !sec["spread_beta"].is_null()) c.fixed_spread_beta = sec["spread_beta"].get<double>();
    if (!a.grid.empty()) c.grid = grid_from_json(io::read_json_file(a.grid));
    if (a.spread_beta) c.fixed_spread_beta = a.spread_beta;
    override_with(a.tod_bin, c.nonparam.tod_bin_seconds);
    override_with(a.session_length, c.nonparam.session_length);
    override_with(a.min_events, c.nonparam.min_events);
    override_with(a.min_windows, c.beta.min_windows);

    if (!a.trajectories.empty() && a.trajectories.size() != a.classified.size())
        throw std::invalid_argument("--trajectory must be given once per --classified file");
    std::vector<DayInput> days;
    for (std::size_t d = 0; d < a.classified.size(); ++d) {
        DayInput day;
        day.id = fs::path(a.classified[d]).stem().string();
        day.events = load_classified(a.classified[d]);
        if (!a.trajectories.empty()) day.trajectory = load_trajectory(a.trajectories[d]);
        days.push_back(std::move(day));
    }
    const auto res = calibrate(days, c);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

    io::ModelDocument doc{res.built.model, res.built.sizes, res.built.depth};
    io::write_json_file(a.out, io::to_json(doc));

    const auto stem = (fs::path(a.out).parent_path() / fs::path(a.out).stem()).string();
    Json rep;
    rep["days"] = res.aggregate.days;
    if (res.spread_regression) {
        Json groups = Json::array();
        for (const auto& g : res.spread_regression->groups)
            groups.push_back({{"spread", g.spread}, {"windows", g.windows}, {"arrivals", g.arrivals}});
        rep["spread_beta"] = {{"value", res.spread_regression->beta},
                              {"intercept", res.spread_regression->intercept},
                              {"r_squared", res.spread_regression->r_squared},
                              {"groups", groups}};
    } else {
        rep["spread_beta"] = {{"value", res.built.model.spread_beta}, {"fixed", true}};
    }
    Json params = Json::array();
    std::size_t flagged = 0;
    for (const auto& p : res.aggregate.stationarity) {
        params.push_back({{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"cv", std::isfinite(p.cv) ? Json(p.cv) : Json()},
                          {"flagged", p.flagged}});
        flagged += p.flagged ? 1 : 0;
    }
    rep["stationarity"] = params;
    rep["flagged"] = flagged;
    Json fits = Json::array();
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            const auto& r = res.built.fit.report[i][j];
            fits.push_back({{"target", name(event_type_from_index(i))},
                            {"source", name(event_type_from_index(j))},
                            {"chosen", family_name(r.chosen)},
                            {"fallback", r.fallback},
                            {"aic_exponential", r.exponential.aic},
                            {"aic_power_law", r.power_law.aic}});
        }
    }
    rep["kernel_fits"] = fits;
    rep["spectral_radius"] = res.built.spectral_radius;
    rep["simulatable"] = res.built.simulatable;
    rep["warnings"] = res.warnings;
    io::write_json_file(a.report.empty() ? stem + ".report.json" : a.report, rep);

    io::write_file(a.days_csv.empty() ? stem + ".days.csv" : a.days_csv, [&](std::ostream& os) {
        os << "day,event_type,count,baseline_mean,self_norm,spread_beta\n";
        for (const auto& d : res.days) {
            for (std::size_t i = 0; i < kNumEventTypes; ++i) {
                double mu = 0.0;
                for (double b : d.estimate.baselines[i]) mu += b;
                mu /= static_cast<double>(d.estimate.num_bins());
                os << d.estimate.day_id << ',' << name(event_type_from_index(i)) << ',' << d.estimate.counts[i] << ','
                   << io::format_double(mu) << ',' << io::format_double(d.estimate.norm(i, i)) << ','
                   << (d.spread_beta ? io::format_double(*d.spread_beta) : std::string()) << '\n';
            }
        }
    });
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string model, out, trajectory, initial_book, messages, book;
    std::optional<double> horizon, memory;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a, const Config& cfg) {
    const auto sec = cfg.section("simulate", {"horizon", "seed", "memory", "staleness", "initial_bid",
                                              "initial_spread", "initial_depth", "tick"});
    double horizon = -1.0, memory = 300.0;
    std::uint64_t seed = 1;
    SimulationOptions sim;
    std::int64_t initial_bid = 10000, initial_spread = 1, initial_depth = 0, tick = 100;
    take(sec, "horizon", horizon);
    take(sec, "seed", seed);
    take(sec, "memory", memory);
    take(sec, "staleness", sim.staleness);
    take(sec, "initial_bid", initial_bid);
    take(sec, "initial_spread", initial_spread);
    take(sec, "initial_depth", initial_depth);
    take(sec, "tick", tick);
    override_with(a.horizon, horizon);
    override_with(a.seed, seed);
    override_with(a.memory, memory);

    const auto doc = load_model(a.model);
    if (horizon < 0.0) horizon = doc.model.session_length();
    PerEvent<SizeDistribution> sizes{};
    if (doc.sizes) {
        sizes = *doc.sizes;
    } else {
        std::cerr << "warning: model carries no size distributions; all orders have size 1\n";
    }
    const DepthDistribution depth = doc.depth.value_or(DepthDistribution());
    BookState initial;
    if (!a.initial_book.empty()) {
        initial = io::book_from_json(io::read_json_file(a.initial_book));
    } else {
        const auto d = initial_depth > 0 ? initial_depth : std::max<std::int64_t>(1, std::llround(depth.mean()));
        initial = BookState::make(initial_bid, initial_spread, d);
    }
    sim.intensity = intensity_for(doc.model, memory);

    std::ofstream events_out(a.out);
    if (!events_out) throw std::runtime_error("cannot write " + a.out);
    events_out << io::kClassifiedHeader << '\n';
    std::ofstream traj_out, msg_out, book_out;
    if (!a.trajectory.empty()) {
        traj_out.open(a.trajectory);
        if (!traj_out) throw std::runtime_error("cannot write " + a.trajectory);
        traj_out << io::kTrajectoryHeader << '\n';
    }
    std::optional<io::LobsterWriter> lobster;
    if (!a.messages.empty()) {
        msg_out.open(a.messages);
        if (!msg_out) throw std::runtime_error("cannot write " + a.messages);
        if (!a.book.empty()) {
            book_out.open(a.book);
            if (!book_out) throw std::runtime_error("cannot write " + a.book);
        }
        lobster.emplace(msg_out, a.book.empty() ? nullptr : &book_out, initial, doc.model.session_start, tick);
    }
    simulate_stream(
        doc.model, sizes, depth, initial, horizon, seed,
        [&](const EventRecord& ev, const ApplyResult& res, const BookState& book) {
            io::write_classified_row(events_out, ev);
            if (traj_out.is_open()) io::write_trajectory_row(traj_out, BookSnapshot::of(ev, book));
            if (lobster) (*lobster)(ev, res, book);
        },
        sim);
    if (!events_out) throw std::runtime_error("error writing " + a.out);
    return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::string model, classified, trajectory, out;
    std::optional<double> memory;
    std::optional<std::size_t> quantiles;
};

int run_diagnose(const DiagnoseArgs& a, const Config& cfg) {
    const auto sec = cfg.section("diagnose", {"memory", "n_quantiles", "hoeffding_window"});
    double memory = 300.0;
    DiagnosticsOptions opt;
    take(sec, "memory", memory);
    take(sec, "n_quantiles", opt.n_quantiles);
    take(sec, "hoeffding_window", opt.hoeffding_window);
    override_with(a.memory, memory);
    override_with(a.quantiles, opt.n_quantiles);

    const auto doc = load_model(a.model);
    const auto events = load_classified(a.classified);
    std::vector<BookView> views;
    if (!a.trajectory.empty()) {
        const auto traj = load_trajectory(a.trajectory);
        BookView first;
        if (!events.empty()) first.spread_ticks = std::max(events.front().spread_ticks, 0);
        first.nonempty.fill(true);
        views = views_from_trajectory(events, traj, first);
    } else {
        views = views_from_events(events);
    }
    opt.intensity = intensity_for(doc.model, memory);
    const auto rep = diagnose(events, doc.model, views, opt);

    fs::create_directories(a.out);
    const auto dir = fs::path(a.out);
    io::write_file((dir / "residuals.csv").string(), [&](std::ostream& os) {
        os << "event_type,tau\n";
        for (std::size_t i = 0; i < kNumEventTypes; ++i)
            for (double t : rep.residuals.tau[i]) os << name(event_type_from_index(i)) << ',' << io::format_double(t) << '\n';
    });
    io::write_file((dir / "qq.csv").string(), [&](std::ostream& os) {
        os << "event_type,theoretical_q,empirical_q\n";
        for (std::size_t i = 0; i < kNumEventTypes; ++i)
            for (const auto& [th, em] : rep.qq[i])
                os << name(event_type_from_index(i)) << ',' << io::format_double(th) << ',' << io::format_double(em)
                   << '\n';
    });
    Json dims = Json::object();
    std::size_t passing = 0, tested = 0;
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        const auto& d = rep.dims[i];
        Json j{{"residuals", d.residuals}};
        if (d.residuals > 0) {
            j["mean"] = d.mean_residual;
            j["ks_statistic"] = d.ks.statistic;
            j["ks_p_value"] = d.ks.p_value;
            j["passes_5pct"] = d.ks.p_value > 0.05;
            ++tested;
            passing += d.ks.p_value > 0.05 ? 1 : 0;
        }
        dims[std::string(name(event_type_from_index(i)))] = j;
    }
    Json hoeff = Json::array();
    for (const auto& h : rep.hoeffding)
        hoeff.push_back({{"event_type", name(h.type)},
                         {"pairs", h.result.n},
                         {"d", h.result.d},
                         {"null_sd", h.result.null_sd},
                         {"window", opt.hoeffding_window}});
    io::write_json_file((dir / "summary.json").string(),
                        Json{{"dimensions", dims}, {"ks_passing", passing}, {"ks_tested", tested}, {"hoeffding", hoeff}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compound Hawkes limit order book simulator and calibration toolkit", "chp"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "classify a LOBSTER message file");
    ingest->add_option("--messages", ia.messages, "message CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--book", ia.book, "order-book CSV")->check(CLI::ExistingFile);
    ingest->add_option("--out", ia.out, "classified event CSV")->required();
    ingest->add_option("--trajectory", ia.trajectory, "book trajectory CSV output");
    ingest->add_option("--report", ia.report, "discard report JSON output");
    ingest->add_option("--tick", ia.tick, "price units per tick");
    ingest->add_option("--warmup", ia.warmup, "seconds after the open excluded from output");
    ingest->add_option("--session-open", ia.open, "seconds after midnight");
    ingest->add_option("--session-close", ia.close, "seconds after midnight");

    StatsArgs sa;
    auto* stats = app.add_subcommand("stats", "empirical statistics of a classified stream");
    stats->add_option("--classified", sa.classified, "classified event CSV")->required()->check(CLI::ExistingFile);
    stats->add_option("--trajectory", sa.trajectory, "book trajectory CSV")->check(CLI::ExistingFile);
    stats->add_option("--out", sa.out, "report JSON")->required();
    stats->add_option("--session-length", sa.session_length, "seconds");
    stats->add_option("--tod-bin", sa.tod_bin, "time-of-day bin width in seconds");

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "fit a model to several days of classified events");
    cal->add_option("--classified", ca.classified, "classified event CSV, one per day")
        ->required()
        ->check(CLI::ExistingFile);
    cal->add_option("--trajectory", ca.trajectories, "book trajectory CSV, one per day")->check(CLI::ExistingFile);
    cal->add_option("--grid", ca.grid, "lag grid JSON")->check(CLI::ExistingFile);
    cal->add_option("--out", ca.out, "model JSON")->required();
    cal->add_option("--report", ca.report, "stationarity report JSON (default <out>.report.json)");
    cal->add_option("--days", ca.days_csv, "per-day diagnostics CSV (default <out>.days.csv)");
    cal->add_option("--spread-beta", ca.spread_beta, "fix the spread exponent instead of estimating it");
    cal->add_option("--tod-bin", ca.tod_bin, "time-of-day bin width in seconds");
    cal->add_option("--session-length", ca.session_length, "seconds");
    cal->add_option("--min-events", ca.min_events, "minimum events per type and day");
    cal->add_option("--min-windows", ca.min_windows, "minimum windows per spread group");

    SimulateArgs sia;
    auto* sim = app.add_subcommand("simulate", "simulate a session from a model");
    sim->add_option("--model", sia.model, "model JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--horizon", sia.horizon, "seconds (default: whole session)");
    sim->add_option("--seed", sia.seed, "random seed");
    sim->add_option("--out", sia.out, "event CSV")->required();
    sim->add_option("--trajectory", sia.trajectory, "book trajectory CSV");
    sim->add_option("--initial-book", sia.initial_book, "book snapshot JSON")->check(CLI::ExistingFile);
    sim->add_option("--memory", sia.memory, "history horizon for non-exponential kernels, seconds");
    sim->add_option("--messages", sia.messages, "also write a LOBSTER message file");
    sim->add_option("--book", sia.book, "also write a LOBSTER order-book file (with --messages)");

    DiagnoseArgs da;
    auto* diag = app.add_subcommand("diagnose", "goodness-of-fit diagnostics of a model on classified events");
    diag->add_option("--model", da.model, "model JSON")->required()->check(CLI::ExistingFile);
    diag->add_option("--classified", da.classified, "classified event CSV")->required()->check(CLI::ExistingFile);
    diag->add_option("--trajectory", da.trajectory, "book trajectory CSV")->check(CLI::ExistingFile);
    diag->add_option("--out", da.out, "output directory")->required();
    diag->add_option("--memory", da.memory, "history horizon for non-exponential kernels, seconds");
    diag->add_option("--quantiles", da.quantiles, "number of Q-Q points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", e.what());
        return kExitUsage;
    }

    try {
        Config cfg;
        if (!config_path.empty()) cfg.load(config_path);
        if (*ingest) return run_ingest(ia, cfg);
        if (*stats) return run_stats(sa, cfg);
        if (*cal) return run_calibrate(ca, cfg);
        if (*sim) return run_simulate(sia, cfg);
        if (*diag) return run_diagnose(da, cfg);
    } catch (const ContractViolation& e) {
        report_error("contract_violation", e.what());
        return kExitContract;
    } catch (const RangeError& e) {
        report_error("contract_violation", e.what());
        return kExitContract;
    } catch (const ParseError& e) {
        report_error("schema_violation", e.what());
        return kExitContract;
    } catch (const std::exception& e) {
        report_error("io_error", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}

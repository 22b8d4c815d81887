// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "chp/pipeline.hpp"
#include "test_models.hpp"

using namespace chp;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Spread safety ---------------------------------------------------------

void spread_safety() {
    auto m = testing_models::spread_market(0.5);
    for (auto& row : m.baselines)
        for (auto& v : row) v *= 6.0;
    for (std::size_t i = 0; i < kNumEventTypes; ++i)
        for (std::size_t j = 0; j < kNumEventTypes; ++j)
            m.kernels[i][j] = Kernel::exponential((i == j ? 0.3 : ((i + j) % 5 == 0 ? -0.05 : 0.02)) * 20.0, 20.0);
    const DepthDistribution depth({100, 200, 300}, {1.0, 1.0, 1.0});
    SimulationOptions so;
    so.max_events = 1'000'000;

    const auto t0 = std::chrono::steady_clock::now();
    std::int64_t short_runs = 0, negative = 0, locked_in_spread = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto st = simulate_stream(
            m, testing_models::spiked_sizes(), depth, BookState::make(10000, 2, 300), m.session_length(), seed,
            [&](const EventRecord& ev, const ApplyResult&, const BookState& b) {
                if (ev.spread_ticks < 0 || b.spread_ticks() < 0) ++negative;
                if (is_in_spread(ev.type) && ev.spread_ticks <= 0) ++locked_in_spread;
            },
            so);
        total += st.accepted;
        if (st.accepted < so.max_events) ++short_runs;
    }
    const double secs = seconds_since(t0);
    report("spread_safety", negative == 0 && locked_in_spread == 0 && short_runs == 0 && secs <= 300.0,
           fmt("%lld events over 100 seeds, %lld short runs, %lld negative spreads, %lld in-spread at spread 0, %.1fs",
               static_cast<long long>(total), static_cast<long long>(short_runs), static_cast<long long>(negative),
               static_cast<long long>(locked_in_spread), secs));
}

// Intensity non-negativity ----------------------------------------------

void intensity_non_negative() {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u;
    auto m = HawkesModel::poisson({}, 0.7);
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t b = 0; b < m.num_bins(); ++b) m.baselines[i][b] = 0.05 + 0.5 * u(gen);
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            const double sign = (i + 2 * j) % 3 == 0 ? 1.0 : -1.0;
            switch ((i + j) % 3) {
                case 0: m.kernels[i][j] = Kernel::exponential(sign * 40.0, 5.0); break;
                case 1: m.kernels[i][j] = Kernel::power_law(sign * 10.0, 0.05, 2.2); break;
                default:
                    m.kernels[i][j] = Kernel::nonparametric({0.0, 0.05, 0.5, 2.0}, {sign * 30.0, -2.0, sign * 0.5});
            }
        }
    }
    std::int64_t probes = 0, negative = 0, raw_negative = 0;
    std::vector<EventRecord> history;
    for (; probes < 100'000; ++probes) {
        const double t = 1.0 + 3000.0 * u(gen);
        const auto n = static_cast<std::size_t>(u(gen) * 40.0);
        history.clear();
        for (std::size_t k = 0; k < n; ++k) {
            EventRecord ev;
            ev.time = t - 5.0 * u(gen) * u(gen);
            ev.type = event_type_from_index(static_cast<std::size_t>(u(gen) * kNumEventTypes) % kNumEventTypes);
            history.push_back(ev);
        }
        std::sort(history.begin(), history.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
        BookView view;
        view.spread_ticks = static_cast<std::int64_t>(u(gen) * 8.0);
        for (auto& q : view.nonempty) q = u(gen) < 0.8;
        for (auto e : kAllEventTypes) {
            if (raw_intensity(e, t, history, m) < 0.0) ++raw_negative;
            if (!(effective_intensity(e, t, history, m, view) >= 0.0)) ++negative;
        }
    }
    report("intensity_non_negative", negative == 0 && raw_negative > 0,
           fmt("%lld probes x 12 types, %lld negative effective values, %lld negative raw values floored",
               static_cast<long long>(probes), static_cast<long long>(negative), static_cast<long long>(raw_negative)));
}

// One-dimensional oracle ------------------------------------------------

// Fixed-step reference: per step of dt an event occurs with probability
// lambda * dt, with the exponential excitation decayed exactly between steps.
double brute_force_count(double mu, double alpha, double beta, double horizon, double dt, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u;
    const double decay = std::exp(-beta * dt);
    const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
    double excitation = 0.0;
    double count = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
        if (u(gen) < (mu + excitation) * dt) {
            count += 1.0;
            excitation += alpha;
        }
        excitation *= decay;
    }
    return count;
}

void one_dimensional_oracle() {
    const double mu = 1.0, alpha = 1.0, beta = 2.0;
    const auto m = testing_models::single_type(EventType::LoAskPlus1, mu, Kernel::exponential(alpha, beta));
    const auto book = BookState::make(10000, 2, 5);
    const DepthDistribution depth;

    const double horizon = 1000.0;
    const int seeds = 1000;
    double s = 0.0, ss = 0.0;
    for (int k = 0; k < seeds; ++k) {
        const double n = static_cast<double>(
            simulate_stream(m, {}, depth, book, horizon, 500 + k, [](auto&&...) {}).accepted);
        s += n;
        ss += n * n;
    }
    const double mean = s / seeds;
    const double se = std::sqrt((ss - seeds * mean * mean) / (seeds - 1) / seeds);
    const double expected = mu * horizon / (1.0 - alpha / beta);
    const bool mean_ok = std::abs(mean - expected) <= 3.0 * se;

    const double short_horizon = 100.0;
    std::vector<double> ogata, brute;
    std::mt19937_64 gen(77);
    for (int k = 0; k < seeds; ++k) {
        ogata.push_back(static_cast<double>(
            simulate_stream(m, {}, depth, book, short_horizon, 9000 + k, [](auto&&...) {}).accepted));
        brute.push_back(brute_force_count(mu, alpha, beta, short_horizon, 1e-4, gen));
    }
    const auto ks = ks_two_sample(ogata, brute);
    report("one_dimensional_oracle", mean_ok && ks.p_value > 0.01,
           fmt("mean count %.2f vs %.2f (se %.2f); two-sample KS vs dt=1e-4 reference D=%.4f p=%.3f", mean, expected,
               se, ks.statistic, ks.p_value));
}

// Calibration round trip ------------------------------------------------

// U-shaped baselines; power-law self excitation, mixed exponential and
// power-law cross terms with inhibitory entries. The in-spread rows carry no
// kernels (the spread regression assumes their arrivals are history-free) and
// share one row, as the fitted model's do.
HawkesModel round_trip_truth() {
    HawkesModel m = HawkesModel::poisson({}, 0.5);
    const auto nb = m.num_bins();
    const auto a = index(EventType::LoAskMinus1), b = index(EventType::LoBidPlus1);
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        const double level =
            is_in_spread(event_type_from_index(i)) ? 0.12 : 0.10 + 0.01 * static_cast<double>(i % 4);
        for (std::size_t k = 0; k < nb; ++k) {
            const double x = (static_cast<double>(k) - 6.0) / 6.0;
            m.baselines[i][k] = level * (0.6 + 0.9 * x * x);
        }
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            if (i == a)
                m.kernels[i][j] = Kernel::zero();
            else if (i == j)
                m.kernels[i][j] = Kernel::power_law(5.0, 0.05, 2.0);  // norm 0.25
            else if ((i + j) % 5 == 0)
                m.kernels[i][j] = Kernel::exponential(-0.12, 4.0);  // norm -0.03
            else if ((7 * i + j) % 3 == 0)
                m.kernels[i][j] = Kernel::power_law(0.75, 0.1, 2.5);  // norm 0.05
            else
                m.kernels[i][j] = Kernel::exponential(0.18, 6.0);  // norm 0.03
        }
    }
    m.baselines[b] = m.baselines[a];
    m.kernels[b] = m.kernels[a];
    return m;
}

constexpr double kTruthMemory = 60.0;

DayInput simulate_truth_day(const HawkesModel& m, std::uint64_t seed, double baseline_scale = 1.0) {
    HawkesModel model = m;
    for (auto& row : model.baselines)
        for (auto& v : row) v *= baseline_scale;
    SimulationOptions so;
    so.intensity.memory = kTruthMemory;
    DayInput day;
    day.id = "d" + std::to_string(seed);
    simulate_stream(model, testing_models::spiked_sizes(), DepthDistribution({100, 200, 300, 500}, {0.3, 0.3, 0.2, 0.2}),
                    BookState::make(10000, 1, 300), model.session_length(), seed,
                    [&](const EventRecord& ev, const ApplyResult&, const BookState& book) {
                        day.events.push_back(ev);
                        day.trajectory.push_back(BookSnapshot::of(ev, book));
                    },
                    so);
    return day;
}

void calibration_round_trip() {
    const auto truth = round_trip_truth();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<DayInput> days;
    for (std::uint64_t d = 0; d < 50; ++d) days.push_back(simulate_truth_day(truth, 1000 + d));
    const double sim_secs = seconds_since(t0);

    CalibrationConfig cfg;
    cfg.grid = {0.01, 10, 1.5, 12};
    const auto out = calibrate(days, cfg);
    const double beta = out.spread_regression->beta;

    // Cell averages of the true kernels on the estimation grid.
    const auto& est = out.aggregate.mean;
    double se = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < kNumEventTypes; ++i)
        for (std::size_t j = 0; j < kNumEventTypes; ++j)
            for (std::size_t c = 0; c < est.num_cells(); ++c) {
                const double w = est.edges[c + 1] - est.edges[c];
                const double d = est.values[i][j][c] - truth.kernels[i][j].integral(est.edges[c], est.edges[c + 1]) / w;
                se += d * d;
                ++cells;
            }
    const double mse = se / static_cast<double>(cells);

    // Edges of the session above its middle for every type.
    std::size_t u_ok = 0;
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        const auto& b = out.built.model.baselines[i];
        const std::size_t mid = b.size() / 2;
        u_ok += b.front() > b[mid] && b.back() > b[mid] ? 1 : 0;
    }

    // Family selection scored where the truth has a family, i.e. nonzero entries.
    std::size_t scored = 0, matched = 0;
    for (std::size_t i = 0; i < kNumEventTypes; ++i)
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            if (truth.kernels[i][j].norm() == 0.0) continue;
            ++scored;
            matched += out.built.fit.report[i][j].chosen == truth.kernels[i][j].family() ? 1 : 0;
        }
    const double aic = static_cast<double>(matched) / static_cast<double>(scored);

    report("calibration_round_trip",
           mse <= 1e-3 && std::abs(beta - 0.5) <= 0.05 && u_ok == kNumEventTypes && aic >= 0.9,
           fmt("50 days (%.0fs to simulate); kernel MSE %.2e; beta %.3f (R2 %.3f); U-shape %zu/12; "
               "AIC family %zu/%zu (%.1f%%)",
               sim_secs, mse, beta, out.spread_regression->r_squared, u_ok, matched, scored, 100.0 * aic));
}

// Residual self-consistency ---------------------------------------------

void residual_self_consistency() {
    const auto truth = round_trip_truth();
    const double scale = 2.5;
    const auto day = simulate_truth_day(truth, 4242, scale);
    HawkesModel model = truth;
    for (auto& row : model.baselines)
        for (auto& v : row) v *= scale;
    DiagnosticsOptions opt;
    opt.intensity.memory = kTruthMemory;
    const auto views = views_from_trajectory(day.events, day.trajectory, BookView::of(BookState::make(10000, 1, 300)));
    const auto rep = diagnose(day.events, model, views, opt);
    int passing = 0;
    std::size_t fewest = day.events.size();
    std::string ps;
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        passing += rep.dims[i].ks.p_value > 0.05 ? 1 : 0;
        fewest = std::min(fewest, rep.dims[i].residuals);
        ps += fmt(" %.2f", rep.dims[i].ks.p_value);
    }
    report("residual_self_consistency", passing >= 10,
           fmt("%d/12 dimensions pass KS at 5%% (>= %zu residuals each); p-values:%s", passing, fewest, ps.c_str()));
}

// Size model ------------------------------------------------------------

void size_model() {
    const auto truth = testing_models::spiked(0.02);
    const std::size_t n = 100'000;
    Rng rng(31);
    std::vector<std::int64_t> xs(n);
    for (auto& x : xs) x = truth.sample(rng);

    const auto fit = fit_sizes(xs);
    double spike_err = 0.0;
    for (std::size_t s = 0; s < truth.spike_weights.size(); ++s)
        spike_err = std::max(spike_err, std::abs(fit.dist.spike_weights[s] - truth.spike_weights[s]));
    const double p_err = std::abs(fit.dist.geom_p - truth.geom_p);

    // Sampler against pmf: one cell per size until the expected count drops
    // below five, merging consecutive sizes, then one tail cell.
    const auto h = make_histogram(xs);
    double chi2 = 0.0, covered = 0.0, pool_o = 0.0, pool_e = 0.0;
    std::int64_t counted = 0;
    std::size_t cells = 0;
    for (std::int64_t k = 1; k <= 2000; ++k) {
        const auto it = h.find(k);
        const double o = it == h.end() ? 0.0 : static_cast<double>(it->second);
        pool_o += o;
        pool_e += n * truth.pmf(k);
        covered += truth.pmf(k);
        counted += static_cast<std::int64_t>(o);
        if (pool_e < 5.0) continue;
        chi2 += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
        ++cells;
        pool_o = pool_e = 0.0;
    }
    pool_o += static_cast<double>(static_cast<std::int64_t>(n) - counted);
    pool_e += n * (1.0 - covered);
    if (pool_e > 0.0) {
        chi2 += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
        ++cells;
    }
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));

    report("size_model", fit.converged && spike_err <= 0.01 && p_err <= 0.002 && p > 0.01,
           fmt("max spike weight error %.4f, geom_p error %.5f; sampler chi2 %.1f on %zu cells, p=%.3f", spike_err,
               p_err, chi2, cells, p));
}

// Hoeffding -------------------------------------------------------------

void hoeffding() {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u;
    std::vector<double> x(100'000), y(100'000);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = u(gen);
        y[k] = u(gen);
    }
    const auto ind = hoeffding_independence(x, y);
    const auto dep = hoeffding_independence(x, x);
    report("hoeffding", std::abs(ind.d) <= 3.0 * ind.null_sd && dep.d > 0.1,
           fmt("independent D=%.2e (null sd %.2e); Y=X D=%.3f", ind.d, ind.null_sd, dep.d));
}

// Spread exponent -------------------------------------------------------

void spread_exponent() {
    const auto m = testing_models::spread_market(0.41);
    SpreadBetaAccumulator acc;
    for (std::uint64_t d = 0; d < 5; ++d) {
        std::vector<EventRecord> events;
        simulate_stream(m, testing_models::unit_sizes(), testing_models::market_depth(), BookState::make(10000, 3, 5),
                        m.session_length(), 700 + d,
                        [&](const EventRecord& ev, const ApplyResult&, const BookState&) { events.push_back(ev); });
        acc.add_day(events);
    }
    const auto r = acc.result();
    report("spread_exponent", std::abs(r.beta - 0.41) <= 0.05 && r.r_squared >= 0.8,
           fmt("beta %.3f, R2 %.3f over %zu spread groups", r.beta, r.r_squared, r.groups.size()));
}

// Pipeline determinism --------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string("'") + CHP_CLI_PATH + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool pipeline_run(const fs::path& dir) {
    const fs::path fixtures = CHP_FIXTURE_DIR;
    const std::string cfg = "--config '" + (fixtures / "config.json").string() + "' ";
    const std::string model = "'" + (fixtures / "model.json").string() + "'";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };
    bool ok = true;
    for (int d = 1; d <= 2; ++d) {
        const auto ds = std::to_string(d);
        ok = ok && run_cli(cfg + "simulate --model " + model + " --seed " + ds + " --out " + p("c" + ds + ".csv") +
                           " --trajectory " + p("t" + ds + ".csv")) == 0;
    }
    ok = ok && run_cli(cfg + "calibrate --classified " + p("c1.csv") + " " + p("c2.csv") + " --trajectory " +
                       p("t1.csv") + " " + p("t2.csv") + " --out " + p("fit.json")) == 0;
    ok = ok && run_cli(cfg + "diagnose --model " + model + " --classified " + p("c1.csv") + " --trajectory " +
                       p("t1.csv") + " --out " + p("diag")) == 0;
    return ok;
}

void pipeline_determinism() {
    const auto root = fs::temp_directory_path() / "chp_acceptance_determinism";
    const bool ran = pipeline_run(root / "a") && pipeline_run(root / "b");
    std::size_t files = 0, differing = 0;
    if (ran) {
        for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
            if (!e.is_regular_file()) continue;
            ++files;
            const auto other = root / "b" / fs::relative(e.path(), root / "a");
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
        }
    }
    fs::remove_all(root);
    report("pipeline_determinism", ran && files > 0 && differing == 0,
           fmt("%s; %zu output files compared, %zu differ", ran ? "all commands succeeded" : "a command failed",
               files, differing));
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void()>>> criteria{
        {"spread_safety", spread_safety},
        {"intensity_non_negative", intensity_non_negative},
        {"one_dimensional_oracle", one_dimensional_oracle},
        {"calibration_round_trip", calibration_round_trip},
        {"residual_self_consistency", residual_self_consistency},
        {"size_model", size_model},
        {"hoeffding", hoeffding},
        {"spread_exponent", spread_exponent},
        {"pipeline_determinism", pipeline_determinism},
    };
    for (const auto& [name, fn] : criteria) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(name, false, std::string("threw: ") + e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}

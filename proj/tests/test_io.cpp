#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "chp/io/csv.hpp"
#include "chp/io/json_io.hpp"
#include "chp/io/lobster.hpp"
#include "chp/io/stats.hpp"
#include "chp/simulate.hpp"
#include "test_models.hpp"

using namespace chp;
using namespace chp::io;

namespace {

std::vector<RawMessage> parse(const std::string& text, ParseReport& rep) {
    std::istringstream in(text);
    return parse_messages(in, rep);
}

ClassifyOptions no_warmup() {
    ClassifyOptions o;
    o.warmup = 0.0;
    return o;
}

// Two resting orders per side around a 100.00 / 100.02 quote, placed before the open.
const char* kSeed =
    "34000,1,1,100,1000200,-1\n"
    "34000,1,2,100,1000300,-1\n"
    "34000,1,3,100,1000000,1\n"
    "34000,1,4,100,999900,1\n";

}  // namespace

TEST(Json, ModelRoundTrip) {
    auto m = testing_models::mixed_power_law();
    m.kernels[0][1] = Kernel::nonparametric({0.0, 0.1, 1.0}, {2.0, -0.25});
    m.kernels[2][3] = Kernel::exponential(1.5, 3.0);
    m.spread_beta = 0.41;
    ModelDocument doc{m, testing_models::spiked_sizes(), testing_models::market_depth()};
    const auto text = to_json(doc).dump();
    const auto back = model_from_json(Json::parse(text));
    EXPECT_EQ(to_json(back).dump(), text);
    EXPECT_EQ(back.model.baselines, m.baselines);
    EXPECT_DOUBLE_EQ(back.model.spread_beta, 0.41);
    ASSERT_TRUE(back.model.kernels[0][1].as_nonparametric());
    EXPECT_EQ(back.model.kernels[0][1].as_nonparametric()->values, (std::vector<double>{2.0, -0.25}));
    ASSERT_TRUE(back.sizes && back.depth);
    EXPECT_EQ((*back.sizes)[index(EventType::LoAsk0)].spike_weights,
              testing_models::spiked_sizes()[index(EventType::LoAsk0)].spike_weights);
    EXPECT_EQ(back.depth->values(), testing_models::market_depth().values());
}

TEST(Json, RequiredFieldsOnly) {
    auto j = to_json(HawkesModel::poisson({}, 0.5));
    j.erase("session_end");
    const auto doc = model_from_json(j);
    EXPECT_DOUBLE_EQ(doc.model.session_length(), 23400.0);
    EXPECT_FALSE(doc.sizes.has_value());
}

TEST(Json, SchemaViolations) {
    auto j = to_json(HawkesModel::poisson({}, 0.5));
    auto missing = j;
    missing.erase("spread_beta");
    EXPECT_THROW(model_from_json(missing), ParseError);
    auto bad_family = j;
    bad_family["kernels"][0][0]["family"] = "gaussian";
    EXPECT_THROW(model_from_json(bad_family), ParseError);
    auto short_rows = j;
    short_rows["baselines"].erase(0);
    EXPECT_THROW(model_from_json(short_rows), ParseError);
    auto bad_bins = j;
    bad_bins["baselines"][0].erase(0);
    EXPECT_THROW(model_from_json(bad_bins), ContractViolation);
    auto bad_kernel = j;
    bad_kernel["kernels"][1][1]["params"]["beta"] = -1.0;
    EXPECT_THROW(model_from_json(bad_kernel), ContractViolation);
}

TEST(Json, BookRoundTrip) {
    const auto s = BookState::make(10000, 3, 250);
    const auto j = to_json(s);
    EXPECT_EQ(j["queues"][1]["key"], "ask0");
    EXPECT_EQ(book_from_json(j), s);
    auto crossed = j;
    crossed["queues"][1]["price_ticks"] = 9990;
    EXPECT_THROW(book_from_json(crossed), ContractViolation);
}

TEST(Csv, ClassifiedRoundTripIsExact) {
    const auto m = testing_models::spread_market(0.5);
    const auto r = simulate(m, testing_models::spiked_sizes(), testing_models::market_depth(),
                            BookState::make(10000, 2, 300), 500.0, 3);
    std::stringstream ss;
    write_classified(ss, r.events);
    const auto back = read_classified(ss);
    EXPECT_EQ(back, r.events);

    std::stringstream ts;
    write_trajectory(ts, r.trajectory);
    EXPECT_EQ(read_trajectory(ts), r.trajectory);
}

TEST(Csv, ClassifiedRejectsBadRows) {
    std::istringstream no_header("0.1,LO_ask0,1,1,\n");
    EXPECT_THROW(read_classified(no_header), ParseError);
    std::istringstream bad_type("time,event_type,size,spread_ticks,order_id\n0.1,LO_ask9,1,1,\n");
    EXPECT_THROW(read_classified(bad_type), ParseError);
    std::istringstream unsorted("time,event_type,size,spread_ticks,order_id\n0.2,LO_ask0,1,1,\n0.1,LO_ask0,1,1,\n");
    EXPECT_THROW(read_classified(unsorted), ParseError);
    std::istringstream by_index("time,event_type,size,spread_ticks,order_id\n0.2,9,5,2,\n");
    const auto ev = read_classified(by_index);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].type, EventType::MoBid0);
}

TEST(Lobster, ParsesAndSkipsMalformedRows) {
    ParseReport rep;
    const auto msgs = parse(std::string(kSeed) + "34300,1,5,abc,1000200,-1\n34300,9,6,1,1000200,-1\n34301,1,7,10,1000200,-1\n",
                            rep);
    EXPECT_EQ(rep.rows, 7u);
    EXPECT_EQ(rep.malformed, 2u);
    ASSERT_EQ(rep.warnings.size(), 2u);
    EXPECT_NE(rep.warnings[0].find(":5:"), std::string::npos);
    EXPECT_EQ(msgs.size(), 5u);
    ParseReport rep2;
    EXPECT_THROW(parse("34300,1,1,1,1000200,-1\n34299,1,2,1,1000200,-1\n", rep2), ContractViolation);
}

TEST(Lobster, ClassifiesByTickDistance) {
    ParseReport rep;
    const auto msgs = parse(std::string(kSeed) +
                                "34300,1,10,50,1000200,-1\n"  // sell at the ask: LO_ask0
                                "34301,4,3,40,1000000,1\n"    // resting bid executed: MO_bid0
                                "34302,1,11,10,1000300,-1\n"  // LO_ask+1
                                "34303,1,12,10,1000100,-1\n"  // in-spread sell: LO_ask-1
                                "34304,3,12,10,1000100,-1\n"  // cancel at new best ask: CO_ask0
                                "34305,3,4,100,999900,1\n"    // CO_bid-1
                                "34306,1,13,5,999000,1\n"     // far from the book: discarded
                                "34307,2,1,10,1000200,-1\n"   // partial cancel: discarded
                                "34308,5,0,10,1000100,1\n"    // hidden execution: discarded
                                "34309,7,0,0,-1,1\n"          // halt: discarded
                                "34310,1,14,10,1000100,1\n",  // in-spread buy: LO_bid+1
                            rep);
    const auto out = classify(msgs, no_warmup());
    const std::vector<EventType> expected{EventType::LoAsk0,     EventType::MoBid0,      EventType::LoAskPlus1,
                                          EventType::LoAskMinus1, EventType::CoAsk0,      EventType::CoBidMinus1,
                                          EventType::LoBidPlus1};
    ASSERT_EQ(out.events.size(), expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(out.events[k].type, expected[k]) << k;
    EXPECT_EQ(out.events[0].spread_ticks, 2);
    EXPECT_DOUBLE_EQ(out.events[0].time, 100.0);
    EXPECT_EQ(out.events[1].size, 40);
    EXPECT_EQ(out.events[3].spread_ticks, 2);
    EXPECT_EQ(out.events[4].spread_ticks, 1);
    EXPECT_EQ(out.report.discarded.at("outside_session"), 4u);
    EXPECT_EQ(out.report.discarded.at("outside_band"), 1u);
    EXPECT_EQ(out.report.discarded.at("partial_cancel"), 1u);
    EXPECT_EQ(out.report.discarded.at("hidden_execution"), 1u);
    EXPECT_EQ(out.report.discarded.at("halt"), 1u);
    // Conservation: every message is an event, a merged fill, or a counted discard.
    EXPECT_EQ(out.report.emitted + out.report.absorbed_executions + out.report.total_discarded(), msgs.size());
    // Trajectory in ticks: after the in-spread buy the book is 10001 / 10002.
    EXPECT_EQ(out.trajectory.back().bid0_price, 10001);
    EXPECT_EQ(out.trajectory.back().ask0_price, 10002);
}

TEST(Lobster, MergesSimultaneousFillsAndAppliesWarmup) {
    ParseReport rep;
    const auto msgs = parse(std::string(kSeed) +
                                "34230,1,20,10,1000200,-1\n"  // inside the warm-up
                                "34300,4,1,100,1000200,-1\n"
                                "34300,4,20,5,1000200,-1\n"
                                "34301,1,21,10,1000000,1\n",
                            rep);
    const auto out = classify(msgs);
    ASSERT_EQ(out.events.size(), 2u);
    EXPECT_EQ(out.events[0].type, EventType::MoAsk0);
    EXPECT_EQ(out.events[0].size, 105);
    EXPECT_EQ(out.report.absorbed_executions, 1u);
    EXPECT_EQ(out.report.discarded.at("warmup"), 1u);
    EXPECT_EQ(out.trajectory[0].ask0_depth, 5);
    EXPECT_EQ(out.report.emitted + out.report.absorbed_executions + out.report.total_discarded(), msgs.size());
}

TEST(Lobster, SimulatedSessionRoundTrip) {
    const auto m = testing_models::spread_market(0.5);
    const auto initial = BookState::make(10000, 2, 300);
    std::ostringstream msg_out, book_out;
    LobsterWriter writer(msg_out, &book_out, initial);
    std::vector<EventRecord> truth;
    simulate_stream(m, testing_models::spiked_sizes(), testing_models::market_depth(), initial, 3000.0, 77,
                    [&](const EventRecord& ev, const ApplyResult& res, const BookState& after) {
                        truth.push_back(ev);
                        writer(ev, res, after);
                    });
    ASSERT_GT(truth.size(), 10000u);

    std::istringstream msg_in(msg_out.str()), book_in(book_out.str());
    ParseReport rep;
    const auto msgs = parse_messages(msg_in, rep);
    const auto rows = parse_orderbook(book_in);
    EXPECT_EQ(rep.malformed, 0u);
    ASSERT_EQ(rows.size(), msgs.size());
    const auto out = classify(msgs, no_warmup(), rows);
    ASSERT_EQ(out.events.size(), truth.size());
    bool locked_seen = false;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        ASSERT_EQ(out.events[k].type, truth[k].type) << "event " << k;
        EXPECT_EQ(out.events[k].size, truth[k].size);
        EXPECT_EQ(out.events[k].spread_ticks, truth[k].spread_ticks);
        EXPECT_NEAR(out.events[k].time, truth[k].time, 1e-8);
        locked_seen = locked_seen || truth[k].spread_ticks == 0;
    }
    EXPECT_TRUE(locked_seen);
    EXPECT_EQ(out.report.discarded.at("outside_session"), 4u);

    // Replay is deterministic.
    const auto again = classify(msgs, no_warmup(), rows);
    EXPECT_EQ(again.events, out.events);
    EXPECT_EQ(again.trajectory, out.trajectory);
}

TEST(Stats, ConstantSpreadGivesUnitDistance) {
    std::vector<EventRecord> ev;
    std::vector<BookSnapshot> traj;
    std::int64_t ask = 10002, bid = 10000;
    for (int k = 0; k < 200; ++k) {
        EventRecord e;
        e.time = k;
        e.type = k % 2 ? EventType::LoAskMinus1 : EventType::CoAsk0;
        // Each in-spread sell improves the ask by one tick; the cancel restores it.
        ask = k % 2 ? ask - 1 : 10002;
        ev.push_back(e);
        BookSnapshot s;
        s.time = e.time;
        s.type = e.type;
        s.ask0_price = ask;
        s.bid0_price = bid;
        s.spread_ticks = ask - bid;
        traj.push_back(s);
    }
    const auto st = empirical_stats(ev, traj);
    EXPECT_EQ(st.in_spread_distance.n, 100u);
    EXPECT_DOUBLE_EQ(st.in_spread_distance.mean, 1.0);
    EXPECT_DOUBLE_EQ(st.in_spread_distance.sd, 0.0);
    EXPECT_DOUBLE_EQ(st.in_spread_one_tick, 1.0);
    EXPECT_EQ(st.depletion_gap.n, 99u);
    EXPECT_EQ(st.tod_counts[0], 200);
    EXPECT_EQ(st.ten_minute_counts.size(), 39u);
}

TEST(Stats, SpikesOnlyWhereTheyExist) {
    Rng rng(5);
    std::vector<std::int64_t> uniform, spiked;
    const auto d = testing_models::spiked(0.02);
    for (int k = 0; k < 200000; ++k) {
        uniform.push_back(1 + static_cast<std::int64_t>(rng.index(600)));
        spiked.push_back(d.sample(rng));
    }
    for (const auto& s : size_stats(uniform).spikes) EXPECT_LT(std::abs(s.excess), 0.002) << s.point;
    const auto sp = size_stats(spiked);
    EXPECT_NEAR(sp.spikes[3].excess, 0.4, 0.01);  // size 100
    EXPECT_GT(sp.spikes[3].mass, 0.39);
}

TEST(Stats, SimulatedBookFeedsDepthDistribution) {
    const auto m = testing_models::spread_market(0.5);
    const auto r = simulate(m, testing_models::spiked_sizes(), testing_models::market_depth(),
                            BookState::make(10000, 2, 300), 3000.0, 8);
    const auto st = empirical_stats(r.events, r.trajectory);
    ASSERT_GT(st.revealed_depths.size(), 50u);
    for (auto d : st.revealed_depths) EXPECT_TRUE(d >= 1 && d <= 3) << d;
    EXPECT_DOUBLE_EQ(st.in_spread_one_tick, 1.0);
    const auto depth = DepthDistribution::from_samples(st.revealed_depths);
    EXPECT_NEAR(depth.mean(), 2.0, 0.2);
    const auto j = to_json(st);
    EXPECT_TRUE(j.contains("revealed_depth_histogram"));
}

#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/kernel.hpp"
#include "chp/lob.hpp"
#include "chp/size_model.hpp"

namespace chp::io {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

}  // namespace detail

inline Json to_json(const Kernel& k) {
    Json j;
    j["family"] = std::string(family_name(k.family()));
    if (const auto* e = k.as_exponential()) {
        j["params"] = {{"alpha", e->alpha}, {"beta", e->beta}};
    } else if (const auto* p = k.as_power_law()) {
        j["params"] = {{"alpha", p->alpha}, {"delta", p->delta}, {"gamma", p->gamma}};
    } else {
        const auto* np = k.as_nonparametric();
        j["params"] = {{"edges", np->edges}, {"values", np->values}};
    }
    return j;
}

inline Kernel kernel_from_json(const Json& j, const std::string& where = "kernel") {
    const auto family = detail::get<std::string>(j, "family", where);
    if (!j.contains("params")) throw ParseError(where + ": missing field 'params'");
    const auto& p = j.at("params");
    if (family == "exponential")
        return Kernel::exponential(detail::get<double>(p, "alpha", where), detail::get<double>(p, "beta", where));
    if (family == "power_law")
        return Kernel::power_law(detail::get<double>(p, "alpha", where), detail::get<double>(p, "delta", where),
                                 detail::get<double>(p, "gamma", where));
    if (family == "nonparametric")
        return Kernel::nonparametric(detail::get<std::vector<double>>(p, "edges", where),
                                     detail::get<std::vector<double>>(p, "values", where));
    throw ParseError(where + ": unknown kernel family '" + family + "'");
}

inline Json to_json(const SizeDistribution& d) {
    return {{"spike_points", d.spike_points},
            {"spike_weights", d.spike_weights},
            {"body_weight", d.body_weight},
            {"geom_p", d.geom_p}};
}

inline SizeDistribution size_distribution_from_json(const Json& j, const std::string& where = "sizes") {
    SizeDistribution d;
    d.spike_points = detail::get<std::vector<std::int64_t>>(j, "spike_points", where);
    d.spike_weights = detail::get<std::vector<double>>(j, "spike_weights", where);
    d.body_weight = detail::get<double>(j, "body_weight", where);
    d.geom_p = detail::get<double>(j, "geom_p", where);
    d.validate();
    return d;
}

// Keyed by event type name; cancel types carry no distribution.
inline Json to_json(const PerEvent<SizeDistribution>& sizes) {
    Json j = Json::object();
    for (auto e : kAllEventTypes)
        if (has_size_distribution(e)) j[std::string(name(e))] = to_json(sizes[index(e)]);
    return j;
}

inline PerEvent<SizeDistribution> sizes_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("sizes: expected an object keyed by event type");
    PerEvent<SizeDistribution> out{};
    for (const auto& [key, value] : j.items()) {
        const auto e = parse_event_type(key);
        if (!e) throw ParseError("sizes: unknown event type '" + key + "'");
        out[index(*e)] = size_distribution_from_json(value, "sizes." + key);
    }
    return out;
}

inline Json to_json(const DepthDistribution& d) { return {{"values", d.values()}, {"weights", d.weights()}}; }

inline DepthDistribution depth_from_json(const Json& j) {
    return {detail::get<std::vector<std::int64_t>>(j, "values", "depth"),
            detail::get<std::vector<double>>(j, "weights", "depth")};
}

// Model document. Besides the required fields it may carry session_end,
// sizes and depth so that one file drives a simulation.
struct ModelDocument {
    HawkesModel model;
    std::optional<PerEvent<SizeDistribution>> sizes;
    std::optional<DepthDistribution> depth;
};

inline Json to_json(const HawkesModel& m) {
    Json j;
    Json baselines = Json::array();
    for (const auto& row : m.baselines) baselines.push_back(row);
    Json kernels = Json::array();
    for (const auto& row : m.kernels) {
        Json r = Json::array();
        for (const auto& k : row) r.push_back(to_json(k));
        kernels.push_back(std::move(r));
    }
    j["baselines"] = std::move(baselines);
    j["kernels"] = std::move(kernels);
    j["spread_beta"] = m.spread_beta;
    j["tod_bin_seconds"] = m.tod_bin_seconds;
    j["session_start"] = m.session_start;
    j["session_end"] = m.session_end;
    return j;
}

inline Json to_json(const ModelDocument& doc) {
    auto j = to_json(doc.model);
    if (doc.sizes) j["sizes"] = to_json(*doc.sizes);
    if (doc.depth) j["depth"] = to_json(*doc.depth);
    return j;
}

inline ModelDocument model_from_json(const Json& j) {
    ModelDocument doc;
    auto& m = doc.model;
    const auto baselines = detail::get<std::vector<std::vector<double>>>(j, "baselines", "model");
    if (baselines.size() != kNumEventTypes)
        throw ParseError("model: baselines must have " + std::to_string(kNumEventTypes) + " rows");
    for (std::size_t i = 0; i < kNumEventTypes; ++i) m.baselines[i] = baselines[i];
    if (!j.contains("kernels") || !j["kernels"].is_array() || j["kernels"].size() != kNumEventTypes)
        throw ParseError("model: kernels must be a 12x12 array");
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        const auto& row = j["kernels"][i];
        if (!row.is_array() || row.size() != kNumEventTypes) throw ParseError("model: kernels must be a 12x12 array");
        for (std::size_t k = 0; k < kNumEventTypes; ++k)
            m.kernels[i][k] = kernel_from_json(row[k], "model.kernels[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
    m.spread_beta = detail::get<double>(j, "spread_beta", "model");
    m.tod_bin_seconds = detail::get<double>(j, "tod_bin_seconds", "model");
    m.session_start = detail::get<double>(j, "session_start", "model");
    m.session_end = j.contains("session_end") ? detail::get<double>(j, "session_end", "model")
                                              : m.session_start + (kNasdaqClose - kNasdaqOpen);
    if (j.contains("sizes")) doc.sizes = sizes_from_json(j["sizes"]);
    if (j.contains("depth")) doc.depth = depth_from_json(j["depth"]);
    m.validate();
    return doc;
}

inline Json to_json(const BookState& s) {
    Json queues = Json::array();
    for (auto q : kAllQueues) {
        Json orders = Json::array();
        for (const auto& o : s[q].orders) orders.push_back({o.id, o.size});
        queues.push_back({{"key", std::string(name(q))}, {"price_ticks", s[q].price}, {"orders", std::move(orders)}});
    }
    return {{"tick_size", s.tick_size}, {"queues", std::move(queues)}};
}

inline BookState book_from_json(const Json& j) {
    BookState s;
    s.tick_size = detail::get<double>(j, "tick_size", "book");
    if (!j.contains("queues") || !j["queues"].is_array()) throw ParseError("book: missing queues array");
    std::array<bool, kNumQueues> seen{};
    std::int64_t max_id = 0;
    for (const auto& qj : j["queues"]) {
        const auto key = parse_queue_key(detail::get<std::string>(qj, "key", "book.queues"));
        if (!key) throw ParseError("book: unknown queue key");
        if (seen[index(*key)]) throw ParseError("book: duplicate queue " + std::string(name(*key)));
        seen[index(*key)] = true;
        auto& q = s[*key];
        q.price = detail::get<std::int64_t>(qj, "price_ticks", "book.queues");
        for (const auto& o : detail::get<std::vector<std::array<std::int64_t, 2>>>(qj, "orders", "book.queues")) {
            q.orders.push_back({o[0], o[1]});
            max_id = std::max(max_id, o[0]);
        }
    }
    for (auto q : kAllQueues)
        if (!seen[index(q)]) throw ParseError("book: missing queue " + std::string(name(q)));
    s.next_order_id = max_id + 1;
    s.validate();
    return s;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace chp::io

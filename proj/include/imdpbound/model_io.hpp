#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "imdpbound/emdp.hpp"
#include "imdpbound/errors.hpp"
#include "imdpbound/numeric.hpp"

namespace imdpbound {

// Model file schema (JSON):
//
//   {
//     "name": "semi-random-walk",            optional
//     "domain":  {"lo": [0, 0],   "hi": [1.2, 1.2]},
//     "goal":    {"lo": [1.0, 0], "hi": [1.2, 1.0]},
//     "failure": {"lo": [0, 1.0], "hi": [1.2, 1.2]},
//     "failure_penalty": 10,
//     "actions": [
//       {"name": "fast", "drift": [0.25, 0.05], "noise_half_width": 0.1, "cost": 3},
//       ...
//     ]
//   }

namespace detail {

inline Point point_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || j.size() > kMaxDim)
        throw InvalidArgument(what + " must be an array of 1.." + std::to_string(kMaxDim) + " numbers");
    Point p(j.size());
    for (std::size_t d = 0; d < j.size(); ++d) {
        if (!j[d].is_number()) throw InvalidArgument(what + " must contain only numbers");
        p[d] = j[d].get<double>();
    }
    return p;
}

inline nlohmann::ordered_json point_to_json(const Point& p) {
    auto j = nlohmann::ordered_json::array();
    for (double x : p.coords()) j.push_back(x);
    return j;
}

inline Box box_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw InvalidArgument(what + " needs 'lo' and 'hi' arrays");
    return Box(point_from_json(j["lo"], what + ".lo"), point_from_json(j["hi"], what + ".hi"));
}

inline nlohmann::ordered_json box_to_json(const Box& b) {
    return {{"lo", point_to_json(b.lo())}, {"hi", point_to_json(b.hi())}};
}

inline double number_field(const nlohmann::json& j, const char* key, const std::string& what) {
    if (!j.contains(key) || !j[key].is_number()) throw InvalidArgument(what + " needs numeric '" + key + "'");
    return j[key].get<double>();
}

} // namespace detail

inline WalkerModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("model must be a JSON object");
    WalkerModel m;
    if (j.contains("name")) m.name = j["name"].get<std::string>();
    for (const char* key : {"domain", "goal", "failure", "actions"})
        if (!j.contains(key)) throw InvalidArgument(std::string("model is missing '") + key + "'");
    m.domain = detail::box_from_json(j["domain"], "domain");
    m.goal = detail::box_from_json(j["goal"], "goal");
    m.failure = detail::box_from_json(j["failure"], "failure");
    m.failure_penalty = j.contains("failure_penalty") ? detail::number_field(j, "failure_penalty", "model") : 0.0;
    if (!j["actions"].is_array()) throw InvalidArgument("'actions' must be an array");
    for (const auto& a : j["actions"]) {
        if (!a.contains("name") || !a["name"].is_string()) throw InvalidArgument("every action needs a 'name'");
        const std::string name = a["name"].get<std::string>();
        if (!a.contains("drift")) throw InvalidArgument("action '" + name + "' needs 'drift'");
        m.actions.push_back({name, detail::point_from_json(a["drift"], "action '" + name + "' drift"),
                             detail::number_field(a, "noise_half_width", "action '" + name + "'"),
                             detail::number_field(a, "cost", "action '" + name + "'")});
    }
    m.validate();
    return m;
}

inline nlohmann::ordered_json model_to_json(const WalkerModel& m) {
    nlohmann::ordered_json j;
    j["name"] = m.name;
    j["domain"] = detail::box_to_json(m.domain);
    j["goal"] = detail::box_to_json(m.goal);
    j["failure"] = detail::box_to_json(m.failure);
    j["failure_penalty"] = m.failure_penalty;
    auto acts = nlohmann::ordered_json::array();
    for (const auto& a : m.actions)
        acts.push_back({{"name", a.name},
                        {"drift", detail::point_to_json(a.drift)},
                        {"noise_half_width", a.noise_half_width},
                        {"cost", a.cost}});
    j["actions"] = acts;
    return j;
}

inline WalkerModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("model file '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("model file '" + path + "': " + e.what());
    }
}

/// Stable fingerprint of the model's canonical JSON form.
inline std::string model_hash(const WalkerModel& m) { return hex64(fnv1a64(model_to_json(m).dump())); }

} // namespace imdpbound

#include "rbal/mdp_json.hpp"

#include <fstream>
#include <sstream>

namespace rbal {

using nlohmann::json;

json mdp_to_json(const Mdp& mdp, const json& meta) {
    json actions = json::array();
    for (const Action& a : mdp.actions()) {
        json transitions = json::array();
        for (const auto& tr : a.transitions) transitions.push_back(json::array({tr.to, tr.prob}));
        actions.push_back({{"state", a.state}, {"reward", a.reward}, {"transitions", std::move(transitions)}});
    }
    json j = {{"version", kMdpJsonVersion}, {"n", mdp.num_states()}, {"gamma", mdp.gamma()},
              {"actions", std::move(actions)}};
    if (!meta.is_null()) j["meta"] = meta;
    return j;
}

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw InvalidArgument("MDP JSON: " + what); }

const json& field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(std::string("missing field \"") + key + "\"");
    return *it;
}

std::size_t as_index(const json& v, const std::string& what) {
    if (!v.is_number_integer() || v.get<long long>() < 0) schema_error(what + " must be a non-negative integer");
    return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& what) {
    if (!v.is_number()) schema_error(what + " must be a number");
    return v.get<double>();
}

} // namespace

Mdp mdp_from_json(const json& j) {
    if (!j.is_object()) schema_error("top level must be an object");
    const auto& version = field(j, "version");
    if (!version.is_number_integer() || version.get<int>() != kMdpJsonVersion)
        schema_error("unsupported version " + version.dump());
    const std::size_t n = as_index(field(j, "n"), "n");
    const double gamma = as_real(field(j, "gamma"), "gamma");
    const auto& jactions = field(j, "actions");
    if (!jactions.is_array()) schema_error("actions must be an array");

    std::vector<Action> actions;
    actions.reserve(jactions.size());
    for (std::size_t i = 0; i < jactions.size(); ++i) {
        const auto& ja = jactions[i];
        const std::string where = "actions[" + std::to_string(i) + "]";
        if (!ja.is_object()) schema_error(where + " must be an object");
        Action a;
        a.state = as_index(field(ja, "state"), where + ".state");
        a.reward = as_real(field(ja, "reward"), where + ".reward");
        const auto& jt = field(ja, "transitions");
        if (!jt.is_array()) schema_error(where + ".transitions must be an array");
        for (const auto& pair : jt) {
            if (!pair.is_array() || pair.size() != 2) schema_error(where + ".transitions entries must be [state, prob]");
            a.transitions.push_back({as_index(pair[0], where + " destination"), as_real(pair[1], where + " probability")});
        }
        actions.push_back(std::move(a));
    }
    return Mdp(n, gamma, std::move(actions));
}

std::string dump_mdp(const Mdp& mdp, const json& meta) { return mdp_to_json(mdp, meta).dump(); }

Mdp parse_mdp(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("parse error: ") + e.what());
    }
    return mdp_from_json(j);
}

void save_mdp(const std::filesystem::path& path, const Mdp& mdp, const json& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << dump_mdp(mdp, meta) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Mdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mdp(buf.str());
}

} // namespace rbal

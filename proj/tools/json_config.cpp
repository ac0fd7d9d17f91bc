#include "json_config.hpp"

#include <sstream>

namespace senslab::cli {

namespace {

std::vector<std::string> split_default(const std::string& text) {
    std::string body = text;
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
    std::vector<std::string> out;
    std::stringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

std::string scalar_text(const nlohmann::json& value, const std::string& name) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number()) return value.dump();
    throw CLI::ConversionError("unsupported value for '" + name + "' in JSON config");
}

// Numeric options are written as JSON numbers, everything else as text.
nlohmann::ordered_json typed(const CLI::Option* opt, const std::string& text) {
    const std::string type = opt->get_type_name();
    const bool numeric = type.rfind("INT", 0) == 0 || type.rfind("UINT", 0) == 0 || type.rfind("FLOAT", 0) == 0 ||
                         type.rfind("NUMBER", 0) == 0 || type.rfind("POSITIVE", 0) == 0 ||
                         type.rfind("NONNEGATIVE", 0) == 0;
    if (numeric) {
        auto parsed = nlohmann::ordered_json::parse(text, nullptr, false);
        if (parsed.is_number()) return parsed;
    }
    return text;
}

nlohmann::ordered_json typed(const CLI::Option* opt, const std::vector<std::string>& items) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& item : items) arr.push_back(typed(opt, item));
    return arr;
}

}  // namespace

nlohmann::ordered_json JsonConfig::snapshot(const CLI::App* app, bool default_also) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options({})) {
        if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
        const std::string name = opt->get_lnames()[0];
        if (name == "help" || name == "config") continue;
        const bool vector_like = opt->get_expected_max() > 1;
        if (opt->get_type_size() == 0) {
            if (opt->count() > 0 || default_also) j[name] = opt->count() > 0;
            continue;
        }
        if (opt->count() > 0) {
            if (vector_like)
                j[name] = typed(opt, opt->results());
            else
                j[name] = typed(opt, opt->results().back());
        } else if (default_also && !opt->get_default_str().empty()) {
            if (vector_like)
                j[name] = typed(opt, split_default(opt->get_default_str()));
            else
                j[name] = typed(opt, opt->get_default_str());
        }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = snapshot(sub, default_also);
    return j;
}

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
    return snapshot(app, default_also).dump(2);
}

void JsonConfig::flatten(const nlohmann::json& node, const std::string& name, const std::vector<std::string>& parents,
                         std::vector<CLI::ConfigItem>& out) {
    if (node.is_object()) {
        std::vector<std::string> inner = parents;
        if (!name.empty()) {
            inner.push_back(name);
            CLI::ConfigItem open;
            open.parents = inner;
            open.name = "++";
            out.push_back(open);
        }
        for (auto it = node.begin(); it != node.end(); ++it) flatten(it.value(), it.key(), inner, out);
        if (!name.empty()) {
            CLI::ConfigItem close;
            close.parents = inner;
            close.name = "--";
            out.push_back(close);
        }
        return;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = name;
    if (node.is_array()) {
        for (const auto& v : node) item.inputs.push_back(scalar_text(v, name));
    } else if (!node.is_null()) {
        item.inputs.push_back(scalar_text(node, name));
    }
    out.push_back(item);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
    nlohmann::json j;
    try {
        input >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, "", {}, items);
    return items;
}

}  // namespace senslab::cli

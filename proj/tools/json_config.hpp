#pragma once

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace senslab::cli {

/// CLI11 config formatter for JSON documents. Top-level keys are global
/// options; an object under a subcommand's name holds that subcommand's
/// options and selects it. Unknown keys (such as the "_run" record of a run
/// manifest) are left for the application to ignore.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

    /// The resolved options of `app` and its parsed subcommands as JSON.
    static nlohmann::ordered_json snapshot(const CLI::App* app, bool default_also);

private:
    static void flatten(const nlohmann::json& node, const std::string& name, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& out);
};

}  // namespace senslab::cli

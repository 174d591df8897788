#pragma once

#include <CLI11.hpp>

namespace dbs::cli {

/// JSON config files for CLI11: {"schema": 1, "threads": 2,
/// "segment": {"k": 7.9, "out": "run"}}. Objects map to subcommands, keys
/// to long option names (underscores read as dashes), arrays to repeated
/// values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace dbs::cli

#pragma once

#include <CLI11.hpp>

namespace lpp::cli {

/// Reads --config files written as JSON. Top-level keys are option long
/// names; nested objects address subcommands, e.g.
/// {"threads": 2, "sweep": {"axis": "prefix_length", "grid": [10, 20]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace lpp::cli

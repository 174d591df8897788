#include "json_config.hpp"

#include <algorithm>

#include <json.hpp>

namespace dbs::cli {

namespace {

using nlohmann::json;

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

std::string option_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

void collect(const json& obj, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : obj.items()) {
    if (parents.empty() && key == "schema") continue;
    if (value.is_object()) {
      auto sub = parents;
      sub.push_back(key);
      collect(value, sub, out);
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = option_name(key);
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar_text(v));
    } else {
      item.inputs.push_back(scalar_text(value));
    }
    out.push_back(std::move(item));
  }
}

void dump_app(const CLI::App* app, bool default_also, json& node) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::vector<std::string> values = opt->results();
    if (values.empty() && default_also && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
    if (values.empty()) continue;
    if (values.size() == 1) {
      node[name] = values.front();
    } else {
      node[name] = values;
    }
  }
  for (const CLI::App* sub : app->get_subcommands({})) {
    json child = json::object();
    dump_app(sub, default_also, child);
    if (!child.empty()) node[sub->get_name()] = std::move(child);
  }
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  json root = json::object();
  root["schema"] = 1;
  dump_app(app, default_also, root);
  return root.dump(2) + "\n";
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json root;
  try {
    root = json::parse(input);
  } catch (const json::parse_error& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  if (root.value("schema", 0) != 1) throw CLI::ConversionError("config file needs \"schema\": 1");
  std::vector<CLI::ConfigItem> items;
  collect(root, {}, items);
  return items;
}

}  // namespace dbs::cli

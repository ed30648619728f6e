#include <httplib.h>

#include <json.hpp>

#include "wtal/cli/commands.hpp"
#include "wtal/errors.hpp"

namespace wtal::cli {

HttpDescriber::HttpDescriber(std::string endpoint, corpus::DescriptionTable table) : table_(std::move(table)) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos || endpoint.compare(0, scheme, "http") != 0) {
    throw ConfigError("MLLM endpoint must look like http://host:port/path, got '" + endpoint + "'");
  }
  const auto slash = endpoint.find('/', scheme + 3);
  host_ = endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

std::string HttpDescriber::generate(const corpus::VideoSample&, int cls, corpus::DescriptionMode mode) {
  httplib::Client client(host_);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  const nlohmann::json request = {{"class", table_.at(cls).name},
                                  {"mode", mode == corpus::DescriptionMode::kKey ? "key" : "complete"}};
  auto response = client.Post(path_, request.dump(), "application/json");
  if (!response) {
    throw LoadError("MLLM endpoint " + host_ + path_ + ": " + httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw LoadError("MLLM endpoint " + host_ + path_ + " answered HTTP " + std::to_string(response->status));
  }
  try {
    return nlohmann::json::parse(response->body).at("sentence").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("MLLM endpoint reply is not {\"sentence\": string}: " + std::string(e.what()));
  }
}

std::unique_ptr<corpus::DescriptionGenerator> make_describer(const RunConfig& config, const CorpusDir& data) {
  const std::filesystem::path table_path =
      config.descriptions.empty() ? data.root / "descriptions.tsv" : std::filesystem::path(config.descriptions);
  auto table = corpus::DescriptionTable::load(table_path);
  if (table.size() != data.class_names.size()) {
    throw ConfigError(table_path.string() + " describes " + std::to_string(table.size()) + " classes, the corpus has " +
                      std::to_string(data.class_names.size()));
  }
  if (!config.mllm_endpoint.empty()) return std::make_unique<HttpDescriber>(config.mllm_endpoint, std::move(table));
  return std::make_unique<corpus::TemplateDescriber>(std::move(table));
}

}  // namespace wtal::cli

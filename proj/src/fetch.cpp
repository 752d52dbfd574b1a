#include <regex>

#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/ingest.hpp"
#include "httplib.h"

namespace ai4ef::ingest {

namespace {

const std::regex& url_grammar() {
  static const std::regex re(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(:[0-9]{1,5})?(/[^\s]*)?$)",
                             std::regex::icase);
  return re;
}

const std::regex& dsn_uri_grammar() {
  static const std::regex re(
      R"(^(postgres|postgresql|mysql|mariadb|sqlite|sqlite3|mssql|sqlserver|oracle|mongodb|redis)(\+[A-Za-z0-9]+)?://[^\s]+$)",
      std::regex::icase);
  return re;
}

// libpq keyword/value form: "host=db dbname=energy user=ai4ef"
const std::regex& dsn_keyword_grammar() {
  static const std::regex re(R"(^\s*([A-Za-z_]+=[^\s=]+\s*)+$)");
  return re;
}

const std::regex& path_grammar() {
  static const std::regex re(R"(^[A-Za-z0-9_.~/\\ \-]+$)");
  return re;
}

}  // namespace

DataSource validate_source(std::string_view text) {
  const std::string s(text);
  if (std::regex_match(s, url_grammar())) return HttpEndpoint{s};
  if (std::regex_match(s, dsn_uri_grammar())) return ConnectionString{s};
  if (std::regex_match(s, dsn_keyword_grammar()) &&
      (s.find("host=") != std::string::npos || s.find("dbname=") != std::string::npos)) {
    return ConnectionString{s};
  }
  if (std::regex_match(s, path_grammar()) && s.find_first_not_of(" ./\\") != std::string::npos) {
    return LocalFile{s};
  }
  throw Error(ErrorCode::UnrecognizedSource, "'" + s + "' is not a URL, connection string or file path",
              "input_filepath");
}

void ConnectorConfig::validate() const {
  if (authorization.rfind("APIKEY-", 0) != 0 || authorization.size() <= 7) {
    throw Error(ErrorCode::InvalidValue, "authorization must look like APIKEY-<token>", "authorization");
  }
  if (consumer_agent_id.empty()) {
    throw Error(ErrorCode::MissingField, "consumer_agent_id is required", "consumer_agent_id");
  }
  if (provider_agent_id.empty()) {
    throw Error(ErrorCode::MissingField, "provider_agent_id is required", "provider_agent_id");
  }
}

namespace {

RawTable fetch_http(const HttpEndpoint& endpoint, const std::optional<ConnectorConfig>& connector) {
  static const std::regex split_re(R"(^([A-Za-z]+://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint.url, m, split_re)) {
    throw Error(ErrorCode::UnrecognizedSource, "bad URL '" + endpoint.url + "'");
  }
  const std::string origin = m[1].str();
  const std::string target = m[2].matched ? m[2].str() : "/";

  httplib::Client client(origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  client.set_follow_location(true);

  httplib::Headers headers;
  if (connector) {
    connector->validate();
    headers.emplace("Authorization", connector->authorization);
    headers.emplace(std::string(kConsumerHeader), connector->consumer_agent_id);
    headers.emplace(std::string(kProviderHeader), connector->provider_agent_id);
  }
  const auto result = client.Get(target, headers);
  if (!result) {
    throw Error(ErrorCode::IoError,
                "request to '" + endpoint.url + "' failed: " + httplib::to_string(result.error()),
                endpoint.url);
  }
  if (result->status < 200 || result->status >= 300) {
    throw Error(ErrorCode::HttpStatus, "GET '" + endpoint.url + "' returned " + std::to_string(result->status),
                endpoint.url, result->status);
  }
  return csv::parse(result->body);
}

}  // namespace

RawTable fetch(const DataSource& source, const std::optional<ConnectorConfig>& connector) {
  if (const auto* file = std::get_if<LocalFile>(&source)) {
    return csv::parse(fsutil::read_file(file->path));
  }
  if (const auto* endpoint = std::get_if<HttpEndpoint>(&source)) {
    return fetch_http(*endpoint, connector);
  }
  throw Error(ErrorCode::UnsupportedSource, "database sources are validated but cannot be fetched",
              "input_filepath");
}

}  // namespace ai4ef::ingest

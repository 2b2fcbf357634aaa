#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace laclip {

// POST `body` as application/json to endpoint+path and parse the JSON reply.
// `endpoint` is scheme://host[:port]; extra headers are passed through.
// Throws BackendError (tagged with request_id) on transport or HTTP failure.
nlohmann::json http_post_json(const std::string& endpoint, const std::string& path,
                              const nlohmann::json& body,
                              const std::map<std::string, std::string>& headers,
                              const std::string& request_id);

}  // namespace laclip

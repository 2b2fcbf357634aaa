#include "laclip/http_util.hpp"

// common.hpp (Eigen) must precede httplib.h: resolv.h leaks a _res macro
// that collides with Eigen internals.
#include "laclip/common.hpp"

#include <httplib.h>

namespace laclip {

nlohmann::json http_post_json(const std::string& endpoint, const std::string& path,
                              const nlohmann::json& body,
                              const std::map<std::string, std::string>& headers,
                              const std::string& request_id) {
    httplib::Client client(endpoint);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);
    httplib::Headers hl;
    for (const auto& [k, v] : headers) hl.emplace(k, v);

    auto res = client.Post(path, hl, body.dump(), "application/json");
    if (!res) {
        throw BackendError("transport failure: " + httplib::to_string(res.error()), request_id);
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("http status " + std::to_string(res->status), request_id);
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
        throw BackendError("response is not valid json", request_id);
    }
    return reply;
}

}  // namespace laclip

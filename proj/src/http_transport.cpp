#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "usemention/errors.hpp"
#include "usemention/modelio.hpp"

namespace usemention {

namespace {

class HttplibTransport : public Transport
{
public:
    HttpResponse post(const HttpRequest& request) override
    {
        // Split "scheme://host[:port]/path" into the client origin and path.
        const auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("malformed URL '" + request.url + "'");
        const auto path_start = request.url.find('/', scheme_end + 3);
        const std::string origin = request.url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(request.timeout_seconds, 0);
        client.set_read_timeout(request.timeout_seconds, 0);
        client.set_write_timeout(request.timeout_seconds, 0);

        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : request.headers) {
            if (k == "Content-Type")
                content_type = v;
            else
                headers.emplace(k, v);
        }
        auto res = client.Post(path, headers, request.body, content_type);
        if (!res)
            throw TransportError("POST " + origin + path + ": " + httplib::to_string(res.error()), 1);
        return {res->status, res->body};
    }
};

} // namespace

std::shared_ptr<Transport> make_http_transport()
{
    return std::make_shared<HttplibTransport>();
}

} // namespace usemention

#pragma once

#include <mutex>
#include <string>

#include "anchorsim/gateway/gateway.hpp"
#include "anchorsim/platform/platform.hpp"

namespace httplib {
class Server;
}

namespace anchorsim::api {

struct HttpRequest {
  std::string method;
  /// Decoded path, without query string.
  std::string path;
  /// Bearer token; empty when absent.
  std::string token;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  /// JSON document.
  std::string body;
};

/// One status per gateway error.
int status_for(gateway::GatewayErrc code);
constexpr int kNoAnchorYetStatus = 424;

/// JSON-over-HTTP surface of the gateway, the anchors and the auditor.
///
///   POST /tenants/{t}/unique-ids   {"ids": ["..", ..]}                      -> 202 {"tx": handle}
///   POST /tenants/{t}/scans        {"unique_id": "..", "meta": "..",
///                                   "scanned_at_ms": n (optional)}          -> 202 {"tx": handle}
///   GET  /tenants/{t}/history/{id}                                          -> 200 {"entries": [..]}
///   GET  /tenants/{t}/tx/{seq}                                              -> 200 tx status
///   GET  /tenants/{t}/audit                                                 -> 200 audit report
///   GET  /anchors/latest                                                    -> 200 anchor record
///
/// Errors carry {"error": name, "message": text}.
class HttpApi {
 public:
  /// `lock` guards the platform against the thread driving the clock.
  HttpApi(platform::Platform& platform, std::mutex& lock) : platform_(&platform), lock_(&lock) {}

  HttpResponse handle(const HttpRequest& request);

 private:
  HttpResponse route(const HttpRequest& request);

  platform::Platform* platform_;
  std::mutex* lock_;
};

/// Registers every route of `api` on `server`.
void bind(httplib::Server& server, HttpApi& api);

}  // namespace anchorsim::api

#include "anchorsim/api/http_api.hpp"

#include <httplib.h>

#include <charconv>

#include "anchorsim/io/json.hpp"

namespace anchorsim::api {

using gateway::GatewayErrc;
using gateway::GatewayError;
using io::Json;

namespace {

HttpResponse reply(int status, const Json& body) { return HttpResponse{status, body.dump()}; }

HttpResponse error(int status, std::string_view name, std::string_view message) {
  return reply(status, Json{{"error", name}, {"message", message}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 1;
  if (path.empty() || path[0] != '/') return parts;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string::npos) end = path.size();
    parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  if (!parts.empty() && parts.back().empty()) parts.pop_back();
  return parts;
}

Json parse_body(const std::string& body) {
  try {
    auto j = Json::parse(body);
    if (!j.is_object()) throw GatewayError(GatewayErrc::InvalidRequest, "body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error&) {
    throw GatewayError(GatewayErrc::InvalidRequest, "body is not valid JSON");
  }
}

std::string string_field(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw GatewayError(GatewayErrc::InvalidRequest, std::string("missing string field ") + key);
  }
  return j[key].get<std::string>();
}

}  // namespace

int status_for(GatewayErrc code) {
  switch (code) {
    case GatewayErrc::InvalidRequest: return 400;
    case GatewayErrc::Unauthorized: return 403;
    case GatewayErrc::UnknownTenant: return 404;
    case GatewayErrc::DuplicateId: return 409;
    case GatewayErrc::BatchTooLarge: return 413;
    case GatewayErrc::UnknownUniqueId: return 422;
    case GatewayErrc::NodeUnavailable: return 503;
  }
  return 500;
}

HttpResponse HttpApi::handle(const HttpRequest& request) {
  std::lock_guard guard(*lock_);
  try {
    return route(request);
  } catch (const GatewayError& e) {
    return error(status_for(e.code()), gateway::gateway_errc_name(e.code()), e.what());
  } catch (const audit::NoAnchorYet& e) {
    return error(kNoAnchorYetStatus, "NoAnchorYet", e.what());
  } catch (const chain::ChainError& e) {
    if (e.code() == chain::ChainErrc::NodeUnavailable) {
      return error(status_for(GatewayErrc::NodeUnavailable), "NodeUnavailable", e.what());
    }
    return error(400, chain::chain_errc_name(e.code()), e.what());
  }
}

HttpResponse HttpApi::route(const HttpRequest& req) {
  auto& gw = platform_->gateway();
  const auto parts = split_path(req.path);
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";

  if (parts.size() == 2 && parts[0] == "anchors" && parts[1] == "latest") {
    if (!get) return error(405, "MethodNotAllowed", "use GET");
    auto latest = anchor::committed_anchor(platform_->public_node());
    if (!latest) throw audit::NoAnchorYet("no anchor committed on the public chain");
    return reply(200, io::to_json(*latest));
  }
  if (parts.size() < 3 || parts[0] != "tenants") return error(404, "NotFound", "no such route");
  const std::string& tenant = parts[1];
  const std::string& what = parts[2];

  if (parts.size() == 3 && what == "unique-ids") {
    if (!post) return error(405, "MethodNotAllowed", "use POST");
    auto body = parse_body(req.body);
    if (!body.contains("ids") || !body["ids"].is_array()) {
      throw GatewayError(GatewayErrc::InvalidRequest, "missing array field ids");
    }
    std::vector<Bytes> ids;
    for (const auto& id : body["ids"]) {
      if (!id.is_string()) throw GatewayError(GatewayErrc::InvalidRequest, "ids must be strings");
      ids.push_back(to_bytes(id.get<std::string>()));
    }
    auto handle = gw.create_unique_ids(req.token, tenant, ids);
    return reply(202, Json{{"tx", io::to_json(handle)}});
  }
  if (parts.size() == 3 && what == "scans") {
    if (!post) return error(405, "MethodNotAllowed", "use POST");
    auto body = parse_body(req.body);
    auto id = string_field(body, "unique_id");
    auto meta = body.contains("meta") ? string_field(body, "meta") : std::string();
    auto at = platform_->now();
    if (body.contains("scanned_at_ms")) {
      if (!body["scanned_at_ms"].is_number_integer()) {
        throw GatewayError(GatewayErrc::InvalidRequest, "scanned_at_ms must be an integer");
      }
      at = sim::VirtualTime(body["scanned_at_ms"].get<std::int64_t>());
    }
    auto handle = gw.record_scan(req.token, tenant, to_bytes(id), at, to_bytes(meta));
    return reply(202, Json{{"tx", io::to_json(handle)}});
  }
  if (parts.size() == 4 && what == "history") {
    if (!get) return error(405, "MethodNotAllowed", "use GET");
    auto history = gw.read_history(req.token, tenant, to_bytes(parts[3]));
    Json entries = Json::array();
    for (const auto& e : history) entries.push_back(io::to_json(e));
    return reply(200, Json{{"tenant", tenant}, {"unique_id", parts[3]}, {"entries", std::move(entries)}});
  }
  if (parts.size() == 4 && what == "tx") {
    if (!get) return error(405, "MethodNotAllowed", "use GET");
    std::uint64_t seq = 0;
    const auto& s = parts[3];
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), seq);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw GatewayError(GatewayErrc::InvalidRequest, "transaction sequence must be a number");
    }
    gw.authorize_read(req.token, tenant);
    const auto& node = gw.node(tenant);
    try {
      return reply(200, io::to_json(gw.tx_status(req.token, tenant, chain::TxHandle{node.chain_id(), seq})));
    } catch (const chain::ChainError& e) {
      if (e.code() != chain::ChainErrc::UnknownHandle) throw;
      return error(404, "UnknownHandle", e.what());
    }
  }
  if (parts.size() == 3 && what == "audit") {
    if (!get) return error(405, "MethodNotAllowed", "use GET");
    gw.authorize_read(req.token, tenant);
    const auto& node = gw.node(tenant);
    auto report = audit::audit_tenant(node, platform_->public_node());
    report.tenant_name = tenant;
    return reply(200, io::to_json(report));
  }
  return error(404, "NotFound", "no such route");
}

void bind(httplib::Server& server, HttpApi& api) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    r.body = req.body;
    auto auth = req.get_header_value("Authorization");
    constexpr std::string_view bearer = "Bearer ";
    if (auth.rfind(bearer, 0) == 0) r.token = auth.substr(bearer.size());
    auto out = api.handle(r);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  server.Get(R"(/.*)", forward);
  server.Post(R"(/.*)", forward);
}

}  // namespace anchorsim::api

#include "anchorsim/gateway/gateway.hpp"

#include <algorithm>

namespace anchorsim::gateway {

namespace {

GatewayError unauthorized() { return GatewayError(GatewayErrc::Unauthorized, "credential not allowed for this request"); }

// Node outages surface as a gateway error so callers need one error type.
template <typename Fn>
auto via_node(Fn&& fn) {
  try {
    return fn();
  } catch (const chain::ChainError& e) {
    if (e.code() == chain::ChainErrc::NodeUnavailable) throw GatewayError(GatewayErrc::NodeUnavailable, e.what());
    throw;
  }
}

}  // namespace

const char* gateway_errc_name(GatewayErrc c) {
  switch (c) {
    case GatewayErrc::Unauthorized: return "Unauthorized";
    case GatewayErrc::UnknownTenant: return "UnknownTenant";
    case GatewayErrc::UnknownUniqueId: return "UnknownUniqueId";
    case GatewayErrc::DuplicateId: return "DuplicateId";
    case GatewayErrc::BatchTooLarge: return "BatchTooLarge";
    case GatewayErrc::InvalidRequest: return "InvalidRequest";
    case GatewayErrc::NodeUnavailable: return "NodeUnavailable";
  }
  return "?";
}

Gateway::Gateway(GatewayConfig config, Clock clock) : config_(config), clock_(std::move(clock)) {}

void Gateway::add_tenant(const std::string& tenant, chain::ChainNode& node) {
  if (tenants_.contains(tenant)) throw std::invalid_argument("tenant " + tenant + " already added");
  auto t = std::make_unique<Tenant>();
  t->node = &node;
  const auto& cfg = node.config();
  auto count = std::min(config_.triggers_per_tenant, cfg.authorities.size());
  for (std::size_t i = 0; i < count; ++i) {
    auto trig = std::make_unique<Trigger>();
    trig->authority = cfg.authorities[i];
    trig->writer = chain::AccountId::derive("writer", cfg.seed, static_cast<std::uint32_t>(i));
    trig->next_nonce = node.account_nonce(trig->writer);
    t->triggers.push_back(std::move(trig));
  }
  tenants_.emplace(tenant, std::move(t));
}

void Gateway::add_credential(const std::string& token, Credential credential) {
  credentials_[token] = std::move(credential);
}

std::vector<std::string> Gateway::tenants() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : tenants_) out.push_back(name);
  return out;
}

const Credential& Gateway::authenticate(const std::string& token) const {
  auto it = credentials_.find(token);
  if (it == credentials_.end()) throw unauthorized();
  return it->second;
}

void Gateway::authorize_read(const std::string& token, const std::string& tenant) const {
  const auto& cred = authenticate(token);
  if (cred.role == Role::PlatformWriter) return;
  if (cred.tenant != tenant) throw unauthorized();
}

const Gateway::Tenant& Gateway::find_tenant(const std::string& tenant) const {
  auto it = tenants_.find(tenant);
  if (it == tenants_.end()) throw GatewayError(GatewayErrc::UnknownTenant, "unknown tenant " + tenant);
  return *it->second;
}

Gateway::Tenant& Gateway::tenant_for_write(const std::string& token, const std::string& tenant) {
  if (authenticate(token).role != Role::PlatformWriter) throw unauthorized();
  return const_cast<Tenant&>(find_tenant(tenant));
}

const chain::ChainNode& Gateway::node(const std::string& tenant) const { return *find_tenant(tenant).node; }

Route Gateway::route(const std::string& tenant, RequestKind kind) {
  auto& t = const_cast<Tenant&>(find_tenant(tenant));
  if (kind == RequestKind::Read) return Route{Route::Target::ReadNode, 0};
  std::lock_guard guard(t.mu);
  auto index = t.cursor;
  t.cursor = (t.cursor + 1) % t.triggers.size();
  return Route{Route::Target::Trigger, index};
}

std::vector<std::uint64_t> Gateway::trigger_load(const std::string& tenant) const {
  const auto& t = find_tenant(tenant);
  std::vector<std::uint64_t> out;
  for (const auto& trig : t.triggers) {
    std::lock_guard guard(trig->mu);
    out.push_back(trig->submitted);
  }
  return out;
}

TxHandle Gateway::submit_via_trigger(Tenant& t, chain::Payload payload) {
  std::size_t index = 0;
  {
    std::lock_guard guard(t.mu);
    index = t.cursor;
    t.cursor = (t.cursor + 1) % t.triggers.size();
  }
  auto& trig = *t.triggers[index];
  // Per-trigger submission is serialized so nonces stay gapless.
  std::lock_guard guard(trig.mu);
  chain::Transaction tx;
  tx.sender = trig.writer;
  tx.nonce = trig.next_nonce;
  tx.gas_price = config_.gas_price;
  tx.gas_cost = t.node->config().gas.cost_of(payload);
  tx.payload = std::move(payload);
  tx.submitted_at = clock_();
  auto handle = via_node([&] { return t.node->submit(std::move(tx)); });
  ++trig.next_nonce;
  ++trig.submitted;
  return handle;
}

TxHandle Gateway::create_unique_ids(const std::string& token, const std::string& tenant, const std::vector<Bytes>& ids) {
  auto& t = tenant_for_write(token, tenant);
  if (ids.empty()) throw GatewayError(GatewayErrc::InvalidRequest, "empty batch");
  if (ids.size() > config_.max_batch) {
    throw GatewayError(GatewayErrc::BatchTooLarge, "batch of " + std::to_string(ids.size()) + " exceeds maximum " +
                                                       std::to_string(config_.max_batch));
  }
  for (const auto& id : ids) {
    if (id.empty() || id.size() > chain::registry::kMaxIdLength) {
      throw GatewayError(GatewayErrc::InvalidRequest, "unique id must be 1 to 64 bytes");
    }
  }

  std::unique_lock guard(t.mu);
  std::set<Bytes> batch;
  for (const auto& id : ids) {
    if (!batch.insert(id).second || t.claimed_ids.contains(id)) {
      throw GatewayError(GatewayErrc::DuplicateId, "unique id already registered: " + to_hex(id));
    }
    bool on_chain = via_node([&] { return t.node->read_state(chain::registry::uid_key(id)).has_value(); });
    if (on_chain) throw GatewayError(GatewayErrc::DuplicateId, "unique id already registered: " + to_hex(id));
  }
  t.claimed_ids.insert(batch.begin(), batch.end());
  guard.unlock();

  try {
    return submit_via_trigger(t, chain::RegisterUniqueIds{ids});
  } catch (...) {
    std::lock_guard undo(t.mu);
    for (const auto& id : ids) t.claimed_ids.erase(id);
    throw;
  }
}

TxHandle Gateway::record_scan(const std::string& token, const std::string& tenant, const Bytes& unique_id,
                              VirtualTime scanned_at, const Bytes& meta) {
  auto& t = tenant_for_write(token, tenant);
  bool exists = via_node([&] { return t.node->read_state(chain::registry::uid_key(unique_id)).has_value(); });
  if (!exists) throw GatewayError(GatewayErrc::UnknownUniqueId, "unique id not registered: " + to_hex(unique_id));
  return submit_via_trigger(t, chain::RecordScan{unique_id, scanned_at, meta});
}

std::vector<HistoryEntry> Gateway::read_history(const std::string& token, const std::string& tenant,
                                                const Bytes& unique_id) const {
  authorize_read(token, tenant);
  const auto& t = find_tenant(tenant);
  return via_node([&] {
    auto height = t.node->committed_height();
    auto registration = t.node->read_state(chain::registry::uid_key(unique_id), height);
    if (!registration) {
      throw GatewayError(GatewayErrc::UnknownUniqueId, "unique id not registered: " + to_hex(unique_id));
    }
    std::vector<HistoryEntry> out;
    out.push_back(HistoryEntry{HistoryEntry::Kind::Registration, chain::registry::decode_stamp(*registration), {}, {}});
    for (const auto& [key, value] : t.node->read_prefix(chain::registry::scan_prefix(unique_id), height)) {
      auto scan = chain::registry::decode_scan(value);
      out.push_back(HistoryEntry{HistoryEntry::Kind::Scan, scan.stamp, scan.scanned_at, scan.meta});
    }
    return out;
  });
}

chain::TxStatus Gateway::tx_status(const std::string& token, const std::string& tenant, const TxHandle& handle) const {
  authorize_read(token, tenant);
  const auto& t = find_tenant(tenant);
  return via_node([&] { return t.node->commit_status(handle); });
}

}  // namespace anchorsim::gateway

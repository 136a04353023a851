#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorsim/chain/chain.hpp"

namespace anchorsim::gateway {

using chain::TxHandle;
using sim::VirtualTime;

enum class GatewayErrc {
  Unauthorized,
  UnknownTenant,
  UnknownUniqueId,
  DuplicateId,
  BatchTooLarge,
  InvalidRequest,
  NodeUnavailable,
};

const char* gateway_errc_name(GatewayErrc c);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  GatewayErrc code() const { return code_; }

 private:
  GatewayErrc code_;
};

enum class Role { PlatformWriter, TenantReader, AuditorReader };

/// Static credential table entry. Readers are scoped to one tenant; the
/// platform writer may act on every tenant.
struct Credential {
  Role role = Role::TenantReader;
  std::string tenant;
};

struct GatewayConfig {
  std::size_t max_batch = 20;
  std::uint64_t gas_price = 1;
  std::size_t triggers_per_tenant = 3;
};

struct HistoryEntry {
  enum class Kind { Registration, Scan };
  Kind kind = Kind::Registration;
  chain::registry::WriteStamp stamp;
  std::optional<VirtualTime> scanned_at;
  Bytes meta;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct Route {
  enum class Target { Trigger, ReadNode };
  Target target = Target::ReadNode;
  std::size_t trigger = 0;
};

enum class RequestKind { Write, Read };

/// Platform owner's request surface: authorizes, routes writes round-robin
/// over a tenant's triggers, and serves reads from the tenant's read node.
class Gateway {
 public:
  using Clock = std::function<VirtualTime()>;

  Gateway(GatewayConfig config, Clock clock);

  /// One trigger per authority (up to `triggers_per_tenant`), each with its
  /// own writer account.
  void add_tenant(const std::string& tenant, chain::ChainNode& node);
  void add_credential(const std::string& token, Credential credential);
  std::vector<std::string> tenants() const;

  TxHandle create_unique_ids(const std::string& token, const std::string& tenant, const std::vector<Bytes>& ids);
  TxHandle record_scan(const std::string& token, const std::string& tenant, const Bytes& unique_id,
                       VirtualTime scanned_at, const Bytes& meta);
  /// Registration followed by scans, from committed state.
  std::vector<HistoryEntry> read_history(const std::string& token, const std::string& tenant,
                                         const Bytes& unique_id) const;
  chain::TxStatus tx_status(const std::string& token, const std::string& tenant, const TxHandle& handle) const;

  /// Next destination for a request; writes advance the round-robin cursor.
  Route route(const std::string& tenant, RequestKind kind);

  /// Throws Unauthorized unless `token` may read `tenant`'s data.
  void authorize_read(const std::string& token, const std::string& tenant) const;
  /// Throws Unauthorized for unknown tokens.
  const Credential& authenticate(const std::string& token) const;

  const chain::ChainNode& node(const std::string& tenant) const;
  /// Writes submitted through each trigger so far.
  std::vector<std::uint64_t> trigger_load(const std::string& tenant) const;

 private:
  struct Trigger {
    chain::AccountId authority;
    chain::AccountId writer;
    std::uint64_t next_nonce = 0;
    std::uint64_t submitted = 0;
    std::mutex mu;
  };
  struct Tenant {
    chain::ChainNode* node = nullptr;
    std::vector<std::unique_ptr<Trigger>> triggers;
    std::size_t cursor = 0;
    std::set<Bytes> claimed_ids;
    mutable std::mutex mu;
  };

  Tenant& tenant_for_write(const std::string& token, const std::string& tenant);
  const Tenant& find_tenant(const std::string& tenant) const;
  TxHandle submit_via_trigger(Tenant& t, chain::Payload payload);

  GatewayConfig config_;
  Clock clock_;
  std::map<std::string, std::unique_ptr<Tenant>> tenants_;
  std::map<std::string, Credential> credentials_;
};

}  // namespace anchorsim::gateway

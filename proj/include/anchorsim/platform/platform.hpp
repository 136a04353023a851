#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "anchorsim/anchor/engine.hpp"
#include "anchorsim/audit/auditor.hpp"
#include "anchorsim/chain/chain.hpp"
#include "anchorsim/gateway/gateway.hpp"
#include "anchorsim/sim/simulator.hpp"

namespace anchorsim::platform {

using sim::Duration;
using sim::VirtualTime;

/// 15 s blocks, 2 confirmations, 3 authorities, blocks even when idle.
chain::ChainConfig default_public_chain();
/// 5 s blocks, 80M gas, 3 authorities, 1 confirmation.
chain::ChainConfig default_tenant_chain(const std::string& name);

struct PlatformConfig {
  chain::ChainConfig public_chain = default_public_chain();
  std::vector<chain::ChainConfig> tenants;
  anchor::EngineConfig engine;
  gateway::GatewayConfig gateway;
  /// First anchor tick; defaults to one interval after start.
  std::optional<VirtualTime> first_tick;
  bool anchoring = true;
  /// One continuous auditor per tenant, polled after each public block.
  bool auditing = true;
};

/// Well-known gateway credentials installed by the platform.
inline const std::string kWriterToken = "platform-writer";
std::string reader_token(const std::string& tenant);
std::string auditor_token(const std::string& tenant);

/// The public chain, the tenant chains, the anchor engine, the gateway and
/// the auditors, wired onto one virtual clock.
class Platform {
 public:
  struct Tenant {
    std::string name;
    std::unique_ptr<chain::Chain> chain;
    std::unique_ptr<chain::ChainNode> node;
  };
  /// Chain index passed to block listeners for the public chain.
  static constexpr std::size_t kPublic = static_cast<std::size_t>(-1);
  using BlockListener = std::function<void(std::size_t chain_index, const chain::Block&)>;

  explicit Platform(PlatformConfig config);
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  const PlatformConfig& config() const { return config_; }
  sim::Simulator& simulator() { return sim_; }
  VirtualTime now() const { return sim_.now(); }

  chain::Chain& public_chain() { return *public_chain_; }
  chain::ChainNode& public_node() { return *public_node_; }
  std::size_t tenant_count() const { return tenants_.size(); }
  Tenant& tenant(std::size_t i) { return tenants_.at(i); }
  const Tenant& tenant(std::size_t i) const { return tenants_.at(i); }
  std::size_t tenant_index(const std::string& name) const;

  anchor::AnchorEngine& engine() { return *engine_; }
  gateway::Gateway& gateway() { return *gateway_; }
  std::vector<audit::ContinuousAuditor>& auditors() { return auditors_; }

  void on_block(BlockListener listener) { listeners_.push_back(std::move(listener)); }

  /// Schedules block production, anchor ticks and audits. Idempotent.
  void start();
  void run_until(VirtualTime until);
  /// An anchor tick at the current time, outside the interval schedule.
  anchor::TickResult tick();
  /// Runs while `keep_going()` holds, up to `limit`.
  bool run_while(const std::function<bool()>& keep_going, VirtualTime limit);

 private:
  void produce(std::size_t index, chain::Chain& chain);
  void arm_wakeup();

  PlatformConfig config_;
  sim::Simulator sim_;
  std::unique_ptr<chain::Chain> public_chain_;
  std::unique_ptr<chain::ChainNode> public_node_;
  std::vector<Tenant> tenants_;
  std::unique_ptr<anchor::AnchorEngine> engine_;
  std::unique_ptr<gateway::Gateway> gateway_;
  std::vector<audit::ContinuousAuditor> auditors_;
  std::vector<BlockListener> listeners_;
  std::set<VirtualTime> armed_;
  bool started_ = false;
};

}  // namespace anchorsim::platform

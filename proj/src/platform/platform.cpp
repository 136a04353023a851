#include "anchorsim/platform/platform.hpp"

#include <stdexcept>

namespace anchorsim::platform {

chain::ChainConfig default_public_chain() {
  chain::ChainConfig c;
  c.name = "public";
  c.seed = to_bytes("public");
  c.inter_block_time = std::chrono::seconds(15);
  c.confirmations_required = 2;
  c.produce_empty_blocks = true;
  c.with_authorities(3);
  return c;
}

chain::ChainConfig default_tenant_chain(const std::string& name) {
  chain::ChainConfig c;
  c.name = name;
  c.seed = to_bytes(name);
  c.with_authorities(3);
  return c;
}

std::string reader_token(const std::string& tenant) { return "reader-" + tenant; }
std::string auditor_token(const std::string& tenant) { return "auditor-" + tenant; }

Platform::Platform(PlatformConfig config) : config_(std::move(config)) {
  public_chain_ = std::make_unique<chain::Chain>(config_.public_chain);
  public_node_ = std::make_unique<chain::ChainNode>(*public_chain_);
  engine_ = std::make_unique<anchor::AnchorEngine>(config_.engine, *public_node_);
  gateway_ = std::make_unique<gateway::Gateway>(config_.gateway, [this] { return sim_.now(); });
  gateway_->add_credential(kWriterToken, {gateway::Role::PlatformWriter, {}});

  tenants_.reserve(config_.tenants.size());
  for (const auto& cfg : config_.tenants) {
    Tenant t;
    t.name = cfg.name;
    t.chain = std::make_unique<chain::Chain>(cfg);
    t.node = std::make_unique<chain::ChainNode>(*t.chain);
    engine_->register_tenant({t.chain->chain_id(), t.node.get(), Duration::zero(), t.name});
    gateway_->add_tenant(t.name, *t.node);
    gateway_->add_credential(reader_token(t.name), {gateway::Role::TenantReader, t.name});
    gateway_->add_credential(auditor_token(t.name), {gateway::Role::AuditorReader, t.name});
    if (config_.auditing) auditors_.emplace_back(*t.node, *public_node_, t.name);
    tenants_.push_back(std::move(t));
  }
}

std::size_t Platform::tenant_index(const std::string& name) const {
  for (std::size_t i = 0; i < tenants_.size(); ++i) {
    if (tenants_[i].name == name) return i;
  }
  throw std::out_of_range("unknown tenant " + name);
}

void Platform::produce(std::size_t index, chain::Chain& chain) {
  const chain::Block* block = chain.produce_block(sim_.now());
  if (block == nullptr) return;
  for (const auto& listener : listeners_) listener(index, *block);
  if (config_.anchoring) {
    engine_->advance(sim_.now());
    arm_wakeup();
  }
  if (index == kPublic && !auditors_.empty()) {
    sim_.schedule_in(Duration::zero(), sim::Phase::Observers, [this] {
      for (auto& a : auditors_) a.poll();
    });
  }
}

void Platform::arm_wakeup() {
  auto at = engine_->next_wakeup();
  if (!at) return;
  auto when = std::max(*at, sim_.now());
  if (!armed_.insert(when).second) return;
  sim_.schedule_at(when, sim::Phase::Protocol, [this, when] {
    armed_.erase(when);
    engine_->advance(sim_.now());
    arm_wakeup();
  });
}

void Platform::start() {
  if (started_) return;
  started_ = true;
  const auto t0 = sim_.now();

  const auto& pc = public_chain_->config();
  sim_.schedule_every(pc.genesis_time + pc.inter_block_time, pc.inter_block_time, sim::Phase::Blocks,
                      [this] { produce(kPublic, *public_chain_); });
  for (std::size_t i = 0; i < tenants_.size(); ++i) {
    const auto& tc = tenants_[i].chain->config();
    sim_.schedule_every(tc.genesis_time + tc.inter_block_time, tc.inter_block_time, sim::Phase::Blocks,
                        [this, i] { produce(i, *tenants_[i].chain); });
  }

  if (config_.anchoring) {
    auto first = config_.first_tick.value_or(t0 + config_.engine.anchor_interval);
    sim_.schedule_every(first, config_.engine.anchor_interval, sim::Phase::Ticks, [this] { tick(); });
  }
}

anchor::TickResult Platform::tick() {
  auto result = engine_->schedule_tick(sim_.now());
  arm_wakeup();
  return result;
}

void Platform::run_until(VirtualTime until) {
  start();
  sim_.run_until(until);
}

bool Platform::run_while(const std::function<bool()>& keep_going, VirtualTime limit) {
  start();
  return sim_.run_while(keep_going, limit);
}

}  // namespace anchorsim::platform

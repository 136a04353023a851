#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "anchorsim/anchor/engine.hpp"
#include "anchorsim/audit/auditor.hpp"
#include "anchorsim/chain/chain.hpp"
#include "anchorsim/gateway/gateway.hpp"

namespace anchorsim::io {

using Json = nlohmann::ordered_json;

/// A config document that does not match the schema: unknown keys, wrong
/// types or out-of-range values.
class ConfigInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const chain::AnchorRecord& r);
Json to_json(const chain::TxHandle& h);
Json to_json(const chain::TxStatus& s);
/// Header plus one summary object per transaction.
Json to_json(const chain::Block& b);
Json to_json(const anchor::RoundReport& r);
Json to_json(const audit::AuditReport& r);
Json to_json(const gateway::HistoryEntry& e);

/// Chain config document, applied over `base`:
///   name, seed, genesis_time_ms, inter_block_time_ms, gas_limit,
///   authorities (count, or list of 40-hex-digit account ids),
///   confirmations_required, produce_empty_blocks,
///   gas {register_batch, record_scan, store_trie, public_anchor}
chain::ChainConfig chain_config_from_json(const Json& j, chain::ChainConfig base);
Json to_json(const chain::ChainConfig& c);

/// Engine config document, applied over `base`:
///   anchor_interval_ms, query_timeout_ms, query_latency_ms,
///   public_commit_deadline_ms, app_max_gas_price, prioritize_anchor
anchor::EngineConfig engine_config_from_json(const Json& j, anchor::EngineConfig base);
Json to_json(const anchor::EngineConfig& c);

/// Parses a file; throws ConfigInvalid on I/O or syntax errors.
Json read_json_file(const std::string& path);

/// Rejects keys outside `allowed`.
void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what);

}  // namespace anchorsim::io

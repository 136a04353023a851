#include "anchorsim/io/json.hpp"

#include <algorithm>
#include <fstream>

namespace anchorsim::io {

namespace {

Json optional_ms(const std::optional<sim::VirtualTime>& t) { return t ? Json(t->count()) : Json(nullptr); }

template <typename T>
T get(const Json& j, std::string_view key, std::string_view what) {
  try {
    return j.at(std::string(key)).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigInvalid(std::string(what) + "." + std::string(key) + " has the wrong type");
  }
}

std::chrono::milliseconds get_ms(const Json& j, std::string_view key, std::string_view what, bool allow_zero = false) {
  auto v = get<std::int64_t>(j, key, what);
  if (v < 0 || (v == 0 && !allow_zero)) {
    throw ConfigInvalid(std::string(what) + "." + std::string(key) + " must be positive");
  }
  return std::chrono::milliseconds(v);
}

}  // namespace

void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw ConfigInvalid(std::string(what) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigInvalid("unknown key " + std::string(what) + "." + key);
    }
  }
}

Json to_json(const chain::AnchorRecord& r) {
  return Json{{"round_id", r.round_id},
              {"root", r.root.hex()},
              {"previous_root", r.previous_root.hex()},
              {"anchored_at_ms", r.anchored_at.count()}};
}

Json to_json(const chain::TxHandle& h) { return Json{{"chain_id", h.chain_id.hex()}, {"seq", h.seq}}; }

Json to_json(const chain::TxStatus& s) {
  Json j{{"state", chain::tx_state_name(s.state)},
         {"height", s.height ? Json(*s.height) : Json(nullptr)},
         {"submitted_at_ms", s.submitted_at.count()},
         {"included_at_ms", optional_ms(s.included_at)}};
  if (!s.failure.empty()) j["failure"] = s.failure;
  return j;
}

Json to_json(const chain::Block& b) {
  Json txs = Json::array();
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    const auto& tx = b.transactions[i];
    txs.push_back(Json{{"seq", b.tx_seqs.at(i)},
                       {"sender", tx.sender.hex()},
                       {"nonce", tx.nonce},
                       {"gas_price", tx.gas_price},
                       {"gas_cost", tx.gas_cost},
                       {"payload", chain::payload_name(tx.payload)},
                       {"submitted_at_ms", tx.submitted_at.count()}});
  }
  const auto& h = b.header;
  return Json{{"height", h.height},
              {"hash", h.hash().hex()},
              {"parent_hash", h.parent_hash.hex()},
              {"timestamp_ms", h.timestamp.count()},
              {"state_root", h.state_root.hex()},
              {"tx_root", h.tx_root.hex()},
              {"producer", h.producer.hex()},
              {"gas_used", b.gas_used},
              {"transactions", std::move(txs)}};
}

Json to_json(const anchor::RoundReport& r) {
  Json tenants = Json::array();
  for (const auto& [id, t] : r.per_tenant) {
    Json e{{"chain_id", id.hex()}, {"name", t.name}, {"change", anchor::leaf_change_name(t.change)}};
    if (t.leaf) {
      e["leaf"] = Json{{"state_root", t.leaf->state_root.hex()},
                       {"block_number", t.leaf->block_number},
                       {"block_hash", t.leaf->block_hash.hex()}};
    }
    e["store_tx"] = t.store_tx ? Json(chain::tx_state_name(*t.store_tx)) : Json(nullptr);
    tenants.push_back(std::move(e));
  }
  return Json{{"round_id", r.round_id ? Json(*r.round_id) : Json(nullptr)},
              {"outcome", anchor::round_outcome_name(r.outcome)},
              {"reason", r.reason ? Json(anchor::failure_reason_name(*r.reason)) : Json(nullptr)},
              {"started_ms", r.started.count()},
              {"finished_ms", r.finished.count()},
              {"duration_ms", r.duration().count()},
              {"public_tx", r.public_tx ? Json(chain::tx_state_name(*r.public_tx)) : Json(nullptr)},
              {"record", r.record ? to_json(*r.record) : Json(nullptr)},
              {"tenants", std::move(tenants)}};
}

Json to_json(const audit::AuditReport& r) {
  auto digest = [](const std::optional<roots::Digest>& d) { return d ? Json(d->hex()) : Json(nullptr); };
  Json j{{"tenant", r.tenant.hex()},
         {"tenant_name", r.tenant_name},
         {"anchor_round", r.anchor_round},
         {"verified_round", r.verified_round},
         {"verdict", r.pass ? "Pass" : "Fail"},
         {"reason", r.reason},
         {"leaf_check",
          {{"result", audit::leaf_result_name(r.leaf_check.result)},
           {"expected", digest(r.leaf_check.expected)},
           {"found", digest(r.leaf_check.found)}}},
         {"root_check",
          {{"result", audit::root_result_name(r.root_check.result)},
           {"expected", digest(r.root_check.expected)},
           {"found", digest(r.root_check.found)}}},
         {"proof_check", audit::proof_result_name(r.proof_check)},
         {"history_consistent", r.history_consistent}};
  if (r.leaf) j["leaf"] = Json{{"block_number", r.leaf->block_number}, {"block_hash", r.leaf->block_hash.hex()}};
  return j;
}

Json to_json(const gateway::HistoryEntry& e) {
  Json j{{"kind", e.kind == gateway::HistoryEntry::Kind::Registration ? "registration" : "scan"},
         {"writer", e.stamp.writer.hex()},
         {"height", e.stamp.height},
         {"timestamp_ms", e.stamp.timestamp.count()}};
  if (e.kind == gateway::HistoryEntry::Kind::Scan) {
    j["scanned_at_ms"] = optional_ms(e.scanned_at);
    j["meta"] = to_string(e.meta);
  }
  return j;
}

chain::ChainConfig chain_config_from_json(const Json& j, chain::ChainConfig c) {
  constexpr std::string_view what = "chain";
  expect_keys(j,
              {"name", "seed", "genesis_time_ms", "inter_block_time_ms", "gas_limit", "authorities",
               "confirmations_required", "produce_empty_blocks", "gas"},
              what);
  if (j.contains("name")) c.name = get<std::string>(j, "name", what);
  bool reseed = j.contains("seed");
  if (reseed) c.seed = to_bytes(get<std::string>(j, "seed", what));
  if (j.contains("genesis_time_ms")) c.genesis_time = get_ms(j, "genesis_time_ms", what, true);
  if (j.contains("inter_block_time_ms")) c.inter_block_time = get_ms(j, "inter_block_time_ms", what);
  if (j.contains("gas_limit")) c.gas_limit = get<std::uint64_t>(j, "gas_limit", what);
  if (j.contains("confirmations_required")) {
    c.confirmations_required = get<std::uint32_t>(j, "confirmations_required", what);
  }
  if (j.contains("produce_empty_blocks")) c.produce_empty_blocks = get<bool>(j, "produce_empty_blocks", what);
  if (j.contains("authorities")) {
    const auto& a = j["authorities"];
    if (a.is_number_unsigned()) {
      c.with_authorities(a.get<std::uint32_t>());
    } else if (a.is_array()) {
      c.authorities.clear();
      try {
        for (const auto& id : a) c.authorities.push_back(chain::AccountId::from_hex(id.get<std::string>()));
      } catch (const std::exception&) {
        throw ConfigInvalid("chain.authorities entries must be 40 hex digits");
      }
    } else {
      throw ConfigInvalid("chain.authorities must be a count or a list of account ids");
    }
  } else if (reseed) {
    c.with_authorities(static_cast<std::uint32_t>(std::max<std::size_t>(c.authorities.size(), 1)));
  }
  if (j.contains("gas")) {
    const auto& g = j["gas"];
    expect_keys(g, {"register_batch", "record_scan", "store_trie", "public_anchor"}, "chain.gas");
    if (g.contains("register_batch")) c.gas.register_batch = get<std::uint64_t>(g, "register_batch", "chain.gas");
    if (g.contains("record_scan")) c.gas.record_scan = get<std::uint64_t>(g, "record_scan", "chain.gas");
    if (g.contains("store_trie")) c.gas.store_trie = get<std::uint64_t>(g, "store_trie", "chain.gas");
    if (g.contains("public_anchor")) c.gas.public_anchor = get<std::uint64_t>(g, "public_anchor", "chain.gas");
  }
  return c;
}

Json to_json(const chain::ChainConfig& c) {
  Json auth = Json::array();
  for (const auto& a : c.authorities) auth.push_back(a.hex());
  return Json{{"name", c.name},
              {"seed", to_string(c.seed)},
              {"genesis_time_ms", c.genesis_time.count()},
              {"inter_block_time_ms", c.inter_block_time.count()},
              {"gas_limit", c.gas_limit},
              {"authorities", std::move(auth)},
              {"confirmations_required", c.confirmations_required},
              {"produce_empty_blocks", c.produce_empty_blocks},
              {"gas",
               {{"register_batch", c.gas.register_batch},
                {"record_scan", c.gas.record_scan},
                {"store_trie", c.gas.store_trie},
                {"public_anchor", c.gas.public_anchor}}}};
}

anchor::EngineConfig engine_config_from_json(const Json& j, anchor::EngineConfig c) {
  constexpr std::string_view what = "engine";
  expect_keys(j,
              {"anchor_interval_ms", "query_timeout_ms", "query_latency_ms", "public_commit_deadline_ms",
               "app_max_gas_price", "prioritize_anchor"},
              what);
  if (j.contains("anchor_interval_ms")) c.anchor_interval = get_ms(j, "anchor_interval_ms", what);
  if (j.contains("query_timeout_ms")) c.query_timeout = get_ms(j, "query_timeout_ms", what);
  if (j.contains("query_latency_ms")) c.query_latency = get_ms(j, "query_latency_ms", what, true);
  if (j.contains("public_commit_deadline_ms")) {
    c.public_commit_deadline = get_ms(j, "public_commit_deadline_ms", what);
  }
  if (j.contains("app_max_gas_price")) c.app_max_gas_price = get<std::uint64_t>(j, "app_max_gas_price", what);
  if (j.contains("prioritize_anchor")) c.prioritize_anchor = get<bool>(j, "prioritize_anchor", what);
  return c;
}

Json to_json(const anchor::EngineConfig& c) {
  return Json{{"anchor_interval_ms", c.anchor_interval.count()},
              {"query_timeout_ms", c.query_timeout.count()},
              {"query_latency_ms", c.query_latency.count()},
              {"public_commit_deadline_ms", c.public_commit_deadline.count()},
              {"app_max_gas_price", c.app_max_gas_price},
              {"prioritize_anchor", c.prioritize_anchor}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigInvalid(path + ": " + e.what());
  }
}

}  // namespace anchorsim::io

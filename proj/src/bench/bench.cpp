#include "anchorsim/bench/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <type_traits>

#include "anchorsim/chain/registry.hpp"

namespace anchorsim::bench {

using io::ConfigInvalid;
using io::Json;
using namespace std::chrono_literals;

namespace {

constexpr Duration kMinute = 1min;

double seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

std::size_t minute_of(VirtualTime t) { return static_cast<std::size_t>(t / kMinute); }

void bump(std::vector<std::uint64_t>& v, std::size_t at, std::uint64_t by = 1) {
  if (v.size() <= at) v.resize(at + 1, 0);
  v[at] += by;
}

std::uint64_t at_or_zero(const std::vector<std::uint64_t>& v, std::size_t i) { return i < v.size() ? v[i] : 0; }

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T field(const Json& j, const char* key, std::string_view what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigInvalid(std::string(what) + "." + key + " has the wrong type");
  }
}

Duration ms_field(const Json& j, const char* key, std::string_view what) {
  auto v = field<std::int64_t>(j, key, what);
  if (v < 0) throw ConfigInvalid(std::string(what) + "." + key + " must not be negative");
  return Duration(v);
}

LoadProfile profile_from_json(const Json& j) {
  io::expect_keys(j, {"name", "points", "burst"}, "tenants[]");
  LoadProfile p;
  if (j.contains("points")) {
    if (!j["points"].is_array()) throw ConfigInvalid("tenants[].points must be a list of [ms, tps]");
    for (const auto& pt : j["points"]) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number_integer() || !pt[1].is_number()) {
        throw ConfigInvalid("tenants[].points must be a list of [ms, tps]");
      }
      p.points.emplace_back(Duration(pt[0].get<std::int64_t>()), pt[1].get<double>());
    }
  }
  if (j.contains("burst")) {
    const auto& b = j["burst"];
    io::expect_keys(b, {"tps", "length_ms", "period_ms", "offset_ms"}, "tenants[].burst");
    Burst burst;
    burst.tps = field<double>(b, "tps", "burst");
    burst.length = ms_field(b, "length_ms", "burst");
    burst.period = ms_field(b, "period_ms", "burst");
    if (b.contains("offset_ms")) burst.offset = ms_field(b, "offset_ms", "burst");
    p.burst = burst;
  }
  return p;
}

Json profile_to_json(const LoadProfile& p) {
  Json points = Json::array();
  for (const auto& [at, tps] : p.points) points.push_back(Json::array({at.count(), tps}));
  Json j{{"points", std::move(points)}};
  if (p.burst) {
    j["burst"] = Json{{"tps", p.burst->tps},
                      {"length_ms", p.burst->length.count()},
                      {"period_ms", p.burst->period.count()},
                      {"offset_ms", p.burst->offset.count()}};
  }
  return j;
}

// Stable across runs and platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

const char* scale_name(Scale s) { return s == Scale::Desk ? "desk" : "paper"; }

double LoadProfile::rate_at(Duration t) const {
  if (burst && burst->period > Duration::zero() && t >= burst->offset &&
      (t - burst->offset) % burst->period < burst->length) {
    return burst->tps;
  }
  if (points.empty()) return 0;
  if (t <= points.front().first) return points.front().second;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& [t1, r1] = points[i];
    if (t <= t1) {
      const auto& [t0, r0] = points[i - 1];
      if (t1 == t0) return r1;
      return r0 + (r1 - r0) * seconds(t - t0) / seconds(t1 - t0);
    }
  }
  return points.back().second;
}

double LoadProfile::peak() const {
  double p = 0;
  for (const auto& pt : points) p = std::max(p, pt.second);
  if (burst) p = std::max(p, burst->tps);
  return p;
}

std::uint64_t ExperimentConfig::batches_per_block() const {
  const auto batch_gas = tenant_chain.gas.register_batch;
  return batch_gas == 0 ? 0 : tenant_chain.gas_limit / batch_gas;
}

double ExperimentConfig::cap_tps() const {
  return static_cast<double>(batches_per_block()) / seconds(tenant_chain.inter_block_time);
}

ExperimentConfig reference_config(int test_id, Scale scale, std::uint64_t seed) {
  if (test_id < 1 || test_id > 4) throw ConfigInvalid("test must be 1, 2, 3 or 4");
  ExperimentConfig c;
  c.test_id = test_id;
  c.scale = scale;
  c.seed = seed;
  c.tenant_chain = platform::default_tenant_chain("tenant");
  c.public_chain = platform::default_public_chain();
  if (scale == Scale::Desk) {
    c.tenant_chain.gas_limit = 8'000'000;
    c.tenant_chain.inter_block_time = 1s;
    c.load_duration = 10min;
    c.engine.anchor_interval = 1min;
  } else {
    c.tenant_chain.gas_limit = 80'000'000;
    c.tenant_chain.inter_block_time = 5s;
    c.load_duration = 59min;
    c.engine.anchor_interval = 10min;
  }

  const double cap = c.cap_tps();
  const double base = 18.0 / 15.2 * cap;
  const double peak = 25.0 / 15.2 * cap;
  LoadProfile profile;
  switch (test_id) {
    case 1:
      profile = LoadProfile::constant(0.8 * cap);
      break;
    case 2:
      profile.points = {{Duration::zero(), base}, {c.load_duration, cap}};
      break;
    default:
      profile = LoadProfile::constant(base);
      profile.burst = Burst{peak, 43s, 10min, 5min};
      break;
  }
  const int tenants = test_id == 4 ? 3 : 1;
  for (int i = 0; i < tenants; ++i) {
    c.tenants.push_back({std::string("tenant-") + static_cast<char>('a' + i), profile});
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.test_id && (*c.test_id < 1 || *c.test_id > 4)) throw ConfigInvalid("test must be 1, 2, 3 or 4");
  if (c.tenants.empty()) throw ConfigInvalid("at least one tenant is required");
  std::set<std::string> names;
  for (const auto& t : c.tenants) {
    if (t.name.empty()) throw ConfigInvalid("tenant names must not be empty");
    if (!names.insert(t.name).second) throw ConfigInvalid("duplicate tenant " + t.name);
    for (const auto& [at, tps] : t.profile.points) {
      if (at < Duration::zero()) throw ConfigInvalid("load profile times must not be negative");
      if (!std::isfinite(tps) || tps < 0) throw ConfigInvalid("load profile rates must be non-negative");
    }
    for (std::size_t i = 1; i < t.profile.points.size(); ++i) {
      if (t.profile.points[i].first < t.profile.points[i - 1].first) {
        throw ConfigInvalid("load profile points must be in time order");
      }
    }
    if (const auto& b = t.profile.burst) {
      if (!std::isfinite(b->tps) || b->tps < 0) throw ConfigInvalid("burst rate must be non-negative");
      if (b->period <= Duration::zero() || b->length > b->period) {
        throw ConfigInvalid("burst needs a positive period no shorter than its length");
      }
    }
  }
  if (c.batch_size == 0 || c.batch_size > gateway::GatewayConfig{}.max_batch) {
    throw ConfigInvalid("batch_size must be between 1 and " + std::to_string(gateway::GatewayConfig{}.max_batch));
  }
  if (c.load_duration <= Duration::zero()) throw ConfigInvalid("load duration must be positive");
  if (c.drain_limit < Duration::zero()) throw ConfigInvalid("drain limit must not be negative");
  for (const auto* chain : {&c.tenant_chain, &c.public_chain}) {
    if (chain->inter_block_time <= Duration::zero()) throw ConfigInvalid("inter-block time must be positive");
    if (chain->confirmations_required == 0) throw ConfigInvalid("confirmations must be at least 1");
    if (chain->authorities.empty()) throw ConfigInvalid("a chain needs at least one authority");
  }
  if (c.batches_per_block() == 0) throw ConfigInvalid("a batch does not fit into a tenant block");
  if (c.engine.anchor_interval <= Duration::zero()) throw ConfigInvalid("anchor interval must be positive");
}

ExperimentConfig apply_overrides(const Json& doc, ExperimentConfig c) {
  io::expect_keys(doc,
                  {"test", "scale", "seed", "batch_size", "load_duration_ms", "drain_limit_ms", "first_tick_ms",
                   "anchoring", "auditing", "tenant_chain", "public_chain", "engine", "tenants"},
                  "bench");
  if (doc.contains("seed")) c.seed = field<std::uint64_t>(doc, "seed", "bench");
  if (doc.contains("batch_size")) c.batch_size = field<std::size_t>(doc, "batch_size", "bench");
  if (doc.contains("load_duration_ms")) c.load_duration = ms_field(doc, "load_duration_ms", "bench");
  if (doc.contains("drain_limit_ms")) c.drain_limit = ms_field(doc, "drain_limit_ms", "bench");
  if (doc.contains("first_tick_ms")) c.first_tick = VirtualTime(ms_field(doc, "first_tick_ms", "bench"));
  if (doc.contains("anchoring")) c.anchoring = field<bool>(doc, "anchoring", "bench");
  if (doc.contains("auditing")) c.auditing = field<bool>(doc, "auditing", "bench");
  if (doc.contains("tenant_chain")) c.tenant_chain = io::chain_config_from_json(doc["tenant_chain"], c.tenant_chain);
  if (doc.contains("public_chain")) c.public_chain = io::chain_config_from_json(doc["public_chain"], c.public_chain);
  if (doc.contains("engine")) c.engine = io::engine_config_from_json(doc["engine"], c.engine);
  if (doc.contains("tenants")) {
    if (!doc["tenants"].is_array()) throw ConfigInvalid("bench.tenants must be a list");
    c.tenants.clear();
    for (const auto& t : doc["tenants"]) {
      if (!t.is_object()) throw ConfigInvalid("bench.tenants entries must be objects");
      c.tenants.push_back({field<std::string>(t, "name", "tenants[]"), profile_from_json(t)});
    }
    c.test_id.reset();
  }
  return c;
}

ExperimentConfig load_config(const Json& doc, int default_test, Scale default_scale,
                             std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigInvalid("bench config must be an object");
  int test = doc.contains("test") && !doc["test"].is_null() ? field<int>(doc, "test", "bench") : default_test;
  Scale scale = default_scale;
  if (doc.contains("scale")) {
    auto s = field<std::string>(doc, "scale", "bench");
    if (s == "desk") {
      scale = Scale::Desk;
    } else if (s == "paper") {
      scale = Scale::Paper;
    } else {
      throw ConfigInvalid("bench.scale must be desk or paper");
    }
  }
  auto c = apply_overrides(doc, reference_config(test, scale));
  if (seed_override) c.seed = *seed_override;
  validate(c);
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json tenants = Json::array();
  for (const auto& t : c.tenants) {
    Json e{{"name", t.name}};
    e.update(profile_to_json(t.profile));
    tenants.push_back(std::move(e));
  }
  Json j{{"test", c.test_id ? Json(*c.test_id) : Json(nullptr)},
         {"scale", scale_name(c.scale)},
         {"seed", c.seed},
         {"batch_size", c.batch_size},
         {"load_duration_ms", c.load_duration.count()},
         {"drain_limit_ms", c.drain_limit.count()},
         {"anchoring", c.anchoring},
         {"auditing", c.auditing},
         {"tenant_chain", io::to_json(c.tenant_chain)},
         {"public_chain", io::to_json(c.public_chain)},
         {"engine", io::to_json(c.engine)},
         {"tenants", std::move(tenants)}};
  if (c.first_tick) j["first_tick_ms"] = c.first_tick->count();
  return j;
}

std::vector<std::int64_t> TenantSeries::backlog() const {
  std::size_t n = std::max({sent.size(), included.size(), errors.size()});
  std::vector<std::int64_t> out(n);
  std::int64_t running = 0;
  for (std::size_t m = 0; m < n; ++m) {
    running += static_cast<std::int64_t>(at_or_zero(sent, m)) - static_cast<std::int64_t>(at_or_zero(included, m)) -
               static_cast<std::int64_t>(at_or_zero(errors, m));
    out[m] = running;
  }
  return out;
}

std::uint64_t TenantSeries::total_sent() const { return std::accumulate(sent.begin(), sent.end(), std::uint64_t{0}); }
std::uint64_t TenantSeries::total_included() const {
  return std::accumulate(included.begin(), included.end(), std::uint64_t{0});
}
std::uint64_t TenantSeries::total_errors() const {
  return std::accumulate(errors.begin(), errors.end(), std::uint64_t{0});
}

std::size_t MetricsSeries::minutes() const { return static_cast<std::size_t>((finished + kMinute - 1ms) / kMinute); }

std::vector<MinuteRow> MetricsSeries::rows(std::size_t tenant) const {
  const auto& t = tenants.at(tenant);
  std::vector<MinuteRow> out;
  for (std::size_t m = 0; m < minutes(); ++m) {
    out.push_back({m, static_cast<double>(at_or_zero(t.sent, m)) / 60.0,
                   static_cast<double>(at_or_zero(t.included, m)) / 60.0, at_or_zero(t.errors, m)});
  }
  return out;
}

std::vector<MinuteRow> MetricsSeries::rows() const {
  std::vector<MinuteRow> out;
  for (std::size_t m = 0; m < minutes(); ++m) {
    std::uint64_t sent = 0, included = 0, errors = 0;
    for (const auto& t : tenants) {
      sent += at_or_zero(t.sent, m);
      included += at_or_zero(t.included, m);
      errors += at_or_zero(t.errors, m);
    }
    out.push_back({m, static_cast<double>(sent) / 60.0, static_cast<double>(included) / 60.0, errors});
  }
  return out;
}

// Non-homogeneous Poisson arrivals by thinning against the profile's peak.
class Experiment::LoadGenerator {
 public:
  LoadGenerator(Experiment& e, std::size_t index) : experiment_(&e), index_(index) {
    const auto& c = e.config_;
    const auto& name = c.tenants[index].name;
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                      static_cast<std::uint32_t>(fnv1a(name)), static_cast<std::uint32_t>(fnv1a(name) >> 32)};
    rng_.seed(seq);
    peak_ = c.tenants[index].profile.peak();
  }

  void schedule_next() {
    if (peak_ <= 0) return;
    const auto& c = experiment_->config_;
    std::exponential_distribution<double> gap(peak_);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const double end = seconds(c.load_duration);
    while (true) {
      clock_ += gap(rng_);
      if (clock_ >= end) return;
      auto at = Duration(static_cast<std::int64_t>(std::floor(clock_ * 1000.0)));
      if (coin(rng_) * peak_ < c.tenants[index_].profile.rate_at(at)) {
        experiment_->platform_->simulator().schedule_at(VirtualTime(at), sim::Phase::Load, [this] { send(); });
        return;
      }
    }
  }

 private:
  void send() {
    auto& e = *experiment_;
    const auto& name = e.config_.tenants[index_].name;
    auto& series = e.series_.tenants[index_];
    const auto now = e.platform_->now();
    std::vector<Bytes> ids;
    ids.reserve(e.config_.batch_size);
    char buf[96];
    for (std::size_t k = 0; k < e.config_.batch_size; ++k) {
      std::snprintf(buf, sizeof buf, "%s/%010llu/%02zu", name.c_str(), static_cast<unsigned long long>(batch_), k);
      ids.push_back(to_bytes(buf));
    }
    ++batch_;
    bump(series.sent, minute_of(now));
    ++e.unresolved_;
    try {
      e.platform_->gateway().create_unique_ids(platform::kWriterToken, name, ids);
    } catch (const gateway::GatewayError&) {
      bump(series.errors, minute_of(now));
      --e.unresolved_;
    }
    schedule_next();
  }

  Experiment* experiment_;
  std::size_t index_;
  std::mt19937_64 rng_;
  double peak_ = 0;
  double clock_ = 0;
  std::uint64_t batch_ = 0;
};

platform::PlatformConfig platform_config(const ExperimentConfig& config) {
  platform::PlatformConfig pc;
  pc.public_chain = config.public_chain;
  for (const auto& t : config.tenants) {
    auto chain = config.tenant_chain;
    chain.name = t.name;
    chain.seed = to_bytes(t.name);
    chain.with_authorities(static_cast<std::uint32_t>(config.tenant_chain.authorities.size()));
    pc.tenants.push_back(std::move(chain));
  }
  pc.engine = config.engine;
  pc.first_tick = config.first_tick;
  pc.anchoring = config.anchoring;
  pc.auditing = config.auditing;
  return pc;
}

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  validate(config_);
  platform_ = std::make_unique<platform::Platform>(platform_config(config_));
  series_.cap_tps = config_.cap_tps();
  series_.batch_size = config_.batch_size;
  series_.load_end = VirtualTime(config_.load_duration);
  for (const auto& t : config_.tenants) series_.tenants.push_back({t.name, {}, {}, {}, {}, {}});
  platform_->on_block([this](std::size_t index, const chain::Block& block) { record_block(index, block); });
  for (std::size_t i = 0; i < config_.tenants.size(); ++i) {
    generators_.push_back(std::make_unique<LoadGenerator>(*this, i));
    generators_.back()->schedule_next();
  }
}

Experiment::~Experiment() = default;

void Experiment::record_block(std::size_t index, const chain::Block& block) {
  if (index == platform::Platform::kPublic) {
    for (const auto& tx : block.transactions) {
      if (const auto* a = std::get_if<chain::PublicAnchor>(&tx.payload)) {
        series_.public_anchor_txs.push_back(a->record.round_id);
      }
    }
    return;
  }
  auto& s = series_.tenants[index];
  const auto& chain = *platform_->tenant(index).chain;
  const auto minute = minute_of(block.header.timestamp);
  BlockSample sample{block.header.height, block.header.timestamp, 0, 0, block.gas_used,
                     config_.tenant_chain.gas_limit - block.gas_used < config_.tenant_chain.gas.register_batch};
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const auto& tx = block.transactions[i];
    if (!std::holds_alternative<chain::RegisterUniqueIds>(tx.payload)) {
      ++sample.other_txs;
      continue;
    }
    ++sample.load_txs;
    --unresolved_;
    auto status = chain.status({chain.chain_id(), block.tx_seqs[i]});
    if (status.state == chain::TxState::Failed) {
      bump(s.errors, minute);
    } else {
      bump(s.included, minute);
      s.latencies_ms.push_back((block.header.timestamp - tx.submitted_at).count());
    }
  }
  s.blocks.push_back(sample);
}

void Experiment::run() {
  auto& p = *platform_;
  p.run_until(series_.load_end);
  p.run_while([this] { return unresolved_ > 0; }, series_.load_end + config_.drain_limit);
  auto end = VirtualTime(((p.now() + kMinute - 1ms) / kMinute) * kMinute);
  p.run_until(std::max(end, series_.load_end));
  series_.finished = p.now();
}

MetricsSeries Experiment::series() const {
  MetricsSeries out = series_;
  out.finished = platform_->now();
  out.rounds = platform_->engine().round_history();
  for (const auto& a : platform_->auditors()) out.audits.insert(out.audits.end(), a.reports().begin(), a.reports().end());
  return out;
}

MetricsSeries run_experiment(const ExperimentConfig& config) {
  Experiment e(config);
  e.run();
  return e.series();
}

Summary summarize(const MetricsSeries& series) {
  Summary s;
  for (const auto& t : series.tenants) {
    TenantSummary ts;
    ts.name = t.name;
    ts.sent = t.total_sent();
    ts.included = t.total_included();
    ts.errors = t.total_errors();
    ts.final_backlog = static_cast<std::int64_t>(ts.sent) - static_cast<std::int64_t>(ts.included) -
                       static_cast<std::int64_t>(ts.errors);

    std::map<std::size_t, bool> all_full;
    for (const auto& b : t.blocks) {
      ts.max_block_load = std::max(ts.max_block_load, b.load_txs);
      auto [it, fresh] = all_full.try_emplace(minute_of(b.timestamp), b.full);
      if (!fresh) it->second = it->second && b.full;
    }
    std::vector<double> saturated;
    for (const auto& [minute, full] : all_full) {
      if (full) saturated.push_back(static_cast<double>(at_or_zero(t.included, minute)) / 60.0);
    }
    ts.saturated_minutes = saturated.size();
    ts.plateau_tps = median(std::move(saturated));

    s.plateau_tps += ts.plateau_tps;
    s.sent += ts.sent;
    s.included += ts.included;
    s.errors += ts.errors;
    s.tenants.push_back(std::move(ts));
  }
  s.id_rate = s.plateau_tps * static_cast<double>(series.batch_size);

  std::size_t run = 0;
  for (const auto& r : series.rounds) {
    switch (r.outcome) {
      case anchor::RoundOutcome::Skipped:
        ++s.rounds_skipped;
        s.max_consecutive_skips = std::max(s.max_consecutive_skips, ++run);
        continue;
      case anchor::RoundOutcome::Success:
        ++s.rounds_succeeded;
        s.min_round = s.min_round ? std::min(*s.min_round, r.duration()) : r.duration();
        s.max_round = s.max_round ? std::max(*s.max_round, r.duration()) : r.duration();
        break;
      case anchor::RoundOutcome::Failed:
        ++s.rounds_failed;
        break;
      case anchor::RoundOutcome::InProgress:
        break;
    }
    run = 0;
  }
  for (const auto& a : series.audits) (a.pass ? s.audits_passed : s.audits_failed)++;
  return s;
}

Json to_json(const Summary& s) {
  auto ms = [](const std::optional<Duration>& d) { return d ? Json(d->count()) : Json(nullptr); };
  Json tenants = Json::array();
  for (const auto& t : s.tenants) {
    tenants.push_back(Json{{"name", t.name},
                           {"plateau_tps", t.plateau_tps},
                           {"saturated_minutes", t.saturated_minutes},
                           {"sent", t.sent},
                           {"included", t.included},
                           {"errors", t.errors},
                           {"final_backlog", t.final_backlog},
                           {"max_block_load", t.max_block_load}});
  }
  return Json{{"plateau_tps", s.plateau_tps},
              {"id_rate", s.id_rate},
              {"sent", s.sent},
              {"included", s.included},
              {"errors", s.errors},
              {"rounds",
               {{"succeeded", s.rounds_succeeded},
                {"failed", s.rounds_failed},
                {"skipped", s.rounds_skipped},
                {"max_consecutive_skips", s.max_consecutive_skips},
                {"min_duration_ms", ms(s.min_round)},
                {"max_duration_ms", ms(s.max_round)}}},
              {"audits", {{"passed", s.audits_passed}, {"failed", s.audits_failed}}},
              {"tenants", std::move(tenants)}};
}

std::string describe(const Summary& s) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "plateau " << s.plateau_tps << " tx/s (" << s.id_rate << " ids/s), sent " << s.sent << ", included "
      << s.included << ", errors " << s.errors << "\n";
  for (const auto& t : s.tenants) {
    out << "  " << t.name << ": plateau " << t.plateau_tps << " tx/s over " << t.saturated_minutes
        << " saturated min, " << t.max_block_load << " max per block, backlog " << t.final_backlog << "\n";
  }
  out << "rounds: " << s.rounds_succeeded << " ok, " << s.rounds_failed << " failed, " << s.rounds_skipped
      << " skipped (max " << s.max_consecutive_skips << " in a row)";
  if (s.min_round) out << ", " << seconds(*s.min_round) << "-" << seconds(*s.max_round) << " s";
  out << "\naudits: " << s.audits_passed << " pass, " << s.audits_failed << " fail\n";
  return out.str();
}

std::string format_csv(const std::vector<MinuteRow>& rows) {
  std::string out = "minute,sent_tps,included_tps,errors\n";
  for (const auto& r : rows) {
    out += std::to_string(r.minute) + "," + format_double(r.sent_tps) + "," + format_double(r.included_tps) + "," +
           std::to_string(r.errors) + "\n";
  }
  return out;
}

std::vector<MinuteRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "minute,sent_tps,included_tps,errors") {
    throw ConfigInvalid("csv header must be minute,sent_tps,included_tps,errors");
  }
  std::vector<MinuteRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    MinuteRow r;
    auto bad = [&] { return ConfigInvalid("csv line " + std::to_string(lineno) + " is malformed"); };
    auto comma = [&] {
      if (p == end || *p != ',') throw bad();
      ++p;
    };
    auto check = [&](std::from_chars_result res) {
      if (res.ec != std::errc()) throw bad();
      p = res.ptr;
    };
    check(std::from_chars(p, end, r.minute));
    comma();
    check(std::from_chars(p, end, r.sent_tps));
    comma();
    check(std::from_chars(p, end, r.included_tps));
    comma();
    check(std::from_chars(p, end, r.errors));
    if (p != end) throw bad();
    rows.push_back(r);
  }
  return rows;
}

void export_csv(const std::vector<MinuteRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << format_csv(rows);
  if (!out.flush()) throw IoError("cannot write " + path);
}

std::vector<MinuteRow> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_csv(text.str());
}

std::string format_rounds(const std::vector<anchor::RoundReport>& rounds) {
  std::string out;
  for (const auto& r : rounds) out += io::to_json(r).dump() + "\n";
  return out;
}

Json to_json(const MetricsSeries& series) {
  Json tenants = Json::array();
  for (const auto& t : series.tenants) {
    Json blocks = Json::array();
    for (const auto& b : t.blocks) {
      blocks.push_back(Json::array({b.height, b.timestamp.count(), b.load_txs, b.other_txs, b.gas_used, b.full}));
    }
    tenants.push_back(Json{{"name", t.name},
                           {"sent", t.sent},
                           {"included", t.included},
                           {"errors", t.errors},
                           {"blocks", std::move(blocks)},
                           {"latencies_ms", t.latencies_ms}});
  }
  Json rounds = Json::array();
  for (const auto& r : series.rounds) rounds.push_back(io::to_json(r));
  Json audits = Json::array();
  for (const auto& a : series.audits) audits.push_back(io::to_json(a));
  return Json{{"load_end_ms", series.load_end.count()},
              {"finished_ms", series.finished.count()},
              {"cap_tps", series.cap_tps},
              {"batch_size", series.batch_size},
              {"public_anchor_txs", series.public_anchor_txs},
              {"tenants", std::move(tenants)},
              {"rounds", std::move(rounds)},
              {"audits", std::move(audits)}};
}

MetricsSeries series_from_json(const Json& doc) {
  MetricsSeries s;
  try {
    s.load_end = VirtualTime(Duration(doc.at("load_end_ms").get<std::int64_t>()));
    s.finished = VirtualTime(Duration(doc.at("finished_ms").get<std::int64_t>()));
    s.cap_tps = doc.at("cap_tps").get<double>();
    s.batch_size = doc.at("batch_size").get<std::size_t>();
    s.public_anchor_txs = doc.at("public_anchor_txs").get<std::vector<std::uint64_t>>();
    for (const auto& t : doc.at("tenants")) {
      TenantSeries ts;
      ts.name = t.at("name").get<std::string>();
      ts.sent = t.at("sent").get<std::vector<std::uint64_t>>();
      ts.included = t.at("included").get<std::vector<std::uint64_t>>();
      ts.errors = t.at("errors").get<std::vector<std::uint64_t>>();
      ts.latencies_ms = t.at("latencies_ms").get<std::vector<std::int64_t>>();
      for (const auto& b : t.at("blocks")) {
        ts.blocks.push_back({b.at(0).get<std::uint64_t>(), VirtualTime(Duration(b.at(1).get<std::int64_t>())),
                             b.at(2).get<std::uint32_t>(), b.at(3).get<std::uint32_t>(), b.at(4).get<std::uint64_t>(),
                             b.at(5).get<bool>()});
      }
      s.tenants.push_back(std::move(ts));
    }
    for (const auto& r : doc.at("rounds")) {
      anchor::RoundReport report;
      if (!r.at("round_id").is_null()) report.round_id = r["round_id"].get<std::uint64_t>();
      report.started = VirtualTime(Duration(r.at("started_ms").get<std::int64_t>()));
      report.finished = VirtualTime(Duration(r.at("finished_ms").get<std::int64_t>()));
      const auto outcome = r.at("outcome").get<std::string>();
      bool known = false;
      for (auto o : {anchor::RoundOutcome::InProgress, anchor::RoundOutcome::Success, anchor::RoundOutcome::Skipped,
                     anchor::RoundOutcome::Failed}) {
        if (outcome == anchor::round_outcome_name(o)) {
          report.outcome = o;
          known = true;
        }
      }
      if (!known) throw ConfigInvalid("unknown round outcome " + outcome);
      s.rounds.push_back(std::move(report));
    }
    for (const auto& a : doc.at("audits")) {
      audit::AuditReport report;
      report.tenant_name = a.at("tenant_name").get<std::string>();
      report.anchor_round = a.at("anchor_round").get<std::uint64_t>();
      report.verified_round = a.at("verified_round").get<std::uint64_t>();
      report.pass = a.at("verdict").get<std::string>() == "Pass";
      report.reason = a.at("reason").get<std::string>();
      s.audits.push_back(std::move(report));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("malformed series document: ") + e.what());
  }
  return s;
}

const char* fault_name(Fault f) {
  switch (f) {
    case Fault::None: return "none";
    case Fault::TenantState: return "state";
    case Fault::StoredTree: return "tree";
    case Fault::FabricatedRoot: return "root";
  }
  return "?";
}

std::optional<Fault> parse_fault(std::string_view name) {
  for (auto f : {Fault::None, Fault::TenantState, Fault::StoredTree, Fault::FabricatedRoot}) {
    if (name == fault_name(f)) return f;
  }
  return std::nullopt;
}

namespace {

chain::Payload tampered(chain::Payload payload) {
  std::visit(
      [](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, chain::RegisterUniqueIds>) {
          p.ids.front().back() ^= 0x01;
        } else if constexpr (std::is_same_v<T, chain::RecordScan>) {
          p.meta.push_back('!');
        } else if constexpr (std::is_same_v<T, chain::StoreTrie>) {
          p.serialized.back() ^= 0x01;
        } else {
          p.record.anchored_at += 1ms;
        }
      },
      payload);
  return payload;
}

}  // namespace

void inject(platform::Platform& p, Fault fault, std::size_t index) {
  if (fault == Fault::None) return;
  auto latest = p.engine().latest_anchor();
  if (!latest) throw std::runtime_error("nothing anchored yet");
  auto& tenant = p.tenant(index);

  if (fault == Fault::TenantState) {
    auto report = audit::audit_tenant(*tenant.node, p.public_node());
    if (!report.leaf) throw std::runtime_error(tenant.name + " has no anchored leaf");
    for (auto h = report.leaf->block_number; h > 0; --h) {
      const auto& txs = tenant.chain->get_block(h).transactions;
      if (txs.empty()) continue;
      tenant.chain->rewrite_transaction(h, 0, tampered(txs.front().payload), false);
      return;
    }
    throw std::runtime_error(tenant.name + " has no transactions at or below its anchored height");
  }

  if (fault == Fault::StoredTree) {
    auto key = chain::registry::trie_round_key(latest->round_id);
    auto stored = tenant.chain->read_state(key);
    if (!stored || stored->empty()) throw std::runtime_error(tenant.name + " holds no tree for the latest round");
    (*stored)[stored->size() / 2] ^= 0x01;
    tenant.chain->overwrite_state(key, *stored);
    return;
  }

  auto& engine = p.engine();
  const auto limit = p.now() + engine.config().public_commit_deadline + engine.config().anchor_interval;
  p.run_while([&] { return engine.round_in_progress(); }, limit);
  engine.fabricate_next_root(roots::sha256(to_bytes("fabricated root")));
  p.tick();
  p.run_while([&] { return engine.round_in_progress(); }, limit + engine.config().public_commit_deadline);
}

}  // namespace anchorsim::bench

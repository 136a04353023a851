#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anchorsim/anchor/engine.hpp"
#include "anchorsim/audit/auditor.hpp"
#include "anchorsim/chain/types.hpp"
#include "anchorsim/io/json.hpp"
#include "anchorsim/platform/platform.hpp"

namespace anchorsim::bench {

using sim::Duration;
using sim::VirtualTime;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scale { Desk, Paper };
const char* scale_name(Scale s);

/// Periodic burst on top of the base rate: `tps` instead of the base for
/// `length`, every `period`, first one at `offset`.
struct Burst {
  double tps = 0;
  Duration length{0};
  Duration period{0};
  Duration offset{0};
};

/// Target request rate over the load window. Linear between points, flat
/// outside them.
struct LoadProfile {
  std::vector<std::pair<Duration, double>> points;
  std::optional<Burst> burst;

  static LoadProfile constant(double tps) { return LoadProfile{{{Duration::zero(), tps}}, std::nullopt}; }
  double rate_at(Duration t) const;
  double peak() const;
};

struct TenantLoad {
  std::string name;
  LoadProfile profile;
};

struct ExperimentConfig {
  /// 1..4 for the reference tests, empty for a custom setup.
  std::optional<int> test_id;
  Scale scale = Scale::Desk;
  std::uint64_t seed = 1;
  std::vector<TenantLoad> tenants;
  std::size_t batch_size = 20;
  /// Requests are generated in [0, load_duration).
  Duration load_duration = std::chrono::minutes(10);
  /// How long past the load window the run may go on draining.
  Duration drain_limit = std::chrono::minutes(60);
  /// Template for every tenant chain; name and seed come from the tenant.
  chain::ChainConfig tenant_chain;
  chain::ChainConfig public_chain;
  anchor::EngineConfig engine;
  std::optional<VirtualTime> first_tick;
  bool anchoring = true;
  bool auditing = true;

  /// floor(gas_limit / batch gas) / inter-block time, per tenant chain.
  double cap_tps() const;
  std::uint64_t batches_per_block() const;
};

/// Reference setup for test 1..4 at the given scale.
///   1: 0.8 x cap, steady
///   2: from 18/15.2 x cap down to cap, linear over the load window
///   3: 18/15.2 x cap with 43 s bursts of 25/15.2 x cap every 10 minutes
///   4: test 3 on three tenants
/// Desk: 8M gas, 1 s blocks, 10 minutes of load, 1 minute anchor interval.
/// Paper: 80M gas, 5 s blocks, 59 minutes of load, 10 minute interval.
ExperimentConfig reference_config(int test_id, Scale scale, std::uint64_t seed = 1);

/// Throws io::ConfigInvalid.
void validate(const ExperimentConfig& config);

/// Applies a bench config document over `base`:
///   seed, batch_size, load_duration_ms, drain_limit_ms, first_tick_ms,
///   anchoring, auditing, tenant_chain {chain doc}, public_chain {chain doc},
///   engine {engine doc},
///   tenants [{name, points [[ms, tps], ..], burst {tps, length_ms, period_ms, offset_ms}}]
/// `test` and `scale` select the base and are read by `load_config`.
ExperimentConfig apply_overrides(const io::Json& doc, ExperimentConfig base);
/// Base from `test`/`scale`/`seed` in the document (or the defaults given),
/// then the rest of the document on top.
ExperimentConfig load_config(const io::Json& doc, int default_test, Scale default_scale,
                             std::optional<std::uint64_t> seed_override = std::nullopt);
io::Json to_json(const ExperimentConfig& config);

struct BlockSample {
  std::uint64_t height = 0;
  VirtualTime timestamp{0};
  std::uint32_t load_txs = 0;
  std::uint32_t other_txs = 0;
  std::uint64_t gas_used = 0;
  /// No room left for another batch.
  bool full = false;
};

struct TenantSeries {
  std::string name;
  /// Per elapsed minute.
  std::vector<std::uint64_t> sent;
  std::vector<std::uint64_t> included;
  std::vector<std::uint64_t> errors;
  std::vector<BlockSample> blocks;
  /// Submission to inclusion, in inclusion order.
  std::vector<std::int64_t> latencies_ms;

  /// Cumulative sent - included - errored at the end of each minute.
  std::vector<std::int64_t> backlog() const;
  std::uint64_t total_sent() const;
  std::uint64_t total_included() const;
  std::uint64_t total_errors() const;
};

struct MinuteRow {
  std::uint64_t minute = 0;
  double sent_tps = 0;
  double included_tps = 0;
  std::uint64_t errors = 0;

  friend bool operator==(const MinuteRow&, const MinuteRow&) = default;
};

struct MetricsSeries {
  std::vector<TenantSeries> tenants;
  std::vector<anchor::RoundReport> rounds;
  std::vector<audit::AuditReport> audits;
  /// Round id of every anchor transaction found in a public block.
  std::vector<std::uint64_t> public_anchor_txs;
  VirtualTime load_end{0};
  VirtualTime finished{0};
  double cap_tps = 0;
  std::size_t batch_size = 0;

  std::size_t minutes() const;
  /// All tenants added up.
  std::vector<MinuteRow> rows() const;
  std::vector<MinuteRow> rows(std::size_t tenant) const;
};

/// Platform wiring for an experiment: one chain per tenant from the template,
/// named and seeded after the tenant.
platform::PlatformConfig platform_config(const ExperimentConfig& config);

/// A platform with seeded request generators attached, one per tenant.
/// Requests go through the gateway as batch registrations; inclusion is
/// recorded from the tenant blocks.
class Experiment {
 public:
  /// Throws io::ConfigInvalid.
  explicit Experiment(ExperimentConfig config);
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const { return config_; }
  platform::Platform& platform() { return *platform_; }

  /// The load window, then until every request is included or errored (or
  /// the drain limit passes), then up to the next whole minute.
  void run();
  std::uint64_t unresolved() const { return unresolved_; }
  /// Metrics so far plus the engine's rounds and the auditors' reports.
  MetricsSeries series() const;

 private:
  class LoadGenerator;
  void record_block(std::size_t index, const chain::Block& block);

  ExperimentConfig config_;
  std::unique_ptr<platform::Platform> platform_;
  MetricsSeries series_;
  std::uint64_t unresolved_ = 0;
  std::vector<std::unique_ptr<LoadGenerator>> generators_;
};

/// Experiment::run on a fresh platform. Deterministic for a given config.
MetricsSeries run_experiment(const ExperimentConfig& config);

/// Everything `summarize` needs, for `series_from_json`.
io::Json to_json(const MetricsSeries& series);
/// Throws io::ConfigInvalid.
MetricsSeries series_from_json(const io::Json& doc);

enum class Fault { None, TenantState, StoredTree, FabricatedRoot };
const char* fault_name(Fault f);
std::optional<Fault> parse_fault(std::string_view name);

/// Tampers with a finished run.
///   TenantState:    rewrites a transaction at or below tenant `index`'s
///                   anchored height, headers left as they were
///   StoredTree:     flips a bit in the tree stored on tenant `index`
///   FabricatedRoot: runs one more round that publishes a made-up root
/// Throws std::runtime_error when there is nothing anchored to tamper with.
void inject(platform::Platform& p, Fault fault, std::size_t index);

struct TenantSummary {
  std::string name;
  /// Median included tps over minutes in which every block was full.
  double plateau_tps = 0;
  std::size_t saturated_minutes = 0;
  std::uint64_t sent = 0;
  std::uint64_t included = 0;
  std::uint64_t errors = 0;
  std::int64_t final_backlog = 0;
  std::uint32_t max_block_load = 0;
};

struct Summary {
  std::vector<TenantSummary> tenants;
  double plateau_tps = 0;
  double id_rate = 0;
  std::uint64_t sent = 0;
  std::uint64_t included = 0;
  std::uint64_t errors = 0;
  std::size_t rounds_succeeded = 0;
  std::size_t rounds_failed = 0;
  std::size_t rounds_skipped = 0;
  std::size_t max_consecutive_skips = 0;
  std::optional<Duration> min_round;
  std::optional<Duration> max_round;
  std::size_t audits_passed = 0;
  std::size_t audits_failed = 0;
};

Summary summarize(const MetricsSeries& series);
io::Json to_json(const Summary& s);
std::string describe(const Summary& s);

/// `minute,sent_tps,included_tps,errors`, one row per elapsed minute.
std::string format_csv(const std::vector<MinuteRow>& rows);
/// Throws io::ConfigInvalid on a malformed document.
std::vector<MinuteRow> parse_csv(const std::string& text);
/// Throws IoError when the file cannot be written.
void export_csv(const std::vector<MinuteRow>& rows, const std::string& path);
std::vector<MinuteRow> read_csv(const std::string& path);
/// One RoundReport per line.
std::string format_rounds(const std::vector<anchor::RoundReport>& rounds);

}  // namespace anchorsim::bench

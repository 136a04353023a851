// anchorsim: throughput benchmarks, audits, single anchor rounds and the
// gateway HTTP server, all on the simulated platform.

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "anchorsim/api/http_api.hpp"
#include "anchorsim/bench/bench.hpp"

using namespace anchorsim;
using namespace std::chrono_literals;
using io::Json;

namespace {

struct Common {
  int test = 1;
  std::string scale = "desk";
  std::optional<std::uint64_t> seed;
  std::string config;

  void add_to(CLI::App* app) {
    app->add_option("--test", test, "Reference test 1-4")->check(CLI::Range(1, 4));
    app->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--seed", seed, "Load generator seed");
    app->add_option("--config", config, "JSON file overriding any parameter")->check(CLI::ExistingFile);
  }

  bench::ExperimentConfig load() const {
    auto scale_value = scale == "paper" ? bench::Scale::Paper : bench::Scale::Desk;
    Json doc = config.empty() ? Json::object() : io::read_json_file(config);
    return bench::load_config(doc, test, scale_value, seed);
  }
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw bench::IoError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bench::IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int bench_run(const Common& common, const std::string& out) {
  auto config = common.load();
  std::cerr << "running " << (config.test_id ? "test " + std::to_string(*config.test_id) : std::string("custom"))
            << " at " << bench::scale_name(config.scale) << " scale, " << config.tenants.size() << " tenant(s)\n";
  auto series = bench::run_experiment(config);
  auto summary = bench::summarize(series);

  std::filesystem::create_directories(out);
  std::filesystem::path dir(out);
  bench::export_csv(series.rows(), (dir / "throughput.csv").string());
  for (std::size_t i = 0; i < series.tenants.size(); ++i) {
    bench::export_csv(series.rows(i), (dir / ("throughput-" + series.tenants[i].name + ".csv")).string());
  }
  write_file(dir / "rounds.jsonl", bench::format_rounds(series.rounds));
  write_file(dir / "series.json", bench::to_json(series).dump() + "\n");
  write_file(dir / "summary.json", bench::to_json(summary).dump(2) + "\n");
  write_file(dir / "config.json", bench::to_json(config).dump(2) + "\n");
  std::cout << bench::describe(summary) << "wrote " << dir.string() << "\n";
  return 0;
}

int bench_summarize(const std::string& in, bool json) {
  std::filesystem::path dir(in);
  auto series = bench::series_from_json(Json::parse(read_file(dir / "series.json")));
  auto summary = bench::summarize(series);
  if (json) {
    std::cout << bench::to_json(summary).dump(2) << "\n";
  } else {
    std::cout << bench::describe(summary);
  }
  return 0;
}

int audit_cmd(const Common& common, const std::string& fault_name, const std::string& victim, bool json) {
  auto fault = bench::parse_fault(fault_name);
  if (!fault) throw CLI::ValidationError("--tamper", "expected none, state, tree or root");
  bench::Experiment e(common.load());
  e.run();
  auto& p = e.platform();
  std::size_t index = victim.empty() ? 0 : p.tenant_index(victim);
  bench::inject(p, *fault, index);

  bool all_pass = true;
  Json reports = Json::array();
  for (std::size_t i = 0; i < p.tenant_count(); ++i) {
    auto r = audit::audit_tenant(*p.tenant(i).node, p.public_node());
    r.tenant_name = p.tenant(i).name;
    all_pass = all_pass && r.pass;
    reports.push_back(io::to_json(r));
    if (!json) {
      std::cout << r.tenant_name << ": " << (r.pass ? "PASS" : "FAIL") << " round " << r.anchor_round
                << " (verified " << r.verified_round << ")";
      if (!r.reason.empty()) std::cout << ": " << r.reason;
      std::cout << "\n";
    }
  }
  if (json) std::cout << Json{{"tamper", fault_name}, {"reports", reports}}.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

int anchor_once(const Common& common, int warmup_s) {
  auto config = common.load();
  config.load_duration = std::chrono::seconds(warmup_s);
  // Only the explicit tick below starts a round.
  config.first_tick = sim::VirtualTime(std::chrono::hours(24 * 365));
  bench::Experiment e(config);
  auto& p = e.platform();
  p.run_until(sim::VirtualTime(config.load_duration));
  p.tick();
  const auto limit = p.now() + config.engine.public_commit_deadline + 1min;
  p.run_while([&] { return p.engine().round_in_progress(); }, limit);
  auto history = p.engine().round_history();
  if (history.empty()) {
    std::cerr << "round did not finish\n";
    return 1;
  }
  std::cout << io::to_json(history.back()).dump(2) << "\n";
  return history.back().outcome == anchor::RoundOutcome::Success ? 0 : 1;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const Common& common, const std::string& host, int port, double speed) {
  auto config = common.load();
  platform::Platform p(bench::platform_config(config));
  std::mutex lock;
  api::HttpApi api(p, lock);
  httplib::Server server;
  api::bind(server, api);

  std::atomic<bool> running{true};
  std::thread clock([&] {
    const auto start = std::chrono::steady_clock::now();
    while (running) {
      std::this_thread::sleep_for(50ms);
      auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() * speed;
      std::lock_guard guard(lock);
      p.run_until(sim::VirtualTime(std::chrono::milliseconds(static_cast<std::int64_t>(elapsed * 1000))));
    }
  });

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ":" << port << " with " << p.tenant_count() << " tenant(s); writer token "
            << platform::kWriterToken << "\n";
  bool ok = server.listen(host, port);
  running = false;
  clock.join();
  g_server = nullptr;
  if (!ok) std::cerr << "could not listen on " << host << ":" << port << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tenant anchoring simulator"};
  app.require_subcommand(1);

  Common common;
  auto* bench_cmd = app.add_subcommand("bench", "Throughput experiments");
  bench_cmd->require_subcommand(1);
  std::string out = "bench-out";
  auto* run = bench_cmd->add_subcommand("run", "Run an experiment and export its metrics");
  common.add_to(run);
  run->add_option("--out", out, "Output directory");

  std::string in = "bench-out";
  bool summary_json = false;
  auto* summarize = bench_cmd->add_subcommand("summarize", "Summarize an exported run");
  summarize->add_option("--in", in, "Directory written by bench run");
  summarize->add_flag("--json", summary_json, "Print JSON");

  std::string fault = "none";
  std::string victim;
  bool audit_json = false;
  auto* audit = app.add_subcommand("audit", "Run an experiment, optionally tamper, audit every tenant");
  common.add_to(audit);
  audit->add_option("--tamper", fault, "none, state, tree or root");
  audit->add_option("--tenant", victim, "Tenant to tamper with (default: the first)");
  audit->add_flag("--json", audit_json, "Print JSON reports");

  int warmup = 30;
  auto* anchor_cmd = app.add_subcommand("anchor", "Anchor rounds");
  anchor_cmd->require_subcommand(1);
  auto* once = anchor_cmd->add_subcommand("run-once", "Run one round after a warm-up and print its report");
  common.add_to(once);
  once->add_option("--warmup", warmup, "Seconds of load before the round")->check(CLI::PositiveNumber);

  std::string host = "127.0.0.1";
  int port = 8080;
  double speed = 1.0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the gateway HTTP API on a wall-clock paced platform");
  common.add_to(serve_cmd);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--speed", speed, "Virtual seconds per wall second")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return bench_run(common, out);
    if (summarize->parsed()) return bench_summarize(in, summary_json);
    if (audit->parsed()) return audit_cmd(common, fault, victim, audit_json);
    if (once->parsed()) return anchor_once(common, warmup);
    if (serve_cmd->parsed()) return serve(common, host, port, speed);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

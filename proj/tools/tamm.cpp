// tamm: time-aware map matching command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tamm/enrich.hpp"
#include "tamm/eval.hpp"
#include "tamm/pipeline.hpp"
#include "tamm/roadnet.hpp"
#include "tamm/trajectory_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::string network;
  std::string trajectories;
  std::string model;
  std::vector<std::string> heuristics;
  std::size_t knn = tamm::kDefaultKnn;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 42;
  std::string out = ".";
  std::vector<std::string> matched;
  std::string truth;
  std::string midpoint_report;
  tamm::SynthConfig synth;
  bool no_speed = false;
};

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw tamm::Error(fmt::format("{} is required", flag));
  if (!fs::is_regular_file(path)) throw tamm::Error(fmt::format("{} file '{}' does not exist", flag, path));
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  return (fs::path(cfg.out) / name).string();
}

std::vector<tamm::Heuristic> heuristics(const RunConfig& cfg, std::vector<tamm::Heuristic> fallback) {
  if (cfg.heuristics.empty()) return fallback;
  std::vector<tamm::Heuristic> out;
  for (const auto& h : cfg.heuristics) out.push_back(*tamm::parse_heuristic(h));
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// Network with speeds from --model, or speed limits when no model is given.
tamm::RoadNetwork load_enriched(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  tamm::RoadNetwork net = tamm::load_network_file(cfg.network, &warnings);
  print_warnings(warnings);
  if (cfg.model.empty()) {
    std::cerr << "warning: no --model given; routing with speed limits\n";
    return net;
  }
  auto in = tamm::csv::open_input(cfg.model);
  return tamm::apply_model(std::move(net), tamm::read_speed_model(in, cfg.model));
}

void write_json(const std::string& path, const ordered_json& j) {
  auto out = tamm::csv::open_output(path);
  out << j.dump(2) << "\n";
}

int cmd_synth(RunConfig cfg) {
  cfg.synth.seed = cfg.seed;
  cfg.synth.record_speed = !cfg.no_speed;
  const tamm::SynthWorld w = tamm::synth_world(cfg.synth);
  {
    auto out = tamm::csv::open_output(out_path(cfg, "network.csv"));
    tamm::write_network(out, w.network);
  }
  {
    auto out = tamm::csv::open_output(out_path(cfg, "trajectories.csv"));
    tamm::write_trajectories(out, w.trajectories, w.network.projection());
  }
  {
    auto out = tamm::csv::open_output(out_path(cfg, "truth.csv"));
    tamm::write_truth(out, w.truth);
  }
  std::cout << fmt::format("synth: {} segments, {} trajectories -> {}\n", w.network.segment_count(),
                           w.trajectories.size(), cfg.out);
  return 0;
}

int cmd_enrich(const RunConfig& cfg) {
  require_file(cfg.network, "--network");
  require_file(cfg.trajectories, "--trajectories");
  std::vector<std::string> warnings;
  const tamm::RoadNetwork net = tamm::load_network_file(cfg.network, &warnings);
  print_warnings(warnings);
  const auto trajs = tamm::read_trajectories_file(cfg.trajectories, net.projection());

  std::size_t with_speed = 0;
  for (const auto& t : trajs) {
    with_speed += static_cast<std::size_t>(
        std::count_if(t.fixes.begin(), t.fixes.end(), [](const tamm::GpsFix& f) { return f.speed.has_value(); }));
  }
  if (with_speed == 0) std::cerr << "warning: no fix carries a speed; every segment falls back to its speed limit\n";

  tamm::SpreadStats spread;
  const tamm::SpeedModel model = tamm::spread_speeds(net, tamm::observe_speeds(net, trajs, cfg.knn), &spread);
  {
    auto out = tamm::csv::open_output(out_path(cfg, "speed_model.csv"));
    tamm::write_speed_model(out, model);
  }
  ordered_json summary;
  summary["segments"] = net.segment_count();
  summary["observed"] = model.count(tamm::Provenance::observed);
  summary["spread"] = model.count(tamm::Provenance::spread);
  summary["default"] = model.count(tamm::Provenance::fallback);
  summary["spread_rounds"] = spread.rounds;
  summary["fixes_with_speed"] = with_speed;
  summary["speeds_absent"] = with_speed == 0;
  write_json(out_path(cfg, "enrich_summary.json"), summary);
  std::cout << fmt::format("enrich: {} observed, {} spread, {} default -> {}\n", summary["observed"].get<std::size_t>(),
                           summary["spread"].get<std::size_t>(), summary["default"].get<std::size_t>(), cfg.out);
  return 0;
}

int cmd_match(const RunConfig& cfg) {
  require_file(cfg.network, "--network");
  require_file(cfg.trajectories, "--trajectories");
  if (!cfg.model.empty()) require_file(cfg.model, "--model");
  const tamm::RoadNetwork net = load_enriched(cfg);
  const auto trajs = tamm::read_trajectories_file(cfg.trajectories, net.projection());
  const tamm::Heuristic h = heuristics(cfg, {tamm::Heuristic::time_aware}).front();

  const auto results = tamm::batch_match(net, trajs, h, cfg.knn, cfg.workers);
  auto out = tamm::csv::open_output(out_path(cfg, "matched.csv"));
  tamm::write_matched_header(out);
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].result) {
      tamm::write_matched(out, *results[i].result);
    } else {
      ++rejected;
      std::cerr << fmt::format("rejected {}: {}\n", trajs[i].id, results[i].error);
    }
  }
  std::cout << fmt::format("match: {} trajectories, {} rejected, heuristic {} -> {}\n", trajs.size(), rejected,
                           tamm::to_string(h), cfg.out);
  return 0;
}

int cmd_midpoint(const RunConfig& cfg) {
  require_file(cfg.network, "--network");
  require_file(cfg.trajectories, "--trajectories");
  if (!cfg.model.empty()) require_file(cfg.model, "--model");
  const tamm::RoadNetwork net = load_enriched(cfg);
  const auto trajs = tamm::read_trajectories_file(cfg.trajectories, net.projection());
  const auto hs = heuristics(cfg, {tamm::Heuristic::time_aware, tamm::Heuristic::shortest, tamm::Heuristic::fastest});

  ordered_json report;
  report["trajectories"] = trajs.size();
  std::size_t skipped = 0;
  for (const auto& t : trajs) skipped += t.fixes.size() < 3 ? 1 : 0;
  report["skipped"] = skipped;
  ordered_json per = ordered_json::object();
  for (tamm::Heuristic h : hs) {
    tamm::MidpointScore total;
    std::size_t failed = 0;
    for (const auto& t : trajs) {
      try {
        if (auto s = tamm::middle_point_test(net, t, h, cfg.knn)) total += *s;
      } catch (const tamm::Error& e) {
        ++failed;
        std::cerr << fmt::format("rejected {}: {}\n", t.id, e.what());
      }
    }
    ordered_json entry;
    entry["score"] = total.hidden ? ordered_json(total.ratio()) : ordered_json(nullptr);
    entry["hidden"] = total.hidden;
    entry["covered"] = total.covered;
    entry["rejected"] = failed;
    per[std::string(tamm::to_string(h))] = entry;
  }
  report["heuristics"] = per;
  write_json(out_path(cfg, "midpoint.json"), report);
  for (const auto& [name, entry] : per.items()) {
    std::cout << fmt::format("midpoint-test: {} score {}\n", name, entry["score"].dump());
  }
  return 0;
}

int cmd_align(const RunConfig& cfg) {
  std::vector<std::string> inputs = cfg.matched;
  if (inputs.empty()) inputs.push_back((fs::path(cfg.out) / "matched.csv").string());
  std::vector<tamm::PairRecord> records;
  for (const auto& path : inputs) {
    require_file(path, "--matched");
    auto in = tamm::csv::open_input(path);
    auto r = tamm::read_matched(in, path);
    records.insert(records.end(), r.begin(), r.end());
  }
  std::map<tamm::Heuristic, std::vector<tamm::PairRecord>> by_heuristic;
  for (const auto& r : records) by_heuristic[r.heuristic].push_back(r);

  std::optional<tamm::GroundTruth> truth;
  if (!cfg.truth.empty()) {
    require_file(cfg.truth, "--truth");
    auto in = tamm::csv::open_input(cfg.truth);
    truth = tamm::read_truth(in, cfg.truth);
  }

  ordered_json summary;
  ordered_json delta = ordered_json::object();
  ordered_json acc = ordered_json::object();
  for (const auto& [h, recs] : by_heuristic) {
    const auto rep = tamm::alignment_report(recs);
    const std::string name(tamm::to_string(h));
    const std::string csv_name = by_heuristic.size() == 1 ? "alignment.csv" : fmt::format("alignment_{}.csv", name);
    auto out = tamm::csv::open_output(out_path(cfg, csv_name));
    tamm::write_alignment_csv(out, rep);
    delta[name] = rep.mean_delta_pct;

    if (truth) {
      std::map<std::string, std::set<tamm::SegmentId>> matched;
      for (const auto& r : recs) matched[r.trajectory_id].insert(r.segment_ids.begin(), r.segment_ids.end());
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [id, segs] : matched) {
        auto it = truth->find(id);
        if (it == truth->end() || it->second.empty()) continue;
        sum += tamm::accuracy(segs, it->second);
        ++n;
      }
      acc[name] = n ? ordered_json(sum / static_cast<double>(n)) : ordered_json(nullptr);
    }
  }
  summary["mean_delta_pct"] = delta;
  summary["accuracy"] = truth ? acc : ordered_json(nullptr);
  summary["midpoint"] = nullptr;
  if (!cfg.midpoint_report.empty()) {
    require_file(cfg.midpoint_report, "--midpoint-report");
    std::ifstream in(cfg.midpoint_report);
    const auto mp = ordered_json::parse(in);
    ordered_json scores = ordered_json::object();
    for (const auto& [name, entry] : mp.at("heuristics").items()) scores[name] = entry.at("score");
    summary["midpoint"] = scores;
  }
  write_json(out_path(cfg, "summary.json"), summary);
  std::cout << fmt::format("align-report: {} pairs -> {}\n", records.size(), cfg.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-aware map matching for low-sampling-rate GPS trajectories"};
  app.set_config("--config", "", "flat key=value configuration file");
  app.require_subcommand(1);
  RunConfig cfg;

  app.add_option("--network", cfg.network, "road network CSV");
  app.add_option("--trajectories", cfg.trajectories, "trajectory CSV");
  app.add_option("--model", cfg.model, "speed model CSV");
  app.add_option("--heuristic", cfg.heuristics, "time-aware, shortest or fastest (repeatable)")
      ->check(CLI::IsMember({"time-aware", "time_aware", "shortest", "fastest"}));
  app.add_option("--knn", cfg.knn, "candidate segments per fix")->check(CLI::PositiveNumber);
  app.add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "random seed for synth");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--matched", cfg.matched, "matched output file(s) for align-report");
  app.add_option("--truth", cfg.truth, "ground-truth CSV for align-report");
  app.add_option("--midpoint-report", cfg.midpoint_report, "midpoint.json to fold into the summary");
  app.add_option("--grid-n", cfg.synth.grid_n, "synth: grid nodes per side")->check(CLI::Range(2, 1000));
  app.add_option("--spacing", cfg.synth.spacing_m, "synth: block length (m)")->check(CLI::PositiveNumber);
  app.add_option("--count", cfg.synth.trajectories, "synth: number of trajectories");
  app.add_option("--interval", cfg.synth.sampling_interval_s, "synth: sampling interval (s)")->check(CLI::PositiveNumber);
  app.add_option("--noise", cfg.synth.noise_sigma_m, "synth: position noise sigma (m)")->check(CLI::NonNegativeNumber);
  app.add_option("--detour-fraction", cfg.synth.detour_fraction, "synth: share of detour drivers")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--fastest-fraction", cfg.synth.fastest_fraction, "synth: share of fastest-path drivers")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--min-blocks", cfg.synth.min_trip_blocks, "synth: minimum trip length in blocks");
  app.add_flag("--no-speed", cfg.no_speed, "synth: leave fix speeds empty");

  auto* synth = app.add_subcommand("synth", "generate a synthetic network, trajectories and ground truth");
  auto* enrich = app.add_subcommand("enrich", "learn per-segment speeds from trajectories");
  auto* match = app.add_subcommand("match", "map-match trajectories");
  auto* midpoint = app.add_subcommand("midpoint-test", "hide every middle fix and score the reconstruction");
  auto* align = app.add_subcommand("align-report", "temporal alignment report from matched output");
  for (auto* sub : {synth, enrich, match, midpoint, align}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (enrich->parsed()) return cmd_enrich(cfg);
    if (match->parsed()) return cmd_match(cfg);
    if (midpoint->parsed()) return cmd_midpoint(cfg);
    if (align->parsed()) return cmd_align(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

// dili - deterministic simulator of a distributed modular conveyor.
// Subcommands: run, verify, oracle, render, bench.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dili/engine.hpp"
#include "dili/oracle.hpp"
#include "dili/render.hpp"
#include "dili/scenario.hpp"
#include "dili/trace.hpp"
#include "dili/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailure = 1;
constexpr int kUsage = 2;

void usage(std::ostream& out) {
  out << "usage: dili <subcommand> [args]\n"
         "\n"
         "  run SCENARIO [--trace PATH] [--metrics PATH] [--log-messages]\n"
         "               [--max-ticks N] [--seed N]\n"
         "      Simulate; metrics go to stdout unless --metrics is given.\n"
         "      Exit 0 when the goal is reached, 1 otherwise.\n"
         "  verify SCENARIO TRACE\n"
         "      Replay a trace and check every invariant. Exit 0 iff all pass.\n"
         "  oracle SCENARIO [--max-states N] [--max-depth N]\n"
         "      Print optimal=<n> (exact minimum motions) or optimal=unknown.\n"
         "  render SCENARIO TRACE [--every K] [--format ascii|svg]\n"
         "      Emit one frame per committed maneuver.\n"
         "  bench DIR [--seeds A..B]\n"
         "      Run every scenario in DIR over the seed range; one line per run.\n";
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return out.good();
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

struct Flags {
  std::vector<std::string> positional;
  std::optional<std::string> trace_path;
  std::optional<std::string> metrics_path;
  bool log_messages = false;
  std::optional<std::int64_t> max_ticks;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_states;
  std::optional<std::int64_t> max_depth;
  int every = 1;
  std::string format = "ascii";
  std::optional<std::pair<std::uint64_t, std::uint64_t>> seeds;
};

bool parse_flags(const std::vector<std::string>& args, Flags& flags,
                 std::string& error) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    auto value = [&](std::string& out) {
      if (i + 1 >= args.size()) {
        error = arg + " needs a value";
        return false;
      }
      out = args[++i];
      return true;
    };
    std::string v;
    try {
      if (arg == "--trace") {
        if (!value(v)) return false;
        flags.trace_path = v;
      } else if (arg == "--metrics") {
        if (!value(v)) return false;
        flags.metrics_path = v;
      } else if (arg == "--log-messages") {
        flags.log_messages = true;
      } else if (arg == "--max-ticks") {
        if (!value(v)) return false;
        flags.max_ticks = std::stoll(v);
      } else if (arg == "--seed") {
        if (!value(v)) return false;
        flags.seed = std::stoull(v);
      } else if (arg == "--max-states") {
        if (!value(v)) return false;
        flags.max_states = std::stoll(v);
      } else if (arg == "--max-depth") {
        if (!value(v)) return false;
        flags.max_depth = std::stoll(v);
      } else if (arg == "--every") {
        if (!value(v)) return false;
        flags.every = std::stoi(v);
      } else if (arg == "--format") {
        if (!value(v)) return false;
        if (v != "ascii" && v != "svg") {
          error = "--format must be ascii or svg";
          return false;
        }
        flags.format = v;
      } else if (arg == "--seeds") {
        if (!value(v)) return false;
        auto dots = v.find("..");
        if (dots == std::string::npos) {
          error = "--seeds expects A..B";
          return false;
        }
        flags.seeds = {std::stoull(v.substr(0, dots)),
                       std::stoull(v.substr(dots + 2))};
      } else if (!arg.empty() && arg[0] == '-') {
        error = "unknown flag " + arg;
        return false;
      } else {
        flags.positional.push_back(arg);
      }
    } catch (const std::exception&) {
      error = "bad value for " + arg;
      return false;
    }
  }
  return true;
}

std::optional<dili::Scenario> load_scenario(const std::string& path,
                                            const Flags& flags) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << "\n";
    return std::nullopt;
  }
  auto parsed = dili::parse_scenario(*text, stem_of(path));
  if (!parsed) {
    std::cerr << path << ": " << parsed.error.format() << "\n";
    return std::nullopt;
  }
  dili::Scenario sc = std::move(*parsed.value);
  if (flags.seed) sc.params.seed = *flags.seed;        // flags win
  if (flags.max_ticks) sc.params.max_ticks = *flags.max_ticks;
  if (flags.log_messages) sc.params.log_messages = true;
  return sc;
}

int cmd_run(const Flags& flags) {
  if (flags.positional.size() != 1) {
    std::cerr << "usage: dili run SCENARIO [--trace PATH] [--metrics PATH] "
                 "[--log-messages] [--max-ticks N] [--seed N]\n";
    return kUsage;
  }
  auto sc = load_scenario(flags.positional[0], flags);
  if (!sc) return kUsage;
  dili::Engine engine(*sc);
  dili::RunResult result = engine.run();
  if (flags.trace_path &&
      !write_file(*flags.trace_path, dili::write_trace(result.trace))) {
    std::cerr << "error: cannot write " << *flags.trace_path << "\n";
    return kUsage;
  }
  std::string report = dili::metrics_report(result.metrics);
  if (flags.metrics_path) {
    if (!write_file(*flags.metrics_path, report)) {
      std::cerr << "error: cannot write " << *flags.metrics_path << "\n";
      return kUsage;
    }
  } else {
    std::cout << report;
  }
  return result.metrics.goal_reached ? kOk : kCheckFailure;
}

int cmd_verify(const Flags& flags) {
  if (flags.positional.size() != 2) {
    std::cerr << "usage: dili verify SCENARIO TRACE\n";
    return kUsage;
  }
  auto sc = load_scenario(flags.positional[0], flags);
  if (!sc) return kUsage;
  auto text = read_file(flags.positional[1]);
  if (!text) {
    std::cerr << "error: cannot read " << flags.positional[1] << "\n";
    return kUsage;
  }
  auto parsed = dili::read_trace(*text);
  if (!parsed) {
    std::cerr << flags.positional[1] << ": " << parsed.error.format() << "\n";
    return kUsage;
  }
  dili::VerifyReport report = dili::verify_trace(*sc, *parsed.value);
  std::cout << report.format();
  return report.pass() ? kOk : kCheckFailure;
}

int cmd_oracle(const Flags& flags) {
  if (flags.positional.size() != 1) {
    std::cerr << "usage: dili oracle SCENARIO [--max-states N] [--max-depth N]\n";
    return kUsage;
  }
  auto sc = load_scenario(flags.positional[0], flags);
  if (!sc) return kUsage;
  dili::SearchBounds bounds;
  if (flags.max_states) bounds.max_states = *flags.max_states;
  if (flags.max_depth) bounds.max_depth = *flags.max_depth;
  dili::OracleResult result = dili::optimal_motion_count(*sc, bounds);
  if (result.motions)
    std::cout << "optimal=" << *result.motions << "\n";
  else
    std::cout << "optimal=unknown\n";
  return kOk;
}

int cmd_render(const Flags& flags) {
  if (flags.positional.size() != 2) {
    std::cerr << "usage: dili render SCENARIO TRACE [--every K] "
                 "[--format ascii|svg]\n";
    return kUsage;
  }
  auto sc = load_scenario(flags.positional[0], flags);
  if (!sc) return kUsage;
  auto text = read_file(flags.positional[1]);
  if (!text) {
    std::cerr << "error: cannot read " << flags.positional[1] << "\n";
    return kUsage;
  }
  auto parsed = dili::read_trace(*text);
  if (!parsed) {
    std::cerr << flags.positional[1] << ": " << parsed.error.format() << "\n";
    return kUsage;
  }
  std::cout << dili::render_trace_frames(*sc, *parsed.value,
                                         std::max(1, flags.every),
                                         flags.format == "svg");
  return kOk;
}

int cmd_bench(const Flags& flags) {
  if (flags.positional.size() != 1) {
    std::cerr << "usage: dili bench DIR [--seeds A..B]\n";
    return kUsage;
  }
  std::filesystem::path dir(flags.positional[0]);
  if (!std::filesystem::is_directory(dir)) {
    std::cerr << "error: " << dir << " is not a directory\n";
    return kUsage;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".scn")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const auto& file : files) {
    auto text = read_file(file.string());
    if (!text) {
      std::cerr << "error: cannot read " << file << "\n";
      return kUsage;
    }
    auto parsed = dili::parse_scenario(*text, file.stem().string());
    if (!parsed) {
      std::cerr << file.string() << ": " << parsed.error.format() << "\n";
      return kUsage;
    }
    std::uint64_t lo = parsed.value->params.seed, hi = lo;
    if (flags.seeds) {
      lo = flags.seeds->first;
      hi = flags.seeds->second;
    }
    for (std::uint64_t seed = lo; seed <= hi; ++seed) {
      dili::Scenario sc = *parsed.value;
      sc.params.seed = seed;
      dili::RunResult result = dili::Engine(sc).run();
      const dili::Metrics& m = result.metrics;
      std::cout << "scenario=" << sc.name << " seed=" << seed << " goal="
                << (m.goal_reached ? "true" : "false") << " motions="
                << m.motions << " maneuvers=" << m.maneuvers << " epochs="
                << m.epochs << " simtime=" << m.simtime_ms << "\n";
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    usage(std::cerr);
    return kUsage;
  }
  std::string sub = args[0];
  Flags flags;
  std::string error;
  if (!parse_flags({args.begin() + 1, args.end()}, flags, error)) {
    std::cerr << "error: " << error << "\n";
    return kUsage;
  }
  try {
    if (sub == "run") return cmd_run(flags);
    if (sub == "verify") return cmd_verify(flags);
    if (sub == "oracle") return cmd_oracle(flags);
    if (sub == "render") return cmd_render(flags);
    if (sub == "bench") return cmd_bench(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::cerr << "error: unknown subcommand '" << sub << "'\n";
  usage(std::cerr);
  return kUsage;
}

#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "evekf/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitFilterDivergence = 4;

struct CommandSpec {
  const char* name;
  const char* description;
  std::function<void(const evekf::Config&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evekf: event-camera simulation and 6-DOF pose tracking"};
  app.require_subcommand(1);

  const std::vector<CommandSpec> commands = {
      {"simulate", "synthesize an event stream and ground-truth trajectory",
       [](const evekf::Config& cfg) { evekf::cmd_simulate(cfg); }},
      {"calibrate", "estimate the contrast threshold from simulated events",
       [](const evekf::Config& cfg) { evekf::cmd_calibrate(cfg); }},
      {"track", "run the event-based filter over a stream",
       [](const evekf::Config& cfg) { evekf::cmd_track(cfg); }},
      {"evaluate", "compare a run report against ground truth",
       [](const evekf::Config& cfg) { evekf::cmd_evaluate(cfg); }},
      {"plotdata", "emit tidy per-snapshot series from a run report",
       [](const evekf::Config& cfg) { evekf::cmd_plotdata(cfg); }},
  };

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<CLI::App*> subs;
  for (const CommandSpec& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.description);
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--override", overrides,
                    "config override, section.key=value (repeatable)");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const evekf::Config cfg = evekf::Config::load(config_path, overrides);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (subs[i]->parsed()) {
        commands[i].run(cfg);
        return kExitOk;
      }
    }
    std::cerr << "evekf: no subcommand selected\n";
    return kExitConfigError;
  } catch (const evekf::ConfigError& e) {
    std::cerr << "evekf: config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const evekf::FilterDivergence& e) {
    std::cerr << "evekf: filter divergence: " << e.what() << "\n";
    return kExitFilterDivergence;
  } catch (const evekf::Error& e) {
    std::cerr << "evekf: error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "evekf: error: " << e.what() << "\n";
    return kExitDataError;
  }
}

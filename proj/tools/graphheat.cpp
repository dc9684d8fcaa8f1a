// graphheat: run one experiment from a JSON config.
//
//   graphheat <experiment> --config FILE [--out DIR] [--seed N]
//
// Exit codes: 0 ok, 1 internal error, 2 verification failure, 3 precondition
// violation, 4 config error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "graphheat/config.hpp"
#include "graphheat/experiments.hpp"

namespace {

namespace fs = std::filesystem;
using namespace graphheat;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run(const std::string& experiment, const Options& opt) {
  auto cfg = config::load_config(opt.config);
  if (config::to_string(cfg.kind) != experiment)
    throw ConfigError("config " + opt.config + " is a \"" + config::to_string(cfg.kind) +
                      "\" experiment, not \"" + experiment + "\"");
  if (opt.seed) cfg.seed = *opt.seed;
  fs::path out = !opt.out.empty() ? fs::path(opt.out)
                 : cfg.output     ? cfg.base_dir / *cfg.output
                                  : fs::path("out") / experiment;
  const auto res = experiments::run_experiment(cfg, out);
  for (const auto& f : res.files) std::cout << (out / f).string() << '\n';
  if (res.exit_code != 0) std::cerr << "graphheat " << experiment << ": " << res.message << '\n';
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat equation on weighted graphs: certificates and explicit solutions"};
  app.require_subcommand(1);
  Options opt;
  for (const char* name : {"identities", "spectrum", "solve", "certify", "exhaust", "nonuniqueness", "table1"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "JSON config file")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "override the config seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }
  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    return run(experiment, opt);
  } catch (const std::exception& e) {
    std::cerr << "graphheat " << experiment << ": " << e.what() << '\n';
    return experiments::exit_code_for(e);
  }
}

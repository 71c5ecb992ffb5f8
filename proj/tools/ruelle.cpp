#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ruelle/run.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ruelle::Error("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ruelle::RunConfig load(const std::string& path, const std::vector<std::string>& sets) {
  const auto text = read_text(path);
  auto cfg = ruelle::load_config(text);
  if (!sets.empty()) cfg = ruelle::config_from_json(ruelle::apply_overrides(cfg.document, sets));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer operators, pressure and specification kernels on shift spaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "execute the command named in a config file");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("--set", sets, "override a top-level scalar key (key=value)");
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");

  auto* validate = app.add_subcommand("validate", "check a config file without running it");
  validate->add_option("--config", config_path, "JSON config")->required();
  validate->add_option("--set", sets, "override a top-level scalar key (key=value)");

  app.add_subcommand("list-potentials", "print the available potentials and their parameters");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list-potentials")) {
      for (const auto& e : ruelle::potential_registry()) {
        std::string params;
        for (const auto& p : e.params) params += (params.empty() ? "" : ", ") + p;
        std::cout << e.name << "\t[" << params << "]\t" << e.description << "\n";
      }
      return 0;
    }
    const auto cfg = load(config_path, sets);
    if (app.got_subcommand("validate")) {
      const auto report = ruelle::validate(ruelle::raw_state_space(cfg.state_space));
      for (const auto& c : report.checks)
        std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
      if (!report.ok()) {
        std::cout << "config invalid\n";
        return 1;
      }
      const auto space = ruelle::build_state_space(cfg.state_space);
      if (!cfg.potential.name.empty()) {
        const auto f = ruelle::build_potential(space, cfg.potential);
        std::cout << "ok   potential " << f.name << "\n";
      }
      std::cout << (report.ok() ? "config valid" : "config invalid") << "\n";
      return report.ok() ? 0 : 1;
    }
    const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
    try {
      const auto result = ruelle::run(cfg);
      for (const auto& p : ruelle::write_results(result, dir)) std::cout << p << "\n";
      return 0;
    } catch (const ruelle::RunFailure& e) {
      for (const auto& p : ruelle::write_results(e.partial(), dir)) std::cerr << "partial: " << p << "\n";
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

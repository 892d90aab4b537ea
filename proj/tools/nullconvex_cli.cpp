#include "nullconvex/nullconvex.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#ifndef NULLCONVEX_SCENARIO_DIR
#define NULLCONVEX_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace nullconvex;

namespace {

fs::path scenario_dir() {
  if (const char* env = std::getenv("NULLCONVEX_SCENARIOS")) return env;
  return NULLCONVEX_SCENARIO_DIR;
}

int run(const std::string& file, const std::string& output) {
  try {
    const Scenario sc = load_scenario_file(file);
    fs::path dir = !output.empty() ? fs::path(output)
                   : !sc.output_dir.empty() ? fs::path(sc.output_dir)
                                            : fs::path("nullconvex_out") / sc.name;
    const RunResult r = run_scenario(sc);
    write_outputs(r, dir);
    for (const auto& t : r.tasks)
      std::cout << t.type << ": " << t.verdict << " [" << to_string(t.cls) << ", expected " << to_string(t.expect)
                << "]\n";
    std::cout << "report: " << (dir / "report.json").string() << "\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "input error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
  }
  return 3;
}

void list_builtins() {
  std::cout << "metrics:\n";
  for (const auto& b : builtin_catalog()) {
    std::cout << "  " << b.name << "\n    chart: " << b.chart << "\n    parameters:";
    for (const auto& [name, def] : b.parameters) std::cout << " " << name << "=" << def;
    std::cout << "\n";
  }
  std::cout << "scenarios (" << scenario_dir().string() << "):\n";
  std::vector<fs::path> files;
  if (fs::is_directory(scenario_dir()))
    for (const auto& e : fs::directory_iterator(scenario_dir()))
      if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      const Scenario sc = load_scenario_file(f.string());
      std::cout << "  " << f.filename().string() << ": " << sc.description << "\n";
    } catch (const std::exception& e) {
      std::cout << "  " << f.filename().string() << ": (invalid: " << e.what() << ")\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Null-hypersurface entropy convexity and energy-condition checks"};
  app.require_subcommand(1);
  std::string file, output;
  auto* run_cmd = app.add_subcommand("run", "run a scenario file");
  run_cmd->add_option("file", file, "scenario JSON")->required();
  run_cmd->add_option("-o,--output", output, "output directory");
  auto* list_cmd = app.add_subcommand("list-builtins", "list built-in metrics and canned scenarios");
  auto* version_cmd = app.add_subcommand("version", "print the version");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }
  if (*run_cmd) return run(file, output);
  if (*list_cmd) list_builtins();
  if (*version_cmd) std::cout << "nullconvex " << kVersion << "\n";
  return 0;
}

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "pnp/errors.hpp"
#include "pnp/solver.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitDivergence = 3;

int fail(int code, const std::string& what) {
  std::cerr << "pnp: " << what << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("pnp"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Plug-and-play MRI reconstruction with classical and attention-network denoisers"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);
  pnp::cli::register_commands(app);

  try {
    app.parse(argc, argv);
    return pnp::cli::run_selected(app);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const pnp::IoError& e) {
    return fail(kExitIo, e.what());
  } catch (const pnp::FormatError& e) {
    return fail(kExitIo, e.what());
  } catch (const pnp::DivergenceError& e) {
    return fail(kExitDivergence, e.what());
  } catch (const pnp::Error& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitIo, e.what());
  }
}

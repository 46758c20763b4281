#include "commands.hpp"

#include "imface/error.hpp"
#include "imface/log.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace imface;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return 3;
    case ErrorKind::config: return 4;
    case ErrorKind::numeric: return 5;
    case ErrorKind::data: return 6;
    case ErrorKind::dimension: return 7;
    case ErrorKind::internal: return 8;
  }
  return 8;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imface: implicit face model toolkit"};
  app.require_subcommand(1);
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  cli::Commands commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "imface: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  set_log_level(quiet ? LogLevel::warn : verbose >= 1 ? LogLevel::debug : LogLevel::info);
  try {
    return commands.run();
  } catch (const cli::UsageError& e) {
    std::cerr << "imface: " << e.what() << "\n\n" << e.help;
    return 2;
  } catch (const Error& e) {
    std::cerr << "imface: " << e.what() << '\n';  // what() leads with the category
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "imface: internal error: " << e.what() << '\n';
    return exit_code(ErrorKind::internal);
  }
}

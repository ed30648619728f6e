#include "wtal/cli/commands.hpp"

int main(int argc, char** argv) { return wtal::cli::run_cli(argc, argv); }

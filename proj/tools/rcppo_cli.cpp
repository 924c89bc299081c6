#include "rcppo/cli.hpp"

int main(int argc, char** argv) { return rcppo::cli::run_cli(argc, argv); }

#include "damr_cli/cli.hpp"

int main(int argc, char** argv) { return damr::cli::run_cli(argc, argv); }

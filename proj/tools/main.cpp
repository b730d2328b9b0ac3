#include "cli.hpp"

int main(int argc, char** argv) { return specdiff::cli::run_cli(argc, argv); }

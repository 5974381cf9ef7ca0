#include "sands/cli.hpp"

int main(int argc, char** argv) { return sands::run_cli(argc, argv); }

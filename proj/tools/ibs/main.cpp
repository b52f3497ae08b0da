#include "commands.hpp"

int main(int argc, char** argv) { return ibs::cli::run_cli(argc, argv); }

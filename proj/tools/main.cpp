#include "jsls/cli.hpp"

int main(int argc, char** argv) { return jsls::cli::run_cli(argc, argv); }

#include "mhnn/cli.hpp"

int main(int argc, char** argv) { return mhnn::cli::run_cli(argc, argv); }

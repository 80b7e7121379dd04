#include "driftdr/cli.hpp"

int main(int argc, char** argv) { return driftdr::cli::run(argc, argv); }

#include "mcl/cli.hpp"

int main(int argc, char** argv) { return mcl::cli::run(argc, argv); }

#include "mpat/cli.hpp"

int main(int argc, char** argv) { return mpat::cli::run(argc, argv); }

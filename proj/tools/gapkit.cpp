#include "gapkit/cli.hpp"

int main(int argc, char** argv) { return gapkit::cli::run(argc, argv); }

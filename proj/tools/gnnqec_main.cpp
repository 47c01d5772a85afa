#include "gnnqec/cli.hpp"

int main(int argc, char** argv) { return gnnqec::cli::run(argc, argv); }

#include "instro/cli.hpp"

int main(int argc, char** argv) { return instro::cli::run(argc, argv); }

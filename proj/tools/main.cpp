#include "cli.hpp"

int main(int argc, char** argv) { return surfacenet::cli::run(argc, argv); }

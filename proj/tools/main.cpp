#include "cli.hpp"

int main(int argc, char** argv) { return ebip::cli::run(argc, argv); }

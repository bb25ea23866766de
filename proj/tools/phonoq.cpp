#include "phonoq/cli.hpp"

int main(int argc, char** argv) { return phonoq::cli::run(argc, argv); }

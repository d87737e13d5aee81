#include "dogma/cli.hpp"

int main(int argc, char** argv) { return dogma::cli::run(argc, argv); }

#include "latentmark/cli.hpp"

int main(int argc, char** argv) { return latentmark::cli::run(argc, argv); }

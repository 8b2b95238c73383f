#include "cirlab/cli/app.hpp"

int main(int argc, char** argv) { return cirlab::cli::run(argc, argv); }

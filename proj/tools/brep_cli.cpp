#include "brep/cli.hpp"

int main(int argc, char** argv) { return brep::cli::run(argc, argv); }

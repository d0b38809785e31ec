#include "pbem/cli.hpp"

int main(int argc, char** argv) { return pbem::cli::run(argc, argv); }

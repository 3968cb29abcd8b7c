#include "vasiplab/cli/app.hpp"

int main(int argc, char** argv) { return vasiplab::cli::main(argc, argv); }

#include "kwc/cli/app.hpp"

int main(int argc, char** argv) { return kwc::cli::main(argc, argv); }
